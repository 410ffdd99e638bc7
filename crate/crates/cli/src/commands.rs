//! Subcommand pipelines. Each returns the rendered report.

use std::fs;

use clap::Args;
use mixdio::approxfn::{parse_psi, ApproximatingFunction, WeightPair};
use mixdio::arith::{decimal_digits, fmt_exp, fmt_rat, parse_exponent, parse_rational, Exponent};
use mixdio::counterexample::{stitch, CounterexampleBlock, Fraction};
use mixdio::dadic::DadicSequence;
use mixdio::dirichlet::{dirichlet_search, m_index};
use mixdio::sets::{self, precision_bits};
use mixdio::sums::{self, SeriesSpec, Term};
use mixdio::ubiquity;
use mixdio::Error;
use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use serde_json::{json, Value as Json};

use crate::report::{self, bracket, float, rat};
use crate::{Cli, Command, Common};

pub enum Failure {
    /// Bad flags or unparsable input: exit 2.
    Usage(String),
    /// The computation itself failed: exit 1.
    Compute(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Compute(e)
    }
}

type Outcome = Result<String, Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    /// One of psi, f_psi, restricted, mixed, cover, bdv.
    #[arg(long, default_value = "psi")]
    pub term: String,
    /// Exponent `s` for f_psi and cover.
    #[arg(long, default_value = "1")]
    pub s: String,
    /// Level step `c` for bdv.
    #[arg(long, default_value_t = 2)]
    pub c: usize,
    /// `gamma` for bdv; defaults to `M^(2c)`.
    #[arg(long)]
    pub gamma: Option<String>,
    /// Also run the condensation test with `K` condensed terms.
    #[arg(long)]
    pub condense: Option<usize>,
}

#[derive(Debug, Args)]
pub struct MeasureArgs {
    /// Keep only reduced fractions `p/q`.
    #[arg(long)]
    pub coprime: bool,
}

#[derive(Debug, Args)]
pub struct EnumerateArgs {
    /// Maximum number of members to list.
    #[arg(long, default_value_t = 100_000)]
    pub limit: usize,
}

#[derive(Debug, Args)]
pub struct DirichletArgs {
    /// The rational point `x` in `[0, 1)`.
    #[arg(long)]
    pub x: String,
    #[arg(long, default_value_t = 1)]
    pub c: usize,
    #[arg(long)]
    pub k: usize,
    /// Override the index `m_k` instead of deriving it from `psi`.
    #[arg(long)]
    pub m: Option<usize>,
}

#[derive(Debug, Args)]
pub struct UbiquityArgs {
    #[arg(long, default_value_t = 2)]
    pub c: usize,
    #[arg(long)]
    pub k: usize,
    /// Interval `a:b`.
    #[arg(long, default_value = "0:1")]
    pub interval: String,
    /// `gamma`; defaults to `M^(2c)`.
    #[arg(long)]
    pub gamma: Option<String>,
}

#[derive(Debug, Args)]
pub struct CounterexampleArgs {
    /// Stitch `T` blocks instead of building a single one.
    #[arg(long)]
    pub blocks: Option<usize>,
    /// `eps` of a single block.
    #[arg(long, default_value = "9/10")]
    pub eps: String,
    /// Threshold `R` of a single block.
    #[arg(long, default_value = "1")]
    pub r: String,
}

/// Validated inputs shared by every subcommand.
struct Context {
    d: DadicSequence,
    w: WeightPair,
    psi: ApproximatingFunction,
    bits: u32,
    config: serde_json::Map<String, Json>,
}

fn parse_sequence(c: &Common) -> Result<DadicSequence, Failure> {
    let list = |s: &str| -> Result<Vec<u64>, Failure> {
        s.split(',')
            .map(|t| t.trim().parse().map_err(|_| usage(format!("bad integer `{t}` in `{s}`"))))
            .collect()
    };
    let d = match (&c.ratios, &c.prefix, c.growing) {
        (_, Some(p), _) => {
            let els = p
                .split(',')
                .map(|t| t.trim().parse::<BigUint>().map_err(|_| usage(format!("bad integer `{t}` in `{p}`"))))
                .collect::<Result<Vec<_>, _>>()?;
            DadicSequence::from_prefix(els)
        }
        (_, _, Some(first)) => DadicSequence::growing(first),
        (Some(r), _, _) => DadicSequence::cycle(&list(r)?),
        (None, None, None) => DadicSequence::powers(2),
    }
    .map_err(|e| usage(e.to_string()))?;
    match c.bound {
        Some(m) => d.with_declared_bound(m).map_err(|e| usage(e.to_string())),
        None => Ok(d),
    }
}

fn parse_function(c: &Common, d: &DadicSequence, w: &WeightPair) -> Result<ApproximatingFunction, Failure> {
    let spec = match (&c.psi, &c.tau) {
        (Some(_), Some(_)) => return Err(usage("give either --psi or --tau")),
        (Some(p), None) => p.clone(),
        (None, Some(t)) => format!("power:{t}"),
        (None, None) => "power:1".to_string(),
    };
    if let Some(path) = spec.strip_prefix("table:") {
        let text = fs::read_to_string(path).map_err(|e| usage(format!("cannot read table {path}: {e}")))?;
        return ApproximatingFunction::parse_table(&text).map_err(|e| usage(e.to_string()));
    }
    parse_psi(&spec, d, w).map_err(|e| usage(e.to_string()))
}

fn parse_range(c: &Common) -> Result<(u64, u64), Failure> {
    let r = c.range.as_deref().ok_or_else(|| usage("--range Q1:Q2 is required"))?;
    let (a, b) = r.split_once(':').ok_or_else(|| usage(format!("range `{r}` is not Q1:Q2")))?;
    let a: u64 = a.trim().parse().map_err(|_| usage(format!("bad range start `{a}`")))?;
    let b: u64 = b.trim().parse().map_err(|_| usage(format!("bad range end `{b}`")))?;
    if a >= b {
        return Err(usage(format!("range `{r}` is empty")));
    }
    Ok((a, b))
}

fn parse_rat_arg(name: &str, s: &str) -> Result<BigRational, Failure> {
    parse_rational(s).ok_or_else(|| usage(format!("--{name}: `{s}` is not a rational")))
}

fn parse_exp_arg(name: &str, s: &str) -> Result<Exponent, Failure> {
    parse_exponent(s).ok_or_else(|| usage(format!("--{name}: `{s}` is not a small rational")))
}

impl Context {
    fn new(c: &Common) -> Result<Self, Failure> {
        let d = parse_sequence(c)?;
        let w = WeightPair::parse(&c.weights).map_err(|e| usage(e.to_string()))?;
        let psi = parse_function(c, &d, &w)?;
        let bits = precision_bits();
        let mut config = serde_json::Map::new();
        config.insert("sequence".into(), json!(d.literal()));
        config.insert("psi".into(), json!(psi.describe()));
        config.insert("weights".into(), json!([fmt_exp(&w.i()), fmt_exp(&w.j())]));
        config.insert("precision_bits".into(), json!(bits));
        config.insert("format".into(), json!(if c.csv { "csv" } else { "json" }));
        Ok(Context { d, w, psi, bits, config })
    }

    fn set(&mut self, key: &str, v: Json) {
        self.config.insert(key.into(), v);
    }

    fn finish(self, command: &str, result: Json) -> String {
        report::document(command, Json::Object(self.config), result)
    }
}

pub fn run(cli: &Cli) -> Outcome {
    let ctx = Context::new(&cli.common)?;
    let csv = cli.common.csv;
    match &cli.command {
        Command::Classify(a) => classify(ctx, a, csv),
        Command::Dimension => dimension(ctx, csv),
        Command::Measure(a) => {
            let range = parse_range(&cli.common)?;
            measure(ctx, a, range, csv)
        }
        Command::Enumerate(a) => {
            let range = parse_range(&cli.common)?;
            enumerate(ctx, a, range, csv)
        }
        Command::Dirichlet(a) => dirichlet(ctx, a),
        Command::Ubiquity(a) => ubiquity_cmd(ctx, a),
        Command::Counterexample(a) => counterexample(ctx, a),
    }
}

fn classify(mut ctx: Context, a: &ClassifyArgs, csv: bool) -> Outcome {
    let s = parse_exp_arg("s", &a.s)?;
    let term = match a.term.as_str() {
        "psi" => Term::Psi,
        "f_psi" => Term::FPsi { s },
        "restricted" => Term::RestrictedPsiJ,
        "mixed" => Term::MixedDs,
        "cover" => Term::Cover { s },
        "bdv" => {
            let gamma = match &a.gamma {
                Some(g) => parse_rat_arg("gamma", g)?,
                None => ubiquity::gamma_for(&ctx.d, a.c)?,
            };
            Term::Bdv { c: a.c, gamma }
        }
        other => return Err(usage(format!("unknown term `{other}`"))),
    };
    ctx.set("term", json!(term.name()));
    let spec = SeriesSpec::new(term, ctx.psi.clone(), ctx.w, ctx.d.clone());
    let v = sums::classify(&spec)?;
    if csv {
        let rows = v
            .checkpoints
            .iter()
            .map(|c| vec![c.index.to_string(), c.r.to_string(), fmt_rat(&c.sum.lo), fmt_rat(&c.sum.hi)]);
        return Ok(report::csv(&["index", "r", "sum_lo", "sum_hi"], rows));
    }
    let checkpoints: Vec<Json> = v
        .checkpoints
        .iter()
        .map(|c| json!({ "index": c.index, "r": c.r.to_string(), "sum": bracket(&c.sum) }))
        .collect();
    let mut result = json!({
        "series": spec.describe(),
        "verdict": v.verdict.as_str(),
        "method": v.method.as_str(),
        "note": v.note,
        "growth_exponent": float(v.growth_exponent),
        "increment_exponent": float(v.increment_exponent),
        "residual": float(v.residual),
        "checkpoints": checkpoints,
    });
    if let Some(k) = a.condense {
        ctx.set("condense", json!(k));
        let cd = sums::schlomilch(&spec, &ctx.d, k)?;
        result["condensation"] = json!({
            "terms": cd.terms.len(),
            "last_partial_sum": cd.partial_sums.last().map(bracket),
            "max_gap_ratio": cd.max_gap_ratio.as_ref().map(rat),
            "bound": cd.bound,
            "ratio_ok": cd.ratio_ok,
            "verdict": cd.verdict.verdict.as_str(),
            "agrees": cd.verdict.verdict == v.verdict,
        });
    }
    Ok(ctx.finish("classify", result))
}

fn dimension(ctx: Context, csv: bool) -> Outcome {
    let jb = match ctx.psi.power_tau() {
        Some(tau) => Some(sums::jb_dimension(&ctx.w, tau)?),
        None => None,
    };
    let b = sums::critical_exponent(&ctx.psi, &ctx.w, &ctx.d)?;
    if csv {
        let row = vec![jb.as_ref().map(fmt_exp).unwrap_or_default(), fmt_exp(&b.lo), fmt_exp(&b.hi), b.steps.to_string()];
        return Ok(report::csv(&["jb_dimension", "s_star_lo", "s_star_hi", "steps"], [row]));
    }
    let result = json!({
        "jb_dimension": jb.as_ref().map(fmt_exp),
        "s_star": {
            "lo": fmt_exp(&b.lo),
            "hi": fmt_exp(&b.hi),
            "width": fmt_exp(&b.width()),
            "steps": b.steps,
        },
        "contains_jb_dimension": jb.map(|x| b.contains(x)),
    });
    Ok(ctx.finish("dimension", result))
}

fn measure(mut ctx: Context, a: &MeasureArgs, (q1, q2): (u64, u64), csv: bool) -> Outcome {
    ctx.set("range", json!(format!("{q1}:{q2}")));
    ctx.set("coprime", json!(a.coprime));
    let layer = if a.coprime {
        sets::coprime_layer(&ctx.psi, &ctx.w, &ctx.d, q1, q2)?
    } else {
        sets::layer(&ctx.psi, &ctx.w, &ctx.d, q1, q2)?
    };
    if csv {
        return Ok(match &layer.union {
            Some(u) => u.to_csv(),
            None => report::csv(&["lo", "hi"], [vec![fmt_rat(&layer.measure.lo), fmt_rat(&layer.measure.hi)]]),
        });
    }
    let measure = match layer.measure.value() {
        Some(v) => rat(v),
        None => bracket(&layer.measure),
    };
    let result = json!({
        "members": layer.members.len(),
        "member_list": layer.members,
        "measure": measure,
        "measure_bracket": bracket(&layer.measure),
        "exact": layer.exact,
        "intervals": layer.intervals,
    });
    Ok(ctx.finish("measure", result))
}

fn enumerate(mut ctx: Context, a: &EnumerateArgs, (q1, q2): (u64, u64), csv: bool) -> Outcome {
    ctx.set("range", json!(format!("{q1}:{q2}")));
    ctx.set("limit", json!(a.limit));
    let members = ctx
        .psi
        .members(&ctx.w, &ctx.d, &BigUint::from(q1), &BigUint::from(q2), sets::DEFAULT_CAP as usize)?;
    let shown = &members[..members.len().min(a.limit)];
    if csv {
        let rows = shown.iter().map(|q| {
            let b = ctx.psi.eval(q).bracket(ctx.bits);
            vec![q.to_string(), ctx.d.pav_index(q).to_string(), fmt_rat(&b.lo), fmt_rat(&b.hi)]
        });
        return Ok(report::csv(&["q", "pav_index", "psi_lo", "psi_hi"], rows));
    }
    let list: Vec<Json> = shown
        .iter()
        .map(|q| {
            json!({
                "q": q.to_string(),
                "pav_index": ctx.d.pav_index(q),
                "psi": report::value(&ctx.psi.eval(q), ctx.bits),
            })
        })
        .collect();
    let result = json!({
        "count": members.len(),
        "truncated": members.len() > shown.len(),
        "members": list,
    });
    Ok(ctx.finish("enumerate", result))
}

fn dirichlet(mut ctx: Context, a: &DirichletArgs) -> Outcome {
    let x = parse_rat_arg("x", &a.x)?;
    ctx.set("x", rat(&x));
    ctx.set("c", json!(a.c));
    ctx.set("k", json!(a.k));
    let m = match a.m {
        Some(m) => m,
        None => m_index(&ctx.psi, &ctx.w, &ctx.d, a.c, a.k)?.m,
    };
    let sol = dirichlet_search(&x, &ctx.d, a.c, a.k, m)?;
    let result = json!({
        "x": rat(&x),
        "c": a.c,
        "k": a.k,
        "m_k": m,
        "p": sol.p.to_string(),
        "q": sol.q.to_string(),
        "err_num": sol.error.numer().to_string(),
        "err_den": sol.error.denom().to_string(),
        "error": rat(&sol.error),
        "bound": rat(&sol.bound),
    });
    Ok(ctx.finish("dirichlet", result))
}

fn parse_interval(s: &str) -> Result<(BigRational, BigRational), Failure> {
    let (a, b) = s.split_once(':').ok_or_else(|| usage(format!("interval `{s}` is not a:b")))?;
    Ok((parse_rat_arg("interval", a)?, parse_rat_arg("interval", b)?))
}

fn ubiquity_cmd(mut ctx: Context, a: &UbiquityArgs) -> Outcome {
    let interval = parse_interval(&a.interval)?;
    let gamma = match &a.gamma {
        Some(g) => parse_rat_arg("gamma", g)?,
        None => ubiquity::gamma_for(&ctx.d, a.c)?,
    };
    ctx.set("c", json!(a.c));
    ctx.set("k", json!(a.k));
    ctx.set("interval", json!([fmt_rat(&interval.0), fmt_rat(&interval.1)]));
    ctx.set("gamma", rat(&gamma));
    let r = ubiquity::verify_local_ubiquity_with(&ctx.psi, &ctx.w, &ctx.d, a.c, &gamma, interval, a.k)?;
    let result = json!({
        "c": r.c,
        "k": r.k,
        "gamma": rat(&r.gamma),
        "interval": [fmt_rat(&r.interval.0), fmt_rat(&r.interval.1)],
        "fraction": bracket(&r.fraction),
        "kappa": rat(&r.kappa),
        "pass": r.pass,
        "gate_met": r.gate_met,
        "advisory": r.advisory,
        "members": r.members,
        "kminus": r.kminus,
        "kplus": r.kplus,
    });
    Ok(ctx.finish("ubiquity", result))
}

/// Reduced form only while it stays small; the bracket is always given.
fn fraction_json(f: &Fraction) -> Json {
    let (lo, hi) = f.dyadic_bracket(64);
    let exact = f.is_reduced_form().then(|| fmt_rat(&f.to_rational()));
    json!({ "exact": exact, "bracket": { "lo": fmt_rat(&lo), "hi": fmt_rat(&hi) } })
}

fn block_json(b: &CounterexampleBlock) -> Result<Json, Failure> {
    let sum = b.checked_block_sum()?;
    let bad = b.bad_measure()?;
    let sum_json = fraction_json(&sum);
    Ok(json!({
        "s": b.s(),
        "largest_prime": b.largest_prime(),
        "eps": rat(&b.eps),
        "alpha": rat(&b.alpha),
        "R": (decimal_digits(&b.r) <= 64).then(|| b.r.to_string()),
        "R_digits": decimal_digits(&b.r),
        "K": b.k,
        "n_K_digits": decimal_digits(&b.n_k),
        "N_digits": decimal_digits(&b.n),
        "block_sum": sum_json["exact"],
        "block_sum_bracket": sum_json["bracket"],
        "block_sum_exceeds_one": sum.exceeds(1),
        "bad_measure": rat(&bad),
        "bad_measure_below_eps": bad < b.eps,
    }))
}

fn counterexample(mut ctx: Context, a: &CounterexampleArgs) -> Outcome {
    if let Some(t) = a.blocks {
        ctx.set("blocks", json!(t));
        let st = stitch(&ctx.d, &ctx.w, t)?;
        let blocks = st.blocks.iter().map(|b| block_json(b)).collect::<Result<Vec<_>, _>>()?;
        let total = st.cumulative_sum()?;
        let tails = (1..=t)
            .map(|i| {
                let bound = st.tail_bound(i)?;
                let target = BigRational::new(2.into(), BigInt::from(1u32) << i);
                Ok(json!({ "t": i, "bound": rat(&bound), "at_most_2^(1-t)": bound <= target }))
            })
            .collect::<Result<Vec<_>, Error>>()?;
        let result = json!({
            "blocks": blocks,
            "threshold_digits": st.thresholds.iter().map(decimal_digits).collect::<Vec<_>>(),
            "cumulative_sum": fraction_json(&total),
            "cumulative_sum_exceeds_T": total.exceeds(t as u64),
            "tail_bounds": tails,
        });
        return Ok(ctx.finish("counterexample", result));
    }
    let eps = parse_rat_arg("eps", &a.eps)?;
    let r: BigUint = a.r.trim().parse().map_err(|_| usage(format!("--r: `{}` is not a positive integer", a.r)))?;
    ctx.set("eps", rat(&eps));
    ctx.set("r", json!(r.to_string()));
    let b = CounterexampleBlock::build(&ctx.d, &ctx.w, &r, &eps)?;
    let result = json!({ "blocks": [block_json(&b)?] });
    Ok(ctx.finish("counterexample", result))
}
