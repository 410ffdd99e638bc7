//! Critical sums: partial sums with rigorous brackets, convergence verdicts,
//! Schlömilch condensation along a D-adic index sequence, the
//! Jarník–Besicovich exponent and decay-rate estimation.
//!
//! Power laws are classified exactly from their exponents. Everything else
//! gets a regression verdict from dyadic blocks of the partial sums: with
//! `T_c` the sum over the points of index `[2^c, 2^(c+1))`, a series of terms
//! `t^(-e)` has `log2 T_c ≈ (1 - e) c`, so the fitted slope separates the two
//! regimes. A slope within `±0.05` of zero is reported as inconclusive.

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;

use crate::approxfn::{ApproximatingFunction, Monotone, PsiKind, WeightPair};
use crate::arith::{self, Exponent, Totient};
use crate::dadic::DadicSequence;
use crate::error::{Error, Result};
use crate::power::{Bracket, PowerProduct, Value};
use crate::sets;

/// Partial sums with at most this many rational terms are kept exact.
const EXACT_TERMS: usize = 2048;
/// Totients are computed by trial division up to this argument.
pub const TOTIENT_LIMIT: u64 = 10_000_000;
/// Dense regression checkpoints reach `2^20`; sparse ones `2^10` points.
pub const DENSE_LOG2: u32 = 20;
pub const SPARSE_LOG2: u32 = 10;
const SLOPE_BAND: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Term {
    /// `psi(r)`.
    Psi,
    /// `r^(1-s) psi(r)^(i+js)`.
    FPsi { s: Exponent },
    /// `psi(r)^j` on `A_psi`.
    RestrictedPsiJ,
    /// `phi(r)/r psi(r)^j` on `A_psi`.
    MixedDs,
    /// `r^(1-s) psi(r)^(js)` on `A_psi`, the restricted cover series.
    Cover { s: Exponent },
    /// `n_ck psi(n_ck) / gamma` over levels `k >= 1`.
    Bdv { c: usize, gamma: BigRational },
}

impl Term {
    pub fn name(&self) -> String {
        match self {
            Term::Psi => "psi".into(),
            Term::FPsi { s } => format!("f_psi(s={})", arith::fmt_exp(s)),
            Term::RestrictedPsiJ => "restricted_psi_j".into(),
            Term::MixedDs => "mixed_ds".into(),
            Term::Cover { s } => format!("cover(s={})", arith::fmt_exp(s)),
            Term::Bdv { c, gamma } => format!("bdv(c={c},gamma={})", arith::fmt_rat(gamma)),
        }
    }

    fn restricted(&self) -> bool {
        matches!(self, Term::RestrictedPsiJ | Term::MixedDs | Term::Cover { .. })
    }
}

#[derive(Debug, Clone)]
pub struct SeriesSpec {
    pub term: Term,
    pub psi: ApproximatingFunction,
    pub w: WeightPair,
    pub d: DadicSequence,
}

/// The points a series runs over, in order.
enum Points {
    /// `r = 1, 2, ...`.
    Dense,
    /// An explicit increasing list, e.g. the support of a sparse function.
    Sparse(Vec<BigUint>),
    /// Levels `k = 1, 2, ...`.
    Levels,
}

impl SeriesSpec {
    pub fn new(term: Term, psi: ApproximatingFunction, w: WeightPair, d: DadicSequence) -> Self {
        SeriesSpec { term, psi, w, d }
    }

    pub fn describe(&self) -> String {
        format!("{} with psi={} weights={} D={}", self.term.name(), self.psi.describe(), self.w, self.d)
    }

    /// `term(r)`; `r` is a level for BDV sums.
    pub fn term_at(&self, r: &BigUint, totient: Option<&Totient>) -> Result<Value> {
        let (psi, w) = (&self.psi, &self.w);
        if self.term.restricted() && !psi.in_a(w, &self.d, r) {
            return Ok(Value::Zero);
        }
        Ok(match &self.term {
            Term::Psi => psi.eval(r),
            Term::FPsi { s } => psi.f_psi(w, *s, r)?,
            Term::RestrictedPsiJ => psi.eval(r).pow(w.j()),
            Term::MixedDs => {
                let ratio = phi_ratio(r, &self.d, totient)?;
                psi.eval(r).pow(w.j()).mul_rational(&ratio)
            }
            Term::Cover { s } => {
                if !s.is_positive_exp() {
                    return Err(Error::Precondition("cover sums need s > 0".into()));
                }
                psi.eval(r)
                    .pow(w.j() * *s)
                    .mul(&Value::Pos(PowerProduct::power_of_uint(r, Exponent::one() - *s)))
            }
            Term::Bdv { c, gamma } => {
                let k = r.to_usize().ok_or_else(|| Error::Precondition("level index too large".into()))?;
                let n = self.d.element(c * k)?;
                psi.eval(&n).mul_rational(&(arith::rat_from_uint(&n) / gamma))
            }
        })
    }

    fn points(&self, max_count: usize) -> Result<Points> {
        if matches!(self.term, Term::Bdv { .. }) {
            return Ok(Points::Levels);
        }
        if self.term.restricted() && self.psi.empty_regime(&self.w) {
            return Ok(Points::Sparse(Vec::new()));
        }
        let pts = match self.psi.kind() {
            PsiKind::Psi0 { seq, .. } => (1..=max_count).map(|k| seq.element(k)).collect::<Result<Vec<_>>>()?,
            PsiKind::Tabulated(t) => t.keys().take(max_count).cloned().collect(),
            PsiKind::Block(b) => b.support_in(&BigUint::zero(), &b.n, max_count)?,
            PsiKind::Stitched(st) => {
                let top = st.thresholds.last().expect("nonempty").clone();
                st.support_in(&BigUint::zero(), &top, max_count)?
            }
            PsiKind::PowerLaw { .. } | PsiKind::Psi1 { .. } => return Ok(Points::Dense),
        };
        Ok(Points::Sparse(pts))
    }

    fn totient_for(&self, r_max: u64) -> Option<Totient> {
        (self.term == Term::MixedDs).then(|| Totient::new(r_max.clamp(4, TOTIENT_LIMIT)))
    }
}

trait ExpExt {
    fn is_positive_exp(&self) -> bool;
}

impl ExpExt for Exponent {
    fn is_positive_exp(&self) -> bool {
        *self.numer() > 0
    }
}

/// `phi(r) / r`.
fn phi_ratio(r: &BigUint, d: &DadicSequence, totient: Option<&Totient>) -> Result<BigRational> {
    if let (Some(t), Some(small)) = (totient, r.to_u64()) {
        if small <= TOTIENT_LIMIT {
            return Ok(arith::rat(t.phi(small) as i64, small as i64));
        }
    }
    // Large arguments are accepted when they factor over the sequence primes.
    let primes = d.prime_support().map_err(|_| {
        Error::ResourceLimit(format!("phi({r}) beyond the totient limit {TOTIENT_LIMIT}"))
    })?;
    let mut rest = r.clone();
    let mut ratio = BigRational::one();
    for p in primes {
        if (&rest % p).is_zero() {
            ratio *= arith::rat(p as i64 - 1, p as i64);
            while (&rest % p).is_zero() {
                rest /= p;
            }
        }
    }
    if !rest.is_one() {
        return Err(Error::ResourceLimit(format!("phi({r}) beyond the totient limit {TOTIENT_LIMIT}")));
    }
    Ok(ratio)
}

/// Fixed-point scale for bracketed sums.
fn sum_scale(bits: u32, count: usize) -> u64 {
    bits as u64 + 64 + (usize::BITS - count.leading_zeros()) as u64
}

/// Sum of `term` over `items`, exact when every term is rational and there
/// are few of them, otherwise a fixed-point bracket.
fn sum_values(values: Vec<Value>, bits: u32) -> Bracket {
    let rational: Option<Vec<BigRational>> = values.iter().map(|v| v.as_rational()).collect();
    match rational {
        Some(rs) if rs.len() <= EXACT_TERMS => {
            Bracket::exact(rs.into_iter().fold(BigRational::zero(), |a, b| a + b))
        }
        _ => {
            let scale = sum_scale(bits, values.len());
            let (lo, hi) = values
                .par_iter()
                .map(|v| fixed(v, scale))
                .reduce(|| (BigUint::zero(), BigUint::zero()), |a, b| (a.0 + b.0, a.1 + b.1));
            Bracket::new(arith::dyadic(lo, scale), arith::dyadic(hi, scale))
        }
    }
}

fn fixed(v: &Value, scale: u64) -> (BigUint, BigUint) {
    match v {
        Value::Zero => (BigUint::zero(), BigUint::zero()),
        Value::Pos(p) => p.fixed_bracket(scale),
    }
}

/// `sum_{r <= R} term(r)` (for BDV sums, `sum_{1 <= k <= R}`).
pub fn partial_sum(spec: &SeriesSpec, r_max: &BigUint) -> Result<Bracket> {
    let bits = sets::precision_bits();
    if spec.term.restricted() && spec.psi.empty_regime(&spec.w) {
        return Ok(Bracket::zero());
    }
    let dense = matches!(spec.term, Term::Bdv { .. })
        || matches!(spec.psi.kind(), PsiKind::PowerLaw { .. } | PsiKind::Psi1 { .. });
    let values: Vec<Value> = match dense {
        true => {
            let r = r_max
                .to_u64()
                .filter(|&r| r <= sets::DEFAULT_CAP * 4)
                .ok_or_else(|| Error::CapExceeded {
                    what: "partial sum length",
                    value: r_max.to_string(),
                    cap: (sets::DEFAULT_CAP * 4).to_string(),
                })?;
            let tot = spec.totient_for(r);
            (1..=r)
                .into_par_iter()
                .map(|q| spec.term_at(&BigUint::from(q), tot.as_ref()))
                .collect::<Result<Vec<_>>>()?
        }
        false => {
            let pts = sparse_points_upto(spec, r_max)?;
            let tot = spec.totient_for(pts.last().and_then(|q| q.to_u64()).unwrap_or(4));
            pts.iter().map(|q| spec.term_at(q, tot.as_ref())).collect::<Result<Vec<_>>>()?
        }
    };
    Ok(sum_values(values, bits))
}

fn sparse_points_upto(spec: &SeriesSpec, r_max: &BigUint) -> Result<Vec<BigUint>> {
    match spec.psi.kind() {
        PsiKind::Psi0 { seq, .. } => {
            let mut out = Vec::new();
            let mut k = 1;
            loop {
                let n = seq.element(k)?;
                if n > *r_max {
                    break;
                }
                out.push(n);
                k += 1;
            }
            Ok(out)
        }
        _ => Ok(spec
            .psi
            .sparse_support(&BigUint::zero(), r_max, sets::DEFAULT_CAP as usize)?
            .unwrap_or_default()),
    }
}

/// `sum_{r in A_psi, r <= R} phi(r)/r psi(r)^j`.
pub fn mixed_ds_sum(psi: &ApproximatingFunction, w: &WeightPair, d: &DadicSequence, r_max: u64) -> Result<Bracket> {
    if r_max > TOTIENT_LIMIT {
        return Err(Error::CapExceeded {
            what: "R",
            value: r_max.to_string(),
            cap: TOTIENT_LIMIT.to_string(),
        });
    }
    let spec = SeriesSpec::new(Term::MixedDs, psi.clone(), *w, d.clone());
    partial_sum(&spec, &BigUint::from(r_max))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Converges,
    Diverges,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Converges => "converges",
            Verdict::Diverges => "diverges",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    ClosedFormExponent,
    Condensation,
    Regression,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::ClosedFormExponent => "closed-form-exponent",
            Method::Condensation => "condensation",
            Method::Regression => "regression",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Checkpoint {
    /// Number of points summed (the level count for level-indexed series).
    pub index: u64,
    /// The last point included.
    pub r: BigUint,
    pub sum: Bracket,
}

#[derive(Debug, Clone)]
pub struct ConvergenceVerdict {
    pub verdict: Verdict,
    pub method: Method,
    pub checkpoints: Vec<Checkpoint>,
    /// Slope of `log S` against `log index`.
    pub growth_exponent: Option<f64>,
    /// Slope of `log2 T_c` against `c`.
    pub increment_exponent: Option<f64>,
    /// Largest absolute residual of the increment fit.
    pub residual: Option<f64>,
    pub note: String,
}

/// Convergence of `sum_(q in A) q^(-beta)` for a power law with exponent
/// `i tau`: the count of `q <= X` with D-part `n_k` grows like
/// `n_k^(1/(i tau) - 1)`, which makes the series converge iff `i tau + beta > 1`.
fn restricted_power_converges(i_tau: Exponent, beta: Exponent) -> bool {
    i_tau >= Exponent::one() || i_tau + beta > Exponent::one()
}

/// Exact verdicts for the families with a closed-form exponent.
pub fn closed_form(spec: &SeriesSpec) -> Option<(Verdict, String)> {
    let (i, j) = (spec.w.i(), spec.w.j());
    let one = Exponent::one();
    let conv = |b: bool| if b { Verdict::Converges } else { Verdict::Diverges };
    match spec.psi.kind() {
        PsiKind::PowerLaw { tau } => {
            let tau = *tau;
            let it = i * tau;
            let (v, why) = match &spec.term {
                Term::Psi => (conv(tau > one), format!("sum r^-{} converges iff tau > 1", arith::fmt_exp(&tau))),
                Term::FPsi { s } => {
                    let e = tau * (i + j * *s) + *s - one;
                    (conv(e > one), format!("terms r^-{}", arith::fmt_exp(&e)))
                }
                Term::RestrictedPsiJ | Term::MixedDs => {
                    let b = j * tau;
                    (conv(restricted_power_converges(it, b)), format!("restricted exponent i tau + j tau = {}", arith::fmt_exp(&tau)))
                }
                Term::Cover { s } => {
                    let b = *s - one + j * *s * tau;
                    (conv(restricted_power_converges(it, b)), format!("restricted exponent i tau + beta = {}", arith::fmt_exp(&(it + b))))
                }
                Term::Bdv { .. } => (conv(tau > one), "terms n_ck^(1 - tau) / gamma".into()),
            };
            Some((v, why))
        }
        PsiKind::Psi0 { seq, delta } if *seq == spec.d || matches!(spec.term, Term::Psi) => {
            let e = one + *delta;
            let (v, why) = match &spec.term {
                Term::Psi => (Verdict::Converges, format!("sum_k k^-{}", arith::fmt_exp(&e))),
                Term::RestrictedPsiJ | Term::MixedDs => {
                    // A_psi0 is D without n_0; phi(n_k)/n_k is bounded below.
                    let ej = j * e;
                    (conv(ej > one), format!("sum_k k^-{}", arith::fmt_exp(&ej)))
                }
                Term::FPsi { s } | Term::Cover { s } if *s < one => {
                    (Verdict::Diverges, "n_k^(1 - s) grows geometrically".into())
                }
                Term::FPsi { .. } => (Verdict::Converges, format!("sum_k k^-{}", arith::fmt_exp(&e))),
                Term::Cover { .. } => (conv(j * e > one), format!("sum_k k^-{}", arith::fmt_exp(&(j * e)))),
                Term::Bdv { .. } => (Verdict::Diverges, "n_ck (ck)^-(1+delta) grows".into()),
            };
            Some((v, why))
        }
        PsiKind::Psi1 { seq, .. } => match &spec.term {
            Term::Psi | Term::FPsi { .. } => Some((Verdict::Diverges, "1/2 on a set of positive density".into())),
            t if t.restricted() && *seq == spec.d => Some((Verdict::Converges, "A_psi1 is empty".into())),
            _ => None,
        },
        _ => None,
    }
}

pub fn classify(spec: &SeriesSpec) -> Result<ConvergenceVerdict> {
    match closed_form(spec) {
        Some((verdict, note)) => {
            // Short evidence only; the verdict is already exact.
            let evidence = regression_with(spec, 12, 8)?;
            Ok(ConvergenceVerdict {
                verdict,
                method: Method::ClosedFormExponent,
                note,
                ..evidence
            })
        }
        None => regression(spec),
    }
}

pub fn regression(spec: &SeriesSpec) -> Result<ConvergenceVerdict> {
    regression_with(spec, DENSE_LOG2, SPARSE_LOG2)
}

/// Regression verdict from dyadic blocks of points `[2^c, 2^(c+1))`,
/// `c = 0 .. log2_max - 1`, with checkpoints from `2^4` on.
pub fn regression_with(spec: &SeriesSpec, dense_log2: u32, sparse_log2: u32) -> Result<ConvergenceVerdict> {
    let bits = sets::precision_bits();
    let points = spec.points(1 << sparse_log2)?;
    let top = match &points {
        Points::Dense => dense_log2,
        Points::Levels => sparse_log2,
        Points::Sparse(p) => (usize::BITS - p.len().leading_zeros()).saturating_sub(1).min(sparse_log2),
    };
    let mut blocks: Vec<Bracket> = Vec::new();
    let mut last_points: Vec<BigUint> = Vec::new();
    let dense_tot = spec.totient_for(1u64 << dense_log2);
    for c in 0..top {
        let (a, b) = (1u64 << c, 1u64 << (c + 1));
        let (vals, last) = match &points {
            Points::Dense | Points::Levels => {
                let vals = (a..b)
                    .into_par_iter()
                    .map(|q| spec.term_at(&BigUint::from(q), dense_tot.as_ref()))
                    .collect::<Result<Vec<_>>>()?;
                (vals, BigUint::from(b - 1))
            }
            Points::Sparse(p) => {
                let slice = &p[(a - 1) as usize..((b - 1) as usize).min(p.len())];
                let tot = spec.totient_for(slice.last().and_then(|q| q.to_u64()).unwrap_or(4));
                let vals = slice.iter().map(|q| spec.term_at(q, tot.as_ref())).collect::<Result<Vec<_>>>()?;
                (vals, slice.last().cloned().unwrap_or_default())
            }
        };
        blocks.push(sum_values(vals, bits));
        last_points.push(last);
    }
    let mut checkpoints = Vec::new();
    let mut acc = Bracket::zero();
    for (c, blk) in blocks.iter().enumerate() {
        acc = acc.add(blk);
        let index = (1u64 << (c + 1)) - 1;
        if c + 1 >= 4 {
            checkpoints.push(Checkpoint {
                index,
                r: last_points[c].clone(),
                sum: acc.clone(),
            });
        }
    }
    let increments: Vec<(f64, f64)> = blocks
        .iter()
        .enumerate()
        .filter(|(_, b)| b.hi_f64() > 0.0)
        .map(|(c, b)| (c as f64, b.mid_f64().max(b.lo_f64()).log2()))
        .collect();
    let totals: Vec<(f64, f64)> = checkpoints
        .iter()
        .filter(|c| c.sum.hi_f64() > 0.0)
        .map(|c| ((c.index as f64).ln(), c.sum.mid_f64().ln()))
        .collect();
    let growth = fit(&tail_half(&totals)).map(|f| f.0);
    if blocks.iter().all(|b| b.hi_f64() == 0.0) {
        return Ok(ConvergenceVerdict {
            verdict: Verdict::Converges,
            method: Method::Regression,
            checkpoints,
            growth_exponent: Some(0.0),
            increment_exponent: None,
            residual: None,
            note: "every term vanishes".into(),
        });
    }
    let tail = tail_half(&increments);
    let (verdict, slope, residual, note) = match fit(&tail) {
        Some((slope, _, resid)) => {
            let v = if slope > SLOPE_BAND {
                Verdict::Diverges
            } else if slope < -SLOPE_BAND {
                Verdict::Converges
            } else {
                Verdict::Inconclusive
            };
            (v, Some(slope), Some(resid), format!("fitted over {} dyadic blocks", tail.len()))
        }
        None => (Verdict::Inconclusive, None, None, "too few nonzero blocks".into()),
    };
    Ok(ConvergenceVerdict {
        verdict,
        method: Method::Regression,
        checkpoints,
        growth_exponent: growth,
        increment_exponent: slope,
        residual,
        note,
    })
}

fn tail_half(v: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let skip = v.len() / 2;
    v[skip..].to_vec()
}

/// Least squares `y = a x + b`; returns `(a, b, max |residual|)`.
pub fn fit(pts: &[(f64, f64)]) -> Option<(f64, f64, f64)> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let a = sxy / sxx;
    let b = my - a * mx;
    let resid = pts.iter().map(|p| (p.1 - a * p.0 - b).abs()).fold(0.0, f64::max);
    Some((a, b, resid))
}

/// Condensed sums `sum_{k < K} (m_{k+1} - m_k) a_{m_k}` with the gap-ratio
/// check.
#[derive(Debug, Clone)]
pub struct Condensation {
    pub terms: Vec<Bracket>,
    pub partial_sums: Vec<Bracket>,
    /// `max (m_{k+1} - m_k) / (m_k - m_{k-1})` over `1 <= k < K`.
    pub max_gap_ratio: Option<BigRational>,
    /// The sequence bound `M`, if it has one.
    pub bound: Option<u64>,
    /// Gap ratios never exceed `max(M, 2(M - 1))`.
    pub ratio_ok: bool,
    pub verdict: ConvergenceVerdict,
}

/// `(m_{k+1} - m_k)/(m_k - m_{k-1}) = r_{k-1}(r_k - 1)/(r_{k-1} - 1)` for a
/// D-adic index sequence, which is at most `2(M - 1)` when `M >= 2`.
pub fn gap_ratio_bound(m: u64) -> u64 {
    m.max(2 * (m - 1))
}

pub fn schlomilch(spec: &SeriesSpec, m: &DadicSequence, k_max: usize) -> Result<Condensation> {
    if k_max < 2 {
        return Err(Error::Precondition("condensation needs K >= 2".into()));
    }
    let s = match &spec.term {
        Term::Psi => Exponent::one(),
        Term::FPsi { s } => *s,
        _ => {
            return Err(Error::CondensationInapplicable(
                "restricted and level series are not decreasing in r".into(),
            ))
        }
    };
    match spec.psi.monotone() {
        Monotone::Decreasing => {}
        Monotone::NotMonotone => {
            return Err(Error::CondensationInapplicable(format!(
                "{} is not monotone",
                spec.psi.describe()
            )))
        }
        Monotone::Unknown => {
            let hi = m.element(k_max)?.to_u64().unwrap_or(u64::MAX).min(4096);
            let decreasing = spec.psi.monotone_scan(&spec.w, s, 1, hi.max(2))?
                && (1..=hi).all(|r| !spec.psi.eval_u64(r).is_zero());
            if !decreasing {
                return Err(Error::CondensationInapplicable("terms are not positive and decreasing".into()));
            }
        }
    }
    let bits = sets::precision_bits();
    let elems: Vec<BigUint> = (0..=k_max).map(|k| m.element(k)).collect::<Result<_>>()?;
    let terms: Vec<Bracket> = (0..k_max)
        .into_par_iter()
        .map(|k| {
            let gap = &elems[k + 1] - &elems[k];
            let a = spec.term_at(&elems[k], None)?;
            Ok(a.mul_rational(&arith::rat_from_uint(&gap)).bracket(bits))
        })
        .collect::<Result<_>>()?;
    let mut partial_sums = Vec::with_capacity(k_max);
    let mut acc = Bracket::zero();
    for t in &terms {
        acc = acc.add(t);
        partial_sums.push(acc.clone());
    }
    let mut max_ratio: Option<BigRational> = None;
    for k in 1..k_max {
        let r = BigRational::new(
            (&elems[k + 1] - &elems[k]).into(),
            (&elems[k] - &elems[k - 1]).into(),
        );
        if max_ratio.as_ref().is_none_or(|m| r > *m) {
            max_ratio = Some(r);
        }
    }
    let bound = m.bound().ok();
    let ratio_ok = match (&max_ratio, bound) {
        (Some(r), Some(mb)) => *r <= arith::rat(gap_ratio_bound(mb) as i64, 1),
        _ => false,
    };
    // Condensed terms of a decreasing series either decay geometrically or
    // do not decay at all, so no inconclusive band is needed here.
    let pts: Vec<(f64, f64)> = terms
        .iter()
        .enumerate()
        .filter(|(_, t)| t.hi_f64() > 0.0)
        .map(|(k, t)| (k as f64, t.mid_f64().log2()))
        .collect();
    let tail = tail_half(&pts);
    let fitted = fit(&tail);
    let verdict = match fitted {
        Some((slope, _, _)) if slope < -SLOPE_BAND => Verdict::Converges,
        Some(_) => Verdict::Diverges,
        None => Verdict::Inconclusive,
    };
    let checkpoints = partial_sums
        .iter()
        .enumerate()
        .map(|(k, s)| Checkpoint {
            index: k as u64 + 1,
            r: elems[k].clone(),
            sum: s.clone(),
        })
        .collect();
    Ok(Condensation {
        terms,
        partial_sums,
        max_gap_ratio: max_ratio,
        bound,
        ratio_ok,
        verdict: ConvergenceVerdict {
            verdict,
            method: Method::Condensation,
            checkpoints,
            growth_exponent: None,
            increment_exponent: fitted.map(|f| f.0),
            residual: fitted.map(|f| f.2),
            note: format!("log2 of condensed terms over the last {} levels", tail.len()),
        },
    })
}

/// `min{1, (2 - i tau)/(1 + j tau)}`, defined for `tau < 1/i`.
pub fn jb_dimension(w: &WeightPair, tau: Exponent) -> Result<Exponent> {
    let bound = w.i().recip();
    if tau >= bound {
        return Err(Error::EmptySetRegime {
            tau: arith::fmt_exp(&tau),
            bound: arith::fmt_exp(&bound),
        });
    }
    let v = (Exponent::from_integer(2) - w.i() * tau) / (Exponent::one() + w.j() * tau);
    Ok(v.min(Exponent::one()))
}

/// A bracket `[lo, hi]` on `s`, produced by bisection.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExponentBracket {
    pub lo: Exponent,
    pub hi: Exponent,
    pub steps: u32,
}

impl ExponentBracket {
    pub fn contains(&self, x: Exponent) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn width(&self) -> Exponent {
        self.hi - self.lo
    }
}

/// The transition in `s` of the restricted cover series, to width `1/64`.
pub fn critical_exponent(psi: &ApproximatingFunction, w: &WeightPair, d: &DadicSequence) -> Result<ExponentBracket> {
    critical_exponent_to(psi, w, d, Exponent::new(1, 64))
}

pub fn critical_exponent_to(psi: &ApproximatingFunction, w: &WeightPair, d: &DadicSequence, resolution: Exponent) -> Result<ExponentBracket> {
    let tau = psi
        .power_tau()
        .ok_or_else(|| Error::Precondition("critical exponents need a power law".into()))?;
    d.bound()?;
    let bound = w.i().recip();
    if tau >= bound {
        return Err(Error::EmptySetRegime {
            tau: arith::fmt_exp(&tau),
            bound: arith::fmt_exp(&bound),
        });
    }
    let verdict_at = |s: Exponent| -> Result<Verdict> {
        let spec = SeriesSpec::new(Term::Cover { s }, psi.clone(), *w, d.clone());
        closed_form(&spec)
            .map(|(v, _)| v)
            .ok_or_else(|| Error::Invariant("power laws always have a closed form".into()))
    };
    let (mut lo, mut hi) = (Exponent::zero(), Exponent::from_integer(2));
    if verdict_at(lo)? != Verdict::Diverges || verdict_at(hi)? != Verdict::Converges {
        return Err(Error::Invariant("cover series does not change regime on [0, 2]".into()));
    }
    let mut steps = 0;
    while hi - lo > resolution {
        let mid = (lo + hi) / 2;
        match verdict_at(mid)? {
            Verdict::Converges => hi = mid,
            _ => lo = mid,
        }
        steps += 1;
    }
    Ok(ExponentBracket { lo, hi, steps })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TauEstimate {
    /// Exact decay exponent when it is known in closed form.
    pub exact: Option<Exponent>,
    pub estimate: f64,
    pub lo: f64,
    pub hi: f64,
    /// Whether the tail oscillation stays below `0.01`.
    pub limit_detected: bool,
    /// Set when the estimate is not positive, i.e. psi does not decay.
    pub decay_violation: bool,
    pub points: usize,
}

/// Regression of `-log psi(r) / log r` against `1/log r` on the support in
/// `[lo, hi]`; the intercept estimates `tau`.
pub fn tau_estimate(psi: &ApproximatingFunction, lo: &BigUint, hi: &BigUint) -> Result<TauEstimate> {
    if let Some(tau) = psi.power_tau() {
        let t = *tau.numer() as f64 / *tau.denom() as f64;
        return Ok(TauEstimate {
            exact: Some(tau),
            estimate: t,
            lo: t,
            hi: t,
            limit_detected: true,
            decay_violation: tau <= Exponent::zero(),
            points: 0,
        });
    }
    let lo = lo.max(&BigUint::from(2u32)).clone();
    let pts: Vec<BigUint> = match psi.sparse_support(&(&lo - 1u32), hi, sets::DEFAULT_CAP as usize)? {
        Some(p) => p,
        None => geometric_grid(&lo, hi, 4096),
    };
    let data: Vec<(f64, f64)> = pts
        .iter()
        .filter_map(|r| {
            let v = psi.eval(r);
            let p = v.positive()?;
            let lr = arith::ln_uint(r);
            Some((1.0 / lr, -p.ln() / lr))
        })
        .collect();
    if data.is_empty() {
        return Err(Error::Undefined("psi vanishes on the whole range".into()));
    }
    let (intercept, resid) = match fit(&data) {
        Some((a, b, _)) => {
            let tail = tail_half(&data);
            let osc = tail.iter().map(|p| (p.1 - a * p.0 - b).abs()).fold(0.0, f64::max);
            (b, osc)
        }
        None => (data[0].1, 0.0),
    };
    Ok(TauEstimate {
        exact: None,
        estimate: intercept,
        lo: intercept - resid,
        hi: intercept + resid,
        limit_detected: resid < 0.01,
        decay_violation: intercept <= 0.01,
        points: data.len(),
    })
}

fn geometric_grid(lo: &BigUint, hi: &BigUint, n: usize) -> Vec<BigUint> {
    let (a, b) = (arith::ln_uint(lo), arith::ln_uint(hi));
    let mut out: Vec<BigUint> = (0..n)
        .filter_map(|t| {
            let x = (a + (b - a) * t as f64 / (n - 1).max(1) as f64).exp();
            num_traits::FromPrimitive::from_f64(x.round())
        })
        .filter(|r: &BigUint| r >= lo && r <= hi)
        .collect();
    out.dedup();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::approxfn::{build_psi0, build_psi1};
    use crate::arith::{big, exp, rat};

    fn pow2() -> DadicSequence {
        DadicSequence::powers(2).unwrap()
    }

    fn power(n: i64, d: i64) -> ApproximatingFunction {
        ApproximatingFunction::power_law(exp(n, d)).unwrap()
    }

    fn spec(term: Term, psi: ApproximatingFunction) -> SeriesSpec {
        SeriesSpec::new(term, psi, WeightPair::half(), pow2())
    }

    #[test]
    fn partial_sum_examples() {
        let s = partial_sum(&spec(Term::Psi, power(2, 1)), &big(3)).unwrap();
        assert_eq!(s.value(), Some(&rat(49, 36)));
        // q = 2 and q = 4 are the members up to 4.
        let r = partial_sum(&spec(Term::RestrictedPsiJ, power(1, 1)), &big(4)).unwrap();
        let expect = 0.5 + 0.5f64.sqrt();
        assert!(r.lo_f64() <= expect + 1e-15 && expect - 1e-15 <= r.hi_f64());
        assert!(arith::rat_to_f64(&r.width()) < 1e-25);
        let psi1 = build_psi1(&pow2()).unwrap();
        for n in [1u64, 10, 1000] {
            let z = partial_sum(&spec(Term::RestrictedPsiJ, psi1.clone()), &big(n)).unwrap();
            assert_eq!(z.value(), Some(&rat(0, 1)));
        }
    }

    #[test]
    fn mixed_ds_examples() {
        let w = WeightPair::half();
        let psi1 = build_psi1(&pow2()).unwrap();
        assert_eq!(mixed_ds_sum(&psi1, &w, &pow2(), 5000).unwrap().value(), Some(&rat(0, 1)));
        // phi(2)/2 * 2^(-1/2) + phi(4)/4 * 1/2.
        let m = mixed_ds_sum(&power(1, 1), &w, &pow2(), 4).unwrap();
        let expect = 0.5 * 0.5f64.sqrt() + 0.25;
        assert!(m.lo_f64() <= expect + 1e-15 && expect - 1e-15 <= m.hi_f64());
        assert_eq!(Totient::new(20).phi(12), 4);
    }

    #[test]
    fn closed_form_examples() {
        assert_eq!(classify(&spec(Term::Psi, power(3, 2))).unwrap().verdict, Verdict::Converges);
        assert_eq!(classify(&spec(Term::Psi, power(1, 1))).unwrap().verdict, Verdict::Diverges);
        let psi0 = build_psi0(&pow2(), &WeightPair::half());
        assert_eq!(classify(&spec(Term::Psi, psi0.clone())).unwrap().verdict, Verdict::Converges);
        let r = classify(&spec(Term::RestrictedPsiJ, psi0)).unwrap();
        assert_eq!(r.verdict, Verdict::Diverges);
        assert_eq!(r.method, Method::ClosedFormExponent);
    }

    #[test]
    fn regression_agrees_with_closed_form_when_decisive() {
        for (n, d) in [(1, 2), (3, 2), (2, 1), (3, 1)] {
            let s = spec(Term::Psi, power(n, d));
            let exact = closed_form(&s).unwrap().0;
            let reg = regression_with(&s, 16, 8).unwrap();
            assert_eq!(reg.verdict, exact, "tau = {n}/{d}");
        }
        let h = regression_with(&spec(Term::Psi, power(1, 1)), 16, 8).unwrap();
        assert_eq!(h.verdict, Verdict::Inconclusive);
    }

    #[test]
    fn psi0_regression_over_levels() {
        let psi0 = build_psi0(&pow2(), &WeightPair::half());
        let r = regression(&spec(Term::RestrictedPsiJ, psi0.clone())).unwrap();
        assert_eq!(r.verdict, Verdict::Diverges);
        assert!(r.increment_exponent.unwrap() > 0.2);
        let c = regression(&spec(Term::Psi, psi0)).unwrap();
        assert_eq!(c.verdict, Verdict::Converges);
    }

    #[test]
    fn condensation_examples() {
        let h = schlomilch(&spec(Term::Psi, power(1, 1)), &pow2(), 10).unwrap();
        assert!(h.terms.iter().all(|t| t.value() == Some(&rat(1, 1))));
        assert_eq!(h.partial_sums.last().unwrap().value(), Some(&rat(10, 1)));
        let sq = schlomilch(&spec(Term::Psi, power(2, 1)), &pow2(), 10).unwrap();
        assert!(sq.partial_sums.last().unwrap().hi < rat(2, 1));
        let c23 = DadicSequence::cycle(&[2, 3]).unwrap();
        let c = schlomilch(&spec(Term::Psi, power(3, 2)), &c23, 40).unwrap();
        // r_{k-1} (r_k - 1)/(r_{k-1} - 1) peaks at 2 * 2 / 1.
        assert_eq!(c.max_gap_ratio, Some(rat(4, 1)));
        assert!(c.ratio_ok);
        let psi0 = build_psi0(&pow2(), &WeightPair::half());
        assert!(matches!(
            schlomilch(&spec(Term::Psi, psi0), &pow2(), 10),
            Err(Error::CondensationInapplicable(_))
        ));
    }

    #[test]
    fn dimensions() {
        let half = WeightPair::half();
        let third = WeightPair::parse("1/3,2/3").unwrap();
        assert_eq!(jb_dimension(&half, exp(3, 2)).unwrap(), exp(5, 7));
        assert_eq!(jb_dimension(&third, exp(3, 2)).unwrap(), exp(3, 4));
        assert_eq!(jb_dimension(&half, exp(1, 1)).unwrap(), exp(1, 1));
        assert!(matches!(jb_dimension(&half, exp(2, 1)), Err(Error::EmptySetRegime { .. })));
    }

    #[test]
    fn critical_exponents() {
        let d = pow2();
        for (i, tau) in [(exp(1, 2), exp(3, 2)), (exp(1, 3), exp(3, 2)), (exp(1, 2), exp(1, 1))] {
            let w = WeightPair::from_i(i).unwrap();
            let b = critical_exponent(&power(*tau.numer(), *tau.denom()), &w, &d).unwrap();
            let star = (exp(2, 1) - i * tau) / (exp(1, 1) + w.j() * tau);
            assert!(b.contains(star) && b.width() <= exp(1, 64));
        }
    }

    #[test]
    fn tau_estimates() {
        let t = tau_estimate(&power(3, 2), &big(2), &big(1000)).unwrap();
        assert_eq!(t.exact, Some(exp(3, 2)));
        let table: String = (1..=2000u64).filter(|r| r % 2 == 0).map(|r| format!("{r},1/{}\n", r * r)).collect();
        let even = ApproximatingFunction::parse_table(&table).unwrap();
        let e = tau_estimate(&even, &big(2), &big(2000)).unwrap();
        assert!((e.estimate - 2.0).abs() < 1e-9 && e.limit_detected);
        let psi1 = build_psi1(&pow2()).unwrap();
        let z = tau_estimate(&psi1, &big(2), &big(1 << 20)).unwrap();
        assert!(z.estimate.abs() < 1e-6 && z.decay_violation);
        let empty = ApproximatingFunction::parse_table("").unwrap();
        assert!(matches!(tau_estimate(&empty, &big(2), &big(10)), Err(Error::Undefined(_))));
    }

    #[test]
    fn bdv_terms() {
        let gamma = rat(16, 1);
        let s = spec(Term::Bdv { c: 2, gamma: gamma.clone() }, power(1, 1));
        let p = partial_sum(&s, &big(5)).unwrap();
        assert_eq!(p.value(), Some(&rat(5, 16)));
        assert_eq!(partial_sum(&s, &big(0)).unwrap().value(), Some(&rat(0, 1)));
        assert_eq!(classify(&s).unwrap().verdict, Verdict::Diverges);
    }
}
