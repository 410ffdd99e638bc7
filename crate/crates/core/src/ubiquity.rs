//! Executable pieces of the ubiquity argument: the ubiquity function
//! `rho(q) = gamma / (q^2 psi^i(q))`, the BDV divergence sum along
//! `u_k = n_ck`, u-regularity, the counts `K^-(r)`, `K^+(r)` and a measured
//! check of the local ubiquity inequality with `kappa = 1/4`.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::approxfn::{ApproximatingFunction, WeightPair};
use crate::arith::{self, Exponent};
use crate::dadic::DadicSequence;
use crate::dirichlet::{m_index, MIndex};
use crate::error::{Error, Result};
use crate::power::{Bracket, PowerProduct, Value};
use crate::sets::{self, Ball};
use crate::sums::{self, ConvergenceVerdict, SeriesSpec, Term, Verdict};

/// Enumeration cap for the `K^±` counts.
pub const KCOUNT_CAP: u64 = 1 << 22;

pub fn kappa() -> BigRational {
    arith::rat(1, 4)
}

/// `gamma = M^(2c)`.
pub fn gamma_for(d: &DadicSequence, c: usize) -> Result<BigRational> {
    let m = d.bound()?;
    Ok(BigRational::from_integer(BigInt::from(m).pow(2 * c as u32)))
}

/// `gamma / (q^2 psi^i(q))`.
pub fn rho(psi: &ApproximatingFunction, w: &WeightPair, gamma: &BigRational, q: &BigUint) -> Result<Value> {
    let v = psi.eval(q);
    let p = v.positive().ok_or_else(|| Error::Undefined(format!("psi({q}) = 0")))?;
    let q2 = arith::rat_from_uint(&(q * q));
    Ok(Value::Pos(p.pow(w.i()).mul_rational(&q2).recip().mul_rational(gamma)))
}

/// The `r` in `[lo, hi]` with `psi^i(r) <= 1/r`; none of them lie in `A_psi`.
pub fn assumption_filter(psi: &ApproximatingFunction, w: &WeightPair, d: &DadicSequence, lo: u64, hi: u64) -> Result<Vec<u64>> {
    if hi.saturating_sub(lo) > sets::DEFAULT_CAP {
        return Err(Error::CapExceeded {
            what: "assumption range",
            value: (hi - lo).to_string(),
            cap: sets::DEFAULT_CAP.to_string(),
        });
    }
    let mut out = Vec::new();
    for r in lo.max(1)..=hi {
        let v = psi.eval_u64(r).pow(w.i()).mul_rational(&arith::rat(r as i64, 1));
        if v.cmp_exact(&Value::rational(BigRational::one())).is_le() {
            if psi.in_a_u64(w, d, r) {
                return Err(Error::Invariant(format!("{r} fails the assumption but lies in A_psi")));
            }
            out.push(r);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct BdvReport {
    pub partial_sum: Bracket,
    pub verdict: ConvergenceVerdict,
    /// Regression verdict on the level increments.
    pub regression: ConvergenceVerdict,
    /// The verdict for `sum psi(r)` it must match.
    pub direct: Option<Verdict>,
}

/// `(1/gamma) sum_{k <= K} n_ck psi(n_ck)`.
pub fn bdv_sum(psi: &ApproximatingFunction, w: &WeightPair, d: &DadicSequence, c: usize, gamma: &BigRational, k_max: usize) -> Result<BdvReport> {
    let spec = SeriesSpec::new(Term::Bdv { c, gamma: gamma.clone() }, psi.clone(), *w, d.clone());
    let partial_sum = sums::partial_sum(&spec, &BigUint::from(k_max))?;
    let verdict = sums::classify(&spec)?;
    let regression = sums::regression_with(&spec, 0, 8)?;
    let direct = sums::closed_form(&SeriesSpec::new(Term::Psi, psi.clone(), *w, d.clone())).map(|v| v.0);
    Ok(BdvReport { partial_sum, verdict, regression, direct })
}

/// `Psi(r) = psi^j(r) / r`.
pub fn big_psi(psi: &ApproximatingFunction, w: &WeightPair, r: &BigUint) -> Value {
    psi.eval(r).pow(w.j()).mul_rational(&BigRational::new(BigInt::one(), r.clone().into()))
}

/// Checks `h(u_{k+1}) <= lambda h(u_k)` for `1 <= k <= K`, `u_k = n_ck`.
/// `h` receives the level and the point.
pub fn u_regular_check(h: impl Fn(usize, &BigUint) -> Value, d: &DadicSequence, c: usize, lambda: &BigRational, k_max: usize) -> Result<bool> {
    if !(lambda > &BigRational::zero() && lambda < &BigRational::one()) {
        return Err(Error::Precondition("lambda must lie in (0, 1)".into()));
    }
    let mut prev = h(1, &d.element(c)?);
    for k in 1..=k_max {
        let next = h(k + 1, &d.element(c * (k + 1))?);
        if next.cmp_exact(&prev.mul_rational(lambda)).is_gt() {
            return Ok(false);
        }
        prev = next;
    }
    Ok(true)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KCounts {
    pub m: MIndex,
    pub r: usize,
    pub kminus: u64,
    pub kplus: u64,
    /// `n_c(r-1) / n_cm`.
    pub bound_minus: BigRational,
    /// `(n_cr - n_c(r-1)) / n_cm`.
    pub bound_plus: BigRational,
    /// The bounds are claimed for `r > m_k`; at `r = m_k` the point `n_cm`
    /// itself lies in `(n_c(r-1), n_cr]` while the `K^+` bound is below 1.
    pub applies: bool,
    pub within_bounds: bool,
}

/// Counts of `q` with `|q|_D <= 1/n_cm` in `(0, n_c(r-1)]` and
/// `(n_c(r-1), n_cr]`. Small ranges are scanned densely; larger ones walk
/// the multiples of `n_cm`, re-checking each value.
pub fn kcounts(psi: &ApproximatingFunction, w: &WeightPair, d: &DadicSequence, c: usize, k: usize, r: usize) -> Result<KCounts> {
    if r == 0 {
        return Err(Error::Precondition("r must be positive".into()));
    }
    let m = m_index(psi, w, d, c, k)?;
    let level = c * m.m;
    let ncm = d.element(level)?;
    let lo = d.element(c * (r - 1))?;
    let hi = d.element(c * r)?;
    let hi64 = hi.to_u64().ok_or_else(|| cap_error(&hi))?;
    let lo64 = lo.to_u64().expect("lo <= hi");
    let small = |q: u64| d.pav_index_u64(q) >= level;
    let (kminus, kplus) = if hi64 <= KCOUNT_CAP {
        (
            (1..=lo64).filter(|&q| small(q)).count() as u64,
            (lo64 + 1..=hi64).filter(|&q| small(q)).count() as u64,
        )
    } else {
        let step = ncm.to_u64().expect("n_cm <= n_cr");
        if hi64 / step > KCOUNT_CAP {
            return Err(cap_error(&hi));
        }
        let mut counts = (0u64, 0u64);
        let mut q = step;
        while q <= hi64 {
            if small(q) {
                if q <= lo64 {
                    counts.0 += 1;
                } else {
                    counts.1 += 1;
                }
            }
            q += step;
        }
        counts
    };
    let ncm_i: BigInt = ncm.into();
    let bound_minus = BigRational::new(lo.clone().into(), ncm_i.clone());
    let bound_plus = BigRational::new((&hi - &lo).into(), ncm_i);
    let within_bounds = arith::rat(kminus as i64, 1) <= bound_minus && arith::rat(kplus as i64, 1) <= bound_plus;
    let applies = r > m.m;
    if applies && !within_bounds {
        return Err(Error::Invariant(format!("K± counts ({kminus}, {kplus}) exceed their bounds")));
    }
    Ok(KCounts { m, r, kminus, kplus, bound_minus, bound_plus, applies, within_bounds })
}

fn cap_error(n: &BigUint) -> Error {
    Error::CapExceeded {
        what: "K± enumeration",
        value: n.to_string(),
        cap: KCOUNT_CAP.to_string(),
    }
}

#[derive(Debug, Clone)]
pub struct UbiquityReport {
    pub c: usize,
    pub gamma: BigRational,
    pub k: usize,
    pub interval: (BigRational, BigRational),
    /// `lambda(I ∩ Delta) / lambda(I)`.
    pub fraction: Bracket,
    pub kappa: BigRational,
    pub pass: bool,
    pub kminus: Option<u64>,
    pub kplus: Option<u64>,
    /// Whether `rho(n_ck) < lambda(I)/4`.
    pub gate_met: bool,
    pub advisory: Option<String>,
    pub members: usize,
}

pub fn verify_local_ubiquity(psi: &ApproximatingFunction, w: &WeightPair, d: &DadicSequence, c: usize, interval: (BigRational, BigRational), k: usize) -> Result<UbiquityReport> {
    let gamma = gamma_for(d, c)?;
    verify_local_ubiquity_with(psi, w, d, c, &gamma, interval, k)
}

/// As [`verify_local_ubiquity`] with an explicit `gamma`.
pub fn verify_local_ubiquity_with(psi: &ApproximatingFunction, w: &WeightPair, d: &DadicSequence, c: usize, gamma: &BigRational, interval: (BigRational, BigRational), k: usize) -> Result<UbiquityReport> {
    if c < 2 {
        return Err(Error::Precondition("local ubiquity needs c >= 2".into()));
    }
    if k == 0 {
        return Err(Error::Precondition("k must be positive".into()));
    }
    let (a, b) = interval.clone();
    if !(a < b) {
        return Err(Error::Precondition("empty interval".into()));
    }
    let lo = d.element(c * (k - 1))?;
    let hi = d.element(c * k)?;
    let members = psi.members(w, d, &(lo + 1u32), &hi, sets::DEFAULT_CAP as usize)?;
    let width = &b - &a;
    let (fraction, gate_met, advisory) = if members.is_empty() {
        (Bracket::zero(), true, Some("A_psi has no members at this level".to_string()))
    } else {
        let radius = rho(psi, w, gamma, &hi)?;
        let balls: Vec<Ball> = members
            .iter()
            .map(|q| {
                let q = q.to_u64().ok_or_else(|| cap_error(q))?;
                Ok(Ball { q, radius: radius.clone() })
            })
            .collect::<Result<_>>()?;
        let union = sets::union_of_balls(&balls, &a, &b, false, sets::precision_bits())?;
        let quarter = Value::rational(&width / BigRational::from_integer(4.into()));
        let gate = radius.cmp_exact(&quarter).is_lt();
        let advisory = (!gate).then(|| "k too small: radii are not small against the interval".to_string());
        (union.measure.scale(&width.recip()), gate, advisory)
    };
    let kappa = kappa();
    let pass = fraction.lo >= kappa;
    let counts = kcounts(psi, w, d, c, k, k).ok();
    Ok(UbiquityReport {
        c,
        gamma: gamma.clone(),
        k,
        interval,
        pass,
        kminus: counts.as_ref().map(|x| x.kminus),
        kplus: counts.as_ref().map(|x| x.kplus),
        fraction,
        kappa,
        gate_met,
        advisory,
        members: members.len(),
    })
}

/// `h(u_k) = x^k` for tests and exploration.
pub fn geometric_h(x: BigRational) -> impl Fn(usize, &BigUint) -> Value {
    move |k, _| Value::Pos(PowerProduct::power(x.clone(), Exponent::from_integer(k as i64)))
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

    #[test]
    fn rho_examples() {
        let w = WeightPair::half();
        let r = rho(&power(1, 1), &w, &rat(16, 1), &big(16)).unwrap();
        assert_eq!(r.as_rational(), Some(rat(1, 4)));
        let one = ApproximatingFunction::parse_table("5,1").unwrap();
        assert_eq!(rho(&one, &w, &rat(1, 1), &big(5)).unwrap().as_rational(), Some(rat(1, 25)));
        assert!(matches!(rho(&one, &w, &rat(1, 1), &big(6)), Err(Error::Undefined(_))));
        assert_eq!(gamma_for(&pow2(), 2).unwrap(), rat(16, 1));
    }

    #[test]
    fn assumption_examples() {
        let w = WeightPair::half();
        assert_eq!(assumption_filter(&power(2, 1), &w, &pow2(), 1, 50).unwrap().len(), 50);
        assert_eq!(assumption_filter(&power(1, 1), &w, &pow2(), 2, 500).unwrap(), Vec::<u64>::new());
        let psi0 = build_psi0(&pow2(), &w);
        let excluded = assumption_filter(&psi0, &w, &pow2(), 1, 1 << 12).unwrap();
        for k in 1..=12 {
            assert!(!excluded.contains(&(1u64 << k)));
        }
    }

    #[test]
    fn bdv_examples() {
        let w = WeightPair::half();
        let g = rat(16, 1);
        let t1 = bdv_sum(&power(1, 1), &w, &pow2(), 2, &g, 7).unwrap();
        assert_eq!(t1.partial_sum.value(), Some(&rat(7, 16)));
        assert_eq!(t1.verdict.verdict, Verdict::Diverges);
        assert_eq!(t1.regression.verdict, Verdict::Diverges);
        let t32 = bdv_sum(&power(3, 2), &w, &pow2(), 2, &g, 30).unwrap();
        assert_eq!(t32.verdict.verdict, Verdict::Converges);
        assert_eq!(t32.regression.verdict, Verdict::Converges);
        assert!(t32.partial_sum.hi < rat(1, 16));
        assert_eq!(bdv_sum(&power(3, 2), &w, &pow2(), 2, &g, 0).unwrap().partial_sum.value(), Some(&rat(0, 1)));
    }

    #[test]
    fn u_regularity_examples() {
        let w = WeightPair::half();
        let psi = power(1, 1);
        let h = |_: usize, r: &BigUint| big_psi(&psi, &w, r);
        assert!(u_regular_check(h, &pow2(), 2, &rat(1, 4), 20).unwrap());
        assert!(!u_regular_check(|_, _| Value::rational(rat(1, 1)), &pow2(), 2, &rat(9, 10), 5).unwrap());
        assert!(u_regular_check(geometric_h(rat(1, 2)), &pow2(), 2, &rat(1, 2), 10).unwrap());
        assert!(u_regular_check(geometric_h(rat(1, 2)), &pow2(), 2, &rat(1, 1), 3).is_err());
    }

    #[test]
    fn kcount_examples() {
        let w = WeightPair::half();
        // m_k = 3 at k = 4 with c = 1.
        let kc = kcounts(&power(1, 1), &w, &pow2(), 1, 4, 5).unwrap();
        assert_eq!(kc.m.m, 3);
        assert_eq!(kc.kplus, 2);
        assert_eq!(kc.bound_plus, rat(2, 1));
        assert_eq!(kc.kminus, 2);
        let early = kcounts(&power(1, 1), &w, &pow2(), 1, 4, 2).unwrap();
        assert_eq!(early.kminus, 0);
        let at_m = kcounts(&power(1, 1), &w, &pow2(), 1, 4, 3).unwrap();
        assert!(!at_m.applies && at_m.kplus == 1 && at_m.bound_plus < rat(1, 1));
    }

    #[test]
    fn local_ubiquity_examples() {
        let w = WeightPair::half();
        let psi = power(1, 1);
        for k in 3..=5 {
            let r = verify_local_ubiquity(&psi, &w, &pow2(), 2, (rat(0, 1), rat(1, 1)), k).unwrap();
            assert!(r.pass, "k = {k}: {}", r.fraction);
        }
        let r = verify_local_ubiquity(&psi, &w, &pow2(), 2, (rat(1, 3), rat(1, 2)), 6).unwrap();
        assert!(r.pass && r.gate_met);
        let psi1 = build_psi1(&pow2()).unwrap();
        let z = verify_local_ubiquity(&psi1, &w, &pow2(), 2, (rat(0, 1), rat(1, 1)), 4).unwrap();
        assert!(!z.pass && z.fraction.value() == Some(&rat(0, 1)));
    }

    #[test]
    fn fraction_grows_with_gamma() {
        let w = WeightPair::half();
        let psi = power(1, 1);
        let i = (rat(1, 3), rat(1, 2));
        let mut last = rat(0, 1);
        for g in [1, 2, 4, 16] {
            let r = verify_local_ubiquity_with(&psi, &w, &pow2(), 2, &rat(g, 1), i.clone(), 4).unwrap();
            assert!(r.fraction.hi >= last);
            last = r.fraction.lo.clone();
        }
    }
}
