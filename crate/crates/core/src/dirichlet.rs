//! The `m_k` indices controlling `psi^i(n_ck)` and a constructive Dirichlet
//! theorem with D-adic denominators.
//!
//! Given `m = m_k <= k`, set `N = n_ck / n_cm`. Approximating `x' = x n_cm`
//! by `p/q'` with `q' <= N` and `|q' x' - p| < 1/N`, then `q = n_cm q'`
//! satisfies `n_cm <= q <= n_ck`, `n_cm | q` and
//! `|x - p/q| < n_cm / (q n_ck)`.

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::approxfn::{ApproximatingFunction, WeightPair};
use crate::arith;
use crate::dadic::DadicSequence;
use crate::error::{Error, Result};
use crate::power::Value;

/// Walks at most this many candidate indices.
const M_WALK_LIMIT: usize = 1 << 16;
/// Exhaustive oracle limit on the number of denominators.
pub const ORACLE_CAP: u64 = 1 << 24;

/// `1/n_{cm} < psi^i(n_{ck}) <= 1/n_{c(m-1)}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MIndex {
    pub k: usize,
    pub c: usize,
    pub m: usize,
}

pub fn m_index(psi: &ApproximatingFunction, w: &WeightPair, d: &DadicSequence, c: usize, k: usize) -> Result<MIndex> {
    if c == 0 {
        return Err(Error::Precondition("c must be positive".into()));
    }
    let n = d.element(c * k)?;
    let v = psi.eval(&n);
    let one = Value::rational(BigRational::one());
    if v.cmp_exact(&one).is_ge() {
        return Err(Error::Amplitude(format!("psi(n_{}) = {v} is not below 1", c * k)));
    }
    if v.is_zero() {
        return Err(Error::Undefined(format!("psi(n_{}) = 0", c * k)));
    }
    let vi = v.pow(w.i());
    for m in 1..=M_WALK_LIMIT {
        let inv = Value::rational(BigRational::new(BigInt::one(), d.element(c * m)?.into()));
        if inv.cmp_exact(&vi).is_lt() {
            let prev = Value::rational(BigRational::new(BigInt::one(), d.element(c * (m - 1))?.into()));
            if vi.cmp_exact(&prev).is_gt() {
                return Err(Error::Invariant(format!("m-index sandwich fails at m = {m}")));
            }
            return Ok(MIndex { k, c, m });
        }
    }
    Err(Error::CapExceeded {
        what: "m-index walk",
        value: format!(">{M_WALK_LIMIT}"),
        cap: M_WALK_LIMIT.to_string(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirichletApprox {
    pub p: BigInt,
    pub q: BigUint,
    /// `|x - p/q|`.
    pub error: BigRational,
    /// `n_cm / (q n_ck)`.
    pub bound: BigRational,
}

fn levels(d: &DadicSequence, c: usize, k: usize, m: usize) -> Result<(BigUint, BigUint)> {
    if m > k {
        return Err(Error::Precondition(format!("m = {m} exceeds k = {k}")));
    }
    Ok((d.element(c * m)?, d.element(c * k)?))
}

/// Whether `p/q` satisfies all three conditions, checked exactly.
pub fn verify(x: &BigRational, d: &DadicSequence, c: usize, k: usize, m: usize, p: &BigInt, q: &BigUint) -> Result<bool> {
    let (ncm, nck) = levels(d, c, k, m)?;
    if q < &ncm || q > &nck || !(q % &ncm).is_zero() {
        return Ok(false);
    }
    // |q x - p| < n_cm / n_ck.
    let qi = BigInt::from(q.clone());
    let dev = (x * BigRational::from_integer(qi) - BigRational::from_integer(p.clone())).abs();
    Ok(dev * BigRational::from_integer(nck.into()) < BigRational::from_integer(ncm.into()))
}

/// Best approximations of `x` with denominators up to `n`, from the
/// continued-fraction convergents; returns the last one with `q <= n`.
fn last_convergent(x: &BigRational, n: &BigUint) -> (BigInt, BigInt) {
    let n = BigInt::from(n.clone());
    let (mut h0, mut h1) = (BigInt::zero(), BigInt::one());
    let (mut k0, mut k1) = (BigInt::one(), BigInt::zero());
    let (mut num, mut den) = (x.numer().clone(), x.denom().clone());
    loop {
        let (a, r) = num.div_mod_floor(&den);
        let h2 = &a * &h1 + &h0;
        let k2 = &a * &k1 + &k0;
        if k2 > n {
            return (h1, k1);
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        if r.is_zero() {
            return (h1, k1);
        }
        (num, den) = (den, r);
    }
}

pub fn dirichlet_search(x: &BigRational, d: &DadicSequence, c: usize, k: usize, m: usize) -> Result<DirichletApprox> {
    let (ncm, nck) = levels(d, c, k, m)?;
    let big_n = &nck / &ncm;
    let scaled = x * BigRational::from_integer(ncm.clone().into());
    let (p, q_prime) = last_convergent(&scaled, &big_n);
    let q = q_prime.magnitude() * &ncm;
    if !verify(x, d, c, k, m, &p, &q)? {
        return Err(Error::Precision(format!(
            "convergent {p}/{q} fails the Dirichlet inequality"
        )));
    }
    let qi = BigInt::from(q.clone());
    let error = (x - BigRational::new(p.clone(), qi.clone())).abs();
    let bound = BigRational::new(ncm.into(), qi * BigInt::from(nck));
    Ok(DirichletApprox { p, q, error, bound })
}

/// Every `(p, q)` with `q` a multiple of `n_cm` in `[n_cm, n_ck]` satisfying
/// the inequality, by brute force over `q` and the integers nearest `qx`.
pub fn oracle_solutions(x: &BigRational, d: &DadicSequence, c: usize, k: usize, m: usize) -> Result<Vec<(BigInt, BigUint)>> {
    let (ncm, nck) = levels(d, c, k, m)?;
    let count = (&nck / &ncm).to_u64().filter(|&t| t <= ORACLE_CAP).ok_or_else(|| Error::CapExceeded {
        what: "oracle denominators",
        value: (&nck / &ncm).to_string(),
        cap: ORACLE_CAP.to_string(),
    })?;
    let mut out = Vec::new();
    for t in 1..=count {
        let q = &ncm * t;
        let qx = x * BigRational::from_integer(q.clone().into());
        let fl = qx.floor().to_integer();
        for p in [fl.clone(), fl + 1] {
            if verify(x, d, c, k, m, &p, &q)? {
                out.push((p, q.clone()));
            }
        }
    }
    Ok(out)
}

/// The D-adic absolute value of a solution's denominator is at most `1/n_cm`.
pub fn denominator_pav_bound(d: &DadicSequence, c: usize, m: usize, q: &BigUint) -> bool {
    d.pav_index(q) >= c * m
}

pub fn fmt_approx(a: &DirichletApprox) -> String {
    format!("{}/{} (error {})", a.p, a.q, arith::fmt_rat(&a.error))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::{exp, rat};
    use proptest::prelude::*;

    fn pow2() -> DadicSequence {
        DadicSequence::powers(2).unwrap()
    }

    fn tau1() -> ApproximatingFunction {
        ApproximatingFunction::power_law(exp(1, 1)).unwrap()
    }

    #[test]
    fn m_index_examples() {
        let w = WeightPair::half();
        assert_eq!(m_index(&tau1(), &w, &pow2(), 1, 4).unwrap().m, 3);
        assert_eq!(m_index(&tau1(), &w, &pow2(), 2, 2).unwrap().m, 2);
        let one = ApproximatingFunction::parse_table("4,1").unwrap();
        assert!(matches!(m_index(&one, &w, &pow2(), 1, 2), Err(Error::Amplitude(_))));
    }

    #[test]
    fn third_against_oracle() {
        let x = rat(1, 3);
        let a = dirichlet_search(&x, &pow2(), 1, 4, 3).unwrap();
        assert!(a.error < a.bound);
        let all = oracle_solutions(&x, &pow2(), 1, 4, 3).unwrap();
        assert!(!all.is_empty());
        assert!(all.contains(&(a.p.clone(), a.q.clone())));
    }

    #[test]
    fn dadic_rationals_are_their_own_approximations() {
        // x = 5/16 with n_cm = 4, n_ck = 16.
        let a = dirichlet_search(&rat(5, 16), &pow2(), 1, 4, 2).unwrap();
        assert!(a.error.is_zero());
        assert_eq!(a.q, BigUint::from(16u32));
    }

    #[test]
    fn m_above_k_is_rejected() {
        assert!(matches!(
            dirichlet_search(&rat(1, 3), &pow2(), 1, 2, 3),
            Err(Error::Precondition(_))
        ));
    }

    proptest! {
        #[test]
        fn search_always_verifies(num in 0u64..u64::MAX, k in 1usize..10, c in 1usize..3, cyc in any::<bool>()) {
            let d = if cyc { DadicSequence::cycle(&[2, 3]).unwrap() } else { pow2() };
            let x = BigRational::new(BigInt::from(num), BigInt::one() << 64);
            let m = m_index(&tau1(), &WeightPair::half(), &d, c, k).unwrap().m;
            let a = dirichlet_search(&x, &d, c, k, m).unwrap();
            prop_assert!(verify(&x, &d, c, k, m, &a.p, &a.q).unwrap());
            prop_assert!(denominator_pav_bound(&d, c, m, &a.q));
        }
    }
}
