//! Approximating functions, weight pairs and the restricted denominator set
//! `A_psi = { r : |r|_D < psi(r)^i }`.
//!
//! Every value is either an exact rational or a [`PowerProduct`], so
//! membership in `A_psi` is always decided exactly.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_bigint::BigUint;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::arith::{self, Exponent};
use crate::counterexample::{CounterexampleBlock, StitchedPsi};
use crate::dadic::DadicSequence;
use crate::error::{Error, Result};
use crate::power::{PowerProduct, Value};

/// Rational weights `i, j > 0` with `i + j = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WeightPair {
    i: Exponent,
    j: Exponent,
}

impl WeightPair {
    pub fn new(i: Exponent, j: Exponent) -> Result<Self> {
        if !i.is_positive() || !j.is_positive() {
            return Err(Error::InvalidWeights("weights must be positive".into()));
        }
        if i + j != Exponent::one() {
            return Err(Error::InvalidWeights(format!(
                "i + j = {} is not 1",
                arith::fmt_exp(&(i + j))
            )));
        }
        Ok(WeightPair { i, j })
    }

    /// The pair `(i, 1 - i)`.
    pub fn from_i(i: Exponent) -> Result<Self> {
        Self::new(i, Exponent::one() - i)
    }

    pub fn half() -> Self {
        WeightPair {
            i: Exponent::new(1, 2),
            j: Exponent::new(1, 2),
        }
    }

    pub fn i(&self) -> Exponent {
        self.i
    }

    pub fn j(&self) -> Exponent {
        self.j
    }

    /// Parses `"1/2,1/2"`.
    pub fn parse(s: &str) -> Result<Self> {
        let (a, b) = s
            .split_once(',')
            .ok_or_else(|| Error::Parse(format!("weights `{s}`, expected i,j")))?;
        let i = arith::parse_exponent(a).ok_or_else(|| Error::Parse(format!("weight `{a}`")))?;
        let j = arith::parse_exponent(b).ok_or_else(|| Error::Parse(format!("weight `{b}`")))?;
        Self::new(i, j)
    }
}

impl fmt::Display for WeightPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", arith::fmt_exp(&self.i), arith::fmt_exp(&self.j))
    }
}

/// Which inequality defines membership in `A_psi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Comparator {
    /// `|r|_D < psi(r)^i`.
    #[default]
    Strict,
    /// `|r|_D <= psi(r)^i`.
    NonStrict,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Monotone {
    Decreasing,
    NotMonotone,
    Unknown,
}

#[derive(Debug, Clone)]
pub enum PsiKind {
    /// `q^(-tau)`.
    PowerLaw { tau: Exponent },
    /// `k^(-(1 + delta))` at `q = n_k` with `k >= 1`, zero elsewhere.
    Psi0 { seq: DadicSequence, delta: Exponent },
    /// `1/2` when `q` is coprime to every `n_k`, zero elsewhere.
    Psi1 { seq: DadicSequence, primes: Vec<u64> },
    Block(Arc<CounterexampleBlock>),
    Stitched(Arc<StitchedPsi>),
    /// Finitely supported table; zero off the table.
    Tabulated(BTreeMap<BigUint, BigRational>),
}

#[derive(Debug, Clone)]
pub struct ApproximatingFunction {
    kind: PsiKind,
    monotone: Monotone,
}

impl ApproximatingFunction {
    pub fn power_law(tau: Exponent) -> Result<Self> {
        if tau.is_negative() {
            return Err(Error::InvalidFunction("power law needs tau >= 0".into()));
        }
        Ok(ApproximatingFunction {
            kind: PsiKind::PowerLaw { tau },
            monotone: Monotone::Decreasing,
        })
    }

    pub fn block(b: Arc<CounterexampleBlock>) -> Self {
        ApproximatingFunction {
            kind: PsiKind::Block(b),
            monotone: Monotone::NotMonotone,
        }
    }

    pub fn stitched(s: Arc<StitchedPsi>) -> Self {
        ApproximatingFunction {
            kind: PsiKind::Stitched(s),
            monotone: Monotone::NotMonotone,
        }
    }

    pub fn tabulated(table: BTreeMap<BigUint, BigRational>) -> Result<Self> {
        if table.keys().any(|q| q.is_zero()) || table.values().any(|v| v.is_negative()) {
            return Err(Error::InvalidFunction("table needs q >= 1 and values >= 0".into()));
        }
        Ok(ApproximatingFunction {
            kind: PsiKind::Tabulated(table),
            monotone: Monotone::Unknown,
        })
    }

    /// Parses `q,value` lines; `#` starts a comment.
    pub fn parse_table(text: &str) -> Result<Self> {
        let mut table = BTreeMap::new();
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (q, v) = line
                .split_once(',')
                .ok_or_else(|| Error::Parse(format!("table line `{line}`")))?;
            let q: BigUint = q.trim().parse().map_err(|_| Error::Parse(format!("table key `{q}`")))?;
            let v = arith::parse_rational(v).ok_or_else(|| Error::Parse(format!("table value `{v}`")))?;
            table.insert(q, v);
        }
        Self::tabulated(table)
    }

    pub fn kind(&self) -> &PsiKind {
        &self.kind
    }

    pub fn monotone(&self) -> Monotone {
        self.monotone
    }

    /// `Some(tau)` for power laws.
    pub fn power_tau(&self) -> Option<Exponent> {
        match self.kind {
            PsiKind::PowerLaw { tau } => Some(tau),
            _ => None,
        }
    }

    /// Short literal used in reports.
    pub fn describe(&self) -> String {
        match &self.kind {
            PsiKind::PowerLaw { tau } => format!("power:{}", arith::fmt_exp(tau)),
            PsiKind::Psi0 { delta, .. } => format!("psi0(delta={})", arith::fmt_exp(delta)),
            PsiKind::Psi1 { .. } => "psi1".into(),
            PsiKind::Block(b) => format!("block(R={},eps={})", b.r, arith::fmt_rat(&b.eps)),
            PsiKind::Stitched(s) => format!("stitched(T={})", s.blocks.len()),
            PsiKind::Tabulated(t) => format!("table({} entries)", t.len()),
        }
    }

    /// `psi(q)`.
    pub fn eval(&self, q: &BigUint) -> Value {
        assert!(!q.is_zero(), "psi is defined on q >= 1");
        match &self.kind {
            PsiKind::PowerLaw { tau } => {
                if tau.is_zero() || q.is_one() {
                    Value::rational(BigRational::one())
                } else {
                    Value::Pos(PowerProduct::power_of_uint(q, -*tau))
                }
            }
            PsiKind::Psi0 { seq, delta } => match seq.index_of(q) {
                Some(k) if k >= 1 => {
                    let e = -(Exponent::one() + *delta);
                    Value::Pos(PowerProduct::power(
                        BigRational::from_integer((k as i64).into()),
                        e,
                    ))
                }
                _ => Value::Zero,
            },
            PsiKind::Psi1 { primes, .. } => {
                if primes.iter().any(|&p| (q % p).is_zero()) {
                    Value::Zero
                } else {
                    Value::rational(arith::rat(1, 2))
                }
            }
            PsiKind::Block(b) => b.psi(q),
            PsiKind::Stitched(s) => s.psi(q),
            PsiKind::Tabulated(t) => t.get(q).cloned().map_or(Value::Zero, Value::rational),
        }
    }

    pub fn eval_u64(&self, q: u64) -> Value {
        self.eval(&BigUint::from(q))
    }

    /// `psi(q)^e` for `e > 0`.
    pub fn eval_pow(&self, q: &BigUint, e: Exponent) -> Value {
        self.eval(q).pow(e)
    }

    /// Membership in `A_psi` under the strict comparator.
    pub fn in_a(&self, w: &WeightPair, d: &DadicSequence, q: &BigUint) -> bool {
        self.in_a_with(w, d, q, Comparator::Strict)
    }

    pub fn in_a_with(&self, w: &WeightPair, d: &DadicSequence, q: &BigUint, cmp: Comparator) -> bool {
        match (&self.kind, cmp) {
            (PsiKind::PowerLaw { tau }, _) => {
                if let Some(small) = q.to_u64() {
                    return power_law_in_a(*tau, w, d, small, cmp);
                }
            }
            // Blocks carry their own sequence and weights; their chain is
            // checked on integers.
            (PsiKind::Block(b), Comparator::Strict) if b.seq == *d && b.w == *w => return b.in_a(q),
            (PsiKind::Stitched(st), Comparator::Strict)
                if st.blocks.iter().all(|b| b.seq == *d && b.w == *w) =>
            {
                return st.in_a(q)
            }
            _ => {}
        }
        let rhs = self.eval(q).pow(w.i());
        if rhs.is_zero() {
            return false;
        }
        let lhs = Value::rational(d.pav(q).value);
        match cmp {
            Comparator::Strict => lhs.cmp_exact(&rhs).is_lt(),
            Comparator::NonStrict => lhs.cmp_exact(&rhs).is_le(),
        }
    }

    pub fn in_a_u64(&self, w: &WeightPair, d: &DadicSequence, q: u64) -> bool {
        self.in_a(w, d, &BigUint::from(q))
    }

    /// The ball radius `psi(q)^j / q` used for resonant intervals.
    pub fn radius(&self, w: &WeightPair, q: &BigUint) -> Value {
        match &self.kind {
            PsiKind::Block(b) if b.w == *w => match b.psi_j(q) {
                Some(_) => Value::rational(b.radius()),
                None => Value::Zero,
            },
            PsiKind::Stitched(st) if st.blocks.iter().all(|b| b.w == *w) => {
                st.radius_at(q).map_or(Value::Zero, Value::rational)
            }
            _ => match self.eval(q).pow(w.j()) {
                Value::Zero => Value::Zero,
                v => v.mul_rational(&BigRational::new(1.into(), q.clone().into())),
            },
        }
    }

    /// The points of `(lo, hi]` where `psi` may be positive, for finitely or
    /// sparsely supported kinds. `None` means the support is dense.
    pub fn sparse_support(&self, lo: &BigUint, hi: &BigUint, cap: usize) -> Result<Option<Vec<BigUint>>> {
        let out = match &self.kind {
            PsiKind::PowerLaw { .. } | PsiKind::Psi1 { .. } => return Ok(None),
            PsiKind::Psi0 { seq, .. } => {
                let mut k = seq.first_index_at_least(&(lo + 1u32))?.max(1);
                let mut pts = Vec::new();
                loop {
                    let n = match seq.element(k) {
                        Ok(n) => n,
                        Err(Error::Horizon { .. }) => break,
                        Err(e) => return Err(e),
                    };
                    if n > *hi {
                        break;
                    }
                    if n > *lo {
                        pts.push(n);
                    }
                    k += 1;
                }
                pts
            }
            PsiKind::Block(b) => b.support_in(lo, hi, cap)?,
            PsiKind::Stitched(s) => s.support_in(lo, hi, cap)?,
            PsiKind::Tabulated(t) => t
                .range(lo + 1u32..=hi.clone())
                .filter(|(_, v)| v.is_positive())
                .map(|(q, _)| q.clone())
                .collect(),
        };
        if out.len() > cap {
            return Err(Error::CapExceeded {
                what: "support points",
                value: out.len().to_string(),
                cap: cap.to_string(),
            });
        }
        Ok(Some(out))
    }

    /// Every `q` in `(lo, hi]` with `q` in `A_psi`, in increasing order.
    pub fn members(&self, w: &WeightPair, d: &DadicSequence, lo: &BigUint, hi: &BigUint, cap: usize) -> Result<Vec<BigUint>> {
        if self.empty_regime(w) {
            return Ok(Vec::new());
        }
        if let Some(pts) = self.sparse_support(lo, hi, cap)? {
            return Ok(pts.into_iter().filter(|q| self.in_a(w, d, q)).collect());
        }
        let (lo, hi) = match (lo.to_u64(), hi.to_u64()) {
            (Some(a), Some(b)) if b - a.min(b) <= cap as u64 => (a, b),
            _ => {
                return Err(Error::CapExceeded {
                    what: "denominator range",
                    value: format!("({lo}, {hi}]"),
                    cap: cap.to_string(),
                })
            }
        };
        if let PsiKind::Psi1 { seq, .. } = &self.kind {
            if d == seq {
                // psi_1 > 0 forces |q|_D = 1 > psi_1(q)^i.
                return Ok(Vec::new());
            }
        }
        Ok((lo + 1..=hi)
            .filter(|&q| self.in_a_u64(w, d, q))
            .map(BigUint::from)
            .collect())
    }

    /// True when `i * tau >= 1`, where `A_psi` is provably empty.
    pub fn empty_regime(&self, w: &WeightPair) -> bool {
        matches!(self.kind, PsiKind::PowerLaw { tau } if w.i() * tau >= Exponent::one())
    }

    /// `f_psi(r) = r^(1-s) psi(r)^(i + j s)`.
    pub fn f_psi(&self, w: &WeightPair, s: Exponent, r: &BigUint) -> Result<Value> {
        if s <= w.i() || s > Exponent::one() {
            return Err(Error::Precondition(format!(
                "s = {} must lie in (i, 1]",
                arith::fmt_exp(&s)
            )));
        }
        let psi = self.eval_pow(r, w.i() + w.j() * s);
        Ok(psi.mul(&Value::Pos(PowerProduct::power_of_uint(r, Exponent::one() - s))))
    }

    /// Whether `f_psi(r) >= f_psi(r + 1)` for every `lo <= r < hi`.
    pub fn monotone_scan(&self, w: &WeightPair, s: Exponent, lo: u64, hi: u64) -> Result<bool> {
        if lo == 0 || lo > hi {
            return Err(Error::Precondition("scan range must satisfy 1 <= lo <= hi".into()));
        }
        let mut prev = self.f_psi(w, s, &BigUint::from(lo))?;
        for r in lo + 1..=hi {
            let next = self.f_psi(w, s, &BigUint::from(r))?;
            if prev.cmp_exact(&next).is_lt() {
                return Ok(false);
            }
            prev = next;
        }
        Ok(true)
    }
}

/// `delta = (1 / max(i, j) - 1) / 2`.
pub fn psi0_delta(w: &WeightPair) -> Exponent {
    let m = w.i().max(w.j());
    (m.recip() - Exponent::one()) / 2
}

pub fn build_psi0(d: &DadicSequence, w: &WeightPair) -> ApproximatingFunction {
    ApproximatingFunction {
        kind: PsiKind::Psi0 {
            seq: d.clone(),
            delta: psi0_delta(w),
        },
        monotone: Monotone::NotMonotone,
    }
}

pub fn build_psi1(d: &DadicSequence) -> Result<ApproximatingFunction> {
    Ok(ApproximatingFunction {
        kind: PsiKind::Psi1 {
            seq: d.clone(),
            primes: d.prime_support()?,
        },
        monotone: Monotone::NotMonotone,
    })
}

/// `ApproximatingFunction` from `power:3/2`, `psi0` or `psi1`.
pub fn parse_psi(spec: &str, d: &DadicSequence, w: &WeightPair) -> Result<ApproximatingFunction> {
    let spec = spec.trim();
    if let Some(t) = spec.strip_prefix("power:") {
        let tau = arith::parse_exponent(t).ok_or_else(|| Error::Parse(format!("tau `{t}`")))?;
        return ApproximatingFunction::power_law(tau);
    }
    match spec {
        "psi0" => Ok(build_psi0(d, w)),
        "psi1" => build_psi1(d),
        _ => Err(Error::Parse(format!("psi spec `{spec}`"))),
    }
}

/// `1/n < q^(-i tau)`, i.e. `q^(i tau) < n` with `n` the largest D-divisor.
fn power_law_in_a(tau: Exponent, w: &WeightPair, d: &DadicSequence, q: u64, cmp: Comparator) -> bool {
    let e = w.i() * tau;
    if q == 1 {
        // |1|_D = 1 = psi(1)^i.
        return cmp == Comparator::NonStrict;
    }
    if e > Exponent::one() || (e == Exponent::one() && cmp == Comparator::Strict) {
        return false;
    }
    let n = d.element(d.pav_index_u64(q)).expect("pav index is valid");
    let (a, b) = (*e.numer() as u32, *e.denom() as u32);
    let lhs = BigUint::from(q).pow(a);
    let rhs = n.pow(b);
    match cmp {
        Comparator::Strict => lhs < rhs,
        Comparator::NonStrict => lhs <= rhs,
    }
}

/// `gcd(q, n)` for a single `u64`; exposed for the coprime layer.
pub fn coprime(a: u64, b: u64) -> bool {
    a.gcd(&b) == 1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::{big, exp, rat};
    use crate::power::compare_power;

    fn pow2() -> DadicSequence {
        DadicSequence::powers(2).unwrap()
    }

    #[test]
    fn weights_validate() {
        assert!(WeightPair::new(exp(1, 2), exp(1, 3)).is_err());
        assert!(WeightPair::new(exp(0, 1), exp(1, 1)).is_err());
        assert_eq!(WeightPair::parse("1/3,2/3").unwrap().j(), exp(2, 3));
        assert_eq!(WeightPair::from_i(exp(1, 4)).unwrap().j(), exp(3, 4));
    }

    #[test]
    fn evaluations() {
        let p2 = ApproximatingFunction::power_law(exp(2, 1)).unwrap();
        assert_eq!(p2.eval_u64(10).as_rational(), Some(rat(1, 100)));
        let w = WeightPair::half();
        let psi0 = build_psi0(&pow2(), &w);
        let v = psi0.eval_u64(8);
        let expect = PowerProduct::power(rat(3, 1), exp(-3, 2));
        assert!(v.positive().unwrap().cmp_exact(&expect).is_eq());
        assert!(psi0.eval_u64(3).is_zero());
        let psi1 = build_psi1(&pow2()).unwrap();
        assert!(psi1.eval_u64(6).is_zero());
        assert_eq!(psi1.eval_u64(7).as_rational(), Some(rat(1, 2)));
        let c23 = DadicSequence::cycle(&[2, 3]).unwrap();
        assert_eq!(build_psi1(&c23).unwrap().eval_u64(35).as_rational(), Some(rat(1, 2)));
        let g = DadicSequence::growing(2).unwrap();
        assert_eq!(build_psi1(&g).unwrap_err(), Error::CoprimalityUndecidable);
    }

    #[test]
    fn deltas() {
        assert_eq!(psi0_delta(&WeightPair::half()), exp(1, 2));
        assert_eq!(psi0_delta(&WeightPair::parse("1/3,2/3").unwrap()), exp(1, 4));
    }

    #[test]
    fn membership_examples() {
        let w = WeightPair::half();
        let d = pow2();
        let psi = ApproximatingFunction::power_law(exp(1, 1)).unwrap();
        assert!(psi.in_a_u64(&w, &d, 12));
        assert!(!psi.in_a_u64(&w, &d, 6));
        assert!(!psi.in_a_u64(&w, &d, 1));
        assert!(psi.in_a_with(&w, &d, &big(1), Comparator::NonStrict));
    }

    #[test]
    fn fast_path_matches_generic_comparison() {
        let d = DadicSequence::cycle(&[2, 3]).unwrap();
        for (tau, i) in [(exp(3, 2), exp(1, 2)), (exp(1, 1), exp(1, 3)), (exp(5, 3), exp(1, 4))] {
            let w = WeightPair::from_i(i).unwrap();
            let psi = ApproximatingFunction::power_law(tau).unwrap();
            for q in 2..3000u64 {
                let pav = d.pav_u64(q).value;
                let rhs = rat(1, q as i64);
                let slow = compare_power(&pav, &rhs, tau * i).is_lt();
                assert_eq!(psi.in_a_u64(&w, &d, q), slow, "q={q}");
            }
        }
    }

    #[test]
    fn empty_regime_is_empty() {
        let w = WeightPair::half();
        let psi = ApproximatingFunction::power_law(exp(2, 1)).unwrap();
        assert!(psi.empty_regime(&w));
        assert!((1..5000).all(|q| !psi.in_a_u64(&w, &pow2(), q)));
    }

    #[test]
    fn psi1_set_is_empty() {
        let d = pow2();
        let psi1 = build_psi1(&d).unwrap();
        let w = WeightPair::half();
        assert!((1..=10_000u64).all(|q| !psi1.in_a_u64(&w, &d, q)));
        assert!(psi1.members(&w, &d, &big(0), &big(10_000), 1 << 20).unwrap().is_empty());
    }

    #[test]
    fn psi0_set_is_the_sequence() {
        let w = WeightPair::parse("1/3,2/3").unwrap();
        let d = DadicSequence::cycle(&[2, 3]).unwrap();
        let psi0 = build_psi0(&d, &w);
        let m = psi0.members(&w, &d, &big(0), &d.element(20).unwrap(), 1 << 20).unwrap();
        let expect: Vec<BigUint> = (1..=20).map(|k| d.element(k).unwrap()).collect();
        assert_eq!(m, expect);
    }

    #[test]
    fn f_psi_and_scan() {
        let w = WeightPair::half();
        let psi = ApproximatingFunction::power_law(exp(3, 2)).unwrap();
        let f = psi.f_psi(&w, exp(1, 1), &big(4)).unwrap();
        assert_eq!(f.as_rational(), Some(rat(1, 8)));
        assert!(psi.monotone_scan(&w, exp(1, 1), 1, 500).unwrap());
        assert!(psi.monotone_scan(&w, exp(3, 4), 1, 500).unwrap());
        let psi0 = build_psi0(&pow2(), &w);
        assert!(!psi0.monotone_scan(&w, exp(3, 4), 1, 100).unwrap());
        assert!(psi.f_psi(&w, exp(1, 2), &big(3)).is_err());
        for r in 1..200u64 {
            let at_one = psi.f_psi(&w, exp(1, 1), &big(r)).unwrap();
            assert!(at_one.cmp_exact(&psi.eval_u64(r)).is_eq());
        }
    }

    #[test]
    fn tables_parse() {
        let t = ApproximatingFunction::parse_table("# q,psi\n2,1/4\n4, 1/16\n").unwrap();
        assert_eq!(t.eval_u64(4).as_rational(), Some(rat(1, 16)));
        assert!(t.eval_u64(3).is_zero());
        let pts = t.sparse_support(&big(1), &big(4), 10).unwrap().unwrap();
        assert_eq!(pts, vec![big(2), big(4)]);
        assert!(ApproximatingFunction::parse_table("2;1").is_err());
    }
}
