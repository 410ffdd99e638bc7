//! Exact products of rational powers.
//!
//! A [`PowerProduct`] is a value `c * b_1^e_1 * ... * b_m^e_m` with a positive
//! rational coefficient `c`, positive rational bases and rational exponents.
//! Two such values are ordered exactly: their quotient is raised to the least
//! common multiple of the exponent denominators, which leaves a comparison of
//! two big integers. Nothing on a decision path is ever rounded.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Pow, Signed, Zero};

use crate::arith::{self, Exponent};

/// A closed interval `[lo, hi]` of rationals known to contain a real value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bracket {
    pub lo: BigRational,
    pub hi: BigRational,
}

impl Bracket {
    pub fn new(lo: BigRational, hi: BigRational) -> Self {
        debug_assert!(lo <= hi, "bracket endpoints out of order");
        Bracket { lo, hi }
    }

    pub fn exact(v: BigRational) -> Self {
        Bracket { lo: v.clone(), hi: v }
    }

    pub fn zero() -> Self {
        Bracket::exact(BigRational::zero())
    }

    pub fn is_exact(&self) -> bool {
        self.lo == self.hi
    }

    /// The exact value when the bracket has collapsed to a point.
    pub fn value(&self) -> Option<&BigRational> {
        self.is_exact().then_some(&self.lo)
    }

    pub fn contains(&self, x: &BigRational) -> bool {
        self.lo <= *x && *x <= self.hi
    }

    pub fn width(&self) -> BigRational {
        &self.hi - &self.lo
    }

    pub fn add(&self, other: &Bracket) -> Bracket {
        Bracket::new(&self.lo + &other.lo, &self.hi + &other.hi)
    }

    /// Product of two brackets of non-negative numbers.
    pub fn mul_nonneg(&self, other: &Bracket) -> Bracket {
        Bracket::new(&self.lo * &other.lo, &self.hi * &other.hi)
    }

    pub fn scale(&self, k: &BigRational) -> Bracket {
        debug_assert!(!k.is_negative());
        Bracket::new(&self.lo * k, &self.hi * k)
    }

    pub fn lo_f64(&self) -> f64 {
        arith::rat_to_f64(&self.lo)
    }

    pub fn hi_f64(&self) -> f64 {
        arith::rat_to_f64(&self.hi)
    }

    pub fn mid_f64(&self) -> f64 {
        0.5 * (self.lo_f64() + self.hi_f64())
    }
}

impl fmt::Display for Bracket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_exact() {
            write!(f, "{}", arith::fmt_rat(&self.lo))
        } else {
            write!(f, "[{}, {}]", arith::fmt_rat(&self.lo), arith::fmt_rat(&self.hi))
        }
    }
}

/// `coeff * prod(base^exp)`, always strictly positive.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PowerProduct {
    coeff: BigRational,
    factors: Vec<(BigRational, Exponent)>,
}

impl PowerProduct {
    pub fn one() -> Self {
        PowerProduct {
            coeff: BigRational::one(),
            factors: Vec::new(),
        }
    }

    pub fn rational(r: BigRational) -> Self {
        assert!(r.is_positive(), "power products are strictly positive");
        PowerProduct {
            coeff: r,
            factors: Vec::new(),
        }
    }

    pub fn integer(n: u64) -> Self {
        Self::rational(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn from_uint(n: &BigUint) -> Self {
        Self::rational(arith::rat_from_uint(n))
    }

    /// `base^e` for a positive rational base.
    pub fn power(base: BigRational, e: Exponent) -> Self {
        let mut p = PowerProduct::one();
        p.push_factor(base, e);
        p
    }

    pub fn power_of_uint(base: &BigUint, e: Exponent) -> Self {
        Self::power(arith::rat_from_uint(base), e)
    }

    pub fn coeff(&self) -> &BigRational {
        &self.coeff
    }

    pub fn factors(&self) -> &[(BigRational, Exponent)] {
        &self.factors
    }

    /// The exact rational value, when no irrational factor remains.
    pub fn as_rational(&self) -> Option<&BigRational> {
        self.factors.is_empty().then_some(&self.coeff)
    }

    fn push_factor(&mut self, base: BigRational, e: Exponent) {
        assert!(base.is_positive(), "power base must be positive");
        if e.is_zero() || base.is_one() {
            return;
        }
        if arith::is_integer(&e) {
            self.coeff *= pow_rat(&base, *e.numer());
            return;
        }
        let (base, e) = reduce_root(base, e);
        if arith::is_integer(&e) {
            self.coeff *= pow_rat(&base, *e.numer());
            return;
        }
        match self.factors.binary_search_by(|(b, _)| b.cmp(&base)) {
            Ok(idx) => {
                let merged = self.factors[idx].1 + e;
                self.factors.remove(idx);
                if !merged.is_zero() {
                    self.push_factor(base, merged);
                }
            }
            Err(idx) => self.factors.insert(idx, (base, e)),
        }
    }

    pub fn mul(&self, other: &PowerProduct) -> PowerProduct {
        let mut out = self.clone();
        out.coeff *= &other.coeff;
        for (b, e) in &other.factors {
            out.push_factor(b.clone(), *e);
        }
        out
    }

    pub fn mul_rational(&self, r: &BigRational) -> PowerProduct {
        assert!(r.is_positive());
        let mut out = self.clone();
        out.coeff *= r;
        out
    }

    pub fn recip(&self) -> PowerProduct {
        PowerProduct {
            coeff: self.coeff.recip(),
            factors: self.factors.iter().map(|(b, e)| (b.clone(), -*e)).collect(),
        }
    }

    pub fn div(&self, other: &PowerProduct) -> PowerProduct {
        self.mul(&other.recip())
    }

    /// `self^e`.
    pub fn pow(&self, e: Exponent) -> PowerProduct {
        let mut out = PowerProduct::one();
        out.push_factor(self.coeff.clone(), e);
        for (b, x) in &self.factors {
            out.push_factor(b.clone(), *x * e);
        }
        out
    }

    /// Exact ordering of two power products.
    pub fn cmp_exact(&self, other: &PowerProduct) -> Ordering {
        if let (Some(a), Some(b)) = (self.as_rational(), other.as_rational()) {
            return a.cmp(b);
        }
        let q = self.div(other);
        q.cmp_one()
    }

    fn cmp_one(&self) -> Ordering {
        let l = arith::lcm_denoms(self.factors.iter().map(|(_, e)| e));
        let mut num = BigUint::one();
        let mut den = BigUint::one();
        let mut absorb = |b: &BigRational, e: i64| {
            let n = b.numer().magnitude();
            let d = b.denom().magnitude();
            let k = e.unsigned_abs();
            if e > 0 {
                num *= Pow::pow(n, k);
                den *= Pow::pow(d, k);
            } else if e < 0 {
                num *= Pow::pow(d, k);
                den *= Pow::pow(n, k);
            }
        };
        absorb(&self.coeff, l);
        for (b, e) in &self.factors {
            let scaled = *e * Exponent::from_integer(l);
            debug_assert!(arith::is_integer(&scaled));
            absorb(b, *scaled.numer());
        }
        num.cmp(&den)
    }

    /// Approximate natural logarithm; never used to decide anything.
    pub fn ln(&self) -> f64 {
        let mut acc = arith::ln_rat(&self.coeff);
        for (b, e) in &self.factors {
            acc += arith::ln_rat(b) * (*e.numer() as f64 / *e.denom() as f64);
        }
        acc
    }

    pub fn log2(&self) -> f64 {
        self.ln() / std::f64::consts::LN_2
    }

    pub fn to_f64(&self) -> f64 {
        self.ln().exp()
    }

    /// A rigorous enclosure with relative width about `2^-bits`.
    pub fn bracket(&self, bits: u32) -> Bracket {
        let mut lo = self.coeff.clone();
        let mut hi = self.coeff.clone();
        for (b, e) in &self.factors {
            let (flo, fhi) = root_bracket(b, *e, bits + 4);
            lo *= flo;
            hi *= fhi;
        }
        Bracket::new(lo, hi)
    }

    /// `[floor(v * 2^scale), ceil(v * 2^scale)]` as integers, outward rounded.
    pub fn fixed_bracket(&self, scale: u64) -> (BigUint, BigUint) {
        let need = (scale as i64 - self.log2().floor() as i64).clamp(8, i64::MAX) as u32 + 8;
        let b = self.bracket(need);
        (arith::floor_scaled(&b.lo, scale), arith::ceil_scaled(&b.hi, scale))
    }
}

impl fmt::Display for PowerProduct {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", arith::fmt_rat(&self.coeff))?;
        for (b, e) in &self.factors {
            write!(f, " * ({})^({})", arith::fmt_rat(b), arith::fmt_exp(e))?;
        }
        Ok(())
    }
}

/// A non-negative value that may be symbolic: zero or a power product.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Value {
    Zero,
    Pos(PowerProduct),
}

impl Value {
    pub fn rational(r: BigRational) -> Value {
        if r.is_zero() {
            Value::Zero
        } else {
            Value::Pos(PowerProduct::rational(r))
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Value::Zero)
    }

    pub fn positive(&self) -> Option<&PowerProduct> {
        match self {
            Value::Zero => None,
            Value::Pos(p) => Some(p),
        }
    }

    /// `self^e` for `e > 0`.
    pub fn pow(&self, e: Exponent) -> Value {
        assert!(e.is_positive(), "only positive powers of possibly-zero values");
        match self {
            Value::Zero => Value::Zero,
            Value::Pos(p) => Value::Pos(p.pow(e)),
        }
    }

    pub fn mul(&self, other: &Value) -> Value {
        match (self, other) {
            (Value::Pos(a), Value::Pos(b)) => Value::Pos(a.mul(b)),
            _ => Value::Zero,
        }
    }

    pub fn mul_rational(&self, r: &BigRational) -> Value {
        match self {
            Value::Pos(p) if r.is_positive() => Value::Pos(p.mul_rational(r)),
            _ => Value::Zero,
        }
    }

    pub fn as_rational(&self) -> Option<BigRational> {
        match self {
            Value::Zero => Some(BigRational::zero()),
            Value::Pos(p) => p.as_rational().cloned(),
        }
    }

    pub fn cmp_exact(&self, other: &Value) -> Ordering {
        match (self, other) {
            (Value::Zero, Value::Zero) => Ordering::Equal,
            (Value::Zero, Value::Pos(_)) => Ordering::Less,
            (Value::Pos(_), Value::Zero) => Ordering::Greater,
            (Value::Pos(a), Value::Pos(b)) => a.cmp_exact(b),
        }
    }

    pub fn bracket(&self, bits: u32) -> Bracket {
        match self {
            Value::Zero => Bracket::zero(),
            Value::Pos(p) => p.bracket(bits),
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Value::Zero => 0.0,
            Value::Pos(p) => p.to_f64(),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Zero => write!(f, "0"),
            Value::Pos(p) => write!(f, "{p}"),
        }
    }
}

/// Exact ordering of `a` against `b^e` for positive rationals `a`, `b`.
pub fn compare_power(a: &BigRational, b: &BigRational, e: Exponent) -> Ordering {
    assert!(a.is_positive() && b.is_positive(), "compare_power needs a, b > 0");
    PowerProduct::rational(a.clone()).cmp_exact(&PowerProduct::power(b.clone(), e))
}

fn pow_rat(b: &BigRational, e: i64) -> BigRational {
    let k = e.unsigned_abs();
    // Powers of a reduced fraction stay reduced, so skip another gcd.
    let p = BigRational::new_raw(
        Pow::pow(b.numer().clone(), k),
        Pow::pow(b.denom().clone(), k),
    );
    if e < 0 {
        p.recip()
    } else {
        p
    }
}

/// Rewrites `base^(u/v)` as `root^(u d / v)` for the largest `d | v` such that
/// `base` is a perfect `d`-th power.
fn reduce_root(base: BigRational, e: Exponent) -> (BigRational, Exponent) {
    let v = *e.denom();
    let mut d = v;
    while d > 1 {
        if v % d == 0 {
            let n = arith::exact_root(base.numer().magnitude(), d as u32);
            let m = arith::exact_root(base.denom().magnitude(), d as u32);
            if let (Some(n), Some(m)) = (n, m) {
                let root = BigRational::new(BigInt::from(n), BigInt::from(m));
                return (root, e * Exponent::from_integer(d));
            }
        }
        d -= 1;
    }
    (base, e)
}

/// Dyadic enclosure of `b^(u/v)` with at least `bits` significant bits.
fn root_bracket(b: &BigRational, e: Exponent, bits: u32) -> (BigRational, BigRational) {
    let (u, v) = (*e.numer(), *e.denom());
    let base = if u < 0 { b.recip() } else { b.clone() };
    let powered = pow_rat(&base, u.abs());
    let approx_log2 = arith::ln_rat(&powered) / std::f64::consts::LN_2 / v as f64;
    let scale = (bits as i64 - approx_log2.floor() as i64).max(2) as u64;
    let x = arith::floor_scaled(&powered, scale * v as u64);
    let r = num_integer::Roots::nth_root(&x, v as u32);
    let exact = !x.is_zero()
        && Pow::pow(&r, v as u32) == x
        && (powered.numer().magnitude() << (scale * v as u64)) % powered.denom().magnitude()
            == BigUint::zero();
    let lo = arith::dyadic(r.clone(), scale);
    let hi = if exact { lo.clone() } else { arith::dyadic(r + 1u32, scale) };
    (lo, hi)
}
