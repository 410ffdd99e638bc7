//! Integer helpers shared by the exact-arithmetic code paths: logarithms of
//! big numbers, integer roots, a small prime sieve and Euler's totient.

use num_bigint::{BigInt, BigUint};
use num_integer::{Integer, Roots};
use num_rational::{BigRational, Ratio};
use num_traits::{One, Signed, ToPrimitive, Zero};

pub type Exponent = Ratio<i64>;

pub fn big(n: u64) -> BigUint {
    BigUint::from(n)
}

pub fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

pub fn rat_from_uint(n: &BigUint) -> BigRational {
    BigRational::from_integer(BigInt::from(n.clone()))
}

pub fn exp(n: i64, d: i64) -> Exponent {
    Exponent::new(n, d)
}

/// Natural logarithm of a positive big integer, accurate to f64 precision.
pub fn ln_uint(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits == 0 {
        return f64::NEG_INFINITY;
    }
    let shift = bits.saturating_sub(64);
    let top = (x >> shift).to_f64().unwrap_or(f64::MAX);
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

pub fn ln_int(x: &BigInt) -> f64 {
    ln_uint(x.magnitude())
}

/// Natural logarithm of a positive rational.
pub fn ln_rat(x: &BigRational) -> f64 {
    ln_int(x.numer()) - ln_int(x.denom())
}

pub fn rat_to_f64(x: &BigRational) -> f64 {
    if x.is_zero() {
        return 0.0;
    }
    let (n, d) = (x.numer().magnitude(), x.denom().magnitude());
    // Quotient with 64 significant bits, then rescale.
    let shift = 64 + d.bits() as i64 - n.bits() as i64;
    let q = if shift >= 0 { (n << shift as u64) / d } else { n / (d << (-shift) as u64) };
    let v = q.to_f64().unwrap_or(f64::INFINITY) * pow2_f64(-shift);
    if x.is_negative() {
        -v
    } else {
        v
    }
}

/// `2^e` as an `f64`, saturating to zero or infinity.
fn pow2_f64(e: i64) -> f64 {
    if e > 1023 {
        f64::INFINITY
    } else if e < -1074 {
        0.0
    } else if e < -1022 {
        f64::from_bits(1u64 << (e + 1074))
    } else {
        f64::from_bits(((e + 1023) as u64) << 52)
    }
}

/// Exact `v`-th root of `x` when `x` is a perfect power.
pub fn exact_root(x: &BigUint, v: u32) -> Option<BigUint> {
    if v == 1 {
        return Some(x.clone());
    }
    let r = x.nth_root(v);
    if r.pow(v) == *x {
        Some(r)
    } else {
        None
    }
}

/// `floor(numer / denom * 2^scale)` for non-negative rationals.
pub fn floor_scaled(x: &BigRational, scale: u64) -> BigUint {
    let n = x.numer().magnitude() << scale;
    n / x.denom().magnitude()
}

/// `ceil(numer / denom * 2^scale)` for non-negative rationals.
pub fn ceil_scaled(x: &BigRational, scale: u64) -> BigUint {
    let n = x.numer().magnitude() << scale;
    let (q, r) = n.div_rem(x.denom().magnitude());
    if r.is_zero() {
        q
    } else {
        q + 1u32
    }
}

pub fn dyadic(n: BigUint, scale: u64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::one() << scale)
}

/// `n / d` for a small numerator, reduced with a single remainder instead of
/// a binary gcd over the full width of `d`.
pub fn rat_small_num(n: u64, d: &BigUint) -> BigRational {
    assert!(n > 0 && !d.is_zero());
    let g = n.gcd(&(d % n).to_u64().expect("remainder below n"));
    BigRational::new_raw(BigInt::from(n / g), BigInt::from(d / g))
}

/// Balanced product tree; far faster than a running product for many terms.
pub fn product_u64(xs: &[u64]) -> BigUint {
    const LEAF: usize = 32;
    if xs.len() <= LEAF {
        return xs.iter().fold(BigUint::one(), |acc, &x| acc * x);
    }
    let (a, b) = xs.split_at(xs.len() / 2);
    product_u64(a) * product_u64(b)
}

/// Number of decimal digits of `x` (1 for zero).
pub fn decimal_digits(x: &BigUint) -> u64 {
    if x.is_zero() {
        return 1;
    }
    let bits = x.bits();
    let mut d = ((bits - 1) as f64 * std::f64::consts::LOG10_2).floor() as u64 + 1;
    while *x >= num_traits::Pow::pow(BigUint::from(10u32), d) {
        d += 1;
    }
    while d > 1 && *x < num_traits::Pow::pow(BigUint::from(10u32), d - 1) {
        d -= 1;
    }
    d
}

/// All primes up to and including `limit`.
pub fn primes_up_to(limit: u64) -> Vec<u64> {
    if limit < 2 {
        return Vec::new();
    }
    let n = limit as usize;
    let mut composite = vec![false; n + 1];
    let mut out = Vec::new();
    for p in 2..=n {
        if composite[p] {
            continue;
        }
        out.push(p as u64);
        let mut m = p.saturating_mul(p);
        while m <= n {
            composite[m] = true;
            m += p;
        }
    }
    out
}

/// Distinct prime factors of `n` by trial division.
pub fn prime_factors(mut n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut p = 2u64;
    while p * p <= n {
        if n.is_multiple_of(p) {
            out.push(p);
            while n.is_multiple_of(p) {
                n /= p;
            }
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if n > 1 {
        out.push(n);
    }
    out
}

/// Euler's totient by trial division against a cached prime list.
#[derive(Debug, Clone)]
pub struct Totient {
    primes: Vec<u64>,
    limit: u64,
}

impl Totient {
    /// A totient evaluator valid for arguments up to `max_arg`.
    pub fn new(max_arg: u64) -> Self {
        let limit = max_arg.sqrt() + 1;
        Totient {
            primes: primes_up_to(limit),
            limit: limit * limit,
        }
    }

    pub fn phi(&self, n: u64) -> u64 {
        assert!(n <= self.limit, "totient argument {n} beyond prime cache");
        if n == 0 {
            return 0;
        }
        let mut rest = n;
        let mut phi = n;
        for &p in &self.primes {
            if p * p > rest {
                break;
            }
            if rest.is_multiple_of(p) {
                phi = phi / p * (p - 1);
                while rest.is_multiple_of(p) {
                    rest /= p;
                }
            }
        }
        if rest > 1 {
            phi = phi / rest * (rest - 1);
        }
        phi
    }
}

/// Least common multiple of exponent denominators.
pub fn lcm_denoms<'a>(exps: impl IntoIterator<Item = &'a Exponent>) -> i64 {
    exps.into_iter().fold(1i64, |acc, e| acc.lcm(e.denom()))
}

pub fn is_integer(e: &Exponent) -> bool {
    *e.denom() == 1
}

/// Parses `"a/b"` or `"a"` into a big rational.
pub fn parse_rational(s: &str) -> Option<BigRational> {
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().ok()?;
        let d: BigInt = d.trim().parse().ok()?;
        if d.is_zero() {
            return None;
        }
        Some(BigRational::new(n, d))
    } else {
        let n: BigInt = s.parse().ok()?;
        Some(BigRational::from_integer(n))
    }
}

pub fn parse_exponent(s: &str) -> Option<Exponent> {
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n: i64 = n.trim().parse().ok()?;
        let d: i64 = d.trim().parse().ok()?;
        if d == 0 {
            return None;
        }
        Some(Exponent::new(n, d))
    } else {
        Some(Exponent::from_integer(s.parse().ok()?))
    }
}

/// `"num/den"` rendering used in every report.
pub fn fmt_rat(x: &BigRational) -> String {
    format!("{}/{}", x.numer(), x.denom())
}

pub fn fmt_exp(x: &Exponent) -> String {
    format!("{}/{}", x.numer(), x.denom())
}
