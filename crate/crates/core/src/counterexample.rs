//! Blocks of a non-monotone approximating function whose restricted sum
//! exceeds 1 while the points they approximate form a set of measure `2 alpha`,
//! and the stitched function assembled from such blocks.
//!
//! A block over the primes `p_1 < ... < p_s` is supported on `n_K d` for the
//! divisors `d > 1` of `M' = p_1 ... p_s`, with `psi(n_K d)^j = alpha d / M'`.
//! Realistic blocks carry integers of millions of bits, so everything here is
//! done with integer cross-multiplication; no big gcd is ever taken.

use std::sync::Arc;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Pow, ToPrimitive, Zero};

use crate::approxfn::{ApproximatingFunction, WeightPair};
use crate::arith::{self, Exponent};
use crate::dadic::DadicSequence;
use crate::error::{Error, Result};
use crate::power::{PowerProduct, Value};
use crate::sets;

/// Primes are sieved at most up to this bound.
pub const PRIME_LIMIT: u64 = 1 << 25;

/// Reduced fractions are shown in full only below this many bits.
const REDUCE_BITS: u64 = 1 << 14;

#[derive(Debug, Clone)]
pub struct CounterexampleBlock {
    pub seq: DadicSequence,
    pub w: WeightPair,
    pub r: BigUint,
    pub eps: BigRational,
    pub alpha: BigRational,
    pub primes: Vec<u64>,
    pub k: usize,
    pub n_k: BigUint,
    /// `M' = p_1 ... p_s`.
    pub m_prime: BigUint,
    /// `N = n_K M'`.
    pub n: BigUint,
    /// `prod (1 + p_t)`.
    prod_plus: BigUint,
}

/// An exact non-negative fraction kept unreduced when its parts are huge.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fraction {
    pub num: BigUint,
    pub den: BigUint,
}

impl Fraction {
    fn new(num: BigUint, den: BigUint) -> Self {
        if num.bits().max(den.bits()) <= REDUCE_BITS {
            let g = num.gcd(&den);
            Fraction { num: num / &g, den: den / g }
        } else {
            Fraction { num, den }
        }
    }

    pub fn exceeds(&self, n: u64) -> bool {
        self.num > &self.den * n
    }

    pub fn add(&self, other: &Fraction) -> Fraction {
        Fraction::new(&self.num * &other.den + &other.num * &self.den, &self.den * &other.den)
    }

    pub fn to_rational(&self) -> BigRational {
        BigRational::new_raw(BigInt::from(self.num.clone()), BigInt::from(self.den.clone()))
    }

    /// `[floor(x 2^bits), ceil(x 2^bits)] / 2^bits`.
    pub fn dyadic_bracket(&self, bits: u64) -> (BigRational, BigRational) {
        let (q, r) = (&self.num << bits).div_rem(&self.den);
        let hi = if r.is_zero() { q.clone() } else { &q + 1u32 };
        (arith::dyadic(q, bits), arith::dyadic(hi, bits))
    }

    pub fn is_reduced_form(&self) -> bool {
        self.num.bits().max(self.den.bits()) <= REDUCE_BITS
    }

    pub fn to_f64(&self) -> f64 {
        (arith::ln_uint(&self.num) - arith::ln_uint(&self.den)).exp()
    }
}

/// The simplest rational in `[2 eps / 5, eps / 2)`.
pub fn choose_alpha(eps: &BigRational) -> BigRational {
    let lo = eps * arith::rat(2, 5);
    let hi = eps * arith::rat(1, 2);
    let mut d = BigInt::one();
    loop {
        let n = (&lo * &d).ceil().to_integer();
        let cand = BigRational::new(n, d.clone());
        if cand < hi && cand > BigRational::zero() {
            return cand;
        }
        d += 1;
    }
}

impl CounterexampleBlock {
    /// The block with consecutive primes above `max(M, R)`.
    pub fn build(seq: &DadicSequence, w: &WeightPair, r: &BigUint, eps: &BigRational) -> Result<Self> {
        check_eps(eps)?;
        let m = seq.bound()?;
        let floor = BigUint::from(m).max(r.clone());
        let start = floor.to_u64().filter(|&f| f < PRIME_LIMIT).ok_or_else(|| {
            Error::ResourceLimit(format!("primes above R = {r} exceed the sieve bound {PRIME_LIMIT}"))
        })?;
        let alpha = choose_alpha(eps);
        let primes = choose_primes(start, &alpha)?;
        Self::assemble(seq, w, r, eps, alpha, primes, &BigUint::zero())
    }

    /// As [`build`](Self::build), but with primes above `M` only and `K` also
    /// forced to satisfy `n_K >= R`, so that the support still lies above `R`.
    pub fn build_deep(seq: &DadicSequence, w: &WeightPair, r: &BigUint, eps: &BigRational) -> Result<Self> {
        check_eps(eps)?;
        let m = seq.bound()?;
        let alpha = choose_alpha(eps);
        let primes = choose_primes(m, &alpha)?;
        Self::assemble(seq, w, r, eps, alpha, primes, r)
    }

    /// A block over explicitly chosen primes, without the product condition.
    /// Used for small siblings whose intervals can be enumerated.
    pub fn with_primes(seq: &DadicSequence, w: &WeightPair, alpha: BigRational, primes: Vec<u64>) -> Result<Self> {
        let m = seq.bound()?;
        if primes.iter().any(|&p| p <= m || arith::prime_factors(p) != [p]) {
            return Err(Error::Precondition("block primes must be primes above M".into()));
        }
        let eps = &alpha * arith::rat(5, 2);
        Self::assemble(seq, w, &BigUint::one(), &eps, alpha, primes, &BigUint::zero())
    }

    fn assemble(
        seq: &DadicSequence,
        w: &WeightPair,
        r: &BigUint,
        eps: &BigRational,
        alpha: BigRational,
        primes: Vec<u64>,
        min_element: &BigUint,
    ) -> Result<Self> {
        let m_prime = arith::product_u64(&primes);
        let plus: Vec<u64> = primes.iter().map(|p| p + 1).collect();
        let prod_plus = arith::product_u64(&plus);
        let k = min_level(seq, w, &m_prime, &alpha, min_element)?;
        let n_k = seq.element(k)?;
        let n = &n_k * &m_prime;
        Ok(CounterexampleBlock {
            seq: seq.clone(),
            w: *w,
            r: r.clone(),
            eps: eps.clone(),
            alpha,
            primes,
            k,
            n_k,
            m_prime,
            n,
            prod_plus,
        })
    }

    pub fn s(&self) -> usize {
        self.primes.len()
    }

    pub fn largest_prime(&self) -> u64 {
        *self.primes.last().expect("blocks have at least one prime")
    }

    fn alpha_parts(&self) -> (u64, BigUint) {
        let n = self.alpha.numer().to_u64().expect("alpha numerator is small");
        let d = self.alpha.denom().magnitude().clone();
        (n, d)
    }

    /// `d = q / n_K` when `q` is a support point.
    fn cofactor(&self, q: &BigUint) -> Option<BigUint> {
        if q <= &self.n_k || q > &self.n {
            return None;
        }
        let (d, rem) = q.div_rem(&self.n_k);
        if !rem.is_zero() || !(&self.m_prime % &d).is_zero() {
            return None;
        }
        Some(d)
    }

    /// `psi(q)^j = alpha d / M'` on the support (exact, small-gcd reduced).
    pub fn psi_j(&self, q: &BigUint) -> Option<BigRational> {
        let d = self.cofactor(q)?;
        let c = &self.m_prime / &d;
        let (an, ad) = self.alpha_parts();
        Some(arith::rat_small_num(an, &(ad * c)))
    }

    pub fn psi(&self, q: &BigUint) -> Value {
        match self.psi_j(q) {
            Some(b) => Value::Pos(PowerProduct::power(b, self.w.j().recip())),
            None => Value::Zero,
        }
    }

    /// `psi(q)^j / q = alpha / N` at every support point.
    pub fn radius(&self) -> BigRational {
        let (an, ad) = self.alpha_parts();
        arith::rat_small_num(an, &(ad * &self.n))
    }

    /// Whether `q` is a support point and `|q|_D < psi(q)^i`, the latter
    /// decided by integer comparison.
    pub fn in_a(&self, q: &BigUint) -> bool {
        let Some(d) = self.cofactor(q) else { return false };
        let c = &self.m_prime / &d;
        // 1/n_w < (alpha_n / (alpha_d c))^(a/b) with a/b = i/j.
        let e = self.w.i() / self.w.j();
        let (a, b) = (*e.numer() as u32, *e.denom() as u32);
        let (an, ad) = self.alpha_parts();
        let nw = self.seq.element(self.seq.pav_index(q)).expect("pav index is valid");
        Pow::pow(ad * c, a) < Pow::pow(BigUint::from(an), a) * Pow::pow(nw, b)
    }

    /// Structural membership (`n_K | q`, `q | N`, `q != n_K`), checked against
    /// the exact inequality chain.
    pub fn membership(&self, q: &BigUint) -> Result<bool> {
        let structural = self.cofactor(q).is_some();
        if structural {
            if !self.in_a(q) {
                return Err(Error::Invariant(format!("support point {q} fails |q|_D < psi^i(q)")));
            }
            // |q|_D <= 1/n_K <= (alpha/M')^(i/j).
            let e = self.w.i() / self.w.j();
            let (a, b) = (*e.numer() as u32, *e.denom() as u32);
            let (an, ad) = self.alpha_parts();
            let lhs = Pow::pow(&self.m_prime * ad, a);
            let rhs = Pow::pow(BigUint::from(an), a) * Pow::pow(self.n_k.clone(), b);
            if lhs > rhs || self.seq.pav_index(q) < self.k {
                return Err(Error::Invariant(format!("chain fails at {q}")));
            }
        }
        Ok(structural)
    }

    /// `prod (1 + 1/p_t) > 1 + 1/alpha`, exactly.
    pub fn product_condition(&self) -> bool {
        let (an, ad) = self.alpha_parts();
        &self.prod_plus * an > &self.m_prime * (ad + an)
    }

    /// `(alpha / M') (prod (1 + p_t) - 1)`.
    pub fn block_sum(&self) -> Fraction {
        let (an, ad) = self.alpha_parts();
        Fraction::new((&self.prod_plus - 1u32) * an, ad * &self.m_prime)
    }

    /// The block sum together with its two defining inequalities.
    pub fn checked_block_sum(&self) -> Result<Fraction> {
        let sum = self.block_sum();
        if !sum.exceeds(1) {
            return Err(Error::Invariant("block sum does not exceed 1".into()));
        }
        // alpha (prod(1 + 1/p) - 1) = alpha (P+ - M') / M'.
        let (an, ad) = self.alpha_parts();
        let lower = Fraction::new((&self.prod_plus - &self.m_prime) * an, ad * &self.m_prime);
        if sum.num.clone() * &lower.den <= &lower.num * &sum.den {
            return Err(Error::Invariant("block sum is not above alpha (prod - 1)".into()));
        }
        Ok(sum)
    }

    /// Support points in `(lo, hi]`, increasing.
    pub fn support_in(&self, lo: &BigUint, hi: &BigUint, cap: usize) -> Result<Vec<BigUint>> {
        let top = hi.min(&self.n).clone() / &self.n_k;
        let mut ds = Vec::new();
        divisors_up_to(&self.primes, 0, BigUint::one(), &top, &mut ds, cap)?;
        let mut out: Vec<BigUint> = ds
            .into_iter()
            .filter(|d| !d.is_one())
            .map(|d| d * &self.n_k)
            .filter(|q| q > lo)
            .collect();
        out.sort();
        Ok(out)
    }

    /// `lambda(A_N) = 2 alpha`, after checking that the construction's
    /// intervals do not overlap on a small sibling block.
    pub fn bad_measure(&self) -> Result<BigRational> {
        let two_alpha = &self.alpha * arith::rat(2, 1);
        if two_alpha >= self.eps {
            return Err(Error::Invariant("2 alpha is not below eps".into()));
        }
        let sibling = self.sibling()?;
        let measure = sibling.exact_union_measure()?;
        if measure != two_alpha {
            return Err(Error::Precondition(format!(
                "eps too large: sibling union measure {} differs from 2 alpha",
                arith::fmt_rat(&measure)
            )));
        }
        Ok(two_alpha)
    }

    /// The same `alpha` and weights over the three smallest admissible primes.
    pub fn sibling(&self) -> Result<CounterexampleBlock> {
        let m = self.seq.bound()?;
        let primes: Vec<u64> = arith::primes_up_to(m + 64).into_iter().filter(|&p| p > m).take(3).collect();
        CounterexampleBlock::with_primes(&self.seq, &self.w, self.alpha.clone(), primes)
    }

    /// Exact measure of the union of `B(p/q, psi^j(q)/q)` over the support.
    /// Only feasible for small blocks.
    pub fn exact_union_measure(&self) -> Result<BigRational> {
        let cap = 1 << 16;
        let support = self.support_in(&BigUint::zero(), &self.n, cap)?;
        let r = self.radius();
        let mut centers = Vec::new();
        for q in &support {
            let q = q
                .to_u64()
                .filter(|&q| q <= sets::DEFAULT_CAP)
                .ok_or_else(|| Error::ResourceLimit("sibling denominators too large".into()))?;
            centers.push(q);
        }
        let union = sets::IntervalUnion::from_rational_balls(&centers, |_| r.clone())?;
        Ok(union.measure().lo)
    }
}

fn check_eps(eps: &BigRational) -> Result<()> {
    if *eps <= BigRational::zero() || *eps > BigRational::one() {
        return Err(Error::Precondition("eps must lie in (0, 1]".into()));
    }
    Ok(())
}

/// The fewest consecutive primes above `start` with
/// `prod (1 + 1/p) > 1 + 1/alpha`.
fn choose_primes(start: u64, alpha: &BigRational) -> Result<Vec<u64>> {
    let target_ln = (1.0 + 1.0 / arith::rat_to_f64(alpha)).ln();
    let mut limit = (start + 2).max(1 << 10).next_power_of_two();
    let (primes, s_est) = loop {
        let primes: Vec<u64> = arith::primes_up_to(limit).into_iter().filter(|&p| p > start).collect();
        let mut acc = 0.0;
        let found = primes.iter().position(|&p| {
            acc += (1.0 + 1.0 / p as f64).ln();
            acc > target_ln + 1e-9
        });
        match found {
            Some(idx) => break (primes, idx + 1),
            None if limit >= PRIME_LIMIT => {
                return Err(Error::ResourceLimit(format!(
                    "prod (1 + 1/p) over primes in ({start}, {PRIME_LIMIT}] is about {:.4}, \
                     short of 1 + 1/alpha = {:.4}",
                    acc.exp(),
                    target_ln.exp()
                )))
            }
            None => limit = (limit * 4).min(PRIME_LIMIT),
        }
    };
    // Settle the floating estimate exactly, moving by single primes.
    let (an, ad) = (
        alpha.numer().magnitude().clone(),
        alpha.denom().magnitude().clone(),
    );
    let holds = |s: usize| -> bool {
        let ps = &primes[..s];
        let plus: Vec<u64> = ps.iter().map(|p| p + 1).collect();
        arith::product_u64(&plus) * &an > arith::product_u64(ps) * (&ad + &an)
    };
    let mut s = s_est;
    while s < primes.len() && !holds(s) {
        s += 1;
    }
    if !holds(s) {
        return Err(Error::ResourceLimit("product condition unmet within the sieve".into()));
    }
    while s > 1 && holds(s - 1) {
        s -= 1;
    }
    Ok(primes[..s].to_vec())
}

/// `min { k : n_k >= (M'/alpha)^(i/j), n_k >= floor }`.
fn min_level(seq: &DadicSequence, w: &WeightPair, m_prime: &BigUint, alpha: &BigRational, floor: &BigUint) -> Result<usize> {
    let e: Exponent = w.i() / w.j();
    let (a, b) = (*e.numer() as u32, *e.denom() as u32);
    let an = alpha.numer().magnitude().clone();
    let ad = alpha.denom().magnitude().clone();
    let rhs = Pow::pow(m_prime * &ad, a);
    let an_a = Pow::pow(an.clone(), a);
    let ok = |k: usize| -> Result<bool> {
        let n = seq.element(k)?;
        Ok(n >= *floor && Pow::pow(n, b) * &an_a >= rhs)
    };
    // Start a little below the target size and walk upward.
    let target_bits = (arith::ln_uint(m_prime) + arith::ln_uint(&ad) - arith::ln_uint(&an))
        / std::f64::consts::LN_2
        * (a as f64 / b as f64);
    let guess_bits = (target_bits.max(floor.bits() as f64) - 4.0).max(0.0) as u64;
    let mut k = seq.first_index_at_least(&(BigUint::one() << guess_bits))?;
    while k > 0 && ok(k - 1)? {
        k -= 1;
    }
    while !ok(k)? {
        k += 1;
    }
    Ok(k.max(1))
}

fn divisors_up_to(primes: &[u64], from: usize, acc: BigUint, top: &BigUint, out: &mut Vec<BigUint>, cap: usize) -> Result<()> {
    if out.len() >= cap {
        return Err(Error::CapExceeded {
            what: "block support points",
            value: format!("> {cap}"),
            cap: cap.to_string(),
        });
    }
    out.push(acc.clone());
    for (idx, &p) in primes.iter().enumerate().skip(from) {
        let next = &acc * p;
        if next > *top {
            break;
        }
        divisors_up_to(primes, idx + 1, next, top, out, cap)?;
    }
    Ok(())
}

/// The stitched function `Psi`, equal to block `t` on `(R_t, R_{t+1}]`.
#[derive(Debug, Clone)]
pub struct StitchedPsi {
    pub blocks: Vec<Arc<CounterexampleBlock>>,
    /// `R_1 = 1 < R_2 < ... < R_{T+1}`.
    pub thresholds: Vec<BigUint>,
    pub epsilons: Vec<BigRational>,
}

/// `eps_1 = eps_2 = 1/4`, then `eps_t = 2^-t`.
pub fn stitch_eps(t: usize) -> BigRational {
    let e = t.max(2) as u32;
    BigRational::new(BigInt::one(), BigInt::one() << e)
}

pub fn stitch(seq: &DadicSequence, w: &WeightPair, t_max: usize) -> Result<StitchedPsi> {
    if t_max == 0 {
        return Err(Error::Precondition("at least one block".into()));
    }
    let mut blocks = Vec::new();
    let mut thresholds = vec![BigUint::one()];
    let mut epsilons = Vec::new();
    for t in 1..=t_max {
        let eps = stitch_eps(t);
        let r = thresholds.last().expect("nonempty").clone();
        let b = CounterexampleBlock::build_deep(seq, w, &r, &eps)?;
        thresholds.push(b.n.clone());
        epsilons.push(eps);
        blocks.push(Arc::new(b));
    }
    Ok(StitchedPsi {
        blocks,
        thresholds,
        epsilons,
    })
}

impl StitchedPsi {
    fn band(&self, q: &BigUint) -> Option<usize> {
        let t = self.thresholds.partition_point(|r| r < q);
        // q <= R_2 belongs to block 1, including q = 1.
        let t = t.max(1);
        (t <= self.blocks.len()).then(|| t - 1)
    }

    pub fn psi(&self, q: &BigUint) -> Value {
        self.band(q).map_or(Value::Zero, |t| self.blocks[t].psi(q))
    }

    pub fn in_a(&self, q: &BigUint) -> bool {
        self.band(q).is_some_and(|t| self.blocks[t].in_a(q))
    }

    pub fn radius_at(&self, q: &BigUint) -> Option<BigRational> {
        let t = self.band(q)?;
        self.blocks[t].cofactor(q).map(|_| self.blocks[t].radius())
    }

    pub fn support_in(&self, lo: &BigUint, hi: &BigUint, cap: usize) -> Result<Vec<BigUint>> {
        let mut out = Vec::new();
        for (t, b) in self.blocks.iter().enumerate() {
            let band_lo = lo.max(&self.thresholds[t]).clone();
            let band_hi = hi.min(&self.thresholds[t + 1]).clone();
            if band_lo < band_hi {
                out.extend(b.support_in(&band_lo, &band_hi, cap)?);
            }
        }
        Ok(out)
    }

    /// Sum of the block sums; the supports are disjoint.
    pub fn cumulative_sum(&self) -> Result<Fraction> {
        let mut total = Fraction::new(BigUint::zero(), BigUint::one());
        for b in &self.blocks {
            total = total.add(&b.checked_block_sum()?);
        }
        Ok(total)
    }

    /// Measure bound for the points approximated beyond `R_t`: the exact bad
    /// measures of blocks `t..T` plus `2^-T` for every later block.
    pub fn tail_bound(&self, t: usize) -> Result<BigRational> {
        assert!(t >= 1 && t <= self.blocks.len());
        let mut acc = BigRational::new(BigInt::one(), BigInt::one() << self.blocks.len());
        for b in &self.blocks[t - 1..] {
            acc += &b.alpha * arith::rat(2, 1);
        }
        Ok(acc)
    }

    pub fn approximating_function(self: &Arc<Self>) -> ApproximatingFunction {
        ApproximatingFunction::stitched(self.clone())
    }
}
