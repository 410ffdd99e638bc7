//! Pseudo-absolute value sequences `1 = n_0 | n_1 | n_2 | ...` and the
//! induced value `|q|_D = 1 / n_w` where `n_w` is the largest element
//! dividing `q`.
//!
//! A sequence is given by a ratio rule. Cycled ratio lists make the bound on
//! `n_{k+1} / n_k` exact for every `k`; explicit prefixes are finite; the
//! growing rule `first, first + 1, ...` has unbounded ratios and exists to
//! exercise the bounded-ratio requirement of the metric theory.

use std::fmt;
use std::sync::{Arc, RwLock};

use num_bigint::BigUint;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Pow, ToPrimitive, Zero};

use crate::arith;
use crate::error::{Error, Result};

/// Elements with index below this are memoised.
const CACHE_LIMIT: usize = 4096;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RatioRule {
    /// Ratios `c_0, c_1, ..., c_{L-1}` repeated forever.
    Cycle(Vec<u64>),
    /// The explicit elements `n_0, ..., n_H`.
    Prefix(Vec<BigUint>),
    /// Ratios `first, first + 1, first + 2, ...`.
    Growing { first: u64 },
}

#[derive(Debug)]
struct Inner {
    rule: RatioRule,
    declared_bound: Option<u64>,
    cache: RwLock<Vec<BigUint>>,
}

/// A D-adic sequence. Cloning is cheap; the element cache is shared.
#[derive(Debug, Clone)]
pub struct DadicSequence(Arc<Inner>);

impl PartialEq for DadicSequence {
    fn eq(&self, other: &Self) -> bool {
        self.0.rule == other.0.rule && self.0.declared_bound == other.0.declared_bound
    }
}

impl Eq for DadicSequence {}

/// `|q|_D` together with the index `w` such that `|q|_D = 1 / n_w`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PavValue {
    pub index: usize,
    pub value: BigRational,
}

impl DadicSequence {
    fn from_rule(rule: RatioRule, declared_bound: Option<u64>) -> Self {
        DadicSequence(Arc::new(Inner {
            rule,
            declared_bound,
            cache: RwLock::new(vec![BigUint::one()]),
        }))
    }

    /// `n_k = p^k`.
    pub fn powers(p: u64) -> Result<Self> {
        Self::cycle(&[p])
    }

    pub fn cycle(ratios: &[u64]) -> Result<Self> {
        if ratios.is_empty() {
            return Err(Error::InvalidSequence("empty ratio cycle".into()));
        }
        if let Some(r) = ratios.iter().find(|&&r| r < 2) {
            return Err(Error::InvalidSequence(format!("ratio {r} is below 2")));
        }
        Ok(Self::from_rule(RatioRule::Cycle(ratios.to_vec()), None))
    }

    pub fn from_prefix(elements: Vec<BigUint>) -> Result<Self> {
        if elements.first().is_none_or(|n0| !n0.is_one()) {
            return Err(Error::InvalidSequence("prefix must start with n_0 = 1".into()));
        }
        for (k, w) in elements.windows(2).enumerate() {
            let (q, r) = w[1].div_rem(&w[0]);
            if !r.is_zero() {
                return Err(Error::InvalidSequence(format!("n_{k} does not divide n_{}", k + 1)));
            }
            if q < BigUint::from(2u32) {
                return Err(Error::InvalidSequence(format!("ratio n_{}/n_{k} is below 2", k + 1)));
            }
        }
        Ok(Self::from_rule(RatioRule::Prefix(elements), None))
    }

    pub fn growing(first: u64) -> Result<Self> {
        if first < 2 {
            return Err(Error::InvalidSequence("growing ratios must start at 2 or more".into()));
        }
        Ok(Self::from_rule(RatioRule::Growing { first }, None))
    }

    /// Attaches an upper bound `M` on every ratio, checked against the rule.
    pub fn with_declared_bound(self, bound: u64) -> Result<Self> {
        match &self.0.rule {
            RatioRule::Growing { .. } => {
                return Err(Error::InvalidSequence("growing ratios exceed every bound".into()))
            }
            RatioRule::Cycle(c) => {
                if c.iter().any(|&r| r > bound) {
                    return Err(Error::InvalidSequence(format!("a cycle ratio exceeds {bound}")));
                }
            }
            RatioRule::Prefix(_) => {
                let h = self.horizon().unwrap_or(0);
                for k in 0..h {
                    if self.ratio(k)? > bound {
                        return Err(Error::InvalidSequence(format!(
                            "ratio n_{}/n_{k} exceeds {bound}",
                            k + 1
                        )));
                    }
                }
            }
        }
        Ok(Self::from_rule(self.0.rule.clone(), Some(bound)))
    }

    pub fn rule(&self) -> &RatioRule {
        &self.0.rule
    }

    pub fn declared_bound(&self) -> Option<u64> {
        self.0.declared_bound
    }

    /// Largest valid index, for prefix-only sequences.
    pub fn horizon(&self) -> Option<usize> {
        match &self.0.rule {
            RatioRule::Prefix(p) => Some(p.len() - 1),
            _ => None,
        }
    }

    fn check_horizon(&self, k: usize) -> Result<()> {
        match self.horizon() {
            Some(h) if k > h => Err(Error::Horizon { index: k, horizon: h }),
            _ => Ok(()),
        }
    }

    /// `n_{k+1} / n_k`.
    pub fn ratio(&self, k: usize) -> Result<u64> {
        match &self.0.rule {
            RatioRule::Cycle(c) => Ok(c[k % c.len()]),
            RatioRule::Growing { first } => Ok(first + k as u64),
            RatioRule::Prefix(p) => {
                self.check_horizon(k + 1)?;
                (&p[k + 1] / &p[k])
                    .to_u64()
                    .ok_or_else(|| Error::InvalidSequence(format!("ratio at {k} exceeds u64")))
            }
        }
    }

    /// `n_k`, extending the shared cache when `k` is small.
    pub fn element(&self, k: usize) -> Result<BigUint> {
        self.check_horizon(k)?;
        if let RatioRule::Prefix(p) = &self.0.rule {
            return Ok(p[k].clone());
        }
        if k >= CACHE_LIMIT {
            return Ok(self.element_direct(k));
        }
        {
            let cache = self.0.cache.read().expect("element cache poisoned");
            if let Some(n) = cache.get(k) {
                return Ok(n.clone());
            }
        }
        let mut cache = self.0.cache.write().expect("element cache poisoned");
        while cache.len() <= k {
            let t = cache.len() - 1;
            let next = &cache[t] * self.ratio(t)?;
            cache.push(next);
        }
        Ok(cache[k].clone())
    }

    fn element_direct(&self, k: usize) -> BigUint {
        match &self.0.rule {
            RatioRule::Cycle(c) => {
                let period: BigUint = c.iter().map(|&r| BigUint::from(r)).product();
                let head: BigUint = c[..k % c.len()].iter().map(|&r| BigUint::from(r)).product();
                Pow::pow(period, (k / c.len()) as u64) * head
            }
            RatioRule::Growing { first } => {
                (0..k as u64).fold(BigUint::one(), |acc, t| acc * (first + t))
            }
            RatioRule::Prefix(p) => p[k].clone(),
        }
    }

    pub fn element_u64(&self, k: usize) -> Option<u64> {
        self.element(k).ok()?.to_u64()
    }

    /// The index `w` with `n_w | q` and `n_{w+1}` not dividing `q`.
    pub fn pav_index_u64(&self, q: u64) -> usize {
        assert!(q >= 1, "|q|_D needs q >= 1");
        match &self.0.rule {
            RatioRule::Cycle(c) => {
                let mut rest = q;
                let mut k = 0;
                loop {
                    let r = c[k % c.len()];
                    if !rest.is_multiple_of(r) {
                        return k;
                    }
                    rest /= r;
                    k += 1;
                }
            }
            RatioRule::Growing { first } => {
                let mut rest = q;
                let mut k = 0u64;
                loop {
                    let r = first + k;
                    if !rest.is_multiple_of(r) {
                        return k as usize;
                    }
                    rest /= r;
                    k += 1;
                }
            }
            RatioRule::Prefix(p) => {
                let q = BigUint::from(q);
                let mut k = 0;
                while k + 1 < p.len() && p[k + 1] <= q && (&q % &p[k + 1]).is_zero() {
                    k += 1;
                }
                k
            }
        }
    }

    /// The index `w = omega_D(q)`.
    ///
    /// Divisibility `n_k | q` is monotone in `k`, so large arguments are
    /// handled by galloping and bisection instead of repeated division.
    pub fn pav_index(&self, q: &BigUint) -> usize {
        assert!(!q.is_zero(), "|q|_D needs q >= 1");
        if let Some(small) = q.to_u64() {
            return self.pav_index_u64(small);
        }
        let divides = |k: usize| -> bool {
            match self.element(k) {
                Ok(n) => n <= *q && (q % &n).is_zero(),
                Err(_) => false,
            }
        };
        let mut lo = 0usize;
        let mut hi = 1usize;
        while divides(hi) {
            lo = hi;
            hi *= 2;
        }
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if divides(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    pub fn pav(&self, q: &BigUint) -> PavValue {
        let index = self.pav_index(q);
        let n = self.element(index).expect("pav index within horizon");
        PavValue {
            index,
            value: BigRational::new_raw(1.into(), n.into()),
        }
    }

    pub fn pav_u64(&self, q: u64) -> PavValue {
        self.pav(&BigUint::from(q))
    }

    /// `Some(k)` when `q = n_k`.
    pub fn index_of(&self, q: &BigUint) -> Option<usize> {
        if q.is_zero() {
            return None;
        }
        let k = self.pav_index(q);
        (self.element(k).ok()? == *q).then_some(k)
    }

    /// Max of `n_{k+1} / n_k` over `k < horizon`. Exact for every `k` when the
    /// rule is a cycle.
    pub fn ratio_bound(&self, horizon: usize) -> Option<u64> {
        match &self.0.rule {
            RatioRule::Cycle(c) => c.iter().copied().max(),
            RatioRule::Growing { first } => (horizon >= 1).then(|| first + horizon as u64 - 1),
            RatioRule::Prefix(_) => {
                let h = horizon.min(self.horizon().unwrap_or(0));
                (0..h).filter_map(|k| self.ratio(k).ok()).max()
            }
        }
    }

    /// The global ratio bound `M`, for operations whose theory needs one.
    pub fn bound(&self) -> Result<u64> {
        match &self.0.rule {
            RatioRule::Cycle(c) => Ok(*c.iter().max().expect("non-empty cycle")),
            RatioRule::Prefix(_) => self.0.declared_bound.ok_or(Error::RequiresBoundedRatios),
            RatioRule::Growing { .. } => Err(Error::RequiresBoundedRatios),
        }
    }

    /// Every prime dividing some `n_k`.
    pub fn prime_support(&self) -> Result<Vec<u64>> {
        match &self.0.rule {
            RatioRule::Cycle(c) => {
                let mut ps: Vec<u64> = c.iter().flat_map(|&r| arith::prime_factors(r)).collect();
                ps.sort_unstable();
                ps.dedup();
                Ok(ps)
            }
            _ => Err(Error::CoprimalityUndecidable),
        }
    }

    /// Smallest `k` with `n_k >= x`.
    pub fn first_index_at_least(&self, x: &BigUint) -> Result<usize> {
        if *x <= BigUint::one() {
            return Ok(0);
        }
        let at_least = |k: usize| -> Result<bool> { Ok(self.element(k)? >= *x) };
        let mut lo = 0usize;
        let mut hi = 1usize;
        while !at_least(hi)? {
            lo = hi;
            hi = match self.horizon() {
                Some(h) if hi == h => return Err(Error::Horizon { index: h + 1, horizon: h }),
                Some(h) => (hi * 2).min(h),
                None => hi * 2,
            };
        }
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if at_least(mid)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi)
    }

    /// The literal used in configuration files and reports.
    pub fn literal(&self) -> String {
        let mut s = match &self.0.rule {
            RatioRule::Cycle(c) => format!("ratios={}", list(c.iter())),
            RatioRule::Prefix(p) => format!("prefix={}", list(p.iter())),
            RatioRule::Growing { first } => format!("growing={first}"),
        };
        if let Some(m) = self.0.declared_bound {
            s.push_str(&format!(";bound={m}"));
        }
        s
    }

    /// Parses `ratios=[2,3]`, `prefix=[1,2,6,24]` or `growing=2`, optionally
    /// followed by `;bound=M`.
    pub fn parse(s: &str) -> Result<Self> {
        let (body, bound) = match s.split_once(";bound=") {
            Some((b, m)) => (b, Some(m)),
            None => (s, None),
        };
        let (key, val) = body
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("sequence literal `{s}`")))?;
        let seq = match key.trim() {
            "ratios" => Self::cycle(&parse_list::<u64>(val)?)?,
            "prefix" => Self::from_prefix(parse_list::<BigUint>(val)?)?,
            "growing" => Self::growing(
                val.trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("growing start `{val}`")))?,
            )?,
            other => return Err(Error::Parse(format!("unknown sequence kind `{other}`"))),
        };
        match bound {
            Some(m) => seq.with_declared_bound(
                m.trim().parse().map_err(|_| Error::Parse(format!("bound `{m}`")))?,
            ),
            None => Ok(seq),
        }
    }
}

impl fmt::Display for DadicSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.literal())
    }
}

fn list<T: fmt::Display>(items: impl Iterator<Item = T>) -> String {
    let parts: Vec<String> = items.map(|x| x.to_string()).collect();
    format!("[{}]", parts.join(","))
}

fn parse_list<T: std::str::FromStr>(s: &str) -> Result<Vec<T>> {
    let inner = s.trim().trim_start_matches('[').trim_end_matches(']');
    inner
        .split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            p.trim()
                .parse::<T>()
                .map_err(|_| Error::Parse(format!("list entry `{p}`")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::{big, rat};
    use proptest::prelude::*;

    fn pow2() -> DadicSequence {
        DadicSequence::powers(2).unwrap()
    }

    fn c23() -> DadicSequence {
        DadicSequence::cycle(&[2, 3]).unwrap()
    }

    #[test]
    fn elements() {
        assert_eq!(pow2().element(5).unwrap(), big(32));
        assert_eq!(c23().element(3).unwrap(), big(12));
        assert_eq!(c23().element(0).unwrap(), big(1));
        let direct = c23().element(CACHE_LIMIT + 3).unwrap();
        let cached = c23().element(CACHE_LIMIT - 1).unwrap() * 2u32 * 3u32 * 2u32 * 3u32;
        assert_eq!(direct, cached);
    }

    #[test]
    fn prefix_horizon() {
        let s = DadicSequence::from_prefix(vec![big(1), big(2), big(6), big(24)]).unwrap();
        assert_eq!(s.element(3).unwrap(), big(24));
        assert_eq!(s.element(4), Err(Error::Horizon { index: 4, horizon: 3 }));
        assert_eq!(s.ratio_bound(3), Some(4));
        assert_eq!(s.bound(), Err(Error::RequiresBoundedRatios));
        assert_eq!(s.with_declared_bound(4).unwrap().bound(), Ok(4));
    }

    #[test]
    fn invalid_sequences() {
        assert!(DadicSequence::cycle(&[]).is_err());
        assert!(DadicSequence::cycle(&[2, 1]).is_err());
        assert!(DadicSequence::from_prefix(vec![big(1), big(3), big(4)]).is_err());
        assert!(DadicSequence::from_prefix(vec![big(2), big(4)]).is_err());
        assert!(DadicSequence::growing(2).unwrap().with_declared_bound(100).is_err());
        assert!(c23().with_declared_bound(2).is_err());
    }

    #[test]
    fn pav_examples() {
        let p = pow2().pav_u64(12);
        assert_eq!((p.index, p.value), (2, rat(1, 4)));
        let p = pow2().pav_u64(7);
        assert_eq!((p.index, p.value), (0, rat(1, 1)));
        let p = c23().pav_u64(36);
        assert_eq!((p.index, p.value), (4, rat(1, 36)));
    }

    #[test]
    fn pav_on_huge_arguments() {
        let s = c23();
        let n = s.element(9001).unwrap();
        assert_eq!(s.pav_index(&(&n * 5u32)), 9001);
        assert_eq!(s.pav_index(&(&n * 3u32 * 5u32)), 9002);
        assert_eq!(s.pav_index(&(&n * 2u32)), 9001);
        assert_eq!(s.index_of(&n), Some(9001));
        assert_eq!(s.index_of(&(&n * 5u32)), None);
    }

    #[test]
    fn ratio_bounds() {
        assert_eq!(pow2().ratio_bound(10), Some(2));
        assert_eq!(c23().ratio_bound(1), Some(3));
        assert_eq!(c23().bound(), Ok(3));
        let g = DadicSequence::growing(2).unwrap();
        assert_eq!(g.ratio_bound(5), Some(6));
        assert_eq!(g.bound(), Err(Error::RequiresBoundedRatios));
        assert_eq!(g.element(4).unwrap(), big(120));
    }

    #[test]
    fn prime_support() {
        assert_eq!(DadicSequence::cycle(&[6, 4, 10]).unwrap().prime_support(), Ok(vec![2, 3, 5]));
        assert_eq!(
            DadicSequence::growing(2).unwrap().prime_support(),
            Err(Error::CoprimalityUndecidable)
        );
    }

    #[test]
    fn first_index() {
        assert_eq!(pow2().first_index_at_least(&big(33)).unwrap(), 6);
        assert_eq!(pow2().first_index_at_least(&big(32)).unwrap(), 5);
        assert_eq!(c23().first_index_at_least(&big(1)).unwrap(), 0);
        let s = DadicSequence::from_prefix(vec![big(1), big(2), big(6)]).unwrap();
        assert!(matches!(s.first_index_at_least(&big(7)), Err(Error::Horizon { .. })));
    }

    #[test]
    fn literals_round_trip() {
        for lit in ["ratios=[2,3]", "prefix=[1,2,6,24]", "growing=3", "prefix=[1,2,6];bound=3"] {
            assert_eq!(DadicSequence::parse(lit).unwrap().literal(), lit);
        }
        assert_eq!(DadicSequence::parse("ratios=2").unwrap(), pow2());
        assert!(DadicSequence::parse("nonsense").is_err());
    }

    #[test]
    fn matches_p_adic_valuation() {
        for p in [2u64, 3, 5, 7] {
            let s = DadicSequence::powers(p).unwrap();
            for q in 1..=100_000u64 {
                let mut v = 0;
                let mut r = q;
                while r % p == 0 {
                    r /= p;
                    v += 1;
                }
                assert_eq!(s.pav_index_u64(q), v, "p={p} q={q}");
            }
        }
    }

    #[test]
    fn concurrent_cache_is_consistent() {
        let s = c23();
        let handles: Vec<_> = (0..8)
            .map(|t| {
                let s = s.clone();
                std::thread::spawn(move || s.element(100 + t * 50).unwrap())
            })
            .collect();
        for (t, h) in handles.into_iter().enumerate() {
            let got = h.join().unwrap();
            assert_eq!(got, c23().element_direct(100 + t * 50));
        }
    }

    proptest! {
        #[test]
        fn pav_is_maximal(q in 1u64..1_000_000, k in 0usize..12) {
            let s = c23();
            let w = s.pav_index_u64(q);
            let nw = s.element_u64(w).unwrap();
            prop_assert_eq!(q % nw, 0);
            prop_assert_ne!(q % s.element_u64(w + 1).unwrap(), 0);
            let nk = s.element_u64(k).unwrap();
            if q % nk == 0 {
                prop_assert!(w >= k);
            }
            prop_assert!(s.pav_index(&BigUint::from(q * nk)) >= k);
        }
    }
}
