//! Truncations of the limsup set as finite unions of resonant intervals.
//!
//! Small families with rational radii are merged exactly over `BigRational`.
//! Larger or irrational families go through a fixed-point sweep at `P` bits:
//! every interval is rounded inward into an inner union and outward into an
//! outer union, so the true measure lies in `[inner, outer] / 2^P`. The sweep
//! splits `[0, 1]` into slabs processed in parallel; slab totals are integers,
//! so the result does not depend on scheduling.

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;

use crate::approxfn::{ApproximatingFunction, WeightPair};
use crate::arith;
use crate::dadic::DadicSequence;
use crate::error::{Error, Result};
use crate::power::{Bracket, Value};

/// Largest denominator enumerated by default.
pub const DEFAULT_CAP: u64 = 1 << 22;
/// Families up to this many intervals are merged exactly.
pub const EXACT_LIMIT: u64 = 1 << 18;
/// Hard limit on generated intervals.
pub const INTERVAL_CAP: u64 = 1 << 30;
/// Fixed-point sweeps use at most this many fractional bits (`p 2^P` must
/// fit a `u128` for `p <= 2^22`).
pub const MAX_FIXED_BITS: u32 = 100;

/// Working precision, from `MIXDIO_PRECISION_BITS` (default 96).
pub fn precision_bits() -> u32 {
    std::env::var("MIXDIO_PRECISION_BITS")
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .filter(|&b: &u32| (16..=4096).contains(&b))
        .unwrap_or(96)
}

/// A normalized union of closed subintervals of `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct IntervalUnion {
    intervals: Vec<(BigRational, BigRational)>,
}

impl IntervalUnion {
    pub fn empty() -> Self {
        IntervalUnion::default()
    }

    /// Sorts, clips to `[0, 1]` and merges overlapping or touching intervals.
    pub fn from_intervals(items: impl IntoIterator<Item = (BigRational, BigRational)>) -> Self {
        let zero = BigRational::zero();
        let one = BigRational::one();
        let mut v: Vec<(BigRational, BigRational)> = items
            .into_iter()
            .map(|(a, b)| (a.max(zero.clone()), b.min(one.clone())))
            .filter(|(a, b)| a <= b)
            .collect();
        v.sort();
        let mut out: Vec<(BigRational, BigRational)> = Vec::with_capacity(v.len());
        for (a, b) in v {
            match out.last_mut() {
                Some(last) if a <= last.1 => {
                    if b > last.1 {
                        last.1 = b;
                    }
                }
                _ => out.push((a, b)),
            }
        }
        IntervalUnion { intervals: out }
    }

    /// Closed balls `B(p/q, r(q))` for `p = 0..=q`, clipped to `[0, 1]`.
    pub fn from_rational_balls(qs: &[u64], radius: impl Fn(u64) -> BigRational) -> Result<Self> {
        let total: u64 = qs.iter().map(|q| q + 1).sum();
        if total > INTERVAL_CAP {
            return Err(cap_error(total));
        }
        let mut items = Vec::with_capacity(total as usize);
        for &q in qs {
            let r = radius(q);
            for p in 0..=q {
                let c = arith::rat(p as i64, q as i64);
                items.push((&c - &r, &c + &r));
            }
        }
        Ok(Self::from_intervals(items))
    }

    pub fn intervals(&self) -> &[(BigRational, BigRational)] {
        &self.intervals
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn measure(&self) -> Bracket {
        let m = self
            .intervals
            .iter()
            .fold(BigRational::zero(), |acc, (a, b)| acc + (b - a));
        Bracket::exact(m)
    }

    pub fn contains(&self, x: &BigRational) -> bool {
        let idx = self.intervals.partition_point(|(a, _)| a <= x);
        idx > 0 && *x <= self.intervals[idx - 1].1
    }

    pub fn intersect(&self, lo: &BigRational, hi: &BigRational) -> IntervalUnion {
        IntervalUnion::from_intervals(
            self.intervals
                .iter()
                .map(|(a, b)| (a.clone().max(lo.clone()), b.clone().min(hi.clone()))),
        )
    }

    pub fn union(&self, other: &IntervalUnion) -> IntervalUnion {
        IntervalUnion::from_intervals(self.intervals.iter().chain(&other.intervals).cloned())
    }

    /// `lo,hi` lines with exact rational endpoints.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("lo,hi\n");
        for (a, b) in &self.intervals {
            s.push_str(&format!("{},{}\n", arith::fmt_rat(a), arith::fmt_rat(b)));
        }
        s
    }
}

pub fn union_measure(u: &IntervalUnion) -> Bracket {
    u.measure()
}

/// Members of a resonant family: a denominator and its ball radius.
#[derive(Debug, Clone)]
pub struct Ball {
    pub q: u64,
    pub radius: Value,
}

#[derive(Debug, Clone)]
pub struct UnionResult {
    pub measure: Bracket,
    /// The exact union when the exact path was taken.
    pub union: Option<IntervalUnion>,
    pub intervals: u64,
    pub exact: bool,
}

/// Measure of `[lo, hi] ∩ ⋃_q ⋃_p B(p/q, r_q)`, `p` over `0..=q` or over
/// residues coprime to `q`.
pub fn union_of_balls(balls: &[Ball], lo: &BigRational, hi: &BigRational, coprime: bool, bits: u32) -> Result<UnionResult> {
    let zero = BigRational::zero();
    if lo < &zero || hi > &BigRational::one() || lo > hi {
        return Err(Error::Precondition("window must lie in [0, 1]".into()));
    }
    let balls: Vec<&Ball> = balls.iter().filter(|b| !b.radius.is_zero()).collect();
    let width = hi - lo;
    if balls.is_empty() || width.is_zero() {
        return Ok(UnionResult {
            measure: Bracket::zero(),
            union: Some(IntervalUnion::empty()),
            intervals: 0,
            exact: true,
        });
    }
    // One denominator with r_q >= 1/(2q) already covers [0, 1].
    if !coprime {
        let covering = balls.iter().find(|b| {
            let half = Value::rational(arith::rat(1, 2 * b.q as i64));
            b.radius.cmp_exact(&half).is_ge()
        });
        if covering.is_some() {
            return Ok(UnionResult {
                measure: Bracket::exact(width),
                union: Some(IntervalUnion::from_intervals([(lo.clone(), hi.clone())])),
                intervals: 1,
                exact: true,
            });
        }
    }
    let w = arith::rat_to_f64(&width);
    let estimate: u64 = balls
        .iter()
        .map(|b| {
            let r = b.radius.to_f64();
            ((w + 2.0 * r) * b.q as f64 + 2.0).min(b.q as f64 + 1.0) as u64
        })
        .sum();
    if estimate > INTERVAL_CAP {
        return Err(cap_error(estimate));
    }
    let rational: Option<Vec<BigRational>> = balls.iter().map(|b| b.radius.as_rational()).collect();
    if let (Some(radii), true) = (rational, estimate <= EXACT_LIMIT) {
        let union = exact_union(&balls, &radii, lo, hi, coprime);
        return Ok(UnionResult {
            measure: union.measure(),
            intervals: estimate,
            union: Some(union),
            exact: true,
        });
    }
    let p = bits.min(MAX_FIXED_BITS);
    if balls.iter().any(|b| b.q > DEFAULT_CAP) {
        return Err(Error::CapExceeded {
            what: "fixed-point denominator",
            value: balls.iter().map(|b| b.q).max().unwrap_or(0).to_string(),
            cap: DEFAULT_CAP.to_string(),
        });
    }
    let measure = fixed_union(&balls, lo, hi, coprime, p);
    Ok(UnionResult {
        measure,
        union: None,
        intervals: estimate,
        exact: false,
    })
}

fn cap_error(n: u64) -> Error {
    Error::CapExceeded {
        what: "resonant intervals",
        value: n.to_string(),
        cap: INTERVAL_CAP.to_string(),
    }
}

fn exact_union(balls: &[&Ball], radii: &[BigRational], lo: &BigRational, hi: &BigRational, coprime: bool) -> IntervalUnion {
    let mut items = Vec::new();
    for (b, r) in balls.iter().zip(radii) {
        let q = b.q as i64;
        let qb = BigRational::from_integer(BigInt::from(q));
        let p_lo = ((lo - r) * &qb).ceil().to_integer().max(BigInt::zero());
        let p_hi = ((hi + r) * &qb).floor().to_integer().min(BigInt::from(q));
        let (p_lo, p_hi) = (p_lo.to_i64().unwrap_or(0), p_hi.to_i64().unwrap_or(-1));
        for p in p_lo..=p_hi {
            if coprime && p.gcd(&q) != 1 {
                continue;
            }
            let c = arith::rat(p, q);
            let a = (&c - r).max(lo.clone());
            let z = (&c + r).min(hi.clone());
            items.push((a, z));
        }
    }
    IntervalUnion::from_intervals(items)
}

struct FxBall {
    q: u64,
    r_in: u128,
    r_out: u128,
}

fn fixed_union(balls: &[&Ball], lo: &BigRational, hi: &BigRational, coprime: bool, p: u32) -> Bracket {
    let to_u128 = |x: BigUint| x.to_u128().expect("fixed-point value within 2^P");
    let fx: Vec<FxBall> = balls
        .iter()
        .map(|b| {
            let (r_in, r_out) = match &b.radius {
                Value::Zero => (BigUint::zero(), BigUint::zero()),
                Value::Pos(pp) => pp.fixed_bracket(p as u64),
            };
            FxBall {
                q: b.q,
                r_in: to_u128(r_in),
                r_out: to_u128(r_out),
            }
        })
        .collect();
    let in_win = (
        to_u128(arith::ceil_scaled(lo, p as u64)),
        to_u128(arith::floor_scaled(hi, p as u64)),
    );
    let out_win = (
        to_u128(arith::floor_scaled(lo, p as u64)),
        to_u128(arith::ceil_scaled(hi, p as u64)),
    );
    let total: u64 = balls.iter().map(|b| b.q + 1).sum();
    let slabs = (total / (1 << 15)).clamp(1, 4096) as u128;
    let span = out_win.1 - out_win.0;
    let (inner, outer) = (0..slabs)
        .into_par_iter()
        .map(|t| {
            let s0 = out_win.0 + span / slabs * t;
            let s1 = if t + 1 == slabs { out_win.1 } else { out_win.0 + span / slabs * (t + 1) };
            slab_measure(&fx, s0, s1, in_win, out_win, coprime, p)
        })
        .reduce(|| (0u128, 0u128), |a, b| (a.0 + b.0, a.1 + b.1));
    let den = BigInt::one() << p;
    Bracket::new(
        BigRational::new(BigInt::from(inner), den.clone()),
        BigRational::new(BigInt::from(outer), den),
    )
}

fn slab_measure(fx: &[FxBall], s0: u128, s1: u128, in_win: (u128, u128), out_win: (u128, u128), coprime: bool, p: u32) -> (u128, u128) {
    let one = 1u128 << p;
    let mut inner: Vec<(u128, u128)> = Vec::new();
    let mut outer: Vec<(u128, u128)> = Vec::new();
    let (ia, ib) = (s0.max(in_win.0), s1.min(in_win.1));
    let (oa, ob) = (s0.max(out_win.0), s1.min(out_win.1));
    for b in fx {
        let q = b.q as u128;
        let p_lo = (s0.saturating_sub(b.r_out) * q / one).saturating_sub(1);
        let p_hi = ((s1 + b.r_out) * q / one + 1).min(q);
        for pp in p_lo..=p_hi {
            if coprime && (pp as u64).gcd(&b.q) != 1 {
                continue;
            }
            let scaled = pp * one;
            let c_floor = scaled / q;
            let c_ceil = if scaled.is_multiple_of(q) { c_floor } else { c_floor + 1 };
            let l = (c_ceil.saturating_sub(b.r_in)).max(ia);
            let r = (c_floor + b.r_in).min(ib);
            if l <= r {
                inner.push((l, r));
            }
            let l = c_floor.saturating_sub(b.r_out).max(oa);
            let r = (c_ceil + b.r_out).min(ob);
            if l <= r {
                outer.push((l, r));
            }
        }
    }
    (sweep(&mut inner), sweep(&mut outer))
}

fn sweep(v: &mut [(u128, u128)]) -> u128 {
    v.sort_unstable();
    let mut total = 0u128;
    let mut cur: Option<(u128, u128)> = None;
    for &(a, b) in v.iter() {
        match cur {
            Some((ca, cb)) if a <= cb => cur = Some((ca, cb.max(b))),
            Some((ca, cb)) => {
                total += cb - ca;
                cur = Some((a, b));
            }
            None => cur = Some((a, b)),
        }
    }
    if let Some((ca, cb)) = cur {
        total += cb - ca;
    }
    total
}

#[derive(Debug, Clone)]
pub struct LayerOptions {
    pub cap: u64,
    pub coprime: bool,
    pub bits: u32,
}

impl Default for LayerOptions {
    fn default() -> Self {
        LayerOptions {
            cap: DEFAULT_CAP,
            coprime: false,
            bits: precision_bits(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ResonantLayer {
    pub q_range: (u64, u64),
    pub members: Vec<u64>,
    pub measure: Bracket,
    pub union: Option<IntervalUnion>,
    pub intervals: u64,
    pub exact: bool,
}

/// The union of `B(p/q, psi^j(q)/q)` over `q` in `A_psi ∩ (q1, q2]`.
pub fn layer(psi: &ApproximatingFunction, w: &WeightPair, d: &DadicSequence, q1: u64, q2: u64) -> Result<ResonantLayer> {
    layer_with(psi, w, d, q1, q2, &LayerOptions::default())
}

pub fn coprime_layer(psi: &ApproximatingFunction, w: &WeightPair, d: &DadicSequence, q1: u64, q2: u64) -> Result<ResonantLayer> {
    let opts = LayerOptions {
        coprime: true,
        ..LayerOptions::default()
    };
    layer_with(psi, w, d, q1, q2, &opts)
}

pub fn layer_with(psi: &ApproximatingFunction, w: &WeightPair, d: &DadicSequence, q1: u64, q2: u64, opts: &LayerOptions) -> Result<ResonantLayer> {
    if q1 >= q2 {
        return Err(Error::Precondition(format!("empty range ({q1}, {q2}]")));
    }
    if q2 > opts.cap {
        return Err(Error::CapExceeded {
            what: "Q2",
            value: q2.to_string(),
            cap: opts.cap.to_string(),
        });
    }
    let members: Vec<u64> = psi
        .members(w, d, &BigUint::from(q1), &BigUint::from(q2), opts.cap as usize)?
        .iter()
        .map(|q| q.to_u64().expect("members within the cap"))
        .collect();
    let balls: Vec<Ball> = members
        .iter()
        .map(|&q| Ball {
            q,
            radius: psi.radius(w, &BigUint::from(q)),
        })
        .collect();
    let res = union_of_balls(&balls, &BigRational::zero(), &BigRational::one(), opts.coprime, opts.bits)?;
    Ok(ResonantLayer {
        q_range: (q1, q2),
        members,
        measure: res.measure,
        union: res.union,
        intervals: res.intervals,
        exact: res.exact,
    })
}

pub fn tail_measure(psi: &ApproximatingFunction, w: &WeightPair, d: &DadicSequence, q1: u64, q2: u64) -> Result<Bracket> {
    Ok(layer(psi, w, d, q1, q2)?.measure)
}

/// `sum over members of 2 psi^j(q)`, the first-moment bound on a layer.
pub fn first_moment(psi: &ApproximatingFunction, w: &WeightPair, members: &[u64], bits: u32) -> Bracket {
    members.iter().fold(Bracket::zero(), |acc, &q| {
        let v = psi.eval_u64(q).pow(w.j());
        acc.add(&v.bracket(bits).scale(&arith::rat(2, 1)))
    })
}

/// A point of `[0, 1)`: exact or known to lie in an enclosure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Point {
    Exact(BigRational),
    Enclosure(Bracket),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HitStatus {
    Hit,
    /// The enclosure straddles the ball boundary.
    Undecided,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hit {
    pub p: BigInt,
    pub q: BigUint,
    /// `|q x - p|`, or an upper bound for enclosures.
    pub error: BigRational,
    pub status: HitStatus,
}

#[derive(Debug, Clone)]
pub struct Witness {
    pub x: Point,
    pub hits: Vec<Hit>,
}

impl Witness {
    pub fn decided_hits(&self) -> impl Iterator<Item = &Hit> {
        self.hits.iter().filter(|h| h.status == HitStatus::Hit)
    }
}

/// Every `(p, q)` with `q` in `A_psi ∩ [1, q_max]` and `|q x - p| <= psi(q)^j`.
pub fn hits(x: &Point, psi: &ApproximatingFunction, w: &WeightPair, d: &DadicSequence, q_max: &BigUint) -> Result<Witness> {
    hits_in(x, psi, w, d, &BigUint::zero(), q_max, DEFAULT_CAP as usize)
}

/// As [`hits`] over `q` in `(lo, hi]`; sparse supports may reach far beyond
/// the enumeration cap.
pub fn hits_in(x: &Point, psi: &ApproximatingFunction, w: &WeightPair, d: &DadicSequence, lo: &BigUint, hi: &BigUint, cap: usize) -> Result<Witness> {
    let members = psi.members(w, d, lo, hi, cap)?;
    let mut out = Vec::new();
    for q in members {
        let bound = psi.eval(&q).pow(w.j());
        let qr = arith::rat_from_uint(&q);
        match x {
            Point::Exact(v) => {
                let (p, err) = nearest(&(v * &qr));
                if Value::rational(err.clone()).cmp_exact(&bound).is_le() {
                    out.push(Hit { p, q, error: err, status: HitStatus::Hit });
                }
            }
            Point::Enclosure(b) => {
                let lo_v = &b.lo * &qr;
                let hi_v = &b.hi * &qr;
                let mut cands = vec![nearest(&lo_v).0, nearest(&hi_v).0];
                cands.dedup();
                for p in cands {
                    let pr = BigRational::from_integer(p.clone());
                    let e_lo = (&lo_v - &pr).abs();
                    let e_hi = (&hi_v - &pr).abs();
                    let worst = e_lo.clone().max(e_hi.clone());
                    // Distance is convex in x, so the best case is 0 when p/q is
                    // inside the enclosure.
                    let best = if lo_v <= pr && pr <= hi_v { BigRational::zero() } else { e_lo.min(e_hi) };
                    if Value::rational(worst.clone()).cmp_exact(&bound).is_le() {
                        out.push(Hit { p, q: q.clone(), error: worst, status: HitStatus::Hit });
                    } else if Value::rational(best).cmp_exact(&bound).is_le() {
                        out.push(Hit { p, q: q.clone(), error: worst, status: HitStatus::Undecided });
                    }
                }
            }
        }
    }
    Ok(Witness { x: x.clone(), hits: out })
}

/// Nearest integer with ties broken downward, and the distance to it.
fn nearest(v: &BigRational) -> (BigInt, BigRational) {
    let fl = v.floor();
    let frac = v - &fl;
    let half = arith::rat(1, 2);
    let (p, err) = if frac > half {
        (fl.to_integer() + 1, BigRational::one() - frac)
    } else {
        (fl.to_integer(), frac)
    };
    (p, err)
}

/// Value of the covering bound for `H^s` on the levels `k >= k0`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CoverValue {
    Finite {
        value: Bracket,
        horizon: usize,
        /// Whether a rigorous tail bound beyond the horizon is included.
        tail_included: bool,
    },
    Infinite,
}

impl CoverValue {
    pub fn bracket(&self) -> Option<&Bracket> {
        match self {
            CoverValue::Finite { value, .. } => Some(value),
            CoverValue::Infinite => None,
        }
    }
}

/// `2^s M^(1-s) sum_{k >= k0} (n_{k+1} - n_k) n_k^(1-s) psi(n_k)^(i + j s)`.
///
/// Power laws get a geometric tail bound; other functions are summed to
/// `horizon` only.
pub fn cover_value(psi: &ApproximatingFunction, w: &WeightPair, d: &DadicSequence, s: arith::Exponent, k0: usize, horizon: Option<usize>) -> Result<CoverValue> {
    let m = d.bound()?;
    if s <= w.i() || s > arith::Exponent::one() {
        return Err(Error::Precondition("s must lie in (i, 1]".into()));
    }
    let bits = precision_bits();
    let one = arith::Exponent::one();
    let exponent = psi.power_tau().map(|tau| one - s - tau * (w.i() + w.j() * s));
    let (h, tail) = match exponent {
        Some(e) => {
            // Terms behave like n_k^(1 + e); the series converges iff 1 + e < 0.
            let g = one + e;
            if g >= arith::Exponent::zero() {
                return Ok(CoverValue::Infinite);
            }
            let gf = -(*g.numer() as f64 / *g.denom() as f64);
            let extra = ((bits as f64 + 32.0) / gf).ceil().clamp(64.0, 8192.0) as usize;
            (horizon.unwrap_or(k0 + extra), true)
        }
        None => match horizon {
            Some(h) => (h, false),
            None => {
                return Err(Error::Precondition(
                    "a horizon is required for non power-law functions".into(),
                ))
            }
        },
    };
    let mut sum = Bracket::zero();
    for k in k0..=h {
        let nk = d.element(k)?;
        let gap = d.element(k + 1)? - &nk;
        let term = psi
            .f_psi(w, s, &nk)?
            .mul_rational(&arith::rat_from_uint(&gap));
        sum = sum.add(&term.bracket(bits));
    }
    if tail {
        let e = exponent.expect("power law");
        let g = one + e;
        // n_k >= n_h 2^(k-h), so the tail is at most
        // (M - 1) n_h^g 2^g / (1 - 2^g).
        let nh = d.element(h)?;
        let ratio = crate::power::PowerProduct::power(arith::rat(2, 1), g).bracket(bits);
        let geo = &ratio.hi / (BigRational::one() - &ratio.hi);
        let head = crate::power::PowerProduct::power_of_uint(&nh, g).bracket(bits).hi;
        let bound = head * geo * arith::rat(m as i64 - 1, 1);
        sum = sum.add(&Bracket::new(BigRational::zero(), bound));
    }
    let pre = crate::power::PowerProduct::power(arith::rat(2, 1), s)
        .mul(&crate::power::PowerProduct::power(arith::rat(m as i64, 1), one - s))
        .bracket(bits);
    Ok(CoverValue::Finite {
        value: sum.mul_nonneg(&pre),
        horizon: h,
        tail_included: tail,
    })
}

/// `true` when `x` lies in some interval of the union (for sampling oracles).
pub fn contains_f64(u: &IntervalUnion, x: f64) -> bool {
    let idx = u.intervals.partition_point(|(a, _)| arith::rat_to_f64(a) <= x);
    idx > 0 && x <= arith::rat_to_f64(&u.intervals[idx - 1].1)
}
