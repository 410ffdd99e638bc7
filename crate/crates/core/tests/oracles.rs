//! Independent oracles: brute force, sampling and closed forms.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mixdio::approxfn::{build_psi0, ApproximatingFunction, WeightPair};
use mixdio::arith::{exp, rat, Totient};
use mixdio::counterexample::{stitch, CounterexampleBlock};
use mixdio::dadic::DadicSequence;
use mixdio::dirichlet::{dirichlet_search, m_index, oracle_solutions};
use mixdio::sets;
use mixdio::sums::{self, SeriesSpec, Term};

#[test]
fn membership_matches_pav_definition() {
    // |q|_D = 1/n with n the largest element dividing q, found by scanning.
    let d = DadicSequence::cycle(&[2, 3, 5]).unwrap();
    let w = WeightPair::parse("1/3,2/3").unwrap();
    let psi = ApproximatingFunction::power_law(exp(3, 2)).unwrap();
    for q in 1..5000u64 {
        let n = (0..)
            .map(|k| d.element_u64(k).unwrap())
            .take_while(|&n| n <= q)
            .filter(|&n| q % n == 0)
            .last()
            .unwrap();
        // 1/n < q^(-tau i) iff q^(tau i) < n iff q^(1/2) < n.
        let expect = (q as f64).sqrt() < n as f64 && q != n * n;
        assert_eq!(psi.in_a_u64(&w, &d, q), expect, "q = {q}");
    }
}

#[test]
fn layer_measure_against_sampling() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let psi = ApproximatingFunction::power_law(exp(1, 1)).unwrap();
    let w = WeightPair::half();
    let d = DadicSequence::powers(2).unwrap();
    let layer = sets::layer(&psi, &w, &d, 20, 90).unwrap();
    let radii: Vec<(u64, f64)> = layer
        .members
        .iter()
        .map(|&q| (q, psi.radius(&w, &BigUint::from(q)).to_f64()))
        .collect();
    let n = 200_000;
    let hits = (0..n)
        .filter(|_| {
            let x: f64 = rng.gen();
            radii.iter().any(|&(q, r)| (x - (x * q as f64).round() / q as f64).abs() <= r)
        })
        .count();
    let est = hits as f64 / n as f64;
    let se = (est * (1.0 - est) / n as f64).sqrt();
    assert!((est - layer.measure.mid_f64()).abs() < 4.0 * se, "{est} vs {}", layer.measure);
}

#[test]
fn exact_union_against_fine_grid() {
    // Rational radii give an exact union; count grid cells fully inside.
    let table = ApproximatingFunction::parse_table("8,1/5\n12,1/7\n16,1/3").unwrap();
    let w = WeightPair::half();
    let d = DadicSequence::powers(2).unwrap();
    let layer = sets::layer(&table, &w, &d, 1, 20).unwrap();
    let u = layer.union.expect("exact path");
    let grid = 1u64 << 16;
    let inside = (0..grid)
        .filter(|&t| u.contains(&rat(2 * t as i64 + 1, 2 * grid as i64)))
        .count() as f64
        / grid as f64;
    assert!((inside - layer.measure.mid_f64()).abs() < 2e-4);
}

#[test]
fn dirichlet_matches_exhaustive_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let psi = ApproximatingFunction::power_law(exp(1, 1)).unwrap();
    let w = WeightPair::half();
    for _ in 0..40 {
        let d = if rng.gen() { DadicSequence::powers(2).unwrap() } else { DadicSequence::cycle(&[2, 3]).unwrap() };
        let (c, k) = (rng.gen_range(1..=2), rng.gen_range(1..=8));
        let den = rng.gen_range(2..10_000i64);
        let x = BigRational::new(BigInt::from(rng.gen_range(0..den)), BigInt::from(den));
        let m = m_index(&psi, &w, &d, c, k).unwrap().m;
        let a = dirichlet_search(&x, &d, c, k, m).unwrap();
        let all = oracle_solutions(&x, &d, c, k, m).unwrap();
        assert!(all.contains(&(a.p, a.q)));
    }
}

#[test]
fn block_sum_matches_divisor_enumeration() {
    let d = DadicSequence::powers(2).unwrap();
    let w = WeightPair::half();
    for s in 1..=10usize {
        let primes: Vec<u64> = [3u64, 5, 7, 11, 13, 17, 19, 23, 29, 31][..s].to_vec();
        let b = CounterexampleBlock::with_primes(&d, &w, rat(1, 3), primes).unwrap();
        let support = b.support_in(&BigUint::from(0u32), &b.n, 1 << 12).unwrap();
        assert_eq!(support.len(), (1 << s) - 1);
        let brute: BigRational = support.iter().map(|q| b.psi_j(q).unwrap()).sum();
        assert_eq!(brute, b.block_sum().to_rational());
        assert!(support.iter().all(|q| b.in_a(q)));
    }
}

#[test]
fn stitched_sum_is_the_sum_of_blocks() {
    let d = DadicSequence::powers(2).unwrap();
    let w = WeightPair::half();
    let st = stitch(&d, &w, 2).unwrap();
    let total = st.cumulative_sum().unwrap();
    assert!(total.exceeds(2));
    let parts = st.blocks[0].block_sum().add(&st.blocks[1].block_sum());
    assert_eq!(parts.to_rational(), total.to_rational());
    assert!(st.tail_bound(2).unwrap() <= rat(1, 2));
}

#[test]
fn totients_match_gcd_counts() {
    let t = Totient::new(3000);
    for n in 1..3000u64 {
        let count = (1..=n).filter(|&a| num_integer::gcd(a, n) == 1).count() as u64;
        assert_eq!(t.phi(n), count);
    }
}

#[test]
fn psi0_sum_matches_level_series() {
    // Sum over D-levels of k^-(1 + delta) with delta = 1/2.
    let d = DadicSequence::powers(2).unwrap();
    let w = WeightPair::half();
    let psi0 = build_psi0(&d, &w);
    let spec = SeriesSpec::new(Term::Psi, psi0, w, d.clone());
    let s = sums::partial_sum(&spec, &d.element(40).unwrap()).unwrap();
    let direct: f64 = (1..=40).map(|k| (k as f64).powf(-1.5)).sum();
    assert!((s.mid_f64() - direct).abs() < 1e-12);
    assert!(s.hi.to_f64().unwrap() < 2.613);
}
