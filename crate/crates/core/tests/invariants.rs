//! Cross-module invariants under random inputs.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Zero};
use proptest::prelude::*;

use mixdio::approxfn::{ApproximatingFunction, Comparator, WeightPair};
use mixdio::arith::{exp, rat};
use mixdio::dadic::DadicSequence;
use mixdio::dirichlet::{denominator_pav_bound, dirichlet_search, m_index, verify};
use mixdio::sets::{self, IntervalUnion};
use mixdio::sums::{self, SeriesSpec, Term};

fn seq_strategy() -> impl Strategy<Value = DadicSequence> {
    prop::collection::vec(2u64..6, 1..4).prop_map(|r| DadicSequence::cycle(&r).unwrap())
}

fn tau_strategy() -> impl Strategy<Value = ApproximatingFunction> {
    (1i64..8, 1i64..5).prop_map(|(n, d)| ApproximatingFunction::power_law(exp(n, d)).unwrap())
}

fn weights_strategy() -> impl Strategy<Value = WeightPair> {
    (1i64..8).prop_map(|n| WeightPair::from_i(exp(n, 9)).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pav_divides_and_is_maximal(d in seq_strategy(), q in 1u64..1_000_000) {
        let k = d.pav_index_u64(q);
        let n = d.element_u64(k).unwrap();
        prop_assert_eq!(q % n, 0);
        prop_assert_ne!(q % d.element_u64(k + 1).unwrap(), 0);
        prop_assert_eq!(d.pav_index(&BigUint::from(q)), k);
    }

    #[test]
    fn strict_membership_implies_non_strict(d in seq_strategy(), psi in tau_strategy(), w in weights_strategy(), q in 1u64..5000) {
        let q = BigUint::from(q);
        if psi.in_a_with(&w, &d, &q, Comparator::Strict) {
            prop_assert!(psi.in_a_with(&w, &d, &q, Comparator::NonStrict));
        }
    }

    #[test]
    fn union_between_max_and_sum(raw in prop::collection::vec((0u32..1000, 1u32..200), 1..30)) {
        let items: Vec<(BigRational, BigRational)> = raw
            .iter()
            .map(|&(a, l)| (rat(a as i64, 1000), rat((a + l).min(1000) as i64, 1000)))
            .collect();
        let total: BigRational = items.iter().map(|(a, b)| b - a).sum();
        let longest = items.iter().map(|(a, b)| b - a).max().unwrap();
        let u = IntervalUnion::from_intervals(items);
        let m = u.measure().value().unwrap().clone();
        prop_assert!(m <= total && m >= longest);
        for w in u.intervals().windows(2) {
            prop_assert!(w[0].1 < w[1].0);
        }
    }

    #[test]
    fn layer_measure_grows_with_range(d in seq_strategy(), psi in tau_strategy(), q1 in 1u64..60, a in 1u64..40, b in 1u64..40) {
        let w = WeightPair::half();
        let small = sets::tail_measure(&psi, &w, &d, q1, q1 + a).unwrap();
        let large = sets::tail_measure(&psi, &w, &d, q1, q1 + a + b).unwrap();
        prop_assert!(small.lo <= large.hi);
    }

    #[test]
    fn layer_within_first_moment(d in seq_strategy(), psi in tau_strategy(), q1 in 1u64..200, len in 1u64..100) {
        let w = WeightPair::half();
        let layer = sets::layer(&psi, &w, &d, q1, q1 + len).unwrap();
        let fm = sets::first_moment(&psi, &w, &layer.members, 96);
        prop_assert!(layer.measure.lo <= fm.hi);
        for &q in &layer.members {
            prop_assert!(psi.in_a_u64(&w, &d, q));
        }
    }

    #[test]
    fn partial_sums_are_monotone(psi in tau_strategy(), r in 1u64..300, extra in 1u64..300) {
        let spec = SeriesSpec::new(Term::Psi, psi, WeightPair::half(), DadicSequence::powers(2).unwrap());
        let a = sums::partial_sum(&spec, &BigUint::from(r)).unwrap();
        let b = sums::partial_sum(&spec, &BigUint::from(r + extra)).unwrap();
        prop_assert!(a.lo <= b.hi);
    }

    #[test]
    fn dirichlet_outputs_verify(d in seq_strategy(), num in any::<u64>(), den in 1u64..u64::MAX, c in 1usize..3, k in 1usize..6) {
        let x = BigRational::new(BigInt::from(num % den), BigInt::from(den));
        let psi = ApproximatingFunction::power_law(exp(1, 1)).unwrap();
        let m = m_index(&psi, &WeightPair::half(), &d, c, k).unwrap().m;
        let a = dirichlet_search(&x, &d, c, k, m).unwrap();
        prop_assert!(verify(&x, &d, c, k, m, &a.p, &a.q).unwrap());
        prop_assert!(denominator_pav_bound(&d, c, m, &a.q));
    }

    #[test]
    fn empty_regime_has_no_members(d in seq_strategy(), w in weights_strategy(), q in 1u64..10_000) {
        // i tau >= 1 leaves A_psi empty.
        let tau = w.i().recip();
        let psi = ApproximatingFunction::power_law(tau).unwrap();
        prop_assert!(!psi.in_a_u64(&w, &d, q));
    }
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let psi = ApproximatingFunction::power_law(exp(1, 1)).unwrap();
    let w = WeightPair::half();
    let d = DadicSequence::cycle(&[2, 3]).unwrap();
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| {
                let layer = sets::layer(&psi, &w, &d, 500, 4000).unwrap();
                let spec = SeriesSpec::new(Term::RestrictedPsiJ, psi.clone(), w, d.clone());
                (layer.measure, sums::partial_sum(&spec, &BigUint::from(5000u32)).unwrap())
            })
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn zero_and_one_are_consistent() {
    let d = DadicSequence::powers(2).unwrap();
    assert_eq!(d.pav(&BigUint::one()).index, 0);
    let u = IntervalUnion::from_intervals(Vec::new());
    assert!(u.measure().value().unwrap().is_zero());
}
