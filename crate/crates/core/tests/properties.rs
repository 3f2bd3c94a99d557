mod support;

use proptest::prelude::*;

use growthrate::estimators::{
    estimate_lengths, estimate_pairwise, internal_branch_length, pairwise_abs_sum,
};
use growthrate::rng::replicate;
use growthrate::sim::{build_cpp_tree, sample_coalescence_times, Regime};
use growthrate::tree::{parse_newick, parse_newick_many};
use growthrate::CoalescenceTimes;

fn double_loop(x: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            s += (x[i] - x[j]).abs();
        }
    }
    s
}

/// Integer heights strictly inside `(0, horizon)`.
fn integer_heights(max_m: usize, horizon: u32) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(1..horizon, 2..=max_m)
        .prop_map(|v| v.into_iter().map(f64::from).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn sorted_pairwise_sum_equals_double_loop(x in prop::collection::vec(-1000i32..1000, 2..40)) {
        let x: Vec<f64> = x.into_iter().map(f64::from).collect();
        prop_assert_eq!(pairwise_abs_sum(&x), double_loop(&x));
    }

    #[test]
    fn cpp_tree_internal_length_matches_formula(h in integer_heights(7, 20)) {
        let times = CoalescenceTimes::new(h.clone(), Some(20.0)).unwrap();
        let formula = internal_branch_length(&times).unwrap();
        let tree = build_cpp_tree(&times).unwrap();
        prop_assert_eq!(tree.n_tips(), h.len() + 1);
        prop_assert_eq!(tree.internal_branch_length().unwrap(), formula);
        prop_assert_eq!(support::cpp_internal_length_by_lineages(&h), formula);
    }

    #[test]
    fn cpp_tree_newick_round_trip(h in integer_heights(7, 20)) {
        let times = CoalescenceTimes::new(h, Some(20.0)).unwrap();
        let tree = build_cpp_tree(&times).unwrap();
        let text = tree.to_newick();
        let back = parse_newick(&text).unwrap();
        prop_assert_eq!(back.to_newick(), text);
        prop_assert_eq!(back.internal_branch_length().unwrap(), tree.internal_branch_length().unwrap());
        let mut want = times.times().to_vec();
        want.sort_by(|a, b| b.total_cmp(a));
        let got = back.coalescence_times(0.0).unwrap();
        prop_assert_eq!(got.times(), &want[..]);
    }

    #[test]
    fn parser_is_total(s in "[(),:;A-Z0-9.\\[\\]' e-]{0,40}") {
        let _ = parse_newick(&s);
        let _ = parse_newick_many(&s);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn real_valued_round_trip(h in prop::collection::vec(0.001f64..39.999, 2..30)) {
        let times = CoalescenceTimes::new(h, Some(40.0)).unwrap();
        let tree = build_cpp_tree(&times).unwrap();
        let text = tree.to_newick();
        let back = parse_newick(&text).unwrap();
        prop_assert_eq!(back.to_newick(), text);
        let rel = (back.internal_branch_length().unwrap() / tree.internal_branch_length().unwrap() - 1.0).abs();
        prop_assert!(rel < 1e-9);
    }

    #[test]
    fn pairwise_is_order_free_and_equivariant(
        h in prop::collection::vec(0.0f64..50.0, 3..25),
        k in 0.1f64..10.0,
        shift in -20.0f64..20.0,
        seed in any::<u64>(),
    ) {
        let times = CoalescenceTimes::new(h.clone(), None).unwrap();
        prop_assume!(pairwise_abs_sum(&h) > 1e-6);
        let base = estimate_pairwise(&times, 1.0).unwrap();
        let mut perm: Vec<usize> = (0..h.len()).collect();
        let mut s = seed;
        for i in (1..perm.len()).rev() {
            s = growthrate::rng::mix64(s);
            perm.swap(i, (s % (i as u64 + 1)) as usize);
        }
        let permuted = estimate_pairwise(&times.permuted(&perm), 1.0).unwrap();
        prop_assert!((permuted / base - 1.0).abs() < 1e-12);
        let scaled = estimate_pairwise(&times.scaled(k), 1.0).unwrap();
        prop_assert!((scaled * k / base - 1.0).abs() < 1e-12);
        let shifted = estimate_pairwise(&times.shifted(shift), 1.0).unwrap();
        prop_assert!((shifted / base - 1.0).abs() < 1e-9);
        let c = 0.37;
        prop_assert_eq!(estimate_pairwise(&times, c).unwrap(), c * base);
    }

    #[test]
    fn lengths_estimator_scales(h in prop::collection::vec(0.001f64..39.0, 3..25), k in 0.1f64..1.0) {
        let times = CoalescenceTimes::new(h, Some(40.0)).unwrap();
        let a = estimate_lengths(&times);
        prop_assume!(a.is_ok());
        let b = estimate_lengths(&times.scaled(k)).unwrap();
        prop_assert!((b * k / a.unwrap() - 1.0).abs() < 1e-12);
    }
}

/// Averaging the internal length over all branch orders of fixed times
/// gives `(H_(1) - mean H) + (1/(n-1)) sum_{i,j} (H_i - H_j)^+`.
#[test]
fn rao_blackwell_identity_n5() {
    let samples = replicate(77, 100, |rng| {
        use rand::Rng;
        (0..4)
            .map(|_| rng.random_range(0.0..40.0))
            .collect::<Vec<f64>>()
    });
    for h in samples {
        let m = h.len() as f64;
        let average = support::mean_over_permutations(&h, |p| {
            internal_branch_length(&CoalescenceTimes::new(p.to_vec(), Some(40.0)).unwrap()).unwrap()
        });
        let max = h.iter().copied().fold(f64::MIN, f64::max);
        let mean = h.iter().sum::<f64>() / m;
        let pos: f64 = h
            .iter()
            .flat_map(|a| h.iter().map(move |b| (a - b).max(0.0)))
            .sum();
        let rhs = (max - mean) + pos / m;
        assert!((average - rhs).abs() <= 1e-12 * rhs, "{average} vs {rhs}");
    }
}

/// `1 / r_hat` with unit constant is unbiased for `1 / r` when the times
/// follow the large-n law.
#[test]
fn reciprocal_unbiased_under_large_n() {
    let (n, r) = (8, 0.7);
    let regime = Regime::LargeN { r, horizon: 40.0 };
    let inv = replicate(5, 200_000, |rng| {
        let t = sample_coalescence_times(n, &regime, rng).unwrap();
        1.0 / estimate_pairwise(&t, 1.0).unwrap()
    });
    let mean = growthrate::stats::mean(&inv);
    let se = growthrate::stats::std_error(&inv);
    assert!((mean - 1.0 / r).abs() < 4.0 * se, "mean {mean}, se {se}");
}
