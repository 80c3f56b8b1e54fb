use ndarray::Array2;
use proptest::prelude::*;
use rand::Rng;
use shiftlens::rng::keyed_rng;
use shiftlens::stattests::*;

mod common;
use common::{brute_ks, direct_mmd_unbiased, textbook_chi2};

fn to_matrix(rows: &[Vec<f64>]) -> Array2<f64> {
    let d = rows[0].len();
    Array2::from_shape_vec((rows.len(), d), rows.concat()).unwrap()
}

#[test]
fn kolmogorov_tail_matches_reference_values() {
    // Q(λ) = 2 Σ (-1)^{k-1} exp(-2k²λ²)
    assert!((kolmogorov_survival(1.0) - 0.269_999_671).abs() < 1e-8);
    assert!((kolmogorov_survival(1.358_099) - 0.05).abs() < 1e-5);
    assert!((kolmogorov_survival(1.627_624) - 0.01).abs() < 1e-5);
}

#[test]
fn chi2_two_df_survival_is_exponential() {
    // df = 2 survival is exp(-x/2)
    let a = [0usize, 0, 0, 1, 1, 2, 2, 2, 2, 0];
    let b = [1usize, 1, 1, 1, 2, 0, 1, 1, 2, 1];
    let r = chi2_test(&a, &b, 3).unwrap();
    assert_eq!(r.df, Some(2));
    assert!((r.p_value - (-r.statistic / 2.0).exp()).abs() < 1e-12);
}

#[test]
fn ks_null_rejection_rate_is_near_alpha() {
    let trials = 1000;
    let mut rejects = 0;
    for t in 0..trials {
        let mut rng = keyed_rng(77, &[t]);
        let a: Vec<f64> = (0..100).map(|_| rng.gen()).collect();
        let b: Vec<f64> = (0..100).map(|_| rng.gen()).collect();
        if ks_test(&a, &b).unwrap().p_value < 0.05 {
            rejects += 1;
        }
    }
    let rate = rejects as f64 / trials as f64;
    assert!((0.02..=0.08).contains(&rate), "rate {rate}");
}

#[test]
fn mmd_null_p_values_are_roughly_uniform() {
    let mut rejects = 0;
    let trials = 100;
    for t in 0..trials {
        let mut rng = keyed_rng(5, &[t]);
        let a = Array2::from_shape_fn((20, 2), |_| rng.gen::<f64>());
        let b = Array2::from_shape_fn((20, 2), |_| rng.gen::<f64>());
        let r = mmd_test(a.view(), b.view(), MmdOptions { permutations: 200, seed: t }).unwrap();
        if r.p_value < 0.1 {
            rejects += 1;
        }
    }
    assert!((2..=22).contains(&rejects), "{rejects} rejections");
}

#[test]
fn mmd_detects_a_mean_shift() {
    let mut rng = keyed_rng(6, &[]);
    let a = Array2::from_shape_fn((50, 3), |_| rng.gen::<f64>());
    let b = Array2::from_shape_fn((50, 3), |_| rng.gen::<f64>() + 0.5);
    let r = mmd_test(a.view(), b.view(), MmdOptions::default()).unwrap();
    assert!(r.p_value <= 0.01);
}

fn sample(len: impl Into<prop::collection::SizeRange>) -> impl Strategy<Value = Vec<f64>> {
    // coarse grid so ties occur
    prop::collection::vec((0i32..20).prop_map(|v| v as f64 / 4.0), len)
}

fn rows(n: impl Into<prop::collection::SizeRange>) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 2), n)
}

proptest! {
    #[test]
    fn ks_statistic_equals_brute_force(a in sample(1..40), b in sample(1..40)) {
        let d = ks_statistic(&a, &b).unwrap();
        prop_assert!((d - brute_ks(&a, &b)).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&d));
    }

    #[test]
    fn ks_is_symmetric_and_zero_on_identical(a in sample(1..40), b in sample(1..40)) {
        prop_assert_eq!(ks_statistic(&a, &b).unwrap(), ks_statistic(&b, &a).unwrap());
        prop_assert_eq!(ks_statistic(&a, &a).unwrap(), 0.0);
        prop_assert_eq!(ks_test(&a, &a).unwrap().p_value, 1.0);
        let p = ks_test(&a, &b).unwrap().p_value;
        prop_assert!((0.0..=1.0).contains(&p));
    }

    #[test]
    fn mmd_matches_direct_evaluation(a in rows(2..12), b in rows(2..12), sigma2 in 0.1f64..5.0) {
        let got = mmd_unbiased(to_matrix(&a).view(), to_matrix(&b).view(), sigma2).unwrap();
        let want = direct_mmd_unbiased(&a, &b, sigma2);
        prop_assert!((got - want).abs() < 1e-10, "{} vs {}", got, want);
    }

    #[test]
    fn biased_mmd_vanishes_on_identical_samples(a in rows(2..12), sigma2 in 0.1f64..5.0) {
        let m = to_matrix(&a);
        prop_assert!(mmd_biased(m.view(), m.view(), sigma2).unwrap().abs() < 1e-12);
    }

    #[test]
    fn mmd_test_ignores_row_order(a in rows(3..10), b in rows(3..10), seed in 0u64..50) {
        let opts = MmdOptions { permutations: 50, seed };
        let r1 = mmd_test(to_matrix(&a).view(), to_matrix(&b).view(), opts).unwrap();
        let mut ra = a.clone();
        ra.reverse();
        let mut rb = b.clone();
        rb.rotate_left(1);
        let r2 = mmd_test(to_matrix(&ra).view(), to_matrix(&rb).view(), opts).unwrap();
        prop_assert_eq!(r1.p_value, r2.p_value);
        prop_assert!((r1.statistic - r2.statistic).abs() < 1e-12);
        prop_assert!(r1.p_value > 0.0 && r1.p_value <= 1.0);
    }

    #[test]
    fn chi2_matches_textbook(a in prop::collection::vec(0usize..5, 1..60), b in prop::collection::vec(0usize..5, 1..60)) {
        let r = chi2_test(&a, &b, 5).unwrap();
        let nonzero = (0..5).filter(|c| a.contains(c) || b.contains(c)).count();
        if nonzero <= 1 {
            prop_assert_eq!(r.p_value, 1.0);
            prop_assert!(r.degenerate);
        } else {
            prop_assert!((r.statistic - textbook_chi2(&a, &b, 5)).abs() < 1e-9);
            prop_assert_eq!(r.df, Some(nonzero - 1));
        }
        prop_assert!((0.0..=1.0).contains(&r.p_value));
    }

    #[test]
    fn bonferroni_scales_min_p(ps in prop::collection::vec(0.0f64..=1.0, 1..20), alpha in 0.001f64..0.5) {
        let results: Vec<TestResult> = ps
            .iter()
            .map(|&p| TestResult { test_name: TestKind::Ks, statistic: 1.0 - p, p_value: p, dims_tested: 1, df: None, degenerate: false })
            .collect();
        let m = bonferroni(results, alpha).unwrap();
        let min = ps.iter().copied().fold(f64::INFINITY, f64::min);
        let k = ps.len() as f64;
        prop_assert_eq!(m.combined_p, (k * min).min(1.0));
        prop_assert_eq!(m.reject, min < alpha / k);
    }
}
