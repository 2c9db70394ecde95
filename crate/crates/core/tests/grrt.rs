mod common;

use common::{gaussian, gaussian_design, rng};
use grrt_core::grrt::{gamma_sequence, kmax_for, select_step};
use grrt_core::lasso::lasso_aggregated;
use grrt_core::specfun::{beta_inv_cdf, BetaParams};
use grrt_core::{
    default_kmax, grrt_select, run_greedy, DesignMatrix, Error, FallbackPolicy, Matrix, PosRule,
    Scenario, StoppingRule, SupportSequence, ThresholdProfile,
};
use proptest::prelude::*;
use rand::seq::index::sample;
use rand::Rng;

const GOLDEN: [f64; 32] = [
    0.837_236_696_657_827_9,
    0.834_925_234_165_095,
    0.832_544_940_332_687,
    0.830_092_677_330_417_9,
    0.827_565_113_845_493_7,
    0.824_958_709_987_152_6,
    0.822_269_700_762_475_9,
    0.819_494_077_964_012_1,
    0.816_627_570_289_366_7,
    0.813_665_621_489_430_9,
    0.810_603_366_314_974_8,
    0.8074356040003401,
    0.804_156_768_987_247_7,
    0.800_760_898_550_497_9,
    0.797_241_596_939_626_5,
    0.793_591_995_595_254_3,
    0.789_804_708_934_588_4,
    0.785_871_785_125_688,
    0.781_784_651_182_762_2,
    0.777_534_051_612_634_7,
    0.7731099797227851,
    0.768_501_600_560_759_8,
    0.763_697_164_289_201_6,
    0.758_683_908_605_437_1,
    0.753_447_948_583_651_7,
    0.747_974_152_044_110_1,
    0.742_245_998_229_129_7,
    0.736_245_417_179_320_2,
    0.729_952_606_743_583,
    0.723_345_823_607_696_4,
    0.716_401_144_071_276_4,
    0.709_092_189_520_553,
];

fn smv_profile(alpha: f64) -> ThresholdProfile {
    ThresholdProfile::new(64, 128, Scenario::smv(), alpha, 32, PosRule::FullDictionary).unwrap()
}

/// `Y = X B + σ W` with `k` unit-magnitude rows of random sign.
fn planted(
    r: &mut impl Rng,
    x: &DesignMatrix,
    l: usize,
    k: usize,
    sigma: f64,
) -> (Matrix, Vec<usize>) {
    let mut support = sample(r, x.cols(), k).into_vec();
    support.sort_unstable();
    let mut b = Matrix::zeros(x.cols(), l);
    for &j in &support {
        for c in 0..l {
            b[(j, c)] = if r.random_bool(0.5) { 1.0 } else { -1.0 };
        }
    }
    let y = x
        .matrix()
        .mul(&b)
        .add(&gaussian(r, x.rows(), l).scaled(sigma));
    (y, support)
}

#[test]
fn golden_threshold_vector() {
    let profile = smv_profile(0.01);
    for (k, (g, w)) in profile.gamma().iter().zip(GOLDEN).enumerate() {
        assert!((g - w).abs() <= 1e-12 * w, "k = {}: {g} vs {w}", k + 1);
    }
}

#[test]
fn thresholds_grow_with_alpha() {
    let lo = smv_profile(0.01);
    let hi = smv_profile(0.1);
    for (a, b) in lo.gamma().iter().zip(hi.gamma()) {
        assert!(b > a);
    }
    let mut prev = vec![0.0; 32];
    for i in 1..100 {
        let g = smv_profile(i as f64 / 100.0);
        for (p, v) in prev.iter().zip(g.gamma()) {
            assert!(v >= p);
        }
        prev = g.gamma().to_vec();
    }
}

#[test]
fn lasso_mode_formula() {
    let profile = ThresholdProfile::for_lasso(64, 128, 0.1, 32).unwrap();
    for k in 1..=32 {
        let params = BetaParams::new((64 - k) as f64 / 2.0, 0.5).unwrap();
        let q = beta_inv_cdf(params, 0.1 / ((128 - k + 1) as f64 * 32.0)).unwrap();
        assert!((profile.gamma()[k - 1] - q.sqrt()).abs() <= 1e-15);
    }
}

#[test]
fn pos_and_kmax() {
    assert_eq!(smv_profile(0.01).pos(1), 128);
    let bomp = ThresholdProfile::new(
        64,
        128,
        Scenario::new(1, 4).unwrap(),
        0.01,
        8,
        PosRule::FullDictionary,
    )
    .unwrap();
    assert_eq!(bomp.pos(3), 30);
    let mos = ThresholdProfile::new(64, 128, Scenario::smv(), 0.01, 32, PosRule::SingleCandidate)
        .unwrap();
    assert_eq!(mos.pos(7), 1);
    assert_eq!(default_kmax(64, 1).unwrap(), 32);
    assert_eq!(default_kmax(64, 4).unwrap(), 8);
    assert_eq!(default_kmax(5, 1).unwrap(), 3);
    assert!(default_kmax(3, 2).is_err());
    assert_eq!(kmax_for(64, 10, 1).unwrap(), 37);
}

#[test]
fn profile_rejects_bad_configuration() {
    let s = Scenario::smv();
    assert!(ThresholdProfile::new(64, 128, s, 0.0, 32, PosRule::FullDictionary).is_err());
    assert!(ThresholdProfile::new(64, 128, s, 1.0, 32, PosRule::FullDictionary).is_err());
    assert!(ThresholdProfile::new(64, 128, s, 0.1, 64, PosRule::FullDictionary).is_err());
    assert!(ThresholdProfile::new(64, 128, s, 0.1, 63, PosRule::FullDictionary).is_ok());
}

#[test]
fn gamma_in_unit_interval_over_experiment_grid() {
    for (l, lb) in [(1, 1), (10, 1), (1, 4), (10, 4)] {
        let scenario = Scenario::new(l, lb).unwrap();
        let k_max = default_kmax(64, lb).unwrap();
        for alpha in [0.01, 0.1, 0.5] {
            for rule in [PosRule::FullDictionary, PosRule::SingleCandidate] {
                let g = gamma_sequence(64, 128, scenario, alpha, k_max, rule).unwrap();
                assert!(g.gamma().iter().all(|&v| v > 0.0 && v < 1.0));
            }
        }
    }
}

#[test]
fn selection_rule_examples() {
    assert_eq!(select_step(&[0.9, 0.05, 0.95], &[0.3, 0.3, 0.5]), Some(2));
    assert_eq!(select_step(&[0.9, 0.9, 0.9], &[0.3, 0.3, 0.3]), None);
    assert_eq!(select_step(&[0.3], &[0.3]), None);
}

#[test]
fn noiseless_orthogonal_end_to_end() {
    let x = DesignMatrix::new(Matrix::identity(16), 1).unwrap();
    let mut y = Matrix::zeros(16, 1);
    y[(4, 0)] = 1.0;
    y[(11, 0)] = -1.0;
    let k_max = default_kmax(16, 1).unwrap();
    let trace = run_greedy(&y, &x, Scenario::smv(), StoppingRule::RunToKmax, k_max).unwrap();
    let profile =
        ThresholdProfile::new(16, 16, Scenario::smv(), 0.1, k_max, PosRule::FullDictionary)
            .unwrap();
    let res = grrt_select(&trace, &profile, &y, &x, FallbackPolicy::EmptySupport).unwrap();
    assert_eq!(res.k_selected, Some(2));
    let mut s = res.support.clone();
    s.sort_unstable();
    assert_eq!(s, vec![4, 11]);
    assert_eq!(res.estimate, y);
    assert!(!res.fallback_engaged);
}

#[test]
fn zero_observation_engages_fallback() {
    let mut r = rng(31);
    let x = gaussian_design(&mut r, 32, 64, 1);
    let y = Matrix::zeros(32, 1);
    let trace = run_greedy(&y, &x, Scenario::smv(), StoppingRule::RunToKmax, 16).unwrap();
    let profile =
        ThresholdProfile::new(32, 64, Scenario::smv(), 0.1, 16, PosRule::FullDictionary).unwrap();
    let res = grrt_select(&trace, &profile, &y, &x, FallbackPolicy::EmptySupport).unwrap();
    assert!(res.fallback_engaged);
    assert_eq!(res.k_selected, None);
    assert!(res.support.is_empty());
    let res = grrt_select(&trace, &profile, &y, &x, FallbackPolicy::MinRatio).unwrap();
    assert!(res.fallback_engaged);
    assert!(res.k_selected.is_some());
}

#[test]
fn high_snr_recovery_for_every_scenario() {
    let mut r = rng(32);
    for (l, lb) in [(1, 1), (5, 1), (1, 2), (5, 2)] {
        let x = gaussian_design(&mut r, 64, 128, lb);
        let scenario = Scenario::new(l, lb).unwrap();
        let k_max = default_kmax(64, lb).unwrap();
        let profile =
            ThresholdProfile::new(64, 128, scenario, 0.1, k_max, PosRule::FullDictionary).unwrap();
        let mut blocks = sample(&mut r, 128 / lb, 3).into_vec();
        blocks.sort_unstable();
        let mut b = Matrix::zeros(128, l);
        for &blk in &blocks {
            for j in x.block_columns(blk) {
                for c in 0..l {
                    b[(j, c)] = 1.0;
                }
            }
        }
        let y = x
            .matrix()
            .mul(&b)
            .add(&gaussian(&mut r, 64, l).scaled(1e-3));
        let trace = run_greedy(&y, &x, scenario, StoppingRule::RunToKmax, k_max).unwrap();
        let res = grrt_select(&trace, &profile, &y, &x, FallbackPolicy::EmptySupport).unwrap();
        let mut s = res.support.clone();
        s.sort_unstable();
        assert_eq!(s, b.nonzero_rows(), "L = {l}, l_b = {lb}");
        let k = res.k_selected.unwrap();
        assert!(res.residual_ratios[k - 1] < res.gamma[k - 1]);
        assert!((k..res.gamma.len()).all(|i| res.residual_ratios[i] >= res.gamma[i]));
    }
}

#[test]
fn lasso_aggregated_grrt_recovers_support() {
    let mut r = rng(33);
    let x = gaussian_design(&mut r, 64, 128, 1);
    let (y, support) = planted(&mut r, &x, 1, 4, 1e-3);
    let agg = lasso_aggregated(&y, &x, 32).unwrap();
    assert_eq!(agg.len(), 32);
    assert_eq!(agg.steps(), 32);
    let profile = ThresholdProfile::for_lasso(64, 128, 0.1, 32).unwrap();
    let res = grrt_select(&agg, &profile, &y, &x, FallbackPolicy::EmptySupport).unwrap();
    let mut s = res.support.clone();
    s.sort_unstable();
    assert_eq!(s, support);
}

#[test]
fn empty_or_overlong_sequences_rejected() {
    let mut r = rng(34);
    let x = gaussian_design(&mut r, 32, 64, 1);
    let (y, _) = planted(&mut r, &x, 1, 2, 0.1);
    let trace = run_greedy(&y, &x, Scenario::smv(), StoppingRule::KnownSparsity(1), 4).unwrap();
    let short =
        ThresholdProfile::new(32, 64, Scenario::smv(), 0.1, 1, PosRule::FullDictionary).unwrap();
    assert!(grrt_select(&trace, &short, &y, &x, FallbackPolicy::EmptySupport).is_ok());
    let eps = 10.0 * y.frobenius_norm();
    let empty = run_greedy(&y, &x, Scenario::smv(), StoppingRule::SigmaBound(eps), 4).unwrap();
    assert_eq!(
        grrt_select(&empty, &short, &y, &x, FallbackPolicy::EmptySupport),
        Err(Error::EmptyTrace)
    );
    let long = run_greedy(&y, &x, Scenario::smv(), StoppingRule::KnownSparsity(3), 4).unwrap();
    assert!(matches!(
        grrt_select(&long, &short, &y, &x, FallbackPolicy::EmptySupport),
        Err(Error::Config(_))
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn selection_is_scale_invariant(seed in any::<u64>(), scale in -3.0f64..3.0, sigma in 0.01f64..0.5) {
        let mut r = rng(seed);
        let x = gaussian_design(&mut r, 32, 64, 1);
        let (y, _) = planted(&mut r, &x, 1, 3, sigma);
        let c = 10f64.powf(scale);
        let yc = y.scaled(c);
        let profile = ThresholdProfile::new(32, 64, Scenario::smv(), 0.1, 16, PosRule::FullDictionary).unwrap();
        let t1 = run_greedy(&y, &x, Scenario::smv(), StoppingRule::RunToKmax, 16).unwrap();
        let t2 = run_greedy(&yc, &x, Scenario::smv(), StoppingRule::RunToKmax, 16).unwrap();
        prop_assert_eq!(t1.blocks(), t2.blocks());
        for (a, b) in t1.residual_ratios().iter().zip(t2.residual_ratios()) {
            prop_assert!((a - b).abs() <= 1e-10);
        }
        let g1 = grrt_select(&t1, &profile, &y, &x, FallbackPolicy::EmptySupport).unwrap();
        let g2 = grrt_select(&t2, &profile, &yc, &x, FallbackPolicy::EmptySupport).unwrap();
        prop_assert_eq!(g1.k_selected, g2.k_selected);
        prop_assert_eq!(g1.support, g2.support);
    }
}
