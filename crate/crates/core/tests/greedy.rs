mod common;

use common::{dot, gaussian, gaussian_design, residual_of, rng};
use grrt_core::greedy::correlation_select;
use grrt_core::{
    run_greedy, DesignMatrix, Error, Matrix, Scenario, ScenarioKind, StoppingRule, Termination,
};
use proptest::prelude::*;
use rand::seq::index::sample;

/// Orthonormal `n × n` design from Gram-Schmidt on a Gaussian matrix.
fn orthogonal_design(seed: u64, n: usize) -> DesignMatrix {
    let mut r = rng(seed);
    let g = gaussian(&mut r, n, n);
    let mut q = Matrix::zeros(n, n);
    for j in 0..n {
        let mut v = g.col(j).to_vec();
        for _ in 0..2 {
            for i in 0..j {
                let c = dot(q.col(i), &v);
                for (vv, qv) in v.iter_mut().zip(q.col(i)) {
                    *vv -= c * qv;
                }
            }
        }
        let norm = dot(&v, &v).sqrt();
        for (dst, vv) in q.col_mut(j).iter_mut().zip(&v) {
            *dst = vv / norm;
        }
    }
    DesignMatrix::new(q, 1).unwrap()
}

fn naive_omp(y: &Matrix, x: &DesignMatrix, steps: usize) -> Vec<usize> {
    let mut support: Vec<usize> = Vec::new();
    let mut res = y.clone();
    for _ in 0..steps {
        let mut best = (usize::MAX, -1.0);
        for j in 0..x.cols() {
            if support.contains(&j) {
                continue;
            }
            let c = dot(x.col(j), res.col(0)).abs();
            if c > best.1 {
                best = (j, c);
            }
        }
        support.push(best.0);
        res = residual_of(y, x, &support);
    }
    support
}

#[test]
fn scenario_kinds_follow_table() {
    assert_eq!(Scenario::new(1, 1).unwrap().kind(), ScenarioKind::Smv);
    assert_eq!(Scenario::new(10, 1).unwrap().kind(), ScenarioKind::Mmv);
    assert_eq!(Scenario::new(1, 4).unwrap().kind(), ScenarioKind::Bsmv);
    assert_eq!(Scenario::new(10, 4).unwrap().kind(), ScenarioKind::Bmmv);
    assert!(Scenario::new(0, 1).is_err());
}

#[test]
fn self_correlation_wins_on_orthogonal_design() {
    let x = orthogonal_design(11, 8);
    let r = Matrix::column_vector(x.col(2));
    assert_eq!(correlation_select(&r, &x, Scenario::smv(), &[]).unwrap(), 2);
    let zero = Matrix::zeros(8, 1);
    assert_eq!(
        correlation_select(&zero, &x, Scenario::smv(), &[0, 1, 3]).unwrap(),
        2
    );
    let all: Vec<usize> = (0..8).collect();
    assert_eq!(
        correlation_select(&zero, &x, Scenario::smv(), &all),
        Err(Error::Exhausted)
    );
}

#[test]
fn bmmv_selection_by_enumeration() {
    let mut r = rng(12);
    let x = gaussian_design(&mut r, 4, 6, 2);
    let scenario = Scenario::new(2, 2).unwrap();
    for _ in 0..50 {
        let res = gaussian(&mut r, 4, 2);
        let scores: Vec<f64> = (0..3)
            .map(|b| {
                x.block_columns(b)
                    .flat_map(|j| (0..2).map(move |l| (j, l)))
                    .map(|(j, l)| dot(x.col(j), res.col(l)).powi(2))
                    .sum()
            })
            .collect();
        let best = (0..3)
            .max_by(|&a, &b| scores[a].total_cmp(&scores[b]))
            .unwrap();
        assert_eq!(correlation_select(&res, &x, scenario, &[]).unwrap(), best);
        let second = (0..3)
            .filter(|&b| b != best)
            .max_by(|&a, &b| scores[a].total_cmp(&scores[b]))
            .unwrap();
        assert_eq!(
            correlation_select(&res, &x, scenario, &[best]).unwrap(),
            second
        );
    }
}

#[test]
fn noiseless_orthogonal_recovery() {
    let x = orthogonal_design(13, 16);
    let mut y = Matrix::zeros(16, 1);
    for (j, c) in [(3, 1.0), (9, -1.0)] {
        for (yv, xv) in y.col_mut(0).iter_mut().zip(x.col(j)) {
            *yv += c * xv;
        }
    }
    let trace = run_greedy(&y, &x, Scenario::smv(), StoppingRule::KnownSparsity(2), 8).unwrap();
    let mut s = trace.row_support(2);
    s.sort_unstable();
    assert_eq!(s, vec![3, 9]);
    assert!(trace.residual_norms()[2] <= 1e-12);
}

#[test]
fn sigma_bound_above_signal_norm_stops_at_zero() {
    let mut r = rng(14);
    let x = gaussian_design(&mut r, 10, 20, 1);
    let y = gaussian(&mut r, 10, 1);
    let eps = 2.0 * y.frobenius_norm();
    let trace = run_greedy(&y, &x, Scenario::smv(), StoppingRule::SigmaBound(eps), 5).unwrap();
    assert!(trace.is_empty());
    assert_eq!(trace.termination(), &Termination::RuleFired);
}

#[test]
fn matches_naive_omp_on_random_instances() {
    let mut r = rng(15);
    for trial in 0..100 {
        let x = gaussian_design(&mut r, 20, 40, 1);
        let y = gaussian(&mut r, 20, 1);
        let trace = run_greedy(&y, &x, Scenario::smv(), StoppingRule::RunToKmax, 10).unwrap();
        assert_eq!(
            trace.blocks(),
            naive_omp(&y, &x, 10).as_slice(),
            "trial {trial}"
        );
    }
}

#[test]
fn known_sparsity_length() {
    let mut r = rng(16);
    let x = gaussian_design(&mut r, 24, 48, 4);
    let y = gaussian(&mut r, 24, 3);
    let scenario = Scenario::new(3, 4).unwrap();
    for k in 1..=6 {
        let trace = run_greedy(&y, &x, scenario, StoppingRule::KnownSparsity(k), 6).unwrap();
        assert_eq!(trace.len(), k);
    }
}

#[test]
fn rule_payloads_validated() {
    let mut r = rng(17);
    let x = gaussian_design(&mut r, 8, 16, 1);
    let y = gaussian(&mut r, 8, 1);
    let s = Scenario::smv();
    assert!(run_greedy(&y, &x, s, StoppingRule::KnownSparsity(0), 4).is_err());
    assert!(run_greedy(&y, &x, s, StoppingRule::NoiseNorm(-1.0), 4).is_err());
    assert!(run_greedy(&y, &x, s, StoppingRule::RunToKmax, 9).is_err());
    assert!(run_greedy(
        &y,
        &x,
        Scenario::new(2, 1).unwrap(),
        StoppingRule::RunToKmax,
        4
    )
    .is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn traces_are_nested_with_fixed_increments(
        seed in any::<u64>(),
        l in 1usize..4,
        lb in prop::sample::select(vec![1usize, 2, 4]),
    ) {
        let mut r = rng(seed);
        let n = 32;
        let x = gaussian_design(&mut r, n, 64, lb);
        let mut y = gaussian(&mut r, n, l).scaled(0.1);
        for b in sample(&mut r, 64 / lb, 2).into_vec() {
            for j in x.block_columns(b) {
                for c in 0..l {
                    for (yv, xv) in y.col_mut(c).iter_mut().zip(x.col(j)) {
                        *yv += xv;
                    }
                }
            }
        }
        let scenario = Scenario::new(l, lb).unwrap();
        let k_max = n / (2 * lb);
        let trace = run_greedy(&y, &x, scenario, StoppingRule::RunToKmax, k_max).unwrap();
        prop_assert_eq!(trace.residual_norms().len(), trace.len() + 1);
        prop_assert_eq!(trace.residual_ratios().len(), trace.len());
        for k in 1..=trace.len() {
            let prev = trace.row_support(k - 1);
            let cur = trace.row_support(k);
            prop_assert_eq!(cur.len(), prev.len() + lb);
            prop_assert!(prev.iter().all(|j| cur.contains(j)));
            let norms = trace.residual_norms();
            prop_assert!(norms[k] <= norms[k - 1] * (1.0 + 1e-12));
            let rr = trace.residual_ratios()[k - 1];
            prop_assert!((0.0..=1.0).contains(&rr));
        }
    }
}
