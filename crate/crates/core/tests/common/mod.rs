#![allow(dead_code)]

use grrt_core::{DesignMatrix, Matrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut impl Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

pub fn gaussian_design(rng: &mut impl Rng, n: usize, p: usize, block_len: usize) -> DesignMatrix {
    DesignMatrix::new(gaussian(rng, n, p), block_len).unwrap()
}

/// Dense solve by Gaussian elimination with partial pivoting.
#[allow(clippy::needless_range_loop)]
pub fn solve_dense(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let k = b.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .zip(b)
        .map(|(row, &rhs)| {
            let mut r = row.clone();
            r.push(rhs);
            r
        })
        .collect();
    for col in 0..k {
        let piv = (col..k)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .unwrap();
        m.swap(col, piv);
        for i in (col + 1)..k {
            let f = m[i][col] / m[col][col];
            for c in col..=k {
                m[i][c] -= f * m[col][c];
            }
        }
    }
    let mut x = vec![0.0; k];
    for i in (0..k).rev() {
        let mut v = m[i][k];
        for c in (i + 1)..k {
            v -= m[i][c] * x[c];
        }
        x[i] = v / m[i][i];
    }
    x
}

/// Least-squares coefficients on `support` via the normal equations, one
/// column of `y` at a time.
pub fn normal_equations(y: &Matrix, x: &DesignMatrix, support: &[usize]) -> Matrix {
    let k = support.len();
    let gram: Vec<Vec<f64>> = support
        .iter()
        .map(|&a| support.iter().map(|&b| dot(x.col(a), x.col(b))).collect())
        .collect();
    let mut coef = Matrix::zeros(k, y.cols());
    for l in 0..y.cols() {
        let rhs: Vec<f64> = support.iter().map(|&a| dot(x.col(a), y.col(l))).collect();
        let sol = solve_dense(&gram, &rhs);
        coef.col_mut(l).copy_from_slice(&sol);
    }
    coef
}

pub fn residual_of(y: &Matrix, x: &DesignMatrix, support: &[usize]) -> Matrix {
    let coef = normal_equations(y, x, support);
    let mut r = y.clone();
    for l in 0..y.cols() {
        for (i, &j) in support.iter().enumerate() {
            let c = coef[(i, l)];
            for (rv, xv) in r.col_mut(l).iter_mut().zip(x.col(j)) {
                *rv -= c * xv;
            }
        }
    }
    r
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Kolmogorov-Smirnov distance between a sample and a continuous CDF.
pub fn ks_distance(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            let f = cdf(s);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

pub fn assert_close(got: f64, want: f64, tol: f64, what: &str) {
    assert!(
        (got - want).abs() <= tol,
        "{what}: got {got:e}, want {want:e}, diff {:e} > {tol:e}",
        (got - want).abs()
    );
}
