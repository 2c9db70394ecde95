use grrt_core::{DesignMatrix, Matrix};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::{Error, Result};

/// Sylvester Hadamard matrix of order `n` (entries `±1`).
pub fn sylvester_hadamard(n: usize) -> Result<Matrix> {
    if n < 2 || !n.is_power_of_two() {
        return Err(Error::Config(format!(
            "Hadamard order must be a power of two >= 2, got {n}"
        )));
    }
    // H[i][j] = (-1)^{popcount(i & j)}
    Ok(Matrix::from_fn(n, n, |i, j| {
        if (i & j).count_ones() % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }))
}

/// `[I_n, H_n / √n]`, an `n × 2n` design with mutual coherence `1/√n`.
pub fn hadamard_identity_design(n: usize, block_len: usize) -> Result<DesignMatrix> {
    let h = sylvester_hadamard(n)?;
    let scale = 1.0 / (n as f64).sqrt();
    let m = Matrix::from_fn(n, 2 * n, |i, j| {
        if j < n {
            if i == j {
                1.0
            } else {
                0.0
            }
        } else {
            h[(i, j - n)] * scale
        }
    });
    Ok(DesignMatrix::new(m, block_len)?)
}

/// `n × p` matrix of i.i.d. standard normals with normalized columns.
pub fn gaussian_design(
    rng: &mut impl Rng,
    n: usize,
    p: usize,
    block_len: usize,
) -> Result<DesignMatrix> {
    let m = Matrix::from_fn(n, p, |_, _| rng.sample(StandardNormal));
    Ok(DesignMatrix::new(m, block_len)?)
}
