//! Seeded random streams and the samplers built on them.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Error, Result};

use super::eigen::{check_psd, sym_eigen};
use super::matrix::Matrix;
use super::special::normal_quantile;

/// A reproducible random stream identified by `(seed, stream_id)`.
///
/// Streams with the same pair produce bit-identical sequences; different
/// stream ids select independent ChaCha streams under the same key.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream_id);
        RngStream {
            seed,
            stream_id,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Uniform draw on the open interval (0, 1).
    pub fn uniform(&mut self) -> f64 {
        let bits = self.inner.next_u64() >> 11;
        (bits as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal draw by inversion: one uniform per normal.
    pub fn standard_normal(&mut self) -> f64 {
        normal_quantile(self.uniform())
    }

    pub fn normal(&mut self, mean: f64, sd: f64) -> f64 {
        mean + sd * self.standard_normal()
    }

    pub fn bernoulli(&mut self, prob: f64) -> bool {
        self.uniform() < prob
    }
}

/// Symmetric square root `V · diag(√λ) · Vᵀ` of a PSD matrix.
pub fn sqrt_psd(cov: &Matrix) -> Result<Matrix> {
    let eig = sym_eigen(cov)?;
    check_psd(&eig)?;
    Ok(eig.reconstruct_with(|l| l.max(0.0).sqrt()))
}

/// `n` draws from `N(mean, cov)`, one per row.
pub fn sample_mvn(rng: &mut RngStream, mean: &[f64], cov: &Matrix, n: usize) -> Result<Matrix> {
    if !cov.is_square() || cov.rows() != mean.len() {
        return Err(Error::InvalidArgument(format!(
            "mean has length {} but covariance is {}x{}",
            mean.len(),
            cov.rows(),
            cov.cols()
        )));
    }
    let root = sqrt_psd(cov)?;
    Ok(sample_mvn_with_root(rng, mean, &root, n))
}

/// Like [`sample_mvn`] with a precomputed square root of the covariance.
pub fn sample_mvn_with_root(rng: &mut RngStream, mean: &[f64], root: &Matrix, n: usize) -> Matrix {
    let p = mean.len();
    let mut out = Matrix::zeros(n, p);
    let mut z = vec![0.0; p];
    for i in 0..n {
        z.iter_mut().for_each(|v| *v = rng.standard_normal());
        let row = out.row_mut(i);
        for (a, r) in row.iter_mut().enumerate() {
            let s: f64 = root.row(a).iter().zip(&z).map(|(l, z)| l * z).sum();
            *r = mean[a] + s;
        }
    }
    out
}

/// `n` i.i.d. Bernoulli(`prob`) draws as 0/1.
pub fn sample_bernoulli(rng: &mut RngStream, prob: f64, n: usize) -> Result<Vec<u8>> {
    if !(0.0..=1.0).contains(&prob) {
        return Err(Error::InvalidArgument(format!(
            "probability must lie in [0, 1], got {prob}"
        )));
    }
    Ok((0..n).map(|_| u8::from(rng.bernoulli(prob))).collect())
}

/// AR(1) correlation matrix with entries `delta^|i-j|`.
pub fn ar1_matrix(p: usize, delta: f64) -> Matrix {
    Matrix::from_fn(p, p, |i, j| delta.powi((i as i32 - j as i32).abs()))
}
