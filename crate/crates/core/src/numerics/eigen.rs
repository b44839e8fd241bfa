//! Symmetric eigendecomposition by cyclic Jacobi rotations, and the
//! inverse square root of a positive-semidefinite matrix built on it.

use crate::error::{Error, Result};

use super::matrix::Matrix;

const MAX_SWEEPS: usize = 100;
const SYMMETRY_TOL: f64 = 1e-10;
const PSD_TOL: f64 = 1e-10;

/// Eigenvalues sorted descending, with the matching eigenvectors stored
/// as the columns of `eigenvectors`.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Matrix,
}

impl EigenDecomposition {
    /// Column `k` of the eigenvector matrix.
    pub fn eigenvector(&self, k: usize) -> Vec<f64> {
        self.eigenvectors.column(k)
    }

    /// `V · diag(f(λ)) · Vᵀ`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> Matrix {
        let v = &self.eigenvectors;
        let n = v.rows();
        let weights: Vec<f64> = self.eigenvalues.iter().map(|&l| f(l)).collect();
        let mut out = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let s: f64 = (0..n).map(|k| v[(i, k)] * weights[k] * v[(j, k)]).sum();
                out[(i, j)] = s;
                out[(j, i)] = s;
            }
        }
        out
    }

    pub fn reconstruct(&self) -> Matrix {
        self.reconstruct_with(|l| l)
    }
}

/// Eigendecomposition of a symmetric matrix.
///
/// The input must be square and symmetric to within `1e-10` relative to
/// its largest entry. Eigenvalues come back descending. Each eigenvector is
/// signed so that its largest-magnitude component is positive; when two
/// components tie in magnitude the first nonzero component is made
/// positive instead.
pub fn sym_eigen(m: &Matrix) -> Result<EigenDecomposition> {
    if !m.is_square() {
        return Err(Error::InvalidMatrix(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    let n = m.rows();
    if n == 0 {
        return Err(Error::InvalidMatrix("empty matrix".into()));
    }
    let scale = m.max_abs();
    if m.asymmetry() > SYMMETRY_TOL * scale.max(1.0) {
        return Err(Error::InvalidMatrix(format!(
            "matrix is not symmetric (max asymmetry {:e})",
            m.asymmetry()
        )));
    }

    // Work on the symmetrized copy.
    let mut a = Matrix::from_fn(n, n, |i, j| 0.5 * (m[(i, j)] + m[(j, i)]));
    let mut v = Matrix::identity(n);

    if scale > 0.0 {
        for _ in 0..MAX_SWEEPS {
            let off: f64 = off_diagonal_norm_sq(&a);
            if off <= (f64::EPSILON * scale).powi(2) * 1e-2 {
                break;
            }
            let mut rotated = false;
            for p in 0..n {
                for q in (p + 1)..n {
                    rotated |= rotate(&mut a, &mut v, p, q);
                }
            }
            if !rotated {
                break;
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].total_cmp(&a[(i, i)]).then(i.cmp(&j)));
    let eigenvalues: Vec<f64> = order.iter().map(|&k| a[(k, k)]).collect();
    let mut eigenvectors = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = v.column(src);
        canonical_sign(&mut col);
        for (i, c) in col.into_iter().enumerate() {
            eigenvectors[(i, dst)] = c;
        }
    }
    Ok(EigenDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

fn off_diagonal_norm_sq(a: &Matrix) -> f64 {
    let n = a.rows();
    let mut s = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            s += a[(i, j)] * a[(i, j)];
        }
    }
    2.0 * s
}

/// One Jacobi rotation annihilating `a[p][q]`. Returns false when the entry
/// is already negligible.
fn rotate(a: &mut Matrix, v: &mut Matrix, p: usize, q: usize) -> bool {
    let apq = a[(p, q)];
    if apq == 0.0 {
        return false;
    }
    let app = a[(p, p)];
    let aqq = a[(q, q)];
    // Entry is below rounding relative to both diagonal terms.
    let g = 100.0 * apq.abs();
    if app.abs() + g == app.abs() && aqq.abs() + g == aqq.abs() {
        a[(p, q)] = 0.0;
        a[(q, p)] = 0.0;
        return false;
    }

    let theta = (aqq - app) / (2.0 * apq);
    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
    let t = if theta == 0.0 { 1.0 } else { t };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;
    let tau = s / (1.0 + c);

    let n = a.rows();
    a[(p, p)] = app - t * apq;
    a[(q, q)] = aqq + t * apq;
    a[(p, q)] = 0.0;
    a[(q, p)] = 0.0;
    for r in 0..n {
        if r == p || r == q {
            continue;
        }
        let arp = a[(r, p)];
        let arq = a[(r, q)];
        let new_rp = arp - s * (arq + tau * arp);
        let new_rq = arq + s * (arp - tau * arq);
        a[(r, p)] = new_rp;
        a[(p, r)] = new_rp;
        a[(r, q)] = new_rq;
        a[(q, r)] = new_rq;
    }
    for r in 0..n {
        let vrp = v[(r, p)];
        let vrq = v[(r, q)];
        v[(r, p)] = vrp - s * (vrq + tau * vrp);
        v[(r, q)] = vrq + s * (vrp - tau * vrq);
    }
    true
}

fn canonical_sign(col: &mut [f64]) {
    let max = col.iter().fold(0.0_f64, |m, c| m.max(c.abs()));
    if max == 0.0 {
        return;
    }
    let near_max: Vec<usize> = (0..col.len())
        .filter(|&i| col[i].abs() >= max * (1.0 - 1e-9))
        .collect();
    let pivot = if near_max.len() == 1 {
        near_max[0]
    } else {
        col.iter().position(|c| c.abs() > max * 1e-12).unwrap_or(0)
    };
    if col[pivot] < 0.0 {
        col.iter_mut().for_each(|c| *c = -*c);
    }
}

/// Ridge used when a covariance must be clamped: `1e-8 · trace(m) / p`.
pub fn default_ridge(m: &Matrix) -> f64 {
    1e-8 * m.trace().max(0.0) / m.rows().max(1) as f64
}

/// `V · diag((λᵢ + ridge)^{-1/2}) · Vᵀ` for symmetric PSD `m`.
///
/// Eigenvalues down to `-1e-10` (relative to the largest eigenvalue, and
/// never tighter than absolute `1e-10`) are treated as rounding noise and
/// lifted to zero before the ridge is added.
pub fn inverse_sqrt_spd(m: &Matrix, ridge: f64) -> Result<Matrix> {
    let eig = sym_eigen(m)?;
    inverse_sqrt_from_eigen(&eig, ridge)
}

pub(crate) fn check_psd(eig: &EigenDecomposition) -> Result<()> {
    let top = eig.eigenvalues.first().copied().unwrap_or(0.0).abs();
    let min = eig.eigenvalues.last().copied().unwrap_or(0.0);
    if min < -PSD_TOL * top.max(1.0) {
        return Err(Error::NotPsd {
            min_eigenvalue: min,
        });
    }
    Ok(())
}

pub(crate) fn inverse_sqrt_from_eigen(eig: &EigenDecomposition, ridge: f64) -> Result<Matrix> {
    check_psd(eig)?;
    if !(ridge >= 0.0) {
        return Err(Error::InvalidArgument(format!("ridge must be >= 0, got {ridge}")));
    }
    if eig.eigenvalues.iter().any(|&l| l.max(0.0) + ridge <= 0.0) {
        return Err(Error::NotPsd { min_eigenvalue: 0.0 });
    }
    Ok(eig.reconstruct_with(|l| (l.max(0.0) + ridge).powf(-0.5)))
}

/// `V · diag(1 / (λᵢ + ridge)) · Vᵀ` for symmetric PSD `m`.
pub(crate) fn inverse_from_eigen(eig: &EigenDecomposition, ridge: f64) -> Result<Matrix> {
    check_psd(eig)?;
    if eig.eigenvalues.iter().any(|&l| l.max(0.0) + ridge <= 0.0) {
        return Err(Error::NotPsd { min_eigenvalue: 0.0 });
    }
    Ok(eig.reconstruct_with(|l| 1.0 / (l.max(0.0) + ridge)))
}

/// The ridge a covariance actually needs: zero when its smallest eigenvalue
/// already exceeds [`default_ridge`], the default ridge otherwise.
pub(crate) fn ridge_if_needed(m: &Matrix, eig: &EigenDecomposition) -> f64 {
    let floor = default_ridge(m);
    let min = eig.eigenvalues.last().copied().unwrap_or(0.0);
    if min > floor {
        0.0
    } else if floor > 0.0 {
        floor
    } else {
        // all-zero matrix: any positive ridge keeps the inverse finite
        1.0
    }
}
