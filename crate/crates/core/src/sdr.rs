//! Sliced inverse regression within one treatment group.
//!
//! The covariates of the group are standardized with the group's own mean and
//! covariance, the group's outcomes are cut into `H` quantile slices, and the
//! leading eigenvectors of
//!
//! ```text
//! M̂ = Σ_j μ̂_j μ̂_jᵀ / H
//! ```
//!
//! (μ̂_j the standardized slice means) span the estimated central subspace.
//! Its dimension comes from the sequential chi-square test
//! `Λ_d = n_t Σ_{j>d} λ̂_j ~ χ²_{(p−d)(H−1−d)}`.

use crate::dataset::{
    apply_standardization, fit_standardization_rows, Group, ObservationalSample,
    StandardizationMap,
};
use crate::error::{Error, Result};
use crate::numerics::{chi_square_sf, sym_eigen, Matrix};

pub const DEFAULT_SLICES: usize = 5;
pub const DEFAULT_ALPHA: f64 = 0.05;

/// Slice structure of one group's outcomes.
#[derive(Debug, Clone, PartialEq)]
pub struct SlicedMoments {
    /// Upper slice boundaries `q_1 < … < q_H` after merging tied quantiles.
    pub boundaries: Vec<f64>,
    /// Mean of the standardized covariates within each slice.
    pub slice_means: Vec<Vec<f64>>,
    pub slice_sizes: Vec<usize>,
    /// Slice index of each subject, in input order.
    pub assignment: Vec<usize>,
    /// Slice count before tie merging.
    pub requested_slices: usize,
}

impl SlicedMoments {
    /// Effective number of slices `H`.
    pub fn slice_count(&self) -> usize {
        self.boundaries.len()
    }

    pub fn p(&self) -> usize {
        self.slice_means.first().map_or(0, Vec::len)
    }
}

/// Assigns subject `i` to slice `j` iff `q_{j−1} < y_i ≤ q_j`, where `q_j` is
/// the order statistic at 1-based index `⌈j·n/H⌉` and `q_0 = −∞`.
///
/// Tied quantiles are merged, so the effective slice count may be below
/// `h`; every surviving slice is nonempty. Fewer than two surviving slices
/// is an error.
pub fn slice_by_quantiles(
    outcomes: &[f64],
    standardized: &Matrix,
    h: usize,
) -> Result<SlicedMoments> {
    let n = outcomes.len();
    if h < 2 {
        return Err(Error::InvalidArgument(format!("slice count must be >= 2, got {h}")));
    }
    if standardized.rows() != n {
        return Err(Error::InvalidArgument(format!(
            "{n} outcomes but {} covariate rows",
            standardized.rows()
        )));
    }
    if n < h {
        return Err(Error::InsufficientData(format!(
            "{n} subjects cannot fill {h} slices"
        )));
    }
    if let Some(i) = outcomes.iter().position(|y| !y.is_finite()) {
        return Err(Error::InvalidArgument(format!("outcome {i} is not finite")));
    }

    let mut sorted = outcomes.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut boundaries: Vec<f64> = Vec::with_capacity(h);
    for j in 1..=h {
        let idx = (j * n).div_ceil(h);
        let q = sorted[idx - 1];
        if boundaries.last() != Some(&q) {
            boundaries.push(q);
        }
    }
    if boundaries.len() < 2 {
        return Err(Error::Slice {
            effective: boundaries.len(),
        });
    }

    let assignment: Vec<usize> = outcomes
        .iter()
        .map(|y| boundaries.partition_point(|q| q < y))
        .collect();

    let p = standardized.cols();
    let hs = boundaries.len();
    let mut sums = vec![vec![0.0; p]; hs];
    let mut sizes = vec![0usize; hs];
    for (i, &s) in assignment.iter().enumerate() {
        sizes[s] += 1;
        for (acc, v) in sums[s].iter_mut().zip(standardized.row(i)) {
            *acc += v;
        }
    }
    let slice_means = sums
        .into_iter()
        .zip(&sizes)
        .map(|(sum, &size)| sum.into_iter().map(|v| v / size as f64).collect())
        .collect();
    Ok(SlicedMoments {
        boundaries,
        slice_means,
        slice_sizes: sizes,
        assignment,
        requested_slices: h,
    })
}

/// `M̂ = Σ_j μ̂_j μ̂_jᵀ / H` with equal slice weights.
pub fn candidate_matrix(sliced: &SlicedMoments) -> Matrix {
    let p = sliced.p();
    let h = sliced.slice_count() as f64;
    let mut m = Matrix::zeros(p, p);
    for mu in &sliced.slice_means {
        for a in 0..p {
            for b in a..p {
                m[(a, b)] += mu[a] * mu[b];
            }
        }
    }
    for a in 0..p {
        for b in a..p {
            let v = m[(a, b)] / h;
            m[(a, b)] = v;
            m[(b, a)] = v;
        }
    }
    m
}

/// Outcome of the sequential rank test.
#[derive(Debug, Clone, PartialEq)]
pub struct RankTest {
    pub rank: usize,
    /// `Λ_d` for `d = 0, 1, …, min(p, H−1) − 1`.
    pub statistics: Vec<f64>,
    /// p-values matching `statistics`.
    pub pvalues: Vec<f64>,
}

/// Tests `rank = d` for `d = 0, 1, …` and returns the first `d` whose
/// p-value exceeds `alpha`, or `min(p, H−1)` if none does.
pub fn sequential_rank_test(
    eigenvalues: &[f64],
    n_t: usize,
    p: usize,
    h: usize,
    alpha: f64,
) -> Result<RankTest> {
    if eigenvalues.len() < p {
        return Err(Error::InvalidArgument(format!(
            "{} eigenvalues for dimension {p}",
            eigenvalues.len()
        )));
    }
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::InvalidArgument(format!("alpha must lie in [0, 1), got {alpha}")));
    }
    let cap = p.min(h.saturating_sub(1));
    let mut statistics = Vec::with_capacity(cap);
    let mut pvalues = Vec::with_capacity(cap);
    let mut rank = None;
    for d in 0..cap {
        let tail: f64 = eigenvalues[d..p].iter().map(|l| l.max(0.0)).sum();
        let stat = n_t as f64 * tail;
        let df = ((p - d) * (h - 1 - d)) as u32;
        let pv = chi_square_sf(stat, df)?;
        statistics.push(stat);
        pvalues.push(pv);
        if rank.is_none() && pv > alpha {
            rank = Some(d);
        }
    }
    Ok(RankTest {
        rank: rank.unwrap_or(cap),
        statistics,
        pvalues,
    })
}

/// Estimated central subspace of `Y(t) | X` from one treatment group.
#[derive(Debug, Clone)]
pub struct CentralSubspaceEstimate {
    pub group: Group,
    pub standardization: StandardizationMap,
    pub sliced: SlicedMoments,
    pub candidate: Matrix,
    pub eigenvalues: Vec<f64>,
    /// `p × r` orthonormal basis on the standardized scale.
    pub basis: Matrix,
    /// Rank actually used (at least 1).
    pub rank: usize,
    pub test: RankTest,
    /// The test selected rank 0 and the estimate fell back to rank 1.
    pub rank_fallback: bool,
    /// `Σ̂^{-1/2} · basis`: the same directions on the raw covariate scale.
    pub composite: Matrix,
}

impl CentralSubspaceEstimate {
    pub fn p(&self) -> usize {
        self.basis.rows()
    }

    /// Column `k` of the raw-scale direction matrix.
    pub fn direction(&self, k: usize) -> Vec<f64> {
        self.composite.column(k)
    }
}

/// Runs sliced inverse regression on group `group` of `sample`.
pub fn estimate_central_subspace(
    sample: &ObservationalSample,
    group: Group,
    h: usize,
    alpha: f64,
) -> Result<CentralSubspaceEstimate> {
    let (x, y) = sample.group_data(group);
    estimate_from_rows(&x, &y, group, h, alpha)
}

/// [`estimate_central_subspace`] on explicit group rows.
pub fn estimate_from_rows(
    x: &Matrix,
    y: &[f64],
    group: Group,
    h: usize,
    alpha: f64,
) -> Result<CentralSubspaceEstimate> {
    let p = x.cols();
    if x.rows() < h.max(p + 1) {
        return Err(Error::InsufficientData(format!(
            "group {} has {} subjects; need at least max(H, p + 1) = {}",
            group.label(),
            x.rows(),
            h.max(p + 1)
        )));
    }
    let standardization = fit_standardization_rows(x, group)?;
    let z = apply_standardization(&standardization, x)?;
    let sliced = slice_by_quantiles(y, &z, h)?;
    let candidate = candidate_matrix(&sliced);
    let eig = sym_eigen(&candidate)?;
    let test = sequential_rank_test(&eig.eigenvalues, x.rows(), p, sliced.slice_count(), alpha)?;
    let rank_fallback = test.rank == 0;
    let rank = test.rank.max(1);
    let cols: Vec<usize> = (0..rank).collect();
    let basis = eig.eigenvectors.select_columns(&cols)?;
    let composite = standardization.inv_sqrt_cov.matmul(&basis)?;
    Ok(CentralSubspaceEstimate {
        group,
        standardization,
        sliced,
        candidate,
        eigenvalues: eig.eigenvalues,
        basis,
        rank,
        test,
        rank_fallback,
        composite,
    })
}

/// Reduced covariates `(x − μ̂_t)ᵀ Σ̂_t^{-1/2} β̂_t` for every row of
/// `covariates`, including subjects outside the fitting group.
pub fn reduce_covariates(estimate: &CentralSubspaceEstimate, covariates: &Matrix) -> Result<Matrix> {
    project(&estimate.standardization.mean, &estimate.composite, covariates)
}

/// `(x − center)ᵀ · map` row-wise.
pub fn project(center: &[f64], map: &Matrix, covariates: &Matrix) -> Result<Matrix> {
    let p = map.rows();
    if covariates.cols() != p || center.len() != p {
        return Err(Error::InvalidArgument(format!(
            "projection expects {p} columns, got {}",
            covariates.cols()
        )));
    }
    let r = map.cols();
    let mut out = Matrix::zeros(covariates.rows(), r);
    let mut centered = vec![0.0; p];
    for i in 0..covariates.rows() {
        for ((c, x), m) in centered.iter_mut().zip(covariates.row(i)).zip(center) {
            *c = x - m;
        }
        let row = out.row_mut(i);
        for (k, o) in row.iter_mut().enumerate() {
            *o = (0..p).map(|a| centered[a] * map[(a, k)]).sum();
        }
    }
    Ok(out)
}
