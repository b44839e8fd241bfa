//! Nearest-neighbour matching with replacement under a Mahalanobis metric,
//! and the imputation estimators of the average causal effect (ACE) and the
//! average causal effect on the treated (ACET).
//!
//! Each subject's missing potential outcome is imputed as the mean observed
//! outcome of its `m` nearest subjects in the opposite group. Donors may be
//! reused any number of times.

use std::fmt;

use crate::dataset::{Group, ObservationalSample};
use crate::diagnostics::{five_number_summary, FiveNumberSummary};
use crate::error::{Error, Result};
use crate::numerics::{inverse_from_eigen, ridge_if_needed, sym_eigen, Matrix};
use crate::sdr::{estimate_central_subspace, reduce_covariates, CentralSubspaceEstimate};

pub const DEFAULT_MATCHES: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScoreKind {
    Ambient,
    Propensity,
    ReducedPerGroup,
}

impl fmt::Display for ScoreKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScoreKind::Ambient => "ambient",
            ScoreKind::Propensity => "propensity",
            ScoreKind::ReducedPerGroup => "reduced-per-group",
        })
    }
}

/// The coordinates matching is done on.
///
/// `control_side` locates control donors for treated subjects and
/// `treated_side` locates treated donors for control subjects. Both have one
/// row per subject in the full sample. For ambient and propensity scores the
/// two are the same matrix.
#[derive(Debug, Clone)]
pub struct BalancingScore {
    pub kind: ScoreKind,
    pub control_side: Matrix,
    pub treated_side: Matrix,
}

impl BalancingScore {
    pub fn ambient(covariates: &Matrix) -> Self {
        BalancingScore {
            kind: ScoreKind::Ambient,
            control_side: covariates.clone(),
            treated_side: covariates.clone(),
        }
    }

    pub fn propensity(ps: &[f64]) -> Self {
        let m = Matrix::column_vector(ps);
        BalancingScore {
            kind: ScoreKind::Propensity,
            control_side: m.clone(),
            treated_side: m,
        }
    }

    /// Group-specific reduced covariates: `X'β̂₀` on the control side and
    /// `X'β̂₁` on the treated side.
    pub fn reduced(control_side: Matrix, treated_side: Matrix) -> Result<Self> {
        if control_side.rows() != treated_side.rows() {
            return Err(Error::InvalidArgument(
                "reduced scores must cover the same subjects".into(),
            ));
        }
        Ok(BalancingScore {
            kind: ScoreKind::ReducedPerGroup,
            control_side,
            treated_side,
        })
    }

    /// Scores used to search the donor pool of `donor_group`.
    pub fn side(&self, donor_group: Group) -> &Matrix {
        match donor_group {
            Group::Control => &self.control_side,
            Group::Treated => &self.treated_side,
        }
    }
}

/// `D(a, b) = {(a − b)ᵀ Σ̂⁻¹ (a − b)}^{1/2}`.
#[derive(Debug, Clone, PartialEq)]
pub struct MahalanobisMetric {
    pub inverse_covariance: Matrix,
    pub ridge: f64,
}

impl MahalanobisMetric {
    pub fn dim(&self) -> usize {
        self.inverse_covariance.rows()
    }

    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        let k = self.dim();
        let w = &self.inverse_covariance;
        let mut q = 0.0;
        for i in 0..k {
            let di = a[i] - b[i];
            let mut s = 0.0;
            for j in 0..k {
                s += w[(i, j)] * (a[j] - b[j]);
            }
            q += di * s;
        }
        q.max(0.0).sqrt()
    }
}

/// Metric from the pooled sample covariance of all rows of `scores`.
/// A ridge is added only when the covariance is near-singular.
pub fn build_metric(scores: &Matrix) -> Result<MahalanobisMetric> {
    if scores.rows() < 2 {
        return Err(Error::InsufficientData(
            "metric needs at least two score rows".into(),
        ));
    }
    let cov = scores.sample_covariance()?;
    let eig = sym_eigen(&cov)?;
    let ridge = ridge_if_needed(&cov, &eig);
    Ok(MahalanobisMetric {
        inverse_covariance: inverse_from_eigen(&eig, ridge)?,
        ridge,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatchDirection {
    /// Treated subjects receive control donors.
    ForTreated,
    /// Control subjects receive treated donors.
    ForControl,
}

impl MatchDirection {
    pub fn recipients(self) -> Group {
        match self {
            MatchDirection::ForTreated => Group::Treated,
            MatchDirection::ForControl => Group::Control,
        }
    }

    pub fn donors(self) -> Group {
        self.recipients().opposite()
    }
}

/// `J_m(i)` for every recipient subject, with the matching distances.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchedSet {
    pub direction: MatchDirection,
    pub m: usize,
    /// Recipient subject indices, ascending.
    pub subjects: Vec<usize>,
    /// Donor indices per recipient, ordered by (distance, index).
    pub donors: Vec<Vec<usize>>,
    pub distances: Vec<Vec<f64>>,
}

impl MatchedSet {
    /// Number of times each subject of an `n`-subject sample serves as donor.
    pub fn reuse_counts(&self, n: usize) -> Vec<usize> {
        let mut k = vec![0; n];
        for list in &self.donors {
            for &j in list {
                k[j] += 1;
            }
        }
        k
    }
}

/// Exact brute-force `m`-nearest-neighbour search with replacement.
///
/// Ties in distance go to the smaller donor index.
pub fn find_matches(
    scores: &Matrix,
    treatment: &[u8],
    metric: &MahalanobisMetric,
    m: usize,
    direction: MatchDirection,
) -> Result<MatchedSet> {
    if scores.rows() != treatment.len() {
        return Err(Error::InvalidArgument(format!(
            "{} score rows but {} treatment labels",
            scores.rows(),
            treatment.len()
        )));
    }
    if scores.cols() != metric.dim() {
        return Err(Error::InvalidArgument(format!(
            "metric has dimension {} but scores have {} columns",
            metric.dim(),
            scores.cols()
        )));
    }
    if m == 0 {
        return Err(Error::InvalidArgument("m must be at least 1".into()));
    }
    let recipient_label = direction.recipients().label();
    let donor_label = direction.donors().label();
    let donor_pool: Vec<usize> = (0..treatment.len())
        .filter(|&i| treatment[i] == donor_label)
        .collect();
    if donor_pool.len() < m {
        return Err(Error::InsufficientDonors {
            needed: m,
            available: donor_pool.len(),
        });
    }
    let subjects: Vec<usize> = (0..treatment.len())
        .filter(|&i| treatment[i] == recipient_label)
        .collect();

    let mut donors = Vec::with_capacity(subjects.len());
    let mut distances = Vec::with_capacity(subjects.len());
    let mut candidates: Vec<(f64, usize)> = Vec::with_capacity(donor_pool.len());
    for &i in &subjects {
        let a = scores.row(i);
        candidates.clear();
        candidates.extend(donor_pool.iter().map(|&j| (metric.distance(a, scores.row(j)), j)));
        let by_distance_then_index =
            |x: &(f64, usize), y: &(f64, usize)| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1));
        if m < candidates.len() {
            candidates.select_nth_unstable_by(m - 1, by_distance_then_index);
            candidates.truncate(m);
        }
        candidates.sort_by(by_distance_then_index);
        donors.push(candidates.iter().map(|c| c.1).collect());
        distances.push(candidates.iter().map(|c| c.0).collect());
    }
    Ok(MatchedSet {
        direction,
        m,
        subjects,
        donors,
        distances,
    })
}

/// `Ŷ_i(1 − T_i) = (1/m) Σ_{j ∈ J_m(i)} Y_j`, in the order of
/// `matched.subjects`.
pub fn impute(sample: &ObservationalSample, matched: &MatchedSet) -> Vec<f64> {
    let y = sample.outcome();
    matched
        .donors
        .iter()
        .map(|list| list.iter().map(|&j| y[j]).sum::<f64>() / list.len() as f64)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Estimand {
    Ace,
    Acet,
}

impl fmt::Display for Estimand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Estimand::Ace => "ACE",
            Estimand::Acet => "ACET",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchDiagnostics {
    /// Distances from treated subjects to their control donors.
    pub treated_match_distances: Option<FiveNumberSummary>,
    /// Distances from control subjects to their treated donors.
    pub control_match_distances: Option<FiveNumberSummary>,
    /// `K(i)`: how often each subject was used as a donor.
    pub reuse_counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CausalEstimate {
    pub estimand: Estimand,
    pub value: f64,
    /// `Ŷ_i(1 − T_i)` where the estimand needs it, `None` elsewhere.
    pub imputed: Vec<Option<f64>>,
    pub diagnostics: MatchDiagnostics,
}

impl CausalEstimate {
    /// `(Y_i(0), Y_i(1))` with the missing one imputed, for subjects that
    /// have an imputation.
    pub fn completed_outcomes(&self, sample: &ObservationalSample) -> Vec<Option<(f64, f64)>> {
        (0..sample.n())
            .map(|i| {
                self.imputed[i].map(|yhat| match sample.group_of(i) {
                    Group::Treated => (yhat, sample.outcome()[i]),
                    Group::Control => (sample.outcome()[i], yhat),
                })
            })
            .collect()
    }
}

fn match_side(
    sample: &ObservationalSample,
    score: &BalancingScore,
    m: usize,
    direction: MatchDirection,
) -> Result<MatchedSet> {
    let scores = score.side(direction.donors());
    if scores.rows() != sample.n() {
        return Err(Error::InvalidArgument(format!(
            "balancing score has {} rows for {} subjects",
            scores.rows(),
            sample.n()
        )));
    }
    let metric = build_metric(scores)?;
    find_matches(scores, sample.treatment(), &metric, m, direction)
}

fn distance_summary(set: &MatchedSet) -> Option<FiveNumberSummary> {
    let all: Vec<f64> = set.distances.iter().flatten().copied().collect();
    five_number_summary(&all)
}

/// `[Σ_{T=0} (Ŷ(1) − Y) + Σ_{T=1} (Y − Ŷ(0))] / n` from observed outcomes
/// and each subject's imputed counterfactual.
pub fn ace_from_imputations(treatment: &[u8], outcome: &[f64], imputed: &[f64]) -> f64 {
    let mut control_sum = 0.0;
    let mut treated_sum = 0.0;
    for ((&t, &y), &yhat) in treatment.iter().zip(outcome).zip(imputed) {
        if t == 1 {
            treated_sum += y - yhat;
        } else {
            control_sum += yhat - y;
        }
    }
    (control_sum + treated_sum) / treatment.len() as f64
}

/// Mean of `Y − Ŷ(0)` over treated subjects; control entries are ignored.
pub fn acet_from_imputations(treatment: &[u8], outcome: &[f64], imputed: &[f64]) -> f64 {
    let (sum, n1) = treatment
        .iter()
        .zip(outcome)
        .zip(imputed)
        .filter(|((&t, _), _)| t == 1)
        .fold((0.0, 0usize), |(s, k), ((_, &y), &yhat)| (s + y - yhat, k + 1));
    sum / n1 as f64
}

/// Matches in both directions and averages the imputed individual effects
/// over all `n` subjects.
pub fn estimate_ace(
    sample: &ObservationalSample,
    score: &BalancingScore,
    m: usize,
) -> Result<CausalEstimate> {
    let for_treated = match_side(sample, score, m, MatchDirection::ForTreated)?;
    let for_control = match_side(sample, score, m, MatchDirection::ForControl)?;
    let n = sample.n();
    let y = sample.outcome();
    let mut imputed = vec![None; n];
    for (&i, v) in for_treated.subjects.iter().zip(impute(sample, &for_treated)) {
        imputed[i] = Some(v);
    }
    for (&i, v) in for_control.subjects.iter().zip(impute(sample, &for_control)) {
        imputed[i] = Some(v);
    }
    let filled: Vec<f64> = imputed
        .iter()
        .map(|v| v.expect("every subject is imputed for ACE"))
        .collect();
    let mut reuse = for_treated.reuse_counts(n);
    for (k, extra) in reuse.iter_mut().zip(for_control.reuse_counts(n)) {
        *k += extra;
    }
    Ok(CausalEstimate {
        estimand: Estimand::Ace,
        value: ace_from_imputations(sample.treatment(), y, &filled),
        imputed,
        diagnostics: MatchDiagnostics {
            treated_match_distances: distance_summary(&for_treated),
            control_match_distances: distance_summary(&for_control),
            reuse_counts: reuse,
        },
    })
}

/// `Σ T_i (Y_i(1) − Ŷ_i(0)) / Σ T_i`; only treated subjects are matched.
pub fn estimate_acet(
    sample: &ObservationalSample,
    score: &BalancingScore,
    m: usize,
) -> Result<CausalEstimate> {
    let for_treated = match_side(sample, score, m, MatchDirection::ForTreated)?;
    let n = sample.n();
    let y = sample.outcome();
    let mut imputed = vec![None; n];
    let mut sum = 0.0;
    for (&i, v) in for_treated.subjects.iter().zip(impute(sample, &for_treated)) {
        imputed[i] = Some(v);
        sum += y[i] - v;
    }
    let n1 = for_treated.subjects.len();
    if n1 == 0 {
        return Err(Error::InsufficientData("no treated subjects".into()));
    }
    Ok(CausalEstimate {
        estimand: Estimand::Acet,
        value: sum / n1 as f64,
        imputed,
        diagnostics: MatchDiagnostics {
            treated_match_distances: distance_summary(&for_treated),
            control_match_distances: None,
            reuse_counts: for_treated.reuse_counts(n),
        },
    })
}

pub fn estimate(
    sample: &ObservationalSample,
    score: &BalancingScore,
    m: usize,
    estimand: Estimand,
) -> Result<CausalEstimate> {
    match estimand {
        Estimand::Ace => estimate_ace(sample, score, m),
        Estimand::Acet => estimate_acet(sample, score, m),
    }
}

/// Result of the full reduced-covariate matching procedure.
#[derive(Debug, Clone)]
pub struct SdrMatchResult {
    pub estimate: CausalEstimate,
    pub control_subspace: CentralSubspaceEstimate,
    /// Absent for ACET, which never matches control subjects.
    pub treated_subspace: Option<CentralSubspaceEstimate>,
}

impl SdrMatchResult {
    pub fn control_rank(&self) -> usize {
        self.control_subspace.rank
    }

    pub fn treated_rank(&self) -> Option<usize> {
        self.treated_subspace.as_ref().map(|s| s.rank)
    }
}

/// Estimates the control-group central subspace, matches treated subjects
/// to controls on `X'β̂₀`, and for ACE also estimates the treated-group
/// subspace and matches controls to treated subjects on `X'β̂₁`.
pub fn sdr_matching_pipeline(
    sample: &ObservationalSample,
    slices: usize,
    alpha: f64,
    m: usize,
    estimand: Estimand,
) -> Result<SdrMatchResult> {
    let x = sample.covariates();
    let control_subspace = estimate_central_subspace(sample, Group::Control, slices, alpha)?;
    let control_side = reduce_covariates(&control_subspace, x)?;
    let (treated_subspace, treated_side) = match estimand {
        Estimand::Ace => {
            let est = estimate_central_subspace(sample, Group::Treated, slices, alpha)?;
            let side = reduce_covariates(&est, x)?;
            (Some(est), side)
        }
        // never searched for ACET
        Estimand::Acet => (None, control_side.clone()),
    };
    let score = BalancingScore::reduced(control_side, treated_side)?;
    let estimate = estimate(sample, &score, m, estimand)?;
    Ok(SdrMatchResult {
        estimate,
        control_subspace,
        treated_subspace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_dim(values: &[f64], treatment: &[u8], y: &[f64]) -> ObservationalSample {
        ObservationalSample::new(Matrix::column_vector(values), treatment.to_vec(), y.to_vec())
            .unwrap()
    }

    #[test]
    fn metric_from_identity_covariance_is_euclidean() {
        // four points with sample covariance I (n − 1 = 3)
        let s = (1.5f64).sqrt();
        let z = Matrix::from_rows(&[vec![s, 0.0], vec![-s, 0.0], vec![0.0, s], vec![0.0, -s]])
            .unwrap();
        let metric = build_metric(&z).unwrap();
        assert!(metric.inverse_covariance.sub(&Matrix::identity(2)).unwrap().max_abs() < 1e-12);
        assert!((metric.distance(&[0.0, 0.0], &[3.0, 4.0]) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn scalar_metric_divides_by_sd() {
        // variance 4
        let z = Matrix::column_vector(&[-2.0, 2.0, -2.0, 2.0, 0.0]);
        let cov = z.sample_covariance().unwrap()[(0, 0)];
        let metric = build_metric(&z).unwrap();
        assert!((metric.distance(&[1.0], &[4.0]) - 3.0 / cov.sqrt()).abs() < 1e-14);
        let z = Matrix::column_vector(&[0.0, 2.0 * 3f64.sqrt(), 0.0, 2.0 * 3f64.sqrt()]);
        // sample variance = 12 · 4/ (4 · 3) = 4
        assert!((z.sample_covariance().unwrap()[(0, 0)] - 4.0).abs() < 1e-12);
        let metric = build_metric(&z).unwrap();
        assert!((metric.distance(&[0.0], &[3.0]) - 1.5).abs() < 1e-12);
    }

    #[test]
    fn constant_column_gets_ridge() {
        let z = Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 1.0], vec![2.0, 1.0]]).unwrap();
        let metric = build_metric(&z).unwrap();
        assert!(metric.ridge > 0.0);
        assert!(metric.distance(&[0.0, 1.0], &[2.0, 1.0]).is_finite());
    }

    #[test]
    fn nearest_control_by_absolute_difference() {
        let z = Matrix::column_vector(&[0.0, 1.0, 0.4, 2.0]);
        let t = [1, 0, 0, 0];
        let metric = build_metric(&z).unwrap();
        let set = find_matches(&z, &t, &metric, 1, MatchDirection::ForTreated).unwrap();
        assert_eq!(set.subjects, vec![0]);
        assert_eq!(set.donors, vec![vec![2]]);
        let set = find_matches(&z, &t, &metric, 2, MatchDirection::ForTreated).unwrap();
        assert_eq!(set.donors, vec![vec![2, 1]]);
        assert!(set.distances[0][0] <= set.distances[0][1]);
    }

    #[test]
    fn equidistant_donors_pick_lower_index() {
        let z = Matrix::column_vector(&[1.0, 0.0, -1.0, 5.0]);
        let t = [0, 1, 0, 0];
        let metric = build_metric(&z).unwrap();
        let set = find_matches(&z, &t, &metric, 1, MatchDirection::ForTreated).unwrap();
        assert_eq!(set.donors, vec![vec![0]]);
    }

    #[test]
    fn too_few_donors() {
        let z = Matrix::column_vector(&[0.0, 1.0, 2.0]);
        let metric = build_metric(&z).unwrap();
        assert!(matches!(
            find_matches(&z, &[1, 1, 0], &metric, 2, MatchDirection::ForTreated),
            Err(Error::InsufficientDonors { needed: 2, available: 1 })
        ));
    }

    #[test]
    fn imputation_is_donor_mean() {
        let s = one_dim(&[0.0, 1.0, 2.0, 3.0], &[1, 0, 0, 0], &[0.0, 1.0, 2.0, 6.0]);
        let set = MatchedSet {
            direction: MatchDirection::ForTreated,
            m: 3,
            subjects: vec![0],
            donors: vec![vec![1, 2, 3]],
            distances: vec![vec![1.0, 2.0, 3.0]],
        };
        assert_eq!(impute(&s, &set), vec![3.0]);
        let two = MatchedSet {
            m: 2,
            donors: vec![vec![2, 3]],
            distances: vec![vec![0.0, 0.0]],
            ..set.clone()
        };
        assert_eq!(impute(&s, &two), vec![4.0]);
    }

    #[test]
    fn ace_by_hand() {
        // treated at 0 and 10 with Y = 3, 5; controls at 0.1 and 10.1 with Y = 1, 2
        // every subject's nearest opposite neighbour is its pair
        let s = one_dim(&[0.0, 10.0, 0.1, 10.1], &[1, 1, 0, 0], &[3.0, 5.0, 1.0, 2.0]);
        let est = estimate_ace(&s, &BalancingScore::ambient(s.covariates()), 1).unwrap();
        assert_eq!(est.imputed, vec![Some(1.0), Some(2.0), Some(3.0), Some(5.0)]);
        // (3−1) + (5−2) + (3−1) + (5−2) over 4
        assert!((est.value - 2.5).abs() < 1e-15);

        // the worked case: treated Y {3,5}, Ŷ(0) {1,2}; controls Y {2,4}, Ŷ(1) {4,6}
        let s = one_dim(
            &[0.0, 10.0, 0.1, 10.1, 20.0, 30.0, 20.1, 30.1],
            &[1, 1, 0, 0, 0, 0, 1, 1],
            &[3.0, 5.0, 1.0, 2.0, 2.0, 4.0, 4.0, 6.0],
        );
        let est = estimate_ace(&s, &BalancingScore::ambient(s.covariates()), 1).unwrap();
        let treated: f64 = [0usize, 1].iter().map(|&i| s.outcome()[i] - est.imputed[i].unwrap()).sum();
        let controls: f64 = [4usize, 5].iter().map(|&i| est.imputed[i].unwrap() - s.outcome()[i]).sum();
        assert_eq!(treated, 5.0);
        assert_eq!(controls, 4.0);
    }

    #[test]
    fn effect_formulas_by_hand() {
        // treated Y {3, 5} with Ŷ(0) {1, 2}; controls Y {2, 4} with Ŷ(1) {4, 6}
        let t = [1, 1, 0, 0];
        let y = [3.0, 5.0, 2.0, 4.0];
        let yhat = [1.0, 2.0, 4.0, 6.0];
        assert_eq!(ace_from_imputations(&t, &y, &yhat), 2.25);
        assert_eq!(acet_from_imputations(&t, &y, &yhat), 2.5);
    }

    #[test]
    fn acet_by_hand() {
        let s = one_dim(&[0.0, 10.0, 0.1, 10.1], &[1, 1, 0, 0], &[3.0, 5.0, 1.0, 2.0]);
        let est = estimate_acet(&s, &BalancingScore::ambient(s.covariates()), 1).unwrap();
        assert!((est.value - 2.5).abs() < 1e-15);
        assert_eq!(est.imputed[2], None);
        assert_eq!(est.diagnostics.reuse_counts, vec![0, 0, 1, 1]);

        let single = one_dim(&[0.0, 1.0, 3.0], &[1, 0, 0], &[7.0, 2.0, 100.0]);
        let est = estimate_acet(&single, &BalancingScore::ambient(single.covariates()), 1).unwrap();
        assert_eq!(est.value, 5.0);
    }

    #[test]
    fn constant_outcomes_give_exact_difference() {
        let s = one_dim(&[0.3, 1.2, 2.2, 0.7, 5.0, 3.3], &[1, 0, 1, 0, 1, 0], &[4.5, 1.25, 4.5, 1.25, 4.5, 1.25]);
        let est = estimate_ace(&s, &BalancingScore::ambient(s.covariates()), 2).unwrap();
        assert_eq!(est.value, 3.25);
    }

    #[test]
    fn duplicate_subject_is_its_own_match() {
        let s = one_dim(&[0.5, 0.5, 3.0, -2.0], &[1, 0, 0, 0], &[9.0, 4.0, 1.0, 1.0]);
        let est = estimate_acet(&s, &BalancingScore::ambient(s.covariates()), 1).unwrap();
        assert_eq!(est.imputed[0], Some(4.0));
        assert_eq!(est.diagnostics.treated_match_distances.unwrap().max, 0.0);
    }
}
