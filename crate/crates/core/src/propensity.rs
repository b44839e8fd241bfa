//! Propensity-score baselines: a logistic maximum-likelihood fit, and the
//! exact propensity score of a two-component Gaussian design.

use crate::error::{Error, Result};
use crate::numerics::{logistic, solve, sym_eigen, Matrix};

const PROB_CLAMP: f64 = 1e-12;
/// Linear predictors beyond this magnitude mean fitted probabilities are
/// saturated, which only happens when the classes are (quasi-)separated.
const SATURATED_LOGIT: f64 = 30.0;

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

impl LogisticModel {
    pub fn zero(p: usize) -> Self {
        LogisticModel {
            intercept: 0.0,
            coefficients: vec![0.0; p],
            converged: true,
            iterations: 0,
        }
    }

    fn linear_predictor(&self, x: &[f64]) -> f64 {
        self.intercept + x.iter().zip(&self.coefficients).map(|(a, b)| a * b).sum::<f64>()
    }
}

/// Per-observation average log-likelihood and its gradient
/// `(1/n) Σ (t_i − π_i) (1, x_i)`.
fn log_likelihood_and_score(x: &Matrix, t: &[u8], beta: &[f64]) -> (f64, Vec<f64>) {
    let n = x.rows();
    let mut ll = 0.0;
    let mut score = vec![0.0; beta.len()];
    for i in 0..n {
        let row = x.row(i);
        let eta = beta[0] + row.iter().zip(&beta[1..]).map(|(a, b)| a * b).sum::<f64>();
        // log π = -log(1 + e^{-η}), log(1 − π) = -log(1 + e^{η})
        let y = f64::from(t[i]);
        ll -= y * softplus(-eta) + (1.0 - y) * softplus(eta);
        let resid = y - logistic(eta);
        score[0] += resid;
        for (s, v) in score[1..].iter_mut().zip(row) {
            *s += resid * v;
        }
    }
    let nf = n as f64;
    score.iter_mut().for_each(|s| *s /= nf);
    (ll / nf, score)
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Gradient of the average log-likelihood at `model`.
pub fn logistic_score(model: &LogisticModel, x: &Matrix, t: &[u8]) -> Vec<f64> {
    let mut beta = vec![model.intercept];
    beta.extend_from_slice(&model.coefficients);
    log_likelihood_and_score(x, t, &beta).1
}

/// Newton–Raphson maximum likelihood with step halving.
///
/// `converged` is set when the max-abs score of the average log-likelihood
/// falls to `tol` within `max_iter` iterations and the fitted probabilities
/// are not saturated. Separated data never converge; the last iterate is
/// returned and the caller decides what to do with it.
pub fn fit_logistic(x: &Matrix, t: &[u8], max_iter: usize, tol: f64) -> Result<LogisticModel> {
    let n = x.rows();
    if t.len() != n {
        return Err(Error::InvalidArgument(format!(
            "{n} covariate rows but {} labels",
            t.len()
        )));
    }
    let treated = t.iter().filter(|&&v| v == 1).count();
    if treated == 0 || treated == n {
        return Err(Error::DegenerateLabels(format!(
            "{treated} of {n} subjects treated; both classes are required"
        )));
    }
    let k = x.cols() + 1;
    let mut beta = vec![0.0; k];
    let (mut ll, mut score) = log_likelihood_and_score(x, t, &beta);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        if max_abs(&score) <= tol {
            converged = true;
            break;
        }
        iterations += 1;
        let hessian = information_matrix(x, &beta);
        let step = match newton_step(&hessian, &score) {
            Some(s) => s,
            None => break,
        };
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let cand: Vec<f64> = beta.iter().zip(&step).map(|(b, s)| b + scale * s).collect();
            let (cand_ll, cand_score) = log_likelihood_and_score(x, t, &cand);
            if cand_ll.is_finite() && cand_ll >= ll - 1e-15 * ll.abs() {
                beta = cand;
                ll = cand_ll;
                score = cand_score;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if !converged && max_abs(&score) <= tol {
        converged = true;
    }
    let model = LogisticModel {
        intercept: beta[0],
        coefficients: beta[1..].to_vec(),
        converged,
        iterations,
    };
    let saturated = x
        .row_iter()
        .any(|r| model.linear_predictor(r).abs() > SATURATED_LOGIT);
    let finite = beta.iter().all(|b| b.is_finite());
    Ok(LogisticModel {
        converged: converged && !saturated && finite,
        ..model
    })
}

/// `(1/n) Σ π_i (1 − π_i) (1, x_i)(1, x_i)ᵀ`.
fn information_matrix(x: &Matrix, beta: &[f64]) -> Matrix {
    let k = beta.len();
    let mut h = Matrix::zeros(k, k);
    let mut z = vec![1.0; k];
    for row in x.row_iter() {
        z[1..].copy_from_slice(row);
        let eta: f64 = z.iter().zip(beta).map(|(a, b)| a * b).sum();
        let pi = logistic(eta);
        let w = pi * (1.0 - pi);
        for a in 0..k {
            for b in a..k {
                h[(a, b)] += w * z[a] * z[b];
            }
        }
    }
    let nf = x.rows() as f64;
    for a in 0..k {
        for b in a..k {
            let v = h[(a, b)] / nf;
            h[(a, b)] = v;
            h[(b, a)] = v;
        }
    }
    h
}

/// Solves `H s = g`, adding a growing ridge when `H` is singular (for
/// instance a constant covariate next to the intercept). The fitted
/// probabilities stay identifiable even though the coefficients are not.
fn newton_step(hessian: &Matrix, score: &[f64]) -> Option<Vec<f64>> {
    if let Ok(s) = solve(hessian, score) {
        return Some(s);
    }
    let k = hessian.rows();
    let scale = (0..k).map(|a| hessian[(a, a)]).sum::<f64>().max(1e-300) / k as f64;
    let mut tau = 1e-10 * scale;
    for _ in 0..8 {
        let mut damped = hessian.clone();
        for a in 0..k {
            damped[(a, a)] += tau;
        }
        if let Ok(s) = solve(&damped, score) {
            return Some(s);
        }
        tau *= 100.0;
    }
    None
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Fitted probabilities, clamped to `[1e-12, 1 − 1e-12]`.
pub fn predict_ps(model: &LogisticModel, x: &Matrix) -> Result<Vec<f64>> {
    if x.cols() != model.coefficients.len() {
        return Err(Error::InvalidArgument(format!(
            "model has {} coefficients but covariates have {} columns",
            model.coefficients.len(),
            x.cols()
        )));
    }
    Ok(x
        .row_iter()
        .map(|r| logistic(model.linear_predictor(r)).clamp(PROB_CLAMP, 1.0 - PROB_CLAMP))
        .collect())
}

/// Two Gaussian covariate distributions mixed with weight `treat_prob`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixtureDesign {
    pub mean_control: Vec<f64>,
    pub mean_treated: Vec<f64>,
    pub cov_control: Matrix,
    pub cov_treated: Matrix,
    pub treat_prob: f64,
}

impl GaussianMixtureDesign {
    /// The same design with the roles of the two groups exchanged.
    pub fn swapped(&self) -> Self {
        GaussianMixtureDesign {
            mean_control: self.mean_treated.clone(),
            mean_treated: self.mean_control.clone(),
            cov_control: self.cov_treated.clone(),
            cov_treated: self.cov_control.clone(),
            treat_prob: 1.0 - self.treat_prob,
        }
    }
}

/// Log-density of `N(mean, cov)`, factored once through the eigenvectors
/// of `cov`.
#[derive(Debug, Clone)]
pub struct GaussianLogDensity {
    mean: Vec<f64>,
    /// Eigenvectors scaled by `λ^{-1/2}`, one per row.
    whitening: Matrix,
    log_norm: f64,
}

impl GaussianLogDensity {
    pub fn new(mean: &[f64], cov: &Matrix) -> Result<Self> {
        if !cov.is_square() || cov.rows() != mean.len() {
            return Err(Error::InvalidArgument("mean and covariance shapes disagree".into()));
        }
        let eig = sym_eigen(cov)?;
        let top = eig.eigenvalues[0].abs().max(1.0);
        if let Some(&bad) = eig.eigenvalues.iter().find(|&&l| l <= 1e-12 * top) {
            return Err(Error::NotPsd { min_eigenvalue: bad });
        }
        let p = mean.len();
        let whitening = Matrix::from_fn(p, p, |k, a| {
            eig.eigenvectors[(a, k)] / eig.eigenvalues[k].sqrt()
        });
        let log_det: f64 = eig.eigenvalues.iter().map(|l| l.ln()).sum();
        let log_norm = -0.5 * (p as f64 * (2.0 * std::f64::consts::PI).ln() + log_det);
        Ok(GaussianLogDensity {
            mean: mean.to_vec(),
            whitening,
            log_norm,
        })
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let centered: Vec<f64> = x.iter().zip(&self.mean).map(|(a, m)| a - m).collect();
        let q: f64 = self
            .whitening
            .row_iter()
            .map(|w| {
                let s: f64 = w.iter().zip(&centered).map(|(a, b)| a * b).sum();
                s * s
            })
            .sum();
        self.log_norm - 0.5 * q
    }
}

/// `P(T = 1 | X = x)` by Bayes' rule for the Gaussian mixture, evaluated
/// in log space.
pub fn true_ps_bayes(design: &GaussianMixtureDesign, x: &Matrix) -> Result<Vec<f64>> {
    let q = design.treat_prob;
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "treatment probability must lie in (0, 1), got {q}"
        )));
    }
    let p = design.mean_control.len();
    if x.cols() != p || design.mean_treated.len() != p {
        return Err(Error::InvalidArgument(format!(
            "design has dimension {p} but covariates have {} columns",
            x.cols()
        )));
    }
    let d0 = GaussianLogDensity::new(&design.mean_control, &design.cov_control)?;
    let d1 = GaussianLogDensity::new(&design.mean_treated, &design.cov_treated)?;
    let prior_logit = q.ln() - (1.0 - q).ln();
    Ok(x
        .row_iter()
        .map(|r| logistic(prior_logit + d1.eval(r) - d0.eval(r)))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{ar1_matrix, sample_mvn, RngStream};

    fn col(v: &[f64]) -> Matrix {
        Matrix::column_vector(v)
    }

    #[test]
    fn symmetric_data_gives_zero_model() {
        let m = fit_logistic(&col(&[-1.0, -1.0, 1.0, 1.0]), &[0, 1, 0, 1], 50, 1e-10).unwrap();
        assert!(m.converged);
        assert!(m.intercept.abs() < 1e-6 && m.coefficients[0].abs() < 1e-6);
    }

    #[test]
    fn single_class_is_degenerate() {
        assert!(matches!(
            fit_logistic(&col(&[0.0, 1.0, 2.0]), &[1, 1, 1], 50, 1e-8),
            Err(Error::DegenerateLabels(_))
        ));
    }

    #[test]
    fn separated_data_do_not_converge() {
        let m = fit_logistic(&col(&[-2.0, -1.0, 1.0, 2.0]), &[0, 0, 1, 1], 50, 1e-8).unwrap();
        assert!(!m.converged);
        assert!(m.coefficients[0] > 5.0);
    }

    #[test]
    fn converged_fit_has_small_score() {
        let mut rng = RngStream::new(21, 0);
        let x = sample_mvn(&mut rng, &[0.0, 0.0], &Matrix::identity(2), 400).unwrap();
        let t: Vec<u8> = x
            .row_iter()
            .map(|r| u8::from(rng.bernoulli(logistic(0.3 + r[0] - 0.5 * r[1]))))
            .collect();
        let m = fit_logistic(&x, &t, 100, 1e-10).unwrap();
        assert!(m.converged);
        assert!(logistic_score(&m, &x, &t).iter().all(|g| g.abs() <= 1e-10));
    }

    #[test]
    fn predictions_and_clamping() {
        let zero = LogisticModel::zero(2);
        let x = Matrix::from_rows(&[vec![1.0, 2.0], vec![-3.0, 0.5]]).unwrap();
        assert_eq!(predict_ps(&zero, &x).unwrap(), vec![0.5, 0.5]);

        let no_cov = LogisticModel {
            intercept: 3f64.ln(),
            ..LogisticModel::zero(0)
        };
        let p = predict_ps(&no_cov, &Matrix::zeros(1, 0)).unwrap();
        assert!((p[0] - 0.75).abs() < 1e-15);

        let huge = LogisticModel {
            intercept: 100.0,
            ..LogisticModel::zero(2)
        };
        assert_eq!(predict_ps(&huge, &x).unwrap()[0], 1.0 - 1e-12);
        assert!(predict_ps(&huge, &Matrix::zeros(1, 3)).is_err());
    }

    fn design(p: usize, mu1: Vec<f64>, d0: f64, d1: f64, q: f64) -> GaussianMixtureDesign {
        GaussianMixtureDesign {
            mean_control: vec![0.0; p],
            mean_treated: mu1,
            cov_control: ar1_matrix(p, d0),
            cov_treated: ar1_matrix(p, d1),
            treat_prob: q,
        }
    }

    #[test]
    fn bayes_symmetric_design_is_half() {
        let d = design(3, vec![0.0; 3], 0.2, 0.2, 0.5);
        let x = Matrix::from_rows(&[vec![1.0, -2.0, 0.3], vec![0.0, 0.0, 5.0]]).unwrap();
        for p in true_ps_bayes(&d, &x).unwrap() {
            assert!((p - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn bayes_by_hand() {
        let d = design(1, vec![1.0], 0.0, 0.0, 0.5);
        let p = true_ps_bayes(&d, &col(&[0.5])).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-15);

        let d = design(2, vec![1.0, 0.0], 0.0, 0.0, 0.5);
        let x = Matrix::from_rows(&[vec![1.0, 0.0]]).unwrap();
        let p = true_ps_bayes(&d, &x).unwrap();
        assert!((p[0] - logistic(0.5)).abs() < 1e-14);
        assert!((p[0] - 0.622_459_331_201_854_6).abs() < 1e-12);
    }

    #[test]
    fn bayes_swapped_roles_complement() {
        let d = design(4, vec![0.3, -0.2, 0.1, 0.5], 0.2, 0.5, 0.4);
        let mut rng = RngStream::new(22, 0);
        let x = sample_mvn(&mut rng, &[0.0; 4], &Matrix::identity(4), 200).unwrap();
        let a = true_ps_bayes(&d, &x).unwrap();
        let b = true_ps_bayes(&d.swapped(), &x).unwrap();
        for (p, q) in a.iter().zip(&b) {
            assert!((p + q - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn bayes_rejects_singular_covariance() {
        let mut d = design(2, vec![0.0, 0.0], 0.0, 0.0, 0.5);
        d.cov_treated = Matrix::from_diag(&[1.0, 0.0]);
        assert!(matches!(
            true_ps_bayes(&d, &Matrix::zeros(1, 2)),
            Err(Error::NotPsd { .. })
        ));
    }
}
