//! Coefficient files for the mixed binary/normal design.
//!
//! ```toml
//! name = "A"
//! binary = [1, 3, 5, 6, 8, 9]
//! correlations = [{ a = 1, b = 5, target = 0.2 }]
//!
//! [propensity]
//! intercept = 0.0
//! main = [0.0, 0.0, 0.0, -0.8, -0.5, 0.7, 0.8, -0.25, 0.6, -0.4]
//! terms = [{ kind = "quadratic", covariates = [7], coefficient = 0.8 }]
//!
//! [outcome]
//! main = [0.71, -0.19, 0.26, 0.0, 0.0, 0.0, 0.3, -0.36, -0.73, -0.2]
//! ```
//!
//! Covariate indices are 1-based. `binary` and `correlations` default to
//! the standard ten-covariate layout when omitted.

use std::f64::consts::{FRAC_2_PI, PI};
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::numerics::{sym_eigen, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TermKind {
    Quadratic,
    Interaction,
}

/// One nonlinear term of the treatment model: `coefficient · X_a²` or
/// `coefficient · X_a · X_b`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermConfig {
    pub kind: TermKind,
    pub covariates: Vec<usize>,
    pub coefficient: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropensityConfig {
    #[serde(default)]
    pub intercept: f64,
    pub main: Vec<f64>,
    #[serde(default)]
    pub terms: Vec<TermConfig>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutcomeConfig {
    /// `ω`.
    pub main: Vec<f64>,
}

/// Target product-moment correlation between covariates `a` and `b`.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrelationTarget {
    pub a: usize,
    pub b: usize,
    pub target: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Case3Config {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default = "default_binary")]
    pub binary: Vec<usize>,
    #[serde(default = "default_correlations")]
    pub correlations: Vec<CorrelationTarget>,
    #[serde(default = "default_effect")]
    pub treatment_effect: f64,
    #[serde(default = "default_noise")]
    pub noise_sd: f64,
    pub propensity: PropensityConfig,
    pub outcome: OutcomeConfig,
}

fn default_binary() -> Vec<usize> {
    vec![1, 3, 5, 6, 8, 9]
}

fn default_correlations() -> Vec<CorrelationTarget> {
    [(1, 5, 0.2), (3, 8, 0.2), (2, 6, 0.9), (4, 9, 0.9)]
        .into_iter()
        .map(|(a, b, target)| CorrelationTarget { a, b, target })
        .collect()
}

fn default_effect() -> f64 {
    -0.4
}

fn default_noise() -> f64 {
    0.1
}

pub fn parse_case3_config(text: &str) -> Result<Case3Config> {
    let cfg: Case3Config = toml::from_str(text).map_err(|e| {
        Error::Config(e.to_string().lines().next().unwrap_or("malformed file").to_string())
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_case3_config(path: impl AsRef<Path>) -> Result<Case3Config> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_case3_config(&text)
}

/// Marginal law of one covariate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Margin {
    StandardNormal,
    /// `1{Z > 0}` for a latent standard normal `Z`.
    Bernoulli,
}

/// Latent normal correlation chosen for one target pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationCalibration {
    pub latent: f64,
    /// Product-moment correlation the latent value produces.
    pub realized: f64,
    /// Whether `realized` equals the target.
    pub feasible: bool,
}

/// Latent correlation of a Gaussian copula that reproduces `target` after
/// dichotomizing binary margins at zero.
///
/// A normal and a median-split binary can correlate at most `√(2/π) ≈ 0.798`.
/// For an unreachable target the target itself is used as the latent
/// correlation and the shortfall is reported through `realized`.
pub fn calibrate_latent_correlation(a: Margin, b: Margin, target: f64) -> CorrelationCalibration {
    use Margin::*;
    let realized_of = |rho: f64| match (a, b) {
        (StandardNormal, StandardNormal) => rho,
        (Bernoulli, Bernoulli) => FRAC_2_PI * rho.asin(),
        _ => rho * FRAC_2_PI.sqrt(),
    };
    let latent = match (a, b) {
        (StandardNormal, StandardNormal) => target,
        (Bernoulli, Bernoulli) => (0.5 * PI * target).sin(),
        _ => target / FRAC_2_PI.sqrt(),
    };
    if latent.abs() < 1.0 {
        CorrelationCalibration {
            latent,
            realized: realized_of(latent),
            feasible: true,
        }
    } else {
        CorrelationCalibration {
            latent: target,
            realized: realized_of(target),
            feasible: false,
        }
    }
}

impl Case3Config {
    pub fn p(&self) -> usize {
        self.outcome.main.len()
    }

    pub fn margins(&self) -> Vec<Margin> {
        (1..=self.p())
            .map(|k| {
                if self.binary.contains(&k) {
                    Margin::Bernoulli
                } else {
                    Margin::StandardNormal
                }
            })
            .collect()
    }

    pub fn calibrations(&self) -> Vec<(CorrelationTarget, CorrelationCalibration)> {
        let margins = self.margins();
        self.correlations
            .iter()
            .map(|c| (*c, calibrate_latent_correlation(margins[c.a - 1], margins[c.b - 1], c.target)))
            .collect()
    }

    /// Correlation matrix of the latent normals.
    pub fn latent_correlation(&self) -> Matrix {
        let mut r = Matrix::identity(self.p());
        for (c, cal) in self.calibrations() {
            r[(c.a - 1, c.b - 1)] = cal.latent;
            r[(c.b - 1, c.a - 1)] = cal.latent;
        }
        r
    }

    /// `α₀ + Σ α_k x_k + Σ terms`.
    pub fn treatment_logit(&self, x: &[f64]) -> f64 {
        let ps = &self.propensity;
        let mut eta = ps.intercept + ps.main.iter().zip(x).map(|(a, v)| a * v).sum::<f64>();
        for term in &ps.terms {
            let a = x[term.covariates[0] - 1];
            eta += term.coefficient
                * match term.kind {
                    TermKind::Quadratic => a * a,
                    TermKind::Interaction => a * x[term.covariates[1] - 1],
                };
        }
        eta
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.p();
        let bad = |msg: String| Err(Error::Config(msg));
        if p < 2 {
            return bad(format!("outcome.main must list at least 2 coefficients, got {p}"));
        }
        if self.propensity.main.len() != p {
            return bad(format!(
                "propensity.main has {} coefficients but outcome.main has {p}",
                self.propensity.main.len()
            ));
        }
        let in_range = |k: usize| (1..=p).contains(&k);
        if let Some(&k) = self.binary.iter().find(|&&k| !in_range(k)) {
            return bad(format!("binary covariate {k} does not exist (p = {p})"));
        }
        for (i, term) in self.propensity.terms.iter().enumerate() {
            let want = match term.kind {
                TermKind::Quadratic => 1,
                TermKind::Interaction => 2,
            };
            if term.covariates.len() != want {
                return bad(format!(
                    "term {} ({:?}) needs {want} covariate(s), got {}",
                    i + 1,
                    term.kind,
                    term.covariates.len()
                ));
            }
            if let Some(&k) = term.covariates.iter().find(|&&k| !in_range(k)) {
                return bad(format!("term {} references covariate {k}, but p = {p}", i + 1));
            }
            if want == 2 && term.covariates[0] == term.covariates[1] {
                return bad(format!("term {} interacts a covariate with itself", i + 1));
            }
        }
        let mut seen = std::collections::BTreeSet::new();
        for c in &self.correlations {
            if !in_range(c.a) || !in_range(c.b) || c.a == c.b {
                return bad(format!("correlation pair ({}, {}) is invalid for p = {p}", c.a, c.b));
            }
            if !(c.target > -1.0 && c.target < 1.0) {
                return bad(format!("correlation target {} outside (-1, 1)", c.target));
            }
            if !seen.insert((c.a.min(c.b), c.a.max(c.b))) {
                return bad(format!("correlation pair ({}, {}) listed twice", c.a, c.b));
            }
        }
        let all_finite = self.propensity.main.iter().chain(&self.outcome.main).all(|v| v.is_finite())
            && self.propensity.terms.iter().all(|t| t.coefficient.is_finite())
            && self.propensity.intercept.is_finite()
            && self.treatment_effect.is_finite();
        if !all_finite {
            return bad("coefficients must be finite".into());
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return bad(format!("noise_sd must be nonnegative, got {}", self.noise_sd));
        }
        let eig = sym_eigen(&self.latent_correlation())?;
        if eig.eigenvalues[p - 1] <= 0.0 {
            return bad("latent correlation matrix is not positive definite".into());
        }
        Ok(())
    }

    /// Short stable identifier for report headers.
    pub fn fingerprint(&self) -> String {
        let text = format!("{self:?}");
        // FNV-1a
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in text.bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        match &self.name {
            Some(name) => format!("{name}:{h:016x}"),
            None => format!("{h:016x}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        [propensity]
        main = [0.0, 0.0, 0.0, -0.8, -0.5, 0.7, 0.8, -0.25, 0.6, -0.4]
        [outcome]
        main = [0.71, -0.19, 0.26, 0.0, 0.0, 0.0, 0.3, -0.36, -0.73, -0.2]
    "#;

    #[test]
    fn defaults_fill_layout() {
        let cfg = parse_case3_config(MINIMAL).unwrap();
        assert_eq!(cfg.p(), 10);
        assert_eq!(cfg.binary, vec![1, 3, 5, 6, 8, 9]);
        assert_eq!(cfg.correlations.len(), 4);
        assert_eq!(cfg.treatment_effect, -0.4);
        assert_eq!(cfg.noise_sd, 0.1);
        assert_eq!(cfg.margins().iter().filter(|m| **m == Margin::Bernoulli).count(), 6);
    }

    #[test]
    fn binary_pair_calibration() {
        let c = calibrate_latent_correlation(Margin::Bernoulli, Margin::Bernoulli, 0.2);
        assert!(c.feasible);
        assert!((c.latent - (0.1 * PI).sin()).abs() < 1e-15);
        assert!((c.realized - 0.2).abs() < 1e-14);
    }

    #[test]
    fn mixed_pair_calibration() {
        let c = calibrate_latent_correlation(Margin::StandardNormal, Margin::Bernoulli, 0.5);
        assert!(c.feasible);
        assert!((c.realized - 0.5).abs() < 1e-14);
        assert!((c.latent - 0.5 * (PI / 2.0).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn normal_binary_ceiling() {
        let max = (2.0 / PI).sqrt();
        let c = calibrate_latent_correlation(Margin::Bernoulli, Margin::StandardNormal, 0.9);
        assert!(!c.feasible);
        assert_eq!(c.latent, 0.9);
        assert!((c.realized - 0.9 * max).abs() < 1e-14);
        assert!(c.realized < max);
    }

    #[test]
    fn logit_with_terms() {
        let text = MINIMAL.replace(
            "[outcome]",
            "terms = [\n\
               { kind = \"quadratic\", covariates = [7], coefficient = 2.0 },\n\
               { kind = \"interaction\", covariates = [4, 7], coefficient = -1.0 },\n\
             ]\n[outcome]",
        );
        let cfg = parse_case3_config(&text).unwrap();
        let mut x = vec![0.0; 10];
        x[3] = 1.0;
        x[6] = 2.0;
        // −0.8·1 + 0.8·2 + 2·4 − 1·2
        assert!((cfg.treatment_logit(&x) - 6.8).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_references() {
        let out_of_range = MINIMAL.replace(
            "[outcome]",
            "terms = [{ kind = \"quadratic\", covariates = [11], coefficient = 1.0 }]\n[outcome]",
        );
        assert!(matches!(parse_case3_config(&out_of_range), Err(Error::Config(_))));
        let wrong_arity = MINIMAL.replace(
            "[outcome]",
            "terms = [{ kind = \"interaction\", covariates = [2], coefficient = 1.0 }]\n[outcome]",
        );
        assert!(matches!(parse_case3_config(&wrong_arity), Err(Error::Config(_))));
        let short = MINIMAL.replace("-0.4]\n", "]\n");
        assert!(matches!(parse_case3_config(&short), Err(Error::Config(_))));
        assert!(matches!(parse_case3_config("nonsense ="), Err(Error::Config(_))));
    }

    #[test]
    fn fingerprint_is_stable_and_sensitive() {
        let a = parse_case3_config(MINIMAL).unwrap();
        let mut b = a.clone();
        assert_eq!(a.fingerprint(), b.fingerprint());
        b.outcome.main[0] = 0.7;
        assert_ne!(a.fingerprint(), b.fingerprint());
    }
}
