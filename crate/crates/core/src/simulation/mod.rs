//! Simulation designs and a seeded, parallel Monte Carlo harness.
//!
//! Three families of designs are available:
//!
//! * `case1-I` .. `case1-IV`: `T ~ Bernoulli(0.5)` and `X | T = t ~ N(μ_t, Σ_t)`
//!   with AR(1) covariance `Σ_t[i, j] = δ_t^|i−j|`.
//! * `case2-I*`, `case2-II*`: `X ~ N(0, I_p)` and `T | X` drawn from the
//!   Bayes propensity score of the matching `case1` design.
//! * `case3-A` .. `case3-G`: ten mixed binary/normal covariates, a logistic
//!   treatment model and a linear outcome with constant effect. The
//!   coefficients come from a [`Case3Config`] file.

mod case3;
mod generate;
mod harness;

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::matching::Estimand;
use crate::numerics::{ar1_matrix, solve, Matrix};

pub use case3::{
    calibrate_latent_correlation, load_case3_config, parse_case3_config, Case3Config,
    CorrelationCalibration, CorrelationTarget, Margin, OutcomeConfig, PropensityConfig, TermConfig,
    TermKind,
};
pub use generate::{generate, generate_case1, generate_case2, generate_case3, Generator, SimulatedData};
pub use harness::{
    compute_truth, run_monte_carlo, run_replicate, MethodSummary, MonteCarloConfig,
    MonteCarloReport, ReplicateOutcome, Truth, TruthSource, TRUTH_DRAWS,
};

/// Outcome models shared by Cases 1 and 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Model {
    I,
    II,
    III,
    IV,
}

impl Model {
    fn numeral(self) -> &'static str {
        match self {
            Model::I => "I",
            Model::II => "II",
            Model::III => "III",
            Model::IV => "IV",
        }
    }

    /// Smallest covariate dimension the outcome formula can use.
    fn min_dimension(self) -> usize {
        match self {
            Model::I => 2,
            Model::II => 3,
            Model::III => 5,
            Model::IV => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scenario {
    Case1(Model),
    /// Only Models I and II.
    Case2(Model),
    /// Scenario letter `A`..=`G`.
    Case3(char),
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scenario::Case1(m) => write!(f, "case1-{}", m.numeral()),
            Scenario::Case2(m) => write!(f, "case2-{}*", m.numeral()),
            Scenario::Case3(c) => write!(f, "case3-{c}"),
        }
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let model = |m: &str| match m {
            "I" => Some(Model::I),
            "II" => Some(Model::II),
            "III" => Some(Model::III),
            "IV" => Some(Model::IV),
            _ => None,
        };
        let parsed = if let Some(rest) = s.strip_prefix("case1-") {
            model(rest).map(Scenario::Case1)
        } else if let Some(rest) = s.strip_prefix("case2-") {
            match model(rest.strip_suffix('*').unwrap_or(rest)) {
                Some(m @ (Model::I | Model::II)) => Some(Scenario::Case2(m)),
                _ => None,
            }
        } else if let Some(rest) = s.strip_prefix("case3-") {
            let mut chars = rest.chars();
            match (chars.next(), chars.next()) {
                (Some(c @ 'A'..='G'), None) => Some(Scenario::Case3(c)),
                _ => None,
            }
        } else {
            None
        };
        parsed.ok_or_else(|| {
            Error::InvalidArgument(format!(
                "unknown scenario '{s}' (expected case1-I..IV, case2-I*, case2-II* or case3-A..G)"
            ))
        })
    }
}

/// Balancing scores compared in a simulation run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    /// Mahalanobis matching on all covariates.
    Ambient,
    /// Logistic-regression propensity score on the main effects.
    PsLogistic,
    /// The design's exact propensity score.
    PsTrue,
    /// Reduced covariates from per-group SIR.
    Sdr,
    /// Covariates projected onto the design's true central subspaces.
    SdrOracle,
    /// Mahalanobis matching on the covariates the outcome depends on.
    ActiveSetOracle,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Ambient,
        Method::PsLogistic,
        Method::PsTrue,
        Method::Sdr,
        Method::SdrOracle,
        Method::ActiveSetOracle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Ambient => "ambient",
            Method::PsLogistic => "ps-logistic",
            Method::PsTrue => "ps-true",
            Method::Sdr => "sdr",
            Method::SdrOracle => "sdr-oracle",
            Method::ActiveSetOracle => "active-set-oracle",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown method '{s}'")))
    }
}

/// Parameters of a two-component Gaussian covariate design.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianParams {
    pub mean_control: Vec<f64>,
    pub mean_treated: Vec<f64>,
    pub delta_control: f64,
    pub delta_treated: f64,
    pub noise_sd: f64,
}

impl GaussianParams {
    /// The Case-1 parameters of `model` in dimension `p`.
    pub fn for_model(model: Model, p: usize) -> Self {
        let mean_treated = match model {
            Model::I => vec![0.0; p],
            Model::II => (1..=p).map(|k| if k <= 3 { 1.0 / 3.0 } else { 0.0 }).collect(),
            Model::III => vec![1.0 / (p as f64).sqrt(); p],
            Model::IV => {
                let c1 = 0.5 / (1..=p).map(|k| (k * k) as f64).sum::<f64>().sqrt();
                (1..=p).map(|k| c1 * k as f64).collect()
            }
        };
        let delta_treated = match model {
            Model::I | Model::II => 0.5,
            Model::III | Model::IV => 0.2,
        };
        GaussianParams {
            mean_control: vec![0.0; p],
            mean_treated,
            delta_control: 0.2,
            delta_treated,
            noise_sd: 0.5,
        }
    }

    pub fn p(&self) -> usize {
        self.mean_control.len()
    }

    pub fn cov_control(&self) -> Matrix {
        ar1_matrix(self.p(), self.delta_control)
    }

    pub fn cov_treated(&self) -> Matrix {
        ar1_matrix(self.p(), self.delta_treated)
    }

    /// `Σ₁⁻¹ (μ₁ − μ₀)`, the index of Model IV.
    pub fn discriminant_direction(&self) -> Result<Vec<f64>> {
        let diff: Vec<f64> = self
            .mean_treated
            .iter()
            .zip(&self.mean_control)
            .map(|(a, b)| a - b)
            .collect();
        solve(&self.cov_treated(), &diff)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Design {
    Gaussian(GaussianParams),
    Mixed(Case3Config),
}

/// A fully specified simulation design plus the methods and estimand to
/// evaluate on it.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub scenario: Scenario,
    pub n: usize,
    pub design: Design,
    pub estimand: Estimand,
    pub methods: Vec<Method>,
}

impl ScenarioSpec {
    /// Case 1 or 2 designs. Fails for Case 3, which needs a coefficient file.
    pub fn gaussian(scenario: Scenario, n: usize, p: usize) -> Result<Self> {
        let model = match scenario {
            Scenario::Case1(m) | Scenario::Case2(m) => m,
            Scenario::Case3(_) => {
                return Err(Error::Config(format!(
                    "{scenario} needs a coefficient configuration"
                )))
            }
        };
        if p < model.min_dimension() {
            return Err(Error::InvalidArgument(format!(
                "{scenario} needs p >= {}, got {p}",
                model.min_dimension()
            )));
        }
        Self::validated(ScenarioSpec {
            scenario,
            n,
            design: Design::Gaussian(GaussianParams::for_model(model, p)),
            estimand: Estimand::Ace,
            methods: Method::ALL.to_vec(),
        })
    }

    pub fn case3(letter: char, config: Case3Config, n: usize) -> Result<Self> {
        if !('A'..='G').contains(&letter) {
            return Err(Error::InvalidArgument(format!("unknown case3 scenario '{letter}'")));
        }
        config.validate()?;
        Self::validated(ScenarioSpec {
            scenario: Scenario::Case3(letter),
            n,
            design: Design::Mixed(config),
            estimand: Estimand::Ace,
            methods: Method::ALL.to_vec(),
        })
    }

    /// Builds any scenario; `case3_config` is required exactly for Case 3.
    pub fn new(scenario: Scenario, n: usize, p: usize, case3_config: Option<Case3Config>) -> Result<Self> {
        match (scenario, case3_config) {
            (Scenario::Case3(letter), Some(cfg)) => Self::case3(letter, cfg, n),
            (Scenario::Case3(_), None) => Err(Error::Config(format!(
                "{scenario} needs a coefficient configuration"
            ))),
            (_, _) => Self::gaussian(scenario, n, p),
        }
    }

    pub fn with_estimand(mut self, estimand: Estimand) -> Self {
        self.estimand = estimand;
        self
    }

    pub fn with_methods(mut self, methods: Vec<Method>) -> Result<Self> {
        if methods.is_empty() {
            return Err(Error::InvalidArgument("at least one method is required".into()));
        }
        self.methods = methods;
        Ok(self)
    }

    fn validated(spec: ScenarioSpec) -> Result<Self> {
        if spec.n < 50 {
            return Err(Error::InvalidArgument(format!("n must be at least 50, got {}", spec.n)));
        }
        if spec.p() < 2 {
            return Err(Error::InvalidArgument("p must be at least 2".into()));
        }
        if let Design::Gaussian(g) = &spec.design {
            for d in [g.delta_control, g.delta_treated] {
                if !(d > -1.0 && d < 1.0) {
                    return Err(Error::InvalidArgument(format!("AR(1) parameter {d} outside (-1, 1)")));
                }
            }
        }
        Ok(spec)
    }

    pub fn p(&self) -> usize {
        match &self.design {
            Design::Gaussian(g) => g.p(),
            Design::Mixed(c) => c.p(),
        }
    }

    /// True central-subspace direction of `Y(t) | X` for control (`t = 0`)
    /// and treated (`t = 1`) subjects.
    pub fn oracle_bases(&self) -> Result<[Vec<f64>; 2]> {
        let p = self.p();
        let unit = |ks: &[(usize, f64)]| {
            let mut v = vec![0.0; p];
            for &(k, c) in ks {
                v[k] = c;
            }
            v
        };
        Ok(match (&self.scenario, &self.design) {
            (Scenario::Case1(m) | Scenario::Case2(m), Design::Gaussian(g)) => match m {
                Model::I => [unit(&[(0, 1.0)]), unit(&[(0, 1.0)])],
                Model::II => {
                    let b = unit(&[(0, 1.0), (1, 1.0), (2, -1.0)]);
                    [b.clone(), b]
                }
                Model::III => [
                    unit(&[(0, 1.0), (1, 1.0), (2, 1.0)]),
                    unit(&[(0, 1.0), (1, 1.0), (2, 1.0), (3, 1.0), (4, 1.0)]),
                ],
                Model::IV => {
                    let b = g.discriminant_direction()?;
                    [b.clone(), b]
                }
            },
            (_, Design::Mixed(c)) => [c.outcome.main.clone(), c.outcome.main.clone()],
            _ => unreachable!("scenario and design are built together"),
        })
    }

    /// Zero-based covariate columns the outcome depends on.
    pub fn active_set(&self) -> Vec<usize> {
        match (&self.scenario, &self.design) {
            (_, Design::Mixed(c)) => (0..c.p()).filter(|&k| c.outcome.main[k] != 0.0).collect(),
            (Scenario::Case1(m) | Scenario::Case2(m), _) => match m {
                Model::I => vec![0],
                Model::II => vec![0, 1, 2],
                Model::III => vec![0, 1, 2, 3, 4],
                Model::IV => (0..self.p()).collect(),
            },
            _ => unreachable!("scenario and design are built together"),
        }
    }

    /// Closed-form effect where one exists for this scenario and estimand.
    pub fn analytic_truth(&self) -> Option<f64> {
        match (self.scenario, self.estimand) {
            (Scenario::Case3(_), _) => match &self.design {
                Design::Mixed(c) => Some(c.treatment_effect),
                Design::Gaussian(_) => None,
            },
            (_, Estimand::Acet) => None,
            (Scenario::Case1(Model::I) | Scenario::Case2(Model::I), Estimand::Ace) => Some(4.25),
            (Scenario::Case1(Model::II) | Scenario::Case2(Model::II), Estimand::Ace) => Some(1.0),
            (Scenario::Case1(Model::III), Estimand::Ace) => match &self.design {
                // E[X4 + X5] = (μ₁₄ + μ₁₅) / 2 under P(T = 1) = 1/2
                Design::Gaussian(g) => Some(0.5 * (g.mean_treated[3] + g.mean_treated[4])),
                Design::Mixed(_) => None,
            },
            _ => None,
        }
    }

    /// Normalized one-line description used in report headers.
    pub fn describe(&self) -> String {
        let methods: Vec<&str> = self.methods.iter().map(|m| m.name()).collect();
        let mut s = format!(
            "scenario={} n={} p={} estimand={} methods={}",
            self.scenario,
            self.n,
            self.p(),
            self.estimand.to_string().to_lowercase(),
            methods.join(",")
        );
        if let Design::Mixed(c) = &self.design {
            s.push_str(&format!(" coef={}", c.fingerprint()));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenario_ids_round_trip() {
        for id in [
            "case1-I", "case1-II", "case1-III", "case1-IV", "case2-I*", "case2-II*", "case3-A", "case3-G",
        ] {
            assert_eq!(id.parse::<Scenario>().unwrap().to_string(), id);
        }
        assert_eq!("case2-II".parse::<Scenario>().unwrap(), Scenario::Case2(Model::II));
        for bad in ["case1-V", "case2-III*", "case3-H", "case3-AB", "model-I"] {
            assert!(bad.parse::<Scenario>().is_err(), "{bad}");
        }
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("cbps".parse::<Method>().is_err());
    }

    #[test]
    fn model_iv_mean_has_norm_half() {
        let g = GaussianParams::for_model(Model::IV, 10);
        let c1 = g.mean_treated[0];
        assert!((c1 - 0.5 / 385f64.sqrt()).abs() < 1e-15);
        assert!((c1 - 0.02548).abs() < 1e-5);
        assert!((crate::numerics::norm2(&g.mean_treated) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn model_iii_truth_is_inverse_root_ten() {
        let s = ScenarioSpec::gaussian(Scenario::Case1(Model::III), 500, 10).unwrap();
        assert!((s.analytic_truth().unwrap() - 1.0 / 10f64.sqrt()).abs() < 1e-15);
        assert_eq!(s.active_set(), vec![0, 1, 2, 3, 4]);
        let acet = s.with_estimand(Estimand::Acet);
        assert_eq!(acet.analytic_truth(), None);
    }

    #[test]
    fn spec_validation() {
        assert!(ScenarioSpec::gaussian(Scenario::Case1(Model::I), 49, 10).is_err());
        assert!(ScenarioSpec::gaussian(Scenario::Case1(Model::III), 500, 4).is_err());
        assert!(ScenarioSpec::new(Scenario::Case3('A'), 500, 10, None).is_err());
        assert!(ScenarioSpec::gaussian(Scenario::Case1(Model::II), 500, 3).is_ok());
    }

    #[test]
    fn model_iv_oracle_direction() {
        let s = ScenarioSpec::gaussian(Scenario::Case1(Model::IV), 500, 10).unwrap();
        let [b0, b1] = s.oracle_bases().unwrap();
        assert_eq!(b0, b1);
        let g = GaussianParams::for_model(Model::IV, 10);
        let back = g.cov_treated().mul_vec(&b0).unwrap();
        for (a, b) in back.iter().zip(&g.mean_treated) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
