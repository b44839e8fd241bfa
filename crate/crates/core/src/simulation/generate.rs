//! Data-generating processes.

use crate::dataset::ObservationalSample;
use crate::error::{Error, Result};
use crate::numerics::{dot, logistic, sqrt_psd, Matrix, RngStream};
use crate::propensity::{GaussianLogDensity, GaussianMixtureDesign};

use super::{Case3Config, Design, GaussianParams, Margin, Model, Scenario, ScenarioSpec};

/// One simulated dataset with the quantities only a simulation knows.
#[derive(Debug, Clone)]
pub struct SimulatedData {
    pub sample: ObservationalSample,
    pub true_ps: Vec<f64>,
    /// Potential outcomes; the observed outcome is `y1` for treated
    /// subjects and `y0` for controls.
    pub y0: Vec<f64>,
    pub y1: Vec<f64>,
    /// True central-subspace directions for control and treated outcomes.
    pub oracle_bases: [Vec<f64>; 2],
}

impl SimulatedData {
    /// `Y_i(1) − Y_i(0)` for every subject.
    pub fn individual_effects(&self) -> Vec<f64> {
        self.y1.iter().zip(&self.y0).map(|(a, b)| a - b).collect()
    }
}

/// Per-scenario precomputation (covariance roots, densities, indices),
/// built once and reused for every replicate.
#[derive(Debug, Clone)]
pub struct Generator {
    scenario: Scenario,
    kind: Kind,
    oracle_bases: [Vec<f64>; 2],
}

#[derive(Debug, Clone)]
enum Kind {
    Conditional {
        model: Model,
        params: GaussianParams,
        roots: [Matrix; 2],
        index: Vec<f64>,
        densities: [GaussianLogDensity; 2],
    },
    Marginal {
        model: Model,
        params: GaussianParams,
        index: Vec<f64>,
        densities: [GaussianLogDensity; 2],
    },
    Mixed {
        config: Case3Config,
        latent_root: Matrix,
        margins: Vec<Margin>,
    },
}

fn outcome(model: Model, index: &[f64], x: &[f64], t: f64, eps: f64) -> f64 {
    match model {
        Model::I => (t + 2.0) * (x[0] + 1.5).powi(2) + t + eps,
        Model::II => 2.0 * (0.5 * (x[0] + x[1] - x[2])).sin() + t + eps,
        Model::III => x[0] + x[1] + x[2] + t * (x[3] + x[4]) + eps,
        Model::IV => {
            let s = dot(x, index);
            3.0 * (s / 3.0).sin() + t * s * s / 3.0 + eps
        }
    }
}

fn densities(params: &GaussianParams) -> Result<[GaussianLogDensity; 2]> {
    Ok([
        GaussianLogDensity::new(&params.mean_control, &params.cov_control())?,
        GaussianLogDensity::new(&params.mean_treated, &params.cov_treated())?,
    ])
}

/// Bayes propensity with prior 1/2.
fn bayes_ps(d: &[GaussianLogDensity; 2], x: &[f64]) -> f64 {
    logistic(d[1].eval(x) - d[0].eval(x))
}

impl Generator {
    pub fn new(spec: &ScenarioSpec) -> Result<Self> {
        let oracle_bases = spec.oracle_bases()?;
        let kind = match (spec.scenario, &spec.design) {
            (Scenario::Case1(model), Design::Gaussian(params)) => Kind::Conditional {
                model,
                roots: [sqrt_psd(&params.cov_control())?, sqrt_psd(&params.cov_treated())?],
                index: params.discriminant_direction()?,
                densities: densities(params)?,
                params: params.clone(),
            },
            (Scenario::Case2(model), Design::Gaussian(params)) => Kind::Marginal {
                model,
                index: params.discriminant_direction()?,
                densities: densities(params)?,
                params: params.clone(),
            },
            (Scenario::Case3(_), Design::Mixed(config)) => {
                config.validate()?;
                Kind::Mixed {
                    latent_root: sqrt_psd(&config.latent_correlation())?,
                    margins: config.margins(),
                    config: config.clone(),
                }
            }
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "{} does not match its design",
                    spec.scenario
                )))
            }
        };
        Ok(Generator {
            scenario: spec.scenario,
            kind,
            oracle_bases,
        })
    }

    pub fn scenario(&self) -> Scenario {
        self.scenario
    }

    /// The exact Gaussian-mixture design behind the propensity score of
    /// Cases 1 and 2.
    pub fn mixture_design(&self) -> Option<GaussianMixtureDesign> {
        match &self.kind {
            Kind::Conditional { params, .. } | Kind::Marginal { params, .. } => {
                Some(GaussianMixtureDesign {
                    mean_control: params.mean_control.clone(),
                    mean_treated: params.mean_treated.clone(),
                    cov_control: params.cov_control(),
                    cov_treated: params.cov_treated(),
                    treat_prob: 0.5,
                })
            }
            Kind::Mixed { .. } => None,
        }
    }

    /// Draws `n` subjects from `rng`.
    ///
    /// Case 1 draws all treatment labels first, then covariates subject by
    /// subject, then noise. Cases 2 and 3 draw covariates, then labels,
    /// then noise.
    pub fn generate(&self, n: usize, rng: &mut RngStream) -> Result<SimulatedData> {
        match &self.kind {
            Kind::Conditional {
                model,
                params,
                roots,
                index,
                densities,
            } => {
                let p = params.p();
                let t: Vec<u8> = (0..n).map(|_| u8::from(rng.bernoulli(0.5))).collect();
                let mut x = Matrix::zeros(n, p);
                let mut z = vec![0.0; p];
                for i in 0..n {
                    let (mean, root) = if t[i] == 1 {
                        (&params.mean_treated, &roots[1])
                    } else {
                        (&params.mean_control, &roots[0])
                    };
                    z.iter_mut().for_each(|v| *v = rng.standard_normal());
                    for (a, r) in x.row_mut(i).iter_mut().enumerate() {
                        *r = mean[a] + dot(root.row(a), &z);
                    }
                }
                let ps = x.row_iter().map(|r| bayes_ps(densities, r)).collect();
                self.finish(x, t, ps, |r, tt, e| outcome(*model, index, r, tt, e), params.noise_sd, rng)
            }
            Kind::Marginal {
                model,
                params,
                index,
                densities,
            } => {
                let p = params.p();
                let mut x = Matrix::zeros(n, p);
                for i in 0..n {
                    x.row_mut(i).iter_mut().for_each(|v| *v = rng.standard_normal());
                }
                let ps: Vec<f64> = x.row_iter().map(|r| bayes_ps(densities, r)).collect();
                let t = ps.iter().map(|&q| u8::from(rng.bernoulli(q))).collect();
                self.finish(x, t, ps, |r, tt, e| outcome(*model, index, r, tt, e), params.noise_sd, rng)
            }
            Kind::Mixed {
                config,
                latent_root,
                margins,
            } => {
                let p = config.p();
                let mut x = Matrix::zeros(n, p);
                let mut z = vec![0.0; p];
                for i in 0..n {
                    z.iter_mut().for_each(|v| *v = rng.standard_normal());
                    for (a, r) in x.row_mut(i).iter_mut().enumerate() {
                        let latent = dot(latent_root.row(a), &z);
                        *r = match margins[a] {
                            Margin::StandardNormal => latent,
                            Margin::Bernoulli => f64::from(u8::from(latent > 0.0)),
                        };
                    }
                }
                let ps: Vec<f64> = x.row_iter().map(|r| logistic(config.treatment_logit(r))).collect();
                let t = ps.iter().map(|&q| u8::from(rng.bernoulli(q))).collect();
                let omega = &config.outcome.main;
                let effect = config.treatment_effect;
                self.finish(x, t, ps, |r, tt, e| dot(omega, r) + effect * tt + e, config.noise_sd, rng)
            }
        }
    }

    fn finish(
        &self,
        x: Matrix,
        t: Vec<u8>,
        true_ps: Vec<f64>,
        f: impl Fn(&[f64], f64, f64) -> f64,
        noise_sd: f64,
        rng: &mut RngStream,
    ) -> Result<SimulatedData> {
        let n = x.rows();
        let mut y0 = Vec::with_capacity(n);
        let mut y1 = Vec::with_capacity(n);
        for i in 0..n {
            let eps = noise_sd * rng.standard_normal();
            y0.push(f(x.row(i), 0.0, eps));
            y1.push(f(x.row(i), 1.0, eps));
        }
        let observed = (0..n).map(|i| if t[i] == 1 { y1[i] } else { y0[i] }).collect();
        Ok(SimulatedData {
            sample: ObservationalSample::new(x, t, observed)?,
            true_ps,
            y0,
            y1,
            oracle_bases: self.oracle_bases.clone(),
        })
    }
}

/// Draws one dataset of `spec.n` subjects.
pub fn generate(spec: &ScenarioSpec, rng: &mut RngStream) -> Result<SimulatedData> {
    Generator::new(spec)?.generate(spec.n, rng)
}

fn require(spec: &ScenarioSpec, ok: bool, family: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{} is not a {family} scenario", spec.scenario)))
    }
}

pub fn generate_case1(spec: &ScenarioSpec, rng: &mut RngStream) -> Result<SimulatedData> {
    require(spec, matches!(spec.scenario, Scenario::Case1(_)), "case1")?;
    generate(spec, rng)
}

pub fn generate_case2(spec: &ScenarioSpec, rng: &mut RngStream) -> Result<SimulatedData> {
    require(spec, matches!(spec.scenario, Scenario::Case2(_)), "case2")?;
    generate(spec, rng)
}

pub fn generate_case3(spec: &ScenarioSpec, rng: &mut RngStream) -> Result<SimulatedData> {
    require(spec, matches!(spec.scenario, Scenario::Case3(_)), "case3")?;
    generate(spec, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Group;
    use crate::propensity::true_ps_bayes;

    fn spec(s: Scenario) -> ScenarioSpec {
        ScenarioSpec::gaussian(s, 500, 10).unwrap()
    }

    #[test]
    fn same_stream_same_data() {
        let s = spec(Scenario::Case1(Model::II));
        let a = generate(&s, &mut RngStream::new(3, 9)).unwrap();
        let b = generate(&s, &mut RngStream::new(3, 9)).unwrap();
        assert_eq!(a.sample.outcome(), b.sample.outcome());
        let c = generate(&s, &mut RngStream::new(3, 10)).unwrap();
        assert_ne!(a.sample.outcome(), c.sample.outcome());
    }

    #[test]
    fn observed_outcome_follows_treatment() {
        let d = generate(&spec(Scenario::Case1(Model::I)), &mut RngStream::new(1, 0)).unwrap();
        for i in 0..d.sample.n() {
            let want = if d.sample.treatment()[i] == 1 { d.y1[i] } else { d.y0[i] };
            assert_eq!(d.sample.outcome()[i], want);
        }
    }

    #[test]
    fn model_iii_effect_is_x4_plus_x5() {
        let d = generate(&spec(Scenario::Case1(Model::III)), &mut RngStream::new(2, 0)).unwrap();
        for (i, e) in d.individual_effects().into_iter().enumerate() {
            let x = d.sample.covariates().row(i);
            assert!((e - (x[3] + x[4])).abs() < 1e-12);
        }
    }

    #[test]
    fn case1_ps_matches_mixture_formula() {
        let s = spec(Scenario::Case1(Model::II));
        let g = Generator::new(&s).unwrap();
        let d = g.generate(200, &mut RngStream::new(5, 0)).unwrap();
        let direct = true_ps_bayes(&g.mixture_design().unwrap(), d.sample.covariates()).unwrap();
        for (a, b) in direct.iter().zip(&d.true_ps) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn symmetric_case2_design_has_flat_ps() {
        let mut s = spec(Scenario::Case2(Model::I));
        if let Design::Gaussian(g) = &mut s.design {
            g.delta_treated = g.delta_control;
        }
        let d = generate(&s, &mut RngStream::new(4, 0)).unwrap();
        assert!(d.true_ps.iter().all(|&q| (q - 0.5).abs() < 1e-12));
    }

    #[test]
    fn large_case1_group_split_and_variance() {
        let s = ScenarioSpec::gaussian(Scenario::Case1(Model::I), 10_000, 10).unwrap();
        let d = generate(&s, &mut RngStream::new(6, 0)).unwrap();
        let frac = d.sample.group_size(Group::Treated) as f64 / 10_000.0;
        assert!((frac - 0.5).abs() < 0.03, "{frac}");
        let x1 = d.sample.covariates().column(0);
        let m = x1.iter().sum::<f64>() / x1.len() as f64;
        let v = x1.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x1.len() - 1) as f64;
        assert!((v - 1.0).abs() < 0.05, "{v}");
    }

    #[test]
    fn wrong_family_rejected() {
        let s = spec(Scenario::Case1(Model::I));
        assert!(generate_case2(&s, &mut RngStream::new(0, 0)).is_err());
        assert!(generate_case1(&s, &mut RngStream::new(0, 0)).is_ok());
    }
}
