//! Monte Carlo harness: replicate `r` draws from `RngStream(seed, r)`, runs
//! every requested method on the same dataset, and the results are reduced
//! in replicate order so the report never depends on scheduling.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matching::{estimate, sdr_matching_pipeline, BalancingScore, Estimand};
use crate::numerics::{Matrix, RngStream};
use crate::propensity::{fit_logistic, predict_ps};
use crate::sdr::{DEFAULT_ALPHA, DEFAULT_SLICES};

use super::generate::{Generator, SimulatedData};
use super::{Method, ScenarioSpec};

/// Draws used by the Monte Carlo truth oracle.
pub const TRUTH_DRAWS: usize = 1_000_000;
const TRUTH_SEED: u64 = 0x7472_7574_68;
const TRUTH_CHUNK: usize = 100_000;

const LOGISTIC_MAX_ITER: usize = 100;
const LOGISTIC_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TruthSource {
    Analytic,
    MonteCarlo { draws: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Truth {
    pub value: f64,
    pub source: TruthSource,
}

impl Truth {
    fn label(&self) -> String {
        match self.source {
            TruthSource::Analytic => "analytic".into(),
            TruthSource::MonteCarlo { draws } => format!("monte-carlo-{draws}"),
        }
    }
}

/// The target effect of `spec`: closed form when available, otherwise the
/// mean of `Y(1) − Y(0)` (over treated draws for ACET) across
/// [`TRUTH_DRAWS`] subjects from a fixed stream independent of any run seed.
pub fn compute_truth(spec: &ScenarioSpec) -> Result<Truth> {
    if let Some(value) = spec.analytic_truth() {
        return Ok(Truth {
            value,
            source: TruthSource::Analytic,
        });
    }
    let gen = Generator::new(spec)?;
    let mut sum = 0.0;
    let mut count = 0usize;
    for chunk in 0..TRUTH_DRAWS / TRUTH_CHUNK {
        let data = gen.generate(TRUTH_CHUNK, &mut RngStream::new(TRUTH_SEED, chunk as u64))?;
        let t = data.sample.treatment();
        for (i, e) in data.individual_effects().into_iter().enumerate() {
            if spec.estimand == Estimand::Ace || t[i] == 1 {
                sum += e;
                count += 1;
            }
        }
    }
    Ok(Truth {
        value: sum / count as f64,
        source: TruthSource::MonteCarlo { draws: TRUTH_DRAWS },
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloConfig {
    pub replicates: usize,
    pub seed: u64,
    /// Matches per subject.
    pub m: usize,
    pub slices: usize,
    pub alpha: f64,
    /// Worker threads; `None` uses every available core. Never affects
    /// the results.
    pub threads: Option<usize>,
}

impl Default for MonteCarloConfig {
    fn default() -> Self {
        MonteCarloConfig {
            replicates: 100,
            seed: 0,
            m: 1,
            slices: DEFAULT_SLICES,
            alpha: DEFAULT_ALPHA,
            threads: None,
        }
    }
}

impl MonteCarloConfig {
    fn validate(&self) -> Result<()> {
        if self.replicates < 2 {
            return Err(Error::InvalidArgument(format!(
                "at least 2 replicates are required, got {}",
                self.replicates
            )));
        }
        if self.m == 0 {
            return Err(Error::InvalidArgument("m must be at least 1".into()));
        }
        if self.slices < 2 {
            return Err(Error::InvalidArgument("at least 2 slices are required".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidArgument(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.threads == Some(0) {
            return Err(Error::InvalidArgument("threads must be at least 1".into()));
        }
        Ok(())
    }
}

/// Everything one replicate produced.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateOutcome {
    pub replicate: usize,
    /// One entry per method of the spec, in spec order; failures carry the
    /// error message.
    pub estimates: Vec<std::result::Result<f64, String>>,
    /// `(r̂(0), r̂(1))` from the `sdr` method when it ran.
    pub sdr_ranks: Option<(usize, Option<usize>)>,
}

fn projection_column(x: &Matrix, direction: &[f64]) -> Result<Matrix> {
    Ok(Matrix::column_vector(&x.mul_vec(direction)?))
}

fn run_method(
    method: Method,
    spec: &ScenarioSpec,
    data: &SimulatedData,
    cfg: &MonteCarloConfig,
    ranks: &mut Option<(usize, Option<usize>)>,
) -> Result<f64> {
    let sample = &data.sample;
    let x = sample.covariates();
    let score = match method {
        Method::Sdr => {
            let r = sdr_matching_pipeline(sample, cfg.slices, cfg.alpha, cfg.m, spec.estimand)?;
            *ranks = Some((r.control_rank(), r.treated_rank()));
            return Ok(r.estimate.value);
        }
        Method::Ambient => BalancingScore::ambient(x),
        Method::PsLogistic => {
            let model = fit_logistic(x, sample.treatment(), LOGISTIC_MAX_ITER, LOGISTIC_TOL)?;
            BalancingScore::propensity(&predict_ps(&model, x)?)
        }
        Method::PsTrue => BalancingScore::propensity(&data.true_ps),
        Method::SdrOracle => BalancingScore::reduced(
            projection_column(x, &data.oracle_bases[0])?,
            projection_column(x, &data.oracle_bases[1])?,
        )?,
        Method::ActiveSetOracle => BalancingScore::ambient(&x.select_columns(&spec.active_set())?),
    };
    Ok(estimate(sample, &score, cfg.m, spec.estimand)?.value)
}

/// Generates replicate `r` and runs every method of `spec` on it.
pub fn run_replicate(
    spec: &ScenarioSpec,
    generator: &Generator,
    cfg: &MonteCarloConfig,
    r: usize,
) -> ReplicateOutcome {
    let mut sdr_ranks = None;
    let estimates = match generator.generate(spec.n, &mut RngStream::new(cfg.seed, r as u64)) {
        Ok(data) => spec
            .methods
            .iter()
            .map(|&m| run_method(m, spec, &data, cfg, &mut sdr_ranks).map_err(|e| e.to_string()))
            .collect(),
        Err(e) => vec![Err(e.to_string()); spec.methods.len()],
    };
    ReplicateOutcome {
        replicate: r,
        estimates,
        sdr_ranks,
    }
}

/// Summary of one method's estimates across successful replicates.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodSummary {
    pub method: Method,
    pub mean: f64,
    /// `mean − truth`.
    pub bias: f64,
    /// Sample standard deviation (denominator `successes − 1`).
    pub sd: f64,
    /// `sqrt(mean((estimate − truth)²))`.
    pub rmse: f64,
    pub successes: usize,
    pub failures: usize,
}

impl MethodSummary {
    fn from_estimates(method: Method, values: &[f64], failures: usize, truth: f64) -> Self {
        let k = values.len() as f64;
        let mean = values.iter().sum::<f64>() / k;
        let ss = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
        let sd = if values.len() >= 2 { (ss / (k - 1.0)).sqrt() } else { f64::NAN };
        let mse = values.iter().map(|v| (v - truth).powi(2)).sum::<f64>() / k;
        MethodSummary {
            method,
            mean,
            bias: mean - truth,
            sd,
            rmse: mse.sqrt(),
            successes: values.len(),
            failures,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MonteCarloReport {
    pub spec: ScenarioSpec,
    pub config: MonteCarloConfig,
    pub truth: Truth,
    pub summaries: Vec<MethodSummary>,
    pub replicates: Vec<ReplicateOutcome>,
}

pub fn run_monte_carlo(spec: &ScenarioSpec, cfg: &MonteCarloConfig) -> Result<MonteCarloReport> {
    cfg.validate()?;
    let truth = compute_truth(spec)?;
    let generator = Generator::new(spec)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start worker threads: {e}")))?;
    let replicates: Vec<ReplicateOutcome> = pool.install(|| {
        (0..cfg.replicates)
            .into_par_iter()
            .map(|r| run_replicate(spec, &generator, cfg, r))
            .collect()
    });
    let summaries = spec
        .methods
        .iter()
        .enumerate()
        .map(|(j, &method)| {
            let values: Vec<f64> = replicates
                .iter()
                .filter_map(|rep| rep.estimates[j].as_ref().ok().copied())
                .collect();
            let failures = replicates.len() - values.len();
            MethodSummary::from_estimates(method, &values, failures, truth.value)
        })
        .collect();
    Ok(MonteCarloReport {
        spec: spec.clone(),
        config: cfg.clone(),
        truth,
        summaries,
        replicates,
    })
}

impl MonteCarloReport {
    pub fn summary(&self, method: Method) -> Option<&MethodSummary> {
        self.summaries.iter().find(|s| s.method == method)
    }

    /// Successful estimates of `method` in replicate order.
    pub fn estimates(&self, method: Method) -> Vec<f64> {
        let Some(j) = self.spec.methods.iter().position(|&m| m == method) else {
            return Vec::new();
        };
        self.replicates
            .iter()
            .filter_map(|r| r.estimates[j].as_ref().ok().copied())
            .collect()
    }

    /// Version and normalized configuration. Thread count is left out
    /// because it cannot change the results.
    pub fn header_line(&self) -> String {
        let c = &self.config;
        format!(
            "# sdrmatch {} {} reps={} seed={} m={} slices={} alpha={} truth_source={}",
            env!("CARGO_PKG_VERSION"),
            self.spec.describe(),
            c.replicates,
            c.seed,
            c.m,
            c.slices,
            c.alpha,
            self.truth.label()
        )
    }

    /// `method,bias,sd,rmse,truth,R,failures` after a header comment line.
    pub fn to_csv(&self) -> String {
        let mut out = self.header_line();
        out.push_str("\nmethod,bias,sd,rmse,truth,R,failures\n");
        for s in &self.summaries {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                s.method, s.bias, s.sd, s.rmse, self.truth.value, self.config.replicates, s.failures
            );
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = self.header_line();
        let _ = writeln!(out, "\ntruth: {} ({})", self.truth.value, self.truth.label());
        let _ = writeln!(
            out,
            "{:<18} {:>12} {:>12} {:>12} {:>12} {:>9}",
            "method", "mean", "bias", "sd", "rmse", "failures"
        );
        for s in &self.summaries {
            let _ = writeln!(
                out,
                "{:<18} {:>12.6} {:>12.6} {:>12.6} {:>12.6} {:>9}",
                s.method.name(),
                s.mean,
                s.bias,
                s.sd,
                s.rmse,
                s.failures
            );
        }
        if let Some(ranks) = self.rank_frequencies() {
            let _ = writeln!(out, "sdr control rank frequencies: {ranks}");
        }
        out
    }

    /// `rank:count` pairs of the estimated control-group dimension.
    fn rank_frequencies(&self) -> Option<String> {
        let mut counts = std::collections::BTreeMap::new();
        for r in &self.replicates {
            if let Some((r0, _)) = r.sdr_ranks {
                *counts.entry(r0).or_insert(0usize) += 1;
            }
        }
        if counts.is_empty() {
            return None;
        }
        Some(
            counts
                .iter()
                .map(|(k, v)| format!("{k}:{v}"))
                .collect::<Vec<_>>()
                .join(" "),
        )
    }
}
