//! Command-line surface behind the `sdrmatch` binary.
//!
//! Exit status is 0 on success, 2 for usage, schema, parse and
//! configuration errors, and 3 when estimation itself fails. Every error is
//! reported as one line starting with `error:`.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::dataset::{load_csv, CsvSchema, Group, ObservationalSample};
use crate::diagnostics::{five_number_summary, grouped_histogram, FiveNumberSummary};
use crate::error::{Error, Result};
use crate::matching::{estimate, sdr_matching_pipeline, BalancingScore, CausalEstimate, Estimand};
use crate::propensity::{fit_logistic, predict_ps};
use crate::sdr::{estimate_central_subspace, reduce_covariates, DEFAULT_ALPHA, DEFAULT_SLICES};
use crate::simulation::{
    load_case3_config, run_monte_carlo, Method, MonteCarloConfig, Scenario, ScenarioSpec,
};

/// Environment variable consulted when `--threads` is absent.
pub const THREADS_ENV: &str = "SDRMATCH_THREADS";

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_ESTIMATION: i32 = 3;

const LOGISTIC_MAX_ITER: usize = 100;
const LOGISTIC_TOL: f64 = 1e-8;

#[derive(Debug, Parser)]
#[command(name = "sdrmatch", version, about = "Matching on reduced covariates for causal effect estimation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate ACE or ACET on a CSV file.
    Estimate(EstimateArgs),
    /// Run a Monte Carlo study on a simulation design.
    Simulate(SimulateArgs),
    /// Per-group summaries and histograms of balancing scores.
    Diagnose(DiagnoseArgs),
}

#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    /// CSV file with a header row.
    #[arg(long)]
    pub input: PathBuf,
    /// Name of the 0/1 treatment column.
    #[arg(long)]
    pub treatment: String,
    /// Name of the outcome column.
    #[arg(long)]
    pub outcome: String,
    /// Comma-separated covariate column names.
    #[arg(long, value_delimiter = ',', required = true)]
    pub covariates: Vec<String>,
}

impl InputArgs {
    fn schema(&self) -> CsvSchema {
        CsvSchema::new(self.treatment.clone(), self.outcome.clone(), self.covariates.clone())
    }

    fn load(&self) -> Result<ObservationalSample> {
        load_csv(&self.input, &self.schema())
    }

    fn describe(&self) -> String {
        format!(
            "input={} treatment={} outcome={} covariates={}",
            self.input.display(),
            self.treatment,
            self.outcome,
            self.covariates.join(",")
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EstimandArg {
    Ace,
    Acet,
}

impl From<EstimandArg> for Estimand {
    fn from(e: EstimandArg) -> Self {
        match e {
            EstimandArg::Ace => Estimand::Ace,
            EstimandArg::Acet => Estimand::Acet,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EstimateMethod {
    Sdr,
    Ambient,
    PsLogistic,
}

impl EstimateMethod {
    fn name(self) -> &'static str {
        match self {
            EstimateMethod::Sdr => "sdr",
            EstimateMethod::Ambient => "ambient",
            EstimateMethod::PsLogistic => "ps-logistic",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Csv,
}

#[derive(Debug, Clone, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, value_enum, default_value = "sdr")]
    pub method: EstimateMethod,
    #[arg(long, value_enum, default_value = "ace")]
    pub estimand: EstimandArg,
    /// Matches per subject.
    #[arg(long, default_value_t = 1)]
    pub m: usize,
    /// Requested SIR slices.
    #[arg(long, default_value_t = DEFAULT_SLICES)]
    pub slices: usize,
    /// Level of the sequential dimension test.
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,
    /// Per-subject imputations are written here as CSV.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "text")]
    pub format: Format,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// case1-I..IV, case2-I*, case2-II* or case3-A..G.
    #[arg(long)]
    pub scenario: String,
    #[arg(long, default_value_t = 500)]
    pub n: usize,
    /// Covariate dimension for Cases 1 and 2.
    #[arg(long, default_value_t = 10)]
    pub p: usize,
    #[arg(long, default_value_t = 100)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Comma-separated subset of ambient, ps-logistic, ps-true, sdr,
    /// sdr-oracle, active-set-oracle. Defaults to all.
    #[arg(long, value_delimiter = ',')]
    pub methods: Vec<String>,
    #[arg(long, value_enum, default_value = "ace")]
    pub estimand: EstimandArg,
    #[arg(long, default_value_t = 1)]
    pub m: usize,
    #[arg(long, default_value_t = DEFAULT_SLICES)]
    pub slices: usize,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,
    /// Worker threads. Falls back to SDRMATCH_THREADS, then to all cores.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Coefficient file, required for case3 scenarios.
    #[arg(long)]
    pub coef_config: Option<PathBuf>,
    /// Report destination; stdout when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
}

#[derive(Debug, Clone, Args)]
pub struct DiagnoseArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Histogram bins over each variable's pooled range.
    #[arg(long, default_value_t = 20)]
    pub bins: usize,
    #[arg(long, default_value_t = DEFAULT_SLICES)]
    pub slices: usize,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,
    /// Plot-ready CSV destination; stdout when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

/// Error with the exit status it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Schema(_)
            | Error::Parse { .. }
            | Error::Config(_)
            | Error::InvalidArgument(_)
            | Error::Io { .. } => EXIT_USAGE,
            _ => EXIT_ESTIMATION,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: message.into(),
    }
}

fn single_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Parses `args` (program name first) and runs the command. Returns the
/// process exit status.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(stdout, "{e}");
                return 0;
            }
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments");
            let first = first.strip_prefix("error: ").unwrap_or(first);
            let _ = writeln!(stderr, "error: {}", single_line(first));
            return EXIT_USAGE;
        }
    };
    let outcome = match &cli.command {
        Command::Estimate(a) => cmd_estimate(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Diagnose(a) => cmd_diagnose(a),
    };
    match outcome {
        Ok(text) => {
            if stdout.write_all(text.as_bytes()).is_err() {
                return EXIT_USAGE;
            }
            0
        }
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", single_line(&f.message));
            f.code
        }
    }
}

fn write_file(path: &Path, contents: &str) -> std::result::Result<(), Failure> {
    std::fs::write(path, contents).map_err(|e| Failure::from(Error::io(path, e)))
}

fn header(command: &str, config: &str) -> String {
    format!("# sdrmatch {} command={command} {config}", env!("CARGO_PKG_VERSION"))
}

fn fmt_summary(s: &Option<FiveNumberSummary>) -> String {
    match s {
        Some(s) => format!(
            "{} {} {} {} {}",
            s.min, s.lower_quartile, s.median, s.upper_quartile, s.max
        ),
        None => "NA".into(),
    }
}

fn logistic_ps(sample: &ObservationalSample) -> Result<Vec<f64>> {
    let model = fit_logistic(sample.covariates(), sample.treatment(), LOGISTIC_MAX_ITER, LOGISTIC_TOL)?;
    predict_ps(&model, sample.covariates())
}

pub fn cmd_estimate(a: &EstimateArgs) -> std::result::Result<String, Failure> {
    if a.m == 0 {
        return Err(usage("--m must be at least 1"));
    }
    let sample = a.input.load()?;
    let estimand: Estimand = a.estimand.into();
    let (est, ranks): (CausalEstimate, (Option<usize>, Option<usize>)) = match a.method {
        EstimateMethod::Sdr => {
            let r = sdr_matching_pipeline(&sample, a.slices, a.alpha, a.m, estimand)?;
            let ranks = (Some(r.control_rank()), r.treated_rank());
            (r.estimate, ranks)
        }
        EstimateMethod::Ambient => (
            estimate(&sample, &BalancingScore::ambient(sample.covariates()), a.m, estimand)?,
            (None, None),
        ),
        EstimateMethod::PsLogistic => (
            estimate(&sample, &BalancingScore::propensity(&logistic_ps(&sample)?), a.m, estimand)?,
            (None, None),
        ),
    };
    let config = format!(
        "{} method={} estimand={} m={} slices={} alpha={}",
        a.input.describe(),
        a.method.name(),
        a.estimand.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default(),
        a.m,
        a.slices,
        a.alpha
    );
    if let Some(path) = &a.output {
        let mut csv = header("estimate", &config);
        csv.push_str("\nrow,treatment,outcome,imputed,reuse_count\n");
        for i in 0..sample.n() {
            let imputed = est.imputed[i].map(|v| v.to_string()).unwrap_or_default();
            let _ = writeln!(
                csv,
                "{},{},{},{},{}",
                i + 1,
                sample.treatment()[i],
                sample.outcome()[i],
                imputed,
                est.diagnostics.reuse_counts[i]
            );
        }
        write_file(path, &csv)?;
    }
    let rank = |r: Option<usize>| r.map(|v| v.to_string()).unwrap_or_else(|| "NA".into());
    let n1 = sample.group_size(Group::Treated);
    let n0 = sample.group_size(Group::Control);
    let treated_q = fmt_summary(&est.diagnostics.treated_match_distances);
    let control_q = fmt_summary(&est.diagnostics.control_match_distances);
    let mut out = String::new();
    match a.format {
        Format::Text => {
            let _ = writeln!(out, "method: {}", a.method.name());
            let _ = writeln!(out, "estimand: {}", est.estimand);
            let _ = writeln!(out, "estimate: {}", est.value);
            let _ = writeln!(out, "treated: {n1}");
            let _ = writeln!(out, "controls: {n0}");
            let _ = writeln!(out, "rank_control: {}", rank(ranks.0));
            let _ = writeln!(out, "rank_treated: {}", rank(ranks.1));
            let _ = writeln!(out, "treated_match_distance (min q1 median q3 max): {treated_q}");
            let _ = writeln!(out, "control_match_distance (min q1 median q3 max): {control_q}");
        }
        Format::Csv => {
            out.push_str(&header("estimate", &config));
            out.push_str("\nmethod,estimand,estimate,treated,controls,rank_control,rank_treated\n");
            let _ = writeln!(
                out,
                "{},{},{},{n1},{n0},{},{}",
                a.method.name(),
                est.estimand,
                est.value,
                rank(ranks.0),
                rank(ranks.1)
            );
        }
    }
    Ok(out)
}

fn resolve_threads(flag: Option<usize>) -> std::result::Result<Option<usize>, Failure> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&k| k > 0)
            .map(Some)
            .ok_or_else(|| usage(format!("{THREADS_ENV} must be a positive integer, got '{v}'"))),
        _ => Ok(None),
    }
}

pub fn cmd_simulate(a: &SimulateArgs) -> std::result::Result<String, Failure> {
    let scenario: Scenario = a.scenario.parse()?;
    if a.reps < 2 {
        return Err(usage(format!("--reps must be at least 2, got {}", a.reps)));
    }
    let config = match (&scenario, &a.coef_config) {
        (Scenario::Case3(_), None) => {
            return Err(usage(format!("{scenario} requires --coef-config")));
        }
        (Scenario::Case3(_), Some(path)) => Some(load_case3_config(path)?),
        (_, _) => None,
    };
    let mut spec = ScenarioSpec::new(scenario, a.n, a.p, config)?.with_estimand(a.estimand.into());
    if !a.methods.is_empty() {
        let methods = a
            .methods
            .iter()
            .map(|m| m.trim().parse::<Method>())
            .collect::<Result<Vec<_>>>()?;
        spec = spec.with_methods(methods)?;
    }
    let cfg = MonteCarloConfig {
        replicates: a.reps,
        seed: a.seed,
        m: a.m,
        slices: a.slices,
        alpha: a.alpha,
        threads: resolve_threads(a.threads)?,
    };
    let report = run_monte_carlo(&spec, &cfg)?;
    let body = match a.format {
        Format::Csv => report.to_csv(),
        Format::Text => report.to_text(),
    };
    match &a.output {
        Some(path) => {
            write_file(path, &body)?;
            Ok(String::new())
        }
        None => Ok(body),
    }
}

pub fn cmd_diagnose(a: &DiagnoseArgs) -> std::result::Result<String, Failure> {
    if a.bins == 0 {
        return Err(usage("--bins must be at least 1"));
    }
    let sample = a.input.load()?;
    let subspace = estimate_central_subspace(&sample, Group::Control, a.slices, a.alpha)?;
    let reduced = reduce_covariates(&subspace, sample.covariates())?;
    let mut variables: Vec<(String, Vec<f64>)> = (0..reduced.cols())
        .map(|k| (format!("reduced_{}", k + 1), reduced.column(k)))
        .collect();
    variables.push(("ps_logistic".into(), logistic_ps(&sample)?));

    let config = format!(
        "{} bins={} slices={} alpha={} rank_control={}",
        a.input.describe(),
        a.bins,
        a.slices,
        a.alpha,
        subspace.rank
    );
    let mut csv = header("diagnose", &config);
    csv.push_str("\nvariable,group,statistic,bin,lower,upper,value\n");
    let mut text = String::new();
    let _ = writeln!(text, "control-group dimension: {}", subspace.rank);
    let t = sample.treatment();
    for (name, values) in &variables {
        let hist = grouped_histogram(values, t, a.bins)?;
        let _ = writeln!(text, "{name}");
        for (group, label) in [(Group::Control, "control"), (Group::Treated, "treated")] {
            let own: Vec<f64> = values
                .iter()
                .zip(t)
                .filter(|(_, &g)| g == group.label())
                .map(|(v, _)| *v)
                .collect();
            let summary = five_number_summary(&own);
            let _ = writeln!(text, "  {label:<8} n={:<5} {}", own.len(), fmt_summary(&summary));
            if let Some(s) = summary {
                for (stat, v) in [
                    ("min", s.min),
                    ("q1", s.lower_quartile),
                    ("median", s.median),
                    ("q3", s.upper_quartile),
                    ("max", s.max),
                ] {
                    let _ = writeln!(csv, "{name},{label},{stat},,,,{v}");
                }
            }
            let counts = match group {
                Group::Control => &hist.control_counts,
                Group::Treated => &hist.treated_counts,
            };
            for (b, c) in counts.iter().enumerate() {
                let _ = writeln!(
                    csv,
                    "{name},{label},count,{},{},{},{c}",
                    b + 1,
                    hist.edges[b],
                    hist.edges[b + 1]
                );
            }
        }
    }
    match &a.output {
        Some(path) => {
            write_file(path, &csv)?;
            Ok(text)
        }
        None => Ok(csv),
    }
}
