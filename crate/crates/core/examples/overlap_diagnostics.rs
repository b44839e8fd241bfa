//! Overlap check on the LaLonde data: per-group histograms of the first
//! reduced covariate and of the logistic propensity score, printed as text
//! bars.
//!
//! ```text
//! cargo run --release --example overlap_diagnostics
//! ```

use sdrmatch::dataset::{load_csv, CsvSchema, Group};
use sdrmatch::diagnostics::grouped_histogram;
use sdrmatch::propensity::{fit_logistic, predict_ps};
use sdrmatch::sdr::{estimate_central_subspace, reduce_covariates};

const COVARIATES: [&str; 10] = [
    "age", "educ", "black", "hispan", "married", "nodegree", "re74", "re75", "u74", "u75",
];

fn bars(name: &str, values: &[f64], treatment: &[u8]) -> sdrmatch::Result<()> {
    let h = grouped_histogram(values, treatment, 12)?;
    println!("{name}: control | treated");
    for b in 0..12 {
        println!(
            "  [{:>9.3}, {:>9.3}) {:>30} | {}",
            h.edges[b],
            h.edges[b + 1],
            "#".repeat(h.control_counts[b].div_ceil(4)),
            "#".repeat(h.treated_counts[b].div_ceil(4)),
        );
    }
    Ok(())
}

fn main() -> sdrmatch::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/lalonde.csv");
    let schema = CsvSchema::new("treat", "re78", COVARIATES.iter().map(|s| s.to_string()).collect());
    let sample = load_csv(path, &schema)?;
    let t = sample.treatment();

    let subspace = estimate_central_subspace(&sample, Group::Control, 5, 0.05)?;
    let reduced = reduce_covariates(&subspace, sample.covariates())?;
    for k in 0..reduced.cols() {
        bars(&format!("reduced covariate {}", k + 1), &reduced.column(k), t)?;
    }

    let model = fit_logistic(sample.covariates(), t, 100, 1e-8)?;
    bars("logistic propensity score", &predict_ps(&model, sample.covariates())?, t)?;
    Ok(())
}
