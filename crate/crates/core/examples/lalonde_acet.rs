//! Effect of the NSW training programme on 1978 earnings of participants
//! (ACET), matching on reduced covariates versus the raw covariates.
//!
//! ```text
//! cargo run --release --example lalonde_acet
//! ```

use sdrmatch::dataset::{load_csv, CsvSchema, Group};
use sdrmatch::matching::{estimate_acet, sdr_matching_pipeline, BalancingScore, Estimand};
use sdrmatch::sdr::{DEFAULT_ALPHA, DEFAULT_SLICES};

const COVARIATES: [&str; 10] = [
    "age", "educ", "black", "hispan", "married", "nodegree", "re74", "re75", "u74", "u75",
];

fn main() -> sdrmatch::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/lalonde.csv");
    let schema = CsvSchema::new("treat", "re78", COVARIATES.iter().map(|s| s.to_string()).collect());
    let sample = load_csv(path, &schema)?;
    println!(
        "{} treated, {} controls, {} covariates",
        sample.group_size(Group::Treated),
        sample.group_size(Group::Control),
        sample.p()
    );

    let sdr = sdr_matching_pipeline(&sample, DEFAULT_SLICES, DEFAULT_ALPHA, 1, Estimand::Acet)?;
    let test = &sdr.control_subspace.test;
    println!("control-group dimension r(0) = {}", sdr.control_rank());
    for (d, (stat, p)) in test.statistics.iter().zip(&test.pvalues).enumerate() {
        println!("  d = {d}: statistic {stat:10.3}, p-value {p:.4}");
    }
    println!("ACET, reduced covariates: {:9.1}", sdr.estimate.value);

    let ambient = estimate_acet(&sample, &BalancingScore::ambient(sample.covariates()), 1)?;
    println!("ACET, original covariates: {:8.1}", ambient.value);
    Ok(())
}
