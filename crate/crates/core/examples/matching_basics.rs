//! Nearest-neighbour matching by hand: build a Mahalanobis metric, find
//! matched sets with replacement, and impute missing potential outcomes.
//!
//! ```text
//! cargo run --release --example matching_basics
//! ```

use sdrmatch::dataset::ObservationalSample;
use sdrmatch::matching::{
    build_metric, estimate_ace, find_matches, impute, BalancingScore, MatchDirection,
};
use sdrmatch::numerics::Matrix;

fn main() -> sdrmatch::Result<()> {
    let x = Matrix::from_rows(&[
        vec![0.0, 1.0],
        vec![1.0, 0.5],
        vec![2.0, 2.5],
        vec![0.2, 0.9],
        vec![1.1, 0.4],
        vec![2.2, 2.7],
        vec![3.0, 3.0],
    ])?;
    let treatment = vec![1, 1, 1, 0, 0, 0, 0];
    let outcome = vec![5.0, 6.0, 9.0, 3.0, 4.0, 6.5, 8.0];
    let sample = ObservationalSample::new(x, treatment, outcome)?;

    let score = BalancingScore::ambient(sample.covariates());
    let metric = build_metric(&score.control_side)?;
    let matched = find_matches(
        &score.control_side,
        sample.treatment(),
        &metric,
        2,
        MatchDirection::ForTreated,
    )?;
    let imputed = impute(&sample, &matched);
    for ((i, donors), y0) in matched.subjects.iter().zip(&matched.donors).zip(&imputed) {
        println!("treated subject {i}: donors {donors:?}, imputed Y(0) = {y0}");
    }
    println!("donor reuse counts: {:?}", matched.reuse_counts(sample.n()));

    let ace = estimate_ace(&sample, &score, 1)?;
    println!("ACE with one match per subject: {:.4}", ace.value);
    Ok(())
}
