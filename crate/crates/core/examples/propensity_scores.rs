//! Logistic-regression propensity scores against the exact Bayes-rule
//! propensity of a Gaussian design, and ACE estimates matching on each.
//!
//! ```text
//! cargo run --release --example propensity_scores
//! ```

use sdrmatch::matching::{estimate_ace, BalancingScore};
use sdrmatch::numerics::RngStream;
use sdrmatch::propensity::{fit_logistic, predict_ps};
use sdrmatch::simulation::{Generator, Model, Scenario, ScenarioSpec};

fn main() -> sdrmatch::Result<()> {
    let spec = ScenarioSpec::gaussian(Scenario::Case1(Model::IV), 500, 10)?;
    let data = Generator::new(&spec)?.generate(spec.n, &mut RngStream::new(99, 0))?;
    let x = data.sample.covariates();

    let model = fit_logistic(x, data.sample.treatment(), 100, 1e-10)?;
    println!(
        "logistic fit: converged = {}, {} Newton iterations, intercept {:.4}",
        model.converged, model.iterations, model.intercept
    );
    let fitted = predict_ps(&model, x)?;
    let mad = fitted
        .iter()
        .zip(&data.true_ps)
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>()
        / fitted.len() as f64;
    println!("mean |fitted − true| propensity: {mad:.4}");

    let truth = spec.analytic_truth();
    println!("analytic ACE available: {truth:?} (Model IV needs the Monte Carlo oracle)");
    for (label, ps) in [("fitted", &fitted), ("true", &data.true_ps)] {
        let est = estimate_ace(&data.sample, &BalancingScore::propensity(ps), 1)?;
        println!("ACE matching on {label} propensity: {:.4}", est.value);
    }
    let sample_effect: f64 =
        data.individual_effects().iter().sum::<f64>() / data.sample.n() as f64;
    println!("in-sample mean of Y(1) − Y(0): {sample_effect:.4}");
    Ok(())
}
