//! Monte Carlo comparison of balancing scores on one simulation design.
//!
//! ```text
//! cargo run --release --example monte_carlo -- case1-II 200 7
//! cargo run --release --example monte_carlo -- case3-C 100 7 data/case3/scenario-c.toml
//! ```

use sdrmatch::simulation::{
    load_case3_config, run_monte_carlo, MonteCarloConfig, Scenario, ScenarioSpec,
};

fn main() -> sdrmatch::Result<()> {
    let mut args = std::env::args().skip(1);
    let scenario: Scenario = args.next().as_deref().unwrap_or("case1-II").parse()?;
    let replicates = args.next().and_then(|s| s.parse().ok()).unwrap_or(100);
    let seed = args.next().and_then(|s| s.parse().ok()).unwrap_or(7);
    let coefficients = args.next().map(load_case3_config).transpose()?;

    let spec = ScenarioSpec::new(scenario, 500, 10, coefficients)?;
    let cfg = MonteCarloConfig {
        replicates,
        seed,
        ..Default::default()
    };
    let report = run_monte_carlo(&spec, &cfg)?;
    print!("{}", report.to_text());
    Ok(())
}
