//! Checks the Bernstein approximation bound and a concentration bound numerically.

use bernband::sim::{linear_grid, run_experiment, BoundKind, ExperimentConfig};

fn main() -> bernband::Result<()> {
    let mut cfg = ExperimentConfig::bound_check(BoundKind::Bernstein);
    cfg.beta = 0.5;
    cfg.x_grid = linear_grid(0.0, 1.0, 100);
    let r = run_experiment(&cfg)?;
    println!(
        "bernstein, beta = 0.5: {} checks, {} violations, max error/bound {:.4}",
        r.value("checked").unwrap_or(0.0),
        r.value("violations").unwrap_or(0.0),
        r.value("max_ratio").unwrap_or(0.0)
    );

    let mut cfg = ExperimentConfig::bound_check(BoundKind::CdfConcentration);
    cfg.reps = 20_000;
    let r = run_experiment(&cfg)?;
    println!(
        "cdf concentration: {} violations, max frequency/bound {:.4}",
        r.value("violations").unwrap_or(0.0),
        r.value("max_frequency_over_bound").unwrap_or(0.0)
    );
    Ok(())
}
