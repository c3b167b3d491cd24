//! A small coverage experiment; tables go to a temporary directory.

use bernband::sim::{run_experiment, Experiment, ExperimentConfig};

fn main() -> bernband::Result<()> {
    let cfg = ExperimentConfig {
        reps: 2000,
        seed: 1,
        ..ExperimentConfig::defaults(Experiment::Coverage)
    };
    let result = run_experiment(&cfg)?;
    for (k, v) in &result.summary {
        println!("{k} = {v:.6}");
    }
    let dir = std::env::temp_dir().join("bernband-simulation-example");
    for p in result.write_outputs(&dir)? {
        println!("wrote {}", p.display());
    }
    println!("content hash {}", result.content_hash());
    Ok(())
}
