//! Loads an experiment configuration, runs it in memory, and prints the
//! report together with a small parameter sweep over the same problem.

use std::path::Path;

use viscoflow::experiment::{run_experiment, sweep, sweep_csv, ExperimentConfig};

fn main() -> viscoflow::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/configs");
    let cfg = ExperimentConfig::load(&dir.join("minimal.toml"))?;
    let art = run_experiment(&cfg)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&art.report).expect("serializable report")
    );

    let mut grid = ExperimentConfig::load(&dir.join("threshold_sweep.toml"))?;
    grid.solver.t_end = 1e3;
    print!("{}", sweep_csv(&sweep(&grid)?));
    Ok(())
}
