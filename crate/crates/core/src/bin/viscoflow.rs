use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use viscoflow::experiment::{cmd_check, cmd_compare, cmd_run, cmd_sweep, ExperimentConfig, Outcome, Overrides};

#[derive(Parser)]
#[command(name = "viscoflow", version, about = "Anchored viscosity flows and iterations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overriding the configuration.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long = "t-end", global = true)]
    t_end: Option<f64>,
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the flow and run the configured analyses.
    Run,
    /// Flow and discrete iteration side by side.
    Compare {
        /// Number of iterates.
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Run the configured parameter grid.
    Sweep,
    /// Print the schedule condition report.
    Check,
}

fn report(outcome: &Outcome, quiet: bool) {
    if quiet {
        return;
    }
    for f in &outcome.files {
        println!("wrote {}", f.display());
    }
    for (name, v) in &outcome.verdicts {
        println!(
            "{name}: {}",
            serde_json::to_string(v).unwrap_or_default().trim_matches('"')
        );
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Some(path) = cli.config.as_deref() else {
        eprintln!("error: --config PATH is required");
        return ExitCode::from(1);
    };
    let mut cfg = match ExperimentConfig::load(path) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let steps = match cli.command {
        Command::Compare { steps } => steps,
        _ => None,
    };
    cfg.apply(&Overrides {
        output_dir: cli.out,
        seed: cli.seed,
        t_end: cli.t_end,
        steps,
    });
    let result = match cli.command {
        Command::Run => cmd_run(&cfg),
        Command::Compare { .. } => cmd_compare(&cfg),
        Command::Sweep => cmd_sweep(&cfg),
        Command::Check => match cmd_check(&cfg) {
            Ok(json) => {
                print!("{json}");
                return ExitCode::SUCCESS;
            }
            Err(e) => Err(e),
        },
    };
    match result {
        Ok(outcome) => {
            report(&outcome, cli.quiet);
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
