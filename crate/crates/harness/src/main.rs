use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use solnft_harness::output::write_outputs;
use solnft_harness::scenarios::SCENARIO_NAMES;
use solnft_harness::{builtin_scenario, run_experiment, ScenarioConfig};

#[derive(Parser)]
#[command(
    name = "solnft",
    version,
    about = "Dual-polarization NFT soliton transmission experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config file.
    Run { config: PathBuf },
    /// Run a built-in scenario.
    Scenario {
        name: String,
        #[arg(long)]
        pulses: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print the scenario's config instead of running it.
        #[arg(long)]
        print_config: bool,
    },
    /// List the built-in scenarios.
    ListScenarios,
}

fn execute(cfg: &ScenarioConfig, out: PathBuf) -> Result<()> {
    let result = run_experiment(cfg)?;
    write_outputs(&result, cfg, &out).with_context(|| format!("writing results to {}", out.display()))?;
    eprintln!(
        "{} pulses, {} rows, {} failed pulses -> {}",
        cfg.n_pulses,
        result.summary.accepted_rows,
        result.summary.failed_pulses,
        out.display()
    );
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run { config } => {
            let text = std::fs::read_to_string(&config).with_context(|| format!("reading {}", config.display()))?;
            let cfg = ScenarioConfig::from_toml(&text)?;
            let out = PathBuf::from(&cfg.output_dir);
            execute(&cfg, out)
        }
        Command::Scenario {
            name,
            pulses,
            seed,
            out,
            print_config,
        } => {
            let mut cfg = builtin_scenario(&name)?;
            if let Some(n) = pulses {
                cfg.n_pulses = n;
            }
            if let Some(s) = seed {
                cfg.master_seed = s;
            }
            if let Some(o) = &out {
                cfg.output_dir = o.display().to_string();
            }
            cfg.validate()?;
            if print_config {
                print!("{}", cfg.to_toml());
                return Ok(());
            }
            let out = PathBuf::from(&cfg.output_dir);
            execute(&cfg, out)
        }
        Command::ListScenarios => {
            for n in SCENARIO_NAMES {
                println!("{n}");
            }
            Ok(())
        }
    }
}
