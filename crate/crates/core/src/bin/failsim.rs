use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use failsim::scenario::{
    compare_report, load_scenario_file, parse_override, render_compare, run_scenario, RunError, ScenarioError, SUMMARY_SCHEMA,
};

#[derive(Parser)]
#[command(name = "failsim", version, about = "Restart and checkpointing simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Scenario document (TOML).
    scenario: PathBuf,
    /// Replaces run.seed.
    #[arg(long)]
    seed: Option<u64>,
    /// key=value; N, R, seed, p and B are short for run.iterations,
    /// run.replications, run.seed, model.p and model.lookback.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write traces, summary.json and efficiency_curve.csv.
    Run {
        #[command(flatten)]
        common: Common,
        /// Output directory; defaults to output.dir, then `failsim-out`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print analytic values next to simulated ones.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Print the rows as JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Check a scenario without running it.
    Validate {
        #[command(flatten)]
        common: Common,
    },
    /// Print the JSON schema of summary.json.
    Schema,
}

fn load(common: &Common) -> Result<failsim::scenario::Scenario, ScenarioError> {
    let mut overrides = common
        .overrides
        .iter()
        .map(|s| parse_override(s))
        .collect::<Result<Vec<_>, _>>()?;
    if let Some(seed) = common.seed {
        overrides.push(("run.seed".into(), seed.to_string()));
    }
    load_scenario_file(&common.scenario, &overrides)
}

fn execute(cli: Cli) -> Result<(), RunError> {
    match cli.command {
        Command::Run { common, out } => {
            let sc = load(&common)?;
            let dir = out
                .or_else(|| sc.output.dir.clone())
                .unwrap_or_else(|| PathBuf::from("failsim-out"));
            run_scenario(&sc, &dir)?;
            println!("wrote {}", dir.join("summary.json").display());
        }
        Command::Compare { common, json } => {
            let sc = load(&common)?;
            let rows = compare_report(&sc)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&rows).expect("rows serialize"));
            } else {
                print!("{}", render_compare(&rows));
            }
        }
        Command::Validate { common } => {
            let sc = load(&common)?;
            println!("ok: {} scenario, hash {}", sc.model.name(), sc.hash);
        }
        Command::Schema => print!("{SUMMARY_SCHEMA}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
