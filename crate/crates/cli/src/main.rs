mod commands;
mod scenario;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::{Format, Run, Status};
use scenario::ScenarioFile;

/// SE-EE trade-off curves for OFDMA downlink cells.
#[derive(Parser)]
#[command(name = "ofdma-ee", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Trade-off curves for an isolated cell with uniform users.
    SingleCell(Common),
    /// Trade-off curves for a cell in a Poisson network of base stations.
    MultiCell(Common),
    /// Low-SNR efficiency bound for each path-loss exponent and cell radius.
    Bound(Common),
    /// Compare the analytic interference model against simulation.
    Validate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Overrides `montecarlo.samples`.
        #[arg(long)]
        samples: Option<usize>,
    },
}

#[derive(Args)]
struct Common {
    /// Scenario TOML file. Defaults are used when omitted.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override a scenario value, e.g. `--set pathloss.a=4`.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

fn execute(cli: Cli) -> anyhow::Result<Status> {
    fn with(c: &Common, f: impl Fn(&Run<'_>) -> anyhow::Result<Status>) -> anyhow::Result<Status> {
        let scenario = ScenarioFile::load(c.scenario.as_deref(), &c.overrides)?;
        Run {
            scenario: &scenario,
            out: &c.out,
            format: c.format,
        }
        .run(f)
    }
    match &cli.command {
        Command::SingleCell(c) => with(c, |r| r.single_cell()),
        Command::MultiCell(c) => with(c, |r| r.multi_cell()),
        Command::Bound(c) => with(c, |r| r.bound()),
        Command::Validate { common, seed, samples } => {
            let scenario = ScenarioFile::load(common.scenario.as_deref(), &common.overrides)?;
            let n = samples.unwrap_or(scenario.montecarlo.samples);
            Run {
                scenario: &scenario,
                out: &common.out,
                format: common.format,
            }
            .validate(*seed, n)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(cli) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::Infeasible) => {
            eprintln!("error: no feasible operating point in the sweep");
            ExitCode::from(2)
        }
        Ok(Status::ValidationFailed) => {
            eprintln!("error: validation failed");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
