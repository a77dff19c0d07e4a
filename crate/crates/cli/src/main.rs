//! `dg`: run simulated experiments, build comparison reports and serve human
//! sessions.

use std::net::{Ipv4Addr, SocketAddr};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use dg_core::analysis::{Cell, Measure};
use dg_core::params::ParamsError;
use dg_core::record::read_csv;
use dg_core::{
    aggregate, compare, emit_report, AgentParams, AggregateStats, AnalysisError, CostScheme,
    ExperimentConfig, GameConfig, HarnessError, HumanDataTable, ParamsFile,
};
use thiserror::Error;

#[derive(Debug, Error)]
enum CliError {
    #[error(transparent)]
    Params(#[from] ParamsError),
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("reading {path}: {source}")]
    Input { path: PathBuf, source: csv::Error },
    #[error(transparent)]
    Service(#[from] dg_service::ApiError),
    #[error("starting runtime: {0}")]
    Runtime(std::io::Error),
}

#[derive(Parser)]
#[command(name = "dg", version, about = "Probing-cost deception game with an instance-based learning attacker")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Condition {
    NoCost,
    Constant,
    Increasing,
    All,
}

impl Condition {
    fn schemes(self) -> Vec<CostScheme> {
        match self {
            Condition::NoCost => vec![CostScheme::NoCost],
            Condition::Constant => vec![CostScheme::ConstantCost],
            Condition::Increasing => vec![CostScheme::IncreasingCost],
            Condition::All => CostScheme::ALL.to_vec(),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum AgentPreset {
    /// Parameters from the calibration sweep.
    Calibrated,
    /// d = 0.5, sigma = 0.25, prepopulation = 15, temperature sigma * sqrt(2).
    Default,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate participants and write their decisions as CSV.
    Run {
        #[arg(long, value_enum, default_value = "all")]
        condition: Condition,
        #[arg(long, default_value_t = 40)]
        participants: usize,
        #[arg(long, default_value_t = 30)]
        trials: usize,
        /// Probe decisions per round.
        #[arg(long, default_value_t = 5)]
        probes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Starting agent parameters, before `--params` overrides.
        #[arg(long, value_enum, default_value = "calibrated")]
        agent: AgentPreset,
        /// TOML file overriding agent parameters and payoffs.
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long, default_value = "results.csv")]
        out: PathBuf,
    },
    /// Aggregate a decision log and compare it with human proportions.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        /// Human proportions (`condition,measure,regular,honeypot,none`).
        #[arg(long)]
        human: Option<PathBuf>,
        #[arg(long, default_value = "report.json")]
        out: PathBuf,
    },
    /// Serve human sessions over HTTP.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "sessions")]
        data: PathBuf,
    },
}

fn print_table(stats: &AggregateStats) {
    print!("{:<16}", "");
    for c in &stats.conditions {
        print!("{:>12}", c.condition.as_str());
    }
    println!();
    for m in Measure::ALL {
        for cell in [Cell::Regular, Cell::Honeypot, Cell::None] {
            print!("{:<16}", format!("{}-{}", m.as_str(), cell.as_str()));
            for v in stats.series(m, cell) {
                print!("{v:>12.3}");
            }
            println!();
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Run {
            condition,
            participants,
            trials,
            probes,
            seed,
            agent,
            params,
            out,
        } => {
            let mut agent = match agent {
                AgentPreset::Calibrated => AgentParams::calibrated(),
                AgentPreset::Default => AgentParams::default(),
            };
            let mut game = GameConfig {
                num_rounds: trials,
                num_deception_rounds: trials / 2,
                probe_budget: Some(probes),
                ..GameConfig::default()
            };
            if let Some(path) = params {
                let file = ParamsFile::load(&path)?;
                file.apply_agent(&mut agent);
                file.apply_payoffs(&mut game.payoffs);
            }
            let config = ExperimentConfig {
                conditions: condition.schemes(),
                participants_per_condition: participants,
                game,
                agent,
                master_seed: seed,
                output: Some(out.clone()),
            };
            let records = dg_core::run_experiment(&config)?;
            println!("wrote {} decisions to {}", records.len(), out.display());
            match aggregate(&records) {
                Ok(stats) => print_table(&stats),
                Err(e) => println!("no summary table: {e}"),
            }
        }
        Command::Report { input, human, out } => {
            let file = std::fs::File::open(&input).map_err(|e| CliError::Input {
                path: input.clone(),
                source: e.into(),
            })?;
            let records = read_csv(file).map_err(|source| CliError::Input {
                path: input.clone(),
                source,
            })?;
            let stats: AggregateStats = aggregate(&records)?;
            let human = human.map(|p| HumanDataTable::load(&p)).transpose()?;
            let comparison = human.as_ref().map(|h| compare(&stats, h)).transpose()?;
            let files = emit_report(&stats, human.as_ref(), comparison.as_ref(), &out)?;
            print_table(&stats);
            if let Some(c) = &comparison {
                let checks = &c.checks;
                println!(
                    "probe flat: model {} human {}; attack flat: model {} human {}",
                    checks.probe_flat.model, checks.probe_flat.human, checks.attack_flat.model, checks.attack_flat.human
                );
                println!(
                    "no-probe non-decreasing: model {}; no-attack non-decreasing: model {}; max |delta| {:.3}",
                    checks.no_probe_non_decreasing.model, checks.no_attack_non_decreasing.model, c.max_abs_delta
                );
            }
            println!("wrote {} and {}", files.json.display(), files.model_csv.display());
        }
        Command::Serve { port, data } => {
            let addr = SocketAddr::from((Ipv4Addr::UNSPECIFIED, port));
            let runtime = tokio::runtime::Runtime::new().map_err(CliError::Runtime)?;
            println!("serving sessions on http://{addr} (data in {})", data.display());
            runtime.block_on(dg_service::serve(addr, &data))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dg: {e}");
            ExitCode::FAILURE
        }
    }
}
