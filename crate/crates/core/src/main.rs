use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use lrp_core::harness::plot::{emit_plot, PlotKind};
use lrp_core::harness::{run_experiment, ExperimentConfig, ExperimentKind, RunOptions};
use lrp_core::LrpError;

/// Long-range percolation experiments.
#[derive(Parser)]
#[command(name = "lrp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON experiment configuration.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    #[arg(long, value_name = "K")]
    replicas: Option<usize>,
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long, value_name = "M")]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Sample configurations and write edge lists.
    Sample(Common),
    /// Largest and second-largest cluster sizes.
    ClusterStats(Common),
    /// Staged partition with event flags.
    Partition(Common),
    /// Spectral gap of the giant component against N.
    GapScaling(Common),
    /// Graph diameter of the giant component against N.
    DiameterScaling(Common),
    /// Return probabilities of the walk on the giant component.
    Heatkernel(Common),
    /// Assumptions, differential inequality and bound curve.
    VerifyBound(Common),
    /// Render a result CSV as a log-log SVG.
    Plot {
        #[arg(long, value_name = "PATH")]
        csv: PathBuf,
        #[arg(long, value_enum)]
        kind: PlotArg,
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum PlotArg {
    GapScaling,
    DiameterScaling,
    ClusterStats,
    Heatkernel,
}

fn run(cli: Cli) -> Result<(), LrpError> {
    let (kind, common) = match cli.command {
        Command::Sample(c) => (ExperimentKind::Sample, c),
        Command::ClusterStats(c) => (ExperimentKind::ClusterStats, c),
        Command::Partition(c) => (ExperimentKind::Partition, c),
        Command::GapScaling(c) => (ExperimentKind::GapScaling, c),
        Command::DiameterScaling(c) => (ExperimentKind::DiameterScaling, c),
        Command::Heatkernel(c) => (ExperimentKind::Heatkernel, c),
        Command::VerifyBound(c) => (ExperimentKind::VerifyBound, c),
        Command::Plot { csv, kind, out } => {
            let kind = match kind {
                PlotArg::GapScaling => PlotKind::GapScaling,
                PlotArg::DiameterScaling => PlotKind::DiameterScaling,
                PlotArg::ClusterStats => PlotKind::ClusterStats,
                PlotArg::Heatkernel => PlotKind::Heatkernel,
            };
            let svg = emit_plot(&std::fs::read_to_string(&csv)?, kind)?;
            return lrp_core::harness::io::write_text(&out, &svg);
        }
    };
    let config = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    let options = RunOptions {
        seed: common.seed,
        replicas: common.replicas,
        out: common.out,
        threads: common.threads,
    };
    let outcome = run_experiment(&config, kind, &options)?;
    for note in &outcome.notes {
        eprintln!("note: {note}");
    }
    println!(
        "{}: {} files in {}",
        kind.as_str(),
        outcome.files.len() + 1,
        outcome.out_dir.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
