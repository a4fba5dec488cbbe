use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use tdho_cli::commands::{self, Command as RunCommand};
use tdho_cli::config::ScenarioConfig;

/// Trajectory pictures of the driven 2D harmonic oscillator: guiding
/// trajectories, Bohmian streamlines and weak-measurement reconstructions.
#[derive(Parser)]
#[command(name = "tdho", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(clap::Args)]
struct CommonArgs {
    /// Scenario configuration (JSON). See scenarios/ for shipped presets.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (created if missing).
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override the config's random seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = one per core).
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Scale factor applied to the configured integrator and quadrature
    /// tolerances.
    #[arg(long, default_value_t = 1.0)]
    tolerance_scale: f64,
}

#[derive(Subcommand)]
enum Sub {
    /// Propagate the scenario and write guiding-trajectory and norm tables.
    Simulate(CommonArgs),
    /// Integrate Bohmian streamlines from the configured starting points.
    Bohm(CommonArgs),
    /// Sample the density, transport the ensemble and report the binned L1
    /// distance against the closed form.
    Ensemble(CommonArgs),
    /// Sweep the configured probe lattice and assemble weak trajectories.
    WeakTraj(CommonArgs),
    /// Map momentum weak values (velocity field) over a grid.
    WeakMomentum(CommonArgs),
    /// Region probability over time with peak detection and classical
    /// crossing times.
    Recurrence(CommonArgs),
    /// Verify the kernel reproduction property against quadrature.
    PropagatorCheck(CommonArgs),
    /// Expectation-value decomposition over position postselections.
    IdentityCheck(CommonArgs),
}

fn dispatch(sub: &Sub) -> (&CommonArgs, RunCommand) {
    match sub {
        Sub::Simulate(a) => (a, RunCommand::Simulate),
        Sub::Bohm(a) => (a, RunCommand::Bohm),
        Sub::Ensemble(a) => (a, RunCommand::Ensemble),
        Sub::WeakTraj(a) => (a, RunCommand::WeakTraj),
        Sub::WeakMomentum(a) => (a, RunCommand::WeakMomentum),
        Sub::Recurrence(a) => (a, RunCommand::Recurrence),
        Sub::PropagatorCheck(a) => (a, RunCommand::PropagatorCheck),
        Sub::IdentityCheck(a) => (a, RunCommand::IdentityCheck),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (args, command) = dispatch(&cli.command);
    match run(args, command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // Machine-readable error record on stderr.
            let record = json!({
                "error": e.to_string(),
                "chain": e.chain().skip(1).map(|c| c.to_string()).collect::<Vec<_>>(),
                "command": command.name(),
            });
            eprintln!("{record}");
            ExitCode::FAILURE
        }
    }
}

fn run(args: &CommonArgs, command: RunCommand) -> anyhow::Result<()> {
    let threads = if args.threads > 0 {
        rayon::ThreadPoolBuilder::new().num_threads(args.threads).build_global().ok();
        args.threads
    } else {
        rayon::current_num_threads()
    };
    let cfg = ScenarioConfig::load(&args.config)?;
    let resolved = cfg.resolved(args.seed, args.tolerance_scale);
    let out = commands::run(command, &resolved, &args.out, threads, args.tolerance_scale)?;
    println!(
        "{}",
        json!({
            "command": command.name(),
            "out_dir": args.out.display().to_string(),
            "files": out.files,
            "summary": out.summary,
        })
    );
    Ok(())
}
