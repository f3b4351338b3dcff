use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use hcb::config::{ExperimentConfig, ExperimentKind};
use hcb::runner;

/// Exact diagonalization and driven-state experiments on small hard-core
/// boson lattices.
#[derive(Parser)]
#[command(name = "hcb", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment named by the config's `kind`.
    Run(RunArgs),
    /// Per-sector eigenvalues.
    Spectrum(RunArgs),
    /// Per-sector eigenvalues and the spectrum plot.
    SpectrumFigure(RunArgs),
    /// Correlation length and entropy scaling of every eigenstate.
    EigenstateObservables(RunArgs),
    /// Band-center over band-edge entropy ratio against disorder.
    DisorderSweep(RunArgs),
    /// Overlap heatmaps of driven states against time and strength.
    StatePrep(RunArgs),
    /// Observables of driven states against detuning.
    PrepObservables(RunArgs),
    /// Parasitic coupling grid and network reduction.
    Circuit(RunArgs),
    /// Readout time and regime report.
    Planner(RunArgs),
    /// Print a config template with every default filled in.
    Template { kind: ExperimentKind },
}

#[derive(Args)]
struct RunArgs {
    /// Config file; the kind's template is used when omitted.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Output directory; overrides the config's `output_dir`, which in turn
    /// defaults to `out/<kind>`.
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Worker threads; defaults to the number of CPUs.
    #[arg(short, long)]
    workers: Option<usize>,
    /// Disorder seeds; replaces the config's seed list. Repeatable.
    #[arg(long = "seed")]
    seeds: Vec<u64>,
}

impl Command {
    fn kind(&self) -> Option<ExperimentKind> {
        Some(match self {
            Command::Run(_) | Command::Template { .. } => return None,
            Command::Spectrum(_) => ExperimentKind::Spectrum,
            Command::SpectrumFigure(_) => ExperimentKind::SpectrumFigure,
            Command::EigenstateObservables(_) => ExperimentKind::EigenstateObservables,
            Command::DisorderSweep(_) => ExperimentKind::DisorderSweep,
            Command::StatePrep(_) => ExperimentKind::StatePrep,
            Command::PrepObservables(_) => ExperimentKind::PrepObservables,
            Command::Circuit(_) => ExperimentKind::Circuit,
            Command::Planner(_) => ExperimentKind::Planner,
        })
    }

    fn args(&self) -> Option<&RunArgs> {
        match self {
            Command::Run(a)
            | Command::Spectrum(a)
            | Command::SpectrumFigure(a)
            | Command::EigenstateObservables(a)
            | Command::DisorderSweep(a)
            | Command::StatePrep(a)
            | Command::PrepObservables(a)
            | Command::Circuit(a)
            | Command::Planner(a) => Some(a),
            Command::Template { .. } => None,
        }
    }
}

fn resolve(kind: Option<ExperimentKind>, args: &RunArgs) -> Result<ExperimentConfig> {
    let mut config = match (&args.config, kind) {
        (Some(path), _) => ExperimentConfig::load(path)?,
        (None, Some(kind)) => ExperimentConfig::template(kind),
        (None, None) => anyhow::bail!("`run` needs --config"),
    };
    if let Some(kind) = kind {
        if args.config.is_some() && config.kind != kind {
            anyhow::bail!("config describes `{}`, not `{}`", config.kind.name(), kind.name());
        }
    }
    if !args.seeds.is_empty() {
        config.seeds = args.seeds.clone();
    }
    if let Some(out) = &args.out {
        config.output_dir = Some(out.clone());
    }
    config.validate()?;
    Ok(config)
}

fn real_main() -> Result<()> {
    let cli = Cli::parse();
    if let Command::Template { kind } = cli.command {
        print!("{}", ExperimentConfig::template(kind).to_toml()?);
        return Ok(());
    }
    let args = cli.command.args().expect("run-style command");
    let config = resolve(cli.command.kind(), args)?;
    if let Some(workers) = args.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers.max(1))
            .build_global()
            .context("configuring the worker pool")?;
    }
    let dir = config.output_dir.clone().unwrap_or_else(|| PathBuf::from("out").join(config.kind.name()));
    log::info!("running `{}` into {}", config.kind.name(), dir.display());
    let manifest = runner::run(&config, &dir)?;
    for w in &manifest.warnings {
        log::warn!("{w}");
    }
    for f in &manifest.outputs {
        println!("{}  {}", f.sha256, dir.join(&f.name).display());
    }
    Ok(())
}

/// OpenBLAS picks its kernels when the library loads, so the override in
/// `OPENBLAS_CORETYPE` only takes effect in a fresh process.
#[cfg(unix)]
fn pin_blas_kernel() {
    use std::os::unix::process::CommandExt;
    const VAR: &str = "OPENBLAS_CORETYPE";
    if std::env::var_os(VAR).is_some() {
        return;
    }
    if let Ok(exe) = std::env::current_exe() {
        let err = std::process::Command::new(exe).args(std::env::args_os().skip(1)).env(VAR, "Haswell").exec();
        eprintln!("warning: could not re-execute with {VAR} set: {err}");
    }
}

#[cfg(not(unix))]
fn pin_blas_kernel() {}

fn main() -> ExitCode {
    pin_blas_kernel();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match real_main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
