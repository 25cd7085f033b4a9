use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use bdlp_cli::{exit_code, run, ExperimentConfig, RunSettings};
use clap::{Parser, ValueEnum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Command {
    Check,
    Simulate,
    Oracle,
    Hierarchy,
    AverageScan,
    Lyapunov,
    Report,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Check => "check",
            Command::Simulate => "simulate",
            Command::Oracle => "oracle",
            Command::Hierarchy => "hierarchy",
            Command::AverageScan => "average-scan",
            Command::Lyapunov => "lyapunov",
            Command::Report => "report",
        }
    }
}

/// Run a configured BDLP experiment.
#[derive(Debug, Parser)]
#[command(name = "bdlp", version)]
struct Cli {
    command: Command,
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for replica runs.
    #[arg(long, env = "BDLP_THREADS")]
    threads: Option<usize>,
    /// Output directory; defaults to the config's `output_dir`, then `out`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    quiet: bool,
}

fn load(path: &PathBuf) -> anyhow::Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    ExperimentConfig::from_json(&text)
}

fn main_inner(cli: Cli) -> anyhow::Result<()> {
    let mut cfg = load(&cli.config)?;
    if cfg.experiment.name() != cli.command.name() {
        bail!("config describes a `{}` experiment, not `{}`", cfg.experiment.name(), cli.command.name());
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let threads = cli.threads.unwrap_or(0);
    rayon::ThreadPoolBuilder::new().num_threads(threads).build_global().context("starting worker pool")?;
    let out_dir = cli.out.or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| PathBuf::from("out"));
    let settings = RunSettings { out_dir, quiet: cli.quiet, threads: rayon::current_num_threads() };
    let manifest = run(&cfg, &settings)?;
    if !cli.quiet {
        eprintln!("{}", serde_json::json!({"event": "done", "files": manifest.files.len(), "wall_time_s": manifest.wall_time_s}));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match main_inner(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
