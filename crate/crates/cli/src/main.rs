//! `rwre`: run seeded, reproducible random-walk experiments from JSON configs.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use rwre::experiment::{run_experiment, Experiment, ExperimentConfig};
use rwre::EnvironmentModel;

#[derive(Parser)]
#[command(name = "rwre", version, about = "Random walks in random environments: experiment runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment config (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Replace the config's environment model with this JSON file.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Output directory (overrides the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long)]
    workers: Option<usize>,
    /// Master seed (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run any config, whatever its kind.
    Run(Common),
    /// Annealed path ensembles and velocity.
    Simulate(Common),
    /// Kalikow ratio scan over a volume family.
    Kalikow(Common),
    /// One-dimensional invariant density and velocity.
    Density1d(Common),
    /// Cesàro averages of a local function of the environment seen from the walker.
    PovCesaro(Common),
    /// Empirical half-space admissibility of `Z_k`.
    Zk(Common),
    /// Exhaustive Gibbs mixing checks.
    GibbsCheck(Common),
    /// Exact restriction identity for the north-east example.
    SingularNe {
        #[command(flatten)]
        common: Common,
        /// Largest `n` when no config is given.
        #[arg(long, default_value_t = 6)]
        n_max: usize,
    },
    /// Re-run a manifest and compare output digests.
    Reproduce {
        #[arg(long)]
        manifest: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

fn load(common: &Common, fallback: Option<Experiment>) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = match (&common.config, fallback) {
        (Some(path), _) => ExperimentConfig::load(path)?,
        (None, Some(exp)) => ExperimentConfig::new(None, common.seed.unwrap_or(0), exp),
        (None, None) => bail!("--config is required"),
    };
    if let Some(path) = &common.model {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let model: EnvironmentModel =
            serde_json::from_str(&text).with_context(|| format!("parsing model {}", path.display()))?;
        cfg.model = Some(model);
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if common.out.is_some() {
        cfg.out = common.out.clone();
    }
    if common.workers.is_some() {
        cfg.workers = common.workers;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cli: Cli) -> anyhow::Result<bool> {
    let (common, expected, fallback) = match cli.command {
        Command::Run(c) => (c, None, None),
        Command::Simulate(c) => (c, Some("simulate"), None),
        Command::Kalikow(c) => (c, Some("kalikow"), None),
        Command::Density1d(c) => (c, Some("density1d"), None),
        Command::PovCesaro(c) => (c, Some("pov-cesaro"), None),
        Command::Zk(c) => (c, Some("zk"), None),
        Command::GibbsCheck(c) => (c, Some("gibbs-check"), None),
        Command::SingularNe { common, n_max } => (common, Some("singular-ne"), Some(Experiment::SingularNe { n_max })),
        Command::Reproduce { manifest, common } => {
            let out = common.out.clone().unwrap_or_else(|| manifest.with_file_name("reproduce"));
            (Common { out: Some(out), ..common }, Some("reproduce"), Some(Experiment::Reproduce { manifest }))
        }
    };
    let cfg = load(&common, fallback)?;
    if let Some(kind) = expected {
        if cfg.experiment.label() != kind {
            bail!("config describes a {} experiment, not {kind}", cfg.experiment.label());
        }
    }
    let outcome = run_experiment(&cfg, None)?;
    print!("{}", outcome.summary.to_text());
    println!("output: {}", outcome.out_dir.display());
    Ok(outcome.summary.passed())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
