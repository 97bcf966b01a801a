//! `eatk`: reproducible experiment runner for the grid spin-glass toolkit.
//!
//! Exit codes: 0 success, 2 configuration error, 3 I/O error, 4 an
//! assertion-style experiment found a counterexample (artifacts are still
//! written).

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use ea_cli::config::{Experiment, RawConfig, ResolvedConfig, RunMetadata, TOOL_VERSION};
use ea_cli::experiments::run_experiment;
use ea_cli::AppError;

#[derive(Parser)]
#[command(name = "eatk", version, about = "Exact ground states, spectral masses and barrier checks on finite grids")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct RunArgs {
    /// TOML config file (flat keys; see README).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed (overrides the config file).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default "out").
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; 0 = all cores. Never affects results.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one random instance exactly and dump the ground state.
    GroundState(RunArgs),
    /// Quadrature spectral census on a tiny grid.
    Census(RunArgs),
    /// Nested Monte Carlo line-mass sweep over grid sizes.
    LineMass(RunArgs),
    /// Barrier-conditioned obliviousness verification.
    BarrierVerify(RunArgs),
    /// Lower-bound coupling construction and conditional check.
    LowerBound(RunArgs),
    /// Ground-state decorrelation curve under the OU flow.
    Decorrelate(RunArgs),
    /// Straight-column fraction bound and envelope containment.
    ColumnsCheck(RunArgs),
    /// Re-run a prior experiment from its metadata file; outputs are
    /// byte-identical to the original run.
    Replay {
        /// Metadata file written by a previous run (run_meta.json).
        meta: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
    },
}

fn main() -> ExitCode {
    match dispatch() {
        Ok(counterexample) => {
            if counterexample {
                eprintln!("counterexample found; artifacts written");
                ExitCode::from(4)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(err) => {
            eprintln!("{err}");
            ExitCode::from(err.exit_code())
        }
    }
}

fn dispatch() -> Result<bool, AppError> {
    let cli = Cli::parse();
    match cli.command {
        Command::GroundState(args) => run(Experiment::GroundState, args),
        Command::Census(args) => run(Experiment::Census, args),
        Command::LineMass(args) => run(Experiment::LineMass, args),
        Command::BarrierVerify(args) => run(Experiment::BarrierVerify, args),
        Command::LowerBound(args) => run(Experiment::LowerBound, args),
        Command::Decorrelate(args) => run(Experiment::Decorrelate, args),
        Command::ColumnsCheck(args) => run(Experiment::ColumnsCheck, args),
        Command::Replay { meta, out, threads } => replay(&meta, out, threads),
    }
}

fn run(experiment: Experiment, args: RunArgs) -> Result<bool, AppError> {
    let mut raw = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| AppError::Io(format!("cannot read {}: {e}", path.display())))?;
            RawConfig::parse(&text)?
        }
        None => RawConfig::default(),
    };
    if args.seed.is_some() {
        raw.seed = args.seed;
    }
    if args.threads.is_some() {
        raw.threads = args.threads;
    }
    let cfg = ResolvedConfig::from_raw(&raw, experiment)?;
    let out_dir = args
        .out
        .or_else(|| raw.out_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    execute(&cfg, &out_dir)
}

fn execute(cfg: &ResolvedConfig, out_dir: &Path) -> Result<bool, AppError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| AppError::Config(format!("thread pool: {e}")))?;
    let start = Instant::now();
    let output = pool.install(|| run_experiment(cfg))?;
    let wall_time_ms = start.elapsed().as_millis();

    std::fs::create_dir_all(out_dir)
        .map_err(|e| AppError::Io(format!("cannot create {}: {e}", out_dir.display())))?;
    for artifact in &output.artifacts {
        let path = out_dir.join(&artifact.name);
        std::fs::write(&path, &artifact.bytes)
            .map_err(|e| AppError::Io(format!("cannot write {}: {e}", path.display())))?;
        println!("wrote {}", path.display());
    }
    let meta = RunMetadata {
        version: TOOL_VERSION.to_string(),
        experiment: cfg.experiment,
        config: cfg.clone(),
        artifacts: output.artifacts.iter().map(|a| a.name.clone()).collect(),
        wall_time_ms,
    };
    let meta_path = out_dir.join("run_meta.json");
    let mut meta_bytes = serde_json::to_vec_pretty(&meta).expect("metadata serializes");
    meta_bytes.push(b'\n');
    std::fs::write(&meta_path, meta_bytes)
        .map_err(|e| AppError::Io(format!("cannot write {}: {e}", meta_path.display())))?;
    println!("wrote {}", meta_path.display());
    Ok(output.counterexample)
}

fn replay(meta_path: &Path, out: Option<PathBuf>, threads: Option<usize>) -> Result<bool, AppError> {
    let text = std::fs::read_to_string(meta_path)
        .map_err(|e| AppError::Io(format!("cannot read {}: {e}", meta_path.display())))?;
    let meta: RunMetadata = serde_json::from_str(&text)
        .map_err(|e| AppError::Config(format!("malformed metadata: {e}")))?;
    if meta.version != TOOL_VERSION {
        return Err(AppError::Config(format!(
            "metadata written by version {}, this is {TOOL_VERSION}; refusing to replay",
            meta.version
        )));
    }
    let mut cfg = meta.config;
    if let Some(t) = threads {
        cfg.threads = t;
    }
    cfg.validate()?;
    let out_dir = out.unwrap_or_else(|| {
        meta_path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."))
    });
    execute(&cfg, &out_dir)
}
