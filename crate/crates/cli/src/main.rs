//! `miex`: reproducible pipeline stages over the miex-core library.
//!
//! Exit codes: 0 success, 1 validation or usage error, 2 I/O error.

mod commands;
mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use miex_core::toy::ScalingAxis;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn io(path: &Path, err: std::io::Error) -> Self {
        CliError::Io(format!("{}: {err}", path.display()))
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Io(_) => 2,
        }
    }
}

impl From<miex_core::Error> for CliError {
    fn from(e: miex_core::Error) -> Self {
        if e.is_io() {
            CliError::Io(e.to_string())
        } else {
            CliError::Validation(e.to_string())
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "miex", version, about = "Micro-expression training data synthesis pipeline")]
pub struct Cli {
    /// Worker threads; outputs do not depend on it.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Pipeline configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config's global seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Re-check an artifact's config digest against --config.
    #[arg(long, value_name = "FILE")]
    verify: Option<PathBuf>,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Parse and validate AU CSVs and annotations into normalized clip records.
    Ingest(OutArg),
    /// Build the AU triplet pool from ingested clips.
    Pool {
        #[arg(long)]
        clips: PathBuf,
        #[command(flatten)]
        out: OutArg,
    },
    /// Compose the identity x AU dataset manifest.
    Compose {
        #[arg(long)]
        pool: PathBuf,
        /// Frames per sample (2 or 10).
        #[arg(long)]
        frames: Option<usize>,
        /// `dataset<TAB>subject` lines whose MiE samples are dropped.
        #[arg(long, value_name = "FILE")]
        exclude_subjects: Option<PathBuf>,
        #[command(flatten)]
        out: OutArg,
    },
    /// Render a manifest through the mock generator.
    RenderMock {
        #[arg(long)]
        manifest: PathBuf,
        #[command(flatten)]
        out: OutArg,
    },
    /// Subject-wise k-fold split.
    Split {
        /// Subjects are taken from the MiE clips of an ingest output...
        #[arg(long, conflicts_with = "subjects")]
        clips: Option<PathBuf>,
        /// ...or from a `dataset<TAB>subject` list.
        #[arg(long)]
        subjects: Option<PathBuf>,
        #[arg(long)]
        k: Option<usize>,
        /// Also write `fold<i>.tsv` test-subject lists here.
        #[arg(long, value_name = "DIR")]
        fold_dir: Option<PathBuf>,
        #[command(flatten)]
        out: OutArg,
    },
    /// Score a predictions CSV against manifest or annotation labels.
    Score {
        #[arg(long)]
        predictions: PathBuf,
        /// Manifest whose sample labels are the truth.
        #[arg(long, conflicts_with = "annotations", required_unless_present = "annotations")]
        truth: Option<PathBuf>,
        /// Annotation CSV keyed by clip id.
        #[arg(long)]
        annotations: Option<PathBuf>,
        #[command(flatten)]
        out: OutArg,
    },
    /// Per-class mean apex AU profiles by source and their comparison.
    Analyze {
        #[arg(long)]
        pool: PathBuf,
        #[arg(long, default_value_t = 5)]
        top_k: usize,
        /// Also write `profile_<source>.csv` here.
        #[arg(long, value_name = "DIR")]
        csv_dir: Option<PathBuf>,
        #[command(flatten)]
        out: OutArg,
    },
    /// Desk-scale ablation experiments.
    #[command(subcommand)]
    Toy(ToyCommand),
}

#[derive(Subcommand, Debug)]
pub enum ToyCommand {
    /// Every configured source subset over all seeds, with pairwise tests.
    Ablation {
        #[arg(long)]
        csv: Option<PathBuf>,
        #[command(flatten)]
        out: OutArg,
    },
    /// Metric curve along one data-size axis.
    Scaling {
        #[arg(long, value_parser = parse_axis)]
        axis: ScalingAxis,
        /// Comma-separated, strictly increasing.
        #[arg(long, value_delimiter = ',', required = true)]
        grid: Vec<usize>,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[command(flatten)]
        out: OutArg,
    },
}

#[derive(Args, Debug)]
pub struct OutArg {
    #[arg(long)]
    out: PathBuf,
}

fn parse_axis(s: &str) -> Result<ScalingAxis, String> {
    s.parse().map_err(|e: miex_core::Error| e.to_string())
}

fn run(cli: Cli) -> Result<(), CliError> {
    let config_path = cli
        .config
        .as_deref()
        .ok_or_else(|| CliError::Validation("--config is required".into()))?;
    let loaded = config::LoadedConfig::load(config_path)?;
    let seed = cli.seed.unwrap_or(loaded.config.seed);
    if let Some(file) = &cli.verify {
        return commands::verify(&loaded, file);
    }
    let ctx = commands::Context { loaded, seed };
    match cli.command.expect("checked by caller") {
        Command::Ingest(o) => commands::ingest(&ctx, &o.out),
        Command::Pool { clips, out } => commands::pool(&ctx, &clips, &out.out),
        Command::Compose { pool, frames, exclude_subjects, out } => {
            commands::compose(&ctx, &pool, frames, exclude_subjects.as_deref(), &out.out)
        }
        Command::RenderMock { manifest, out } => commands::render_mock(&ctx, &manifest, &out.out),
        Command::Split { clips, subjects, k, fold_dir, out } => commands::split(
            &ctx,
            clips.as_deref(),
            subjects.as_deref(),
            k,
            fold_dir.as_deref(),
            &out.out,
        ),
        Command::Score { predictions, truth, annotations, out } => {
            commands::score(&ctx, &predictions, truth.as_deref(), annotations.as_deref(), &out.out)
        }
        Command::Analyze { pool, top_k, csv_dir, out } => {
            commands::analyze(&ctx, &pool, top_k, csv_dir.as_deref(), &out.out)
        }
        Command::Toy(ToyCommand::Ablation { csv, out }) => commands::toy_ablation(&ctx, cli.seed, csv.as_deref(), &out.out),
        Command::Toy(ToyCommand::Scaling { axis, grid, csv, out }) => {
            commands::toy_scaling(&ctx, cli.seed, axis, &grid, csv.as_deref(), &out.out)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    if cli.command.is_some() && cli.verify.is_some() {
        eprintln!("error: --verify cannot be combined with a subcommand");
        return ExitCode::from(1);
    }
    if cli.command.is_none() && cli.verify.is_none() {
        use clap::CommandFactory;
        let _ = Cli::command().write_help(&mut std::io::stderr());
        return ExitCode::from(1);
    }

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.jobs {
        if n == 0 {
            eprintln!("error: --jobs must be at least 1");
            return ExitCode::from(1);
        }
        builder = builder.num_threads(n);
    }
    let result = match builder.build() {
        Ok(pool) => pool.install(|| run(cli)),
        Err(e) => Err(CliError::Validation(format!("cannot start worker pool: {e}"))),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
