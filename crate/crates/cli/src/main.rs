use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use octaug::characterize::Metric;
use octaug::evaluate::DEFAULT_BINS;
use octaug::io::ReportFormat;
use octaug::parallel::Execution;
use octaug_cli::{
    cmd_augment, cmd_characterize, cmd_compare, cmd_evaluate, cmd_preview, AugmentArgs, CliResult, CompareArgs, Outcome,
};

#[derive(Debug, Parser)]
#[command(name = "octaug", version, about = "Label-consistent OCT B-scan augmentation, scan metrics and evaluation statistics")]
struct Cli {
    /// Worker threads for per-sample work (0 = all cores, 1 = sequential).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    /// Table output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl From<Format> for ReportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => ReportFormat::Csv,
            Format::Json => ReportFormat::Json,
        }
    }
}

fn parse_metric(s: &str) -> Result<Metric, String> {
    Metric::parse(s).ok_or_else(|| format!("unknown metric `{s}` (alignment, symmetry, contrast, snr)"))
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Augment every sample of a manifest.
    Augment {
        #[arg(long)]
        manifest: PathBuf,
        /// Pipeline config (TOML); defaults to flip, affine, short elastic and noise.
        #[arg(long)]
        pipeline: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the config's master_seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Sort crossing boundary surfaces instead of rejecting the sample.
        #[arg(long)]
        auto_sort: bool,
    },
    /// Alignment, symmetry, contrast and SNR per scan.
    Characterize {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Boundary RMSE and Dice of predictions against references.
    Evaluate {
        /// Manifest of predictions.
        #[arg(long)]
        manifest: PathBuf,
        /// Manifest of references.
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Paired deltas of an augmented run against a baseline, with significance.
    Compare {
        #[arg(long)]
        aug: PathBuf,
        #[arg(long)]
        base: PathBuf,
        /// Characterization table; enables metric-binned breakdowns.
        #[arg(long)]
        reports: Option<PathBuf>,
        #[arg(long, value_parser = parse_metric)]
        metric: Option<Metric>,
        #[arg(long, default_value_t = DEFAULT_BINS)]
        bins: usize,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// One variant of a single image per configured operator.
    Preview {
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        pipeline: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> CliResult<Outcome> {
    let exec = if cli.threads == 1 {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    let format = ReportFormat::from(cli.format);
    let go = move || match cli.command {
        Command::Augment {
            manifest,
            pipeline,
            out,
            seed,
            auto_sort,
        } => cmd_augment(
            &AugmentArgs {
                manifest,
                pipeline,
                out,
                seed,
                auto_sort,
            },
            exec,
        ),
        Command::Characterize { manifest, out } => cmd_characterize(&manifest, &out, format, exec),
        Command::Evaluate { manifest, truth, out } => cmd_evaluate(&manifest, &truth, &out, format, exec),
        Command::Compare {
            aug,
            base,
            reports,
            metric,
            bins,
            out,
        } => cmd_compare(
            &CompareArgs {
                aug,
                base,
                reports,
                metric,
                bins,
                out,
            },
            format,
        ),
        Command::Preview {
            image,
            pipeline,
            seed,
            out,
        } => cmd_preview(&image, &pipeline, seed, &out),
    };
    #[cfg(feature = "parallel")]
    {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build()
            .map_err(|e| octaug_cli::CliError::Internal(e.to_string()))?;
        pool.install(go)
    }
    #[cfg(not(feature = "parallel"))]
    go()
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("OCTAUG_LOG", "warn")).init();
    let code = match run(Cli::parse()) {
        Ok(outcome) => {
            for w in &outcome.warnings {
                eprintln!("warning: {w}");
            }
            outcome.exit_code()
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    std::process::exit(code as i32);
}
