//! `wattmatch` command-line front end.
//!
//! Exit codes: 0 on success, 2 for usage, input or configuration errors,
//! 1 for internal failures.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::FileConfig;

#[derive(Debug, Parser)]
#[command(name = "wattmatch", version, about = "Identify the channel playing on a TV from smart-meter data")]
struct Cli {
    /// Worker threads; defaults to the available cores.
    #[arg(long, global = true, env = "WATTMATCH_THREADS")]
    threads: Option<usize>,
    /// Flat key = value configuration file; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic corpus.
    Synth(SynthArgs),
    /// Turn a `t,i,v` waveform CSV into a per-cycle feature CSV.
    Extract(ExtractArgs),
    /// Rank the features with ReliefF over the corpus channels.
    Rank(RankArgs),
    /// Identify the channel in every frame of a feature CSV.
    Match(MatchArgs),
    /// Run an evaluation protocol and write reports.
    Evaluate(EvaluateArgs),
    /// Summarise report files.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub channels: Option<usize>,
    #[arg(long)]
    pub clip_seconds: Option<f64>,
    #[arg(long)]
    pub noise_seconds: Option<f64>,
    #[arg(long)]
    pub max_appliances: Option<usize>,
    /// Skip rendering the channels on the second monitor.
    #[arg(long)]
    pub no_second_monitor: bool,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// Sample rate, if the time column should not be trusted.
    #[arg(long)]
    pub rate: Option<f64>,
}

#[derive(Debug, Args)]
pub struct RankArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Neighbours per class.
    #[arg(long)]
    pub k: Option<usize>,
    /// Use every n-th cycle as an instance.
    #[arg(long)]
    pub stride: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args, Clone)]
pub struct MatchOpts {
    /// dtw, sdtw, gak or mvm (`evaluate` also accepts `all`).
    #[arg(long)]
    pub algorithm: Option<String>,
    #[arg(long)]
    pub gamma: Option<f64>,
    /// MVM elasticity.
    #[arg(long)]
    pub v: Option<usize>,
    /// euclidean, manhattan or kl.
    #[arg(long)]
    pub metric: Option<String>,
    /// Frame width in samples.
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub hop: Option<usize>,
    /// Comma-separated feature subset, e.g. `P` or `P,Q,iTHD`.
    #[arg(long)]
    pub features: Option<String>,
    /// Decide no-TV by thresholding the best distance instead of an extra class.
    #[arg(long)]
    pub threshold: Option<f64>,
}

#[derive(Debug, Args)]
pub struct MatchArgs {
    /// Reference directory (CSV files plus manifest).
    #[arg(long)]
    pub refs: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    /// Write decisions here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub opts: MatchOpts,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// A, B or C.
    #[arg(long)]
    pub protocol: Option<String>,
    #[arg(long)]
    pub scenarios: Option<usize>,
    /// Scale applied to the household load.
    #[arg(long)]
    pub noise_gain: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Frames of a full one-minute clip.
    #[arg(long)]
    pub full_scale: bool,
    /// Tune the algorithm parameter on a bootstrap subset first and emit the table.
    #[arg(long)]
    pub grid: bool,
    #[arg(long)]
    pub bootstrap_fraction: Option<f64>,
    /// Calibrate a no-TV threshold on the bootstrap subset.
    #[arg(long)]
    pub calibrate_threshold: bool,
    #[command(flatten)]
    pub opts: MatchOpts,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// A report JSON file or a directory of them.
    #[arg(long)]
    pub input: PathBuf,
    /// Also write the summary table as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<(), wattmatch_core::Error> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    if let Some(n) = file.pick_opt(cli.threads, "threads")? {
        if n == 0 {
            return Err(wattmatch_core::Error::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| wattmatch_core::Error::Config(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Synth(a) => commands::synth(&a, &file),
        Command::Extract(a) => commands::extract(&a),
        Command::Rank(a) => commands::rank(&a, &file),
        Command::Match(a) => commands::match_frames(&a, &file),
        Command::Evaluate(a) => commands::evaluate(&a, &file),
        Command::Report(a) => commands::report(&a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_user_error() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
