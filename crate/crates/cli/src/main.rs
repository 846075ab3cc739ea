//! `batchboost` command line: run one experiment (`train`) or a multi-seed
//! method comparison (`compare`).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use batchboost::harness::{compare, run_experiment, ExperimentConfig};
use batchboost::{DatasetKind, LambdaMode, Method};

/// Env var consulted when `--data-dir` is not given.
const DATA_DIR_ENV: &str = "BATCHBOOST_DATA_DIR";

#[derive(Parser)]
#[command(
    name = "batchboost",
    version,
    about = "Batch-construction augmentation lab: train and compare baseline, \
             mixup, samplepairing and batchboost"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one method and write per-epoch metrics CSV.
    Train(TrainArgs),
    /// Run several methods over several seeds and aggregate the results.
    Compare(CompareArgs),
}

#[derive(Args)]
struct HyperArgs {
    /// Dataset to train on.
    #[arg(long, default_value = "blobs")]
    dataset: DatasetKind,

    /// Directory holding the Fashion-MNIST IDX files (optionally .gz).
    /// Defaults to $BATCHBOOST_DATA_DIR, then ./data.
    #[arg(long)]
    data_dir: Option<PathBuf>,

    /// Class-stratified limit on the train split.
    #[arg(long)]
    limit: Option<usize>,

    /// Training batch size; must be even.
    #[arg(long, default_value_t = 64)]
    batch_size: usize,

    /// Epochs, measured in fresh-sample consumption.
    #[arg(long, default_value_t = 30)]
    epochs: usize,

    /// SGD learning rate.
    #[arg(long, default_value_t = 0.1)]
    lr: f64,

    /// L2 weight decay folded into the gradient (weights only).
    #[arg(long, default_value_t = 1e-4)]
    weight_decay: f64,

    /// SGD momentum.
    #[arg(long, default_value_t = 0.9)]
    momentum: f64,

    /// Beta(alpha, alpha) concentration for λ draws.
    #[arg(long, default_value_t = 0.2)]
    alpha: f64,

    /// Half-batch to feed-batch ratio. Only 1 is supported without
    /// --experimental-gamma.
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,

    /// Allow γ ≠ 1 (untested regime).
    #[arg(long)]
    experimental_gamma: bool,

    /// Hidden layer width; defaults to 128 for fashion-mnist, 32 for blobs.
    #[arg(long)]
    hidden: Option<usize>,

    /// One λ per constructed batch or one per pair.
    #[arg(long, default_value = "per-batch")]
    lambda_mode: LambdaMode,

    /// Pin λ to a constant between 0 and 1 instead of drawing it (ablation knob).
    #[arg(long)]
    fixed_lambda: Option<f64>,

    /// Disable lineage tracking (bookkeeping only; metrics are unchanged).
    #[arg(long)]
    no_lineage: bool,

    /// Record real per-epoch wall time in the metrics CSV. Breaks
    /// byte-for-byte reproducibility of the file; off by default.
    #[arg(long)]
    wall_clock: bool,
}

impl HyperArgs {
    fn apply(&self, config: &mut ExperimentConfig) {
        config.dataset = self.dataset;
        config.data_dir = self
            .data_dir
            .clone()
            .or_else(|| std::env::var_os(DATA_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("data"));
        config.limit = self.limit;
        config.batch_size = self.batch_size;
        config.epochs = self.epochs;
        config.lr = self.lr;
        config.weight_decay = self.weight_decay;
        config.momentum = self.momentum;
        config.alpha = self.alpha;
        config.gamma = self.gamma;
        config.experimental_gamma = self.experimental_gamma;
        config.hidden = self.hidden;
        config.lambda_mode = self.lambda_mode;
        config.fixed_lambda = self.fixed_lambda;
        config.track_lineage = !self.no_lineage;
        config.wall_clock = self.wall_clock;
    }
}

#[derive(Args)]
struct TrainArgs {
    /// Batch construction method.
    #[arg(long)]
    method: Method,

    /// RNG seed; fully determines the run.
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Where to write the per-epoch metrics CSV.
    #[arg(long)]
    metrics_out: PathBuf,

    /// Write a PGM grid of the final batch here (manifest lands alongside
    /// with a .txt extension).
    #[arg(long)]
    grid_out: Option<PathBuf>,

    #[command(flatten)]
    hyper: HyperArgs,
}

#[derive(Args)]
struct CompareArgs {
    /// Comma-separated methods to compare.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "baseline,mixup,samplepairing,batchboost"
    )]
    methods: Vec<Method>,

    /// Comma-separated seeds; each method runs once per seed.
    #[arg(long, value_delimiter = ',', default_value = "0,1,2")]
    seeds: Vec<u64>,

    /// Output directory for per-run metrics, comparison.csv and summary.txt.
    #[arg(long)]
    out_dir: PathBuf,

    #[command(flatten)]
    hyper: HyperArgs,
}

fn run_train(args: &TrainArgs) -> Result<(), String> {
    let mut config = ExperimentConfig::new(args.method, args.hyper.dataset);
    args.hyper.apply(&mut config);
    config.seed = args.seed;
    config.metrics_out = Some(args.metrics_out.clone());
    config.grid_out = args.grid_out.clone();

    let (rows, report) = run_experiment(&config).map_err(|e| e.to_string())?;
    println!("{report}");
    println!("metrics: {} ({} rows)", args.metrics_out.display(), rows.len());
    if let Some(grid) = &args.grid_out {
        println!(
            "grid: {} (manifest {})",
            grid.display(),
            grid.with_extension("txt").display()
        );
    }
    if report.diverged {
        println!("note: non-finite losses were observed; see the divergence flag above");
    }
    Ok(())
}

fn run_compare(args: &CompareArgs) -> Result<(), String> {
    if args.methods.is_empty() {
        return Err("need at least one method".into());
    }
    let mut dedup = args.methods.clone();
    dedup.sort_by_key(|m| m.to_string());
    dedup.dedup();
    if dedup.len() != args.methods.len() {
        return Err("duplicate methods in --methods".into());
    }

    let configs: Vec<ExperimentConfig> = args
        .methods
        .iter()
        .map(|&m| {
            let mut config = ExperimentConfig::new(m, args.hyper.dataset);
            args.hyper.apply(&mut config);
            config
        })
        .collect();

    let comparison = compare(&configs, &args.seeds, &args.out_dir).map_err(|e| e.to_string())?;
    print!(
        "{}",
        std::fs::read_to_string(&comparison.summary_path).map_err(|e| e.to_string())?
    );
    println!("table: {}", comparison.csv_path.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Train(args) => run_train(args),
        Command::Compare(args) => run_compare(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
