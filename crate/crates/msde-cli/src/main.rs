use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use msde_cli::commands::{cmd_bench, cmd_export, cmd_score, BenchArgs, CliError, ExportKind};
use msde_cli::config::{parse_config_text, ConfigOverlay, RunConfig};

/// Mean-shift density enhancement anomaly detector.
#[derive(Parser)]
#[command(name = "msde", version, about)]
struct Cli {
    #[command(flatten)]
    common: CommonArgs,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Flat key=value config file; flags override file values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed for every random stream.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Neighbors per mean-shift update.
    #[arg(long, global = true)]
    k: Option<usize>,

    /// Minimum neighbor count inside the estimated radius.
    #[arg(long, global = true)]
    nbd_sample_count_threshold: Option<usize>,

    /// Step-size multiplier for each mean-shift update.
    #[arg(long, global = true)]
    learning_rate: Option<f64>,

    /// Maximum number of mean-shift iterations.
    #[arg(long, global = true)]
    max_iters_shift: Option<usize>,

    /// Early-stop threshold on the average per-iteration movement.
    #[arg(long, global = true)]
    shift_threshold: Option<f64>,

    /// Number of radii averaged into each density weight.
    #[arg(long, global = true)]
    max_iters_weight_count: Option<usize>,

    /// Fraction of a batch that must satisfy the density condition.
    #[arg(long, global = true)]
    satisfiability_proportion: Option<f64>,

    /// Rows per weight-estimation batch.
    #[arg(long, global = true)]
    batch_size: Option<usize>,

    /// Skip z-score standardization of the input.
    #[arg(long, global = true)]
    no_standardize: bool,

    /// Chattier progress logging on stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Score a CSV file; writes (row_index, displacement, score).
    Score {
        /// Input CSV (header row required, numeric cells).
        input: PathBuf,

        /// Output CSV path.
        #[arg(short, long)]
        output: PathBuf,

        /// Header name of a 0/1 ground-truth column to exclude from features.
        #[arg(long)]
        label_column: Option<String>,
    },

    /// Run the synthetic benchmark grid (modes x noise ratios x seeds).
    Bench {
        /// Directory for results.csv, aggregate.csv and aggregate.txt.
        #[arg(short, long)]
        output_dir: PathBuf,

        /// Comma-separated anomaly modes.
        #[arg(long, value_delimiter = ',', default_value = "global,local,cluster,dependency")]
        modes: Vec<String>,

        /// Comma-separated noise ratios (subset of 0,0.01,0.05,0.1,0.25,0.5).
        #[arg(long, value_delimiter = ',', default_value = "0,0.01,0.05,0.1,0.25,0.5")]
        noise: Vec<f64>,

        /// Number of seeds, counted up from the master seed.
        #[arg(long, default_value_t = 3)]
        seeds: u64,

        #[arg(long, default_value_t = 950)]
        n_normal: usize,

        #[arg(long, default_value_t = 50)]
        n_anomaly: usize,

        #[arg(long, default_value_t = 10)]
        dims: usize,

        /// Gaussian mixture components behind the normal data.
        #[arg(long, default_value_t = 3)]
        n_components: usize,

        /// k for the kNN-distance baseline.
        #[arg(long, default_value_t = 10)]
        baseline_k: usize,
    },

    /// Export pipeline internals for a CSV input.
    Export {
        input: PathBuf,

        /// What to export: trajectories, weights, or feature-shift.
        #[arg(long)]
        kind: String,

        #[arg(short, long)]
        output: PathBuf,

        #[arg(long)]
        label_column: Option<String>,
    },
}

fn effective_config(common: &CommonArgs) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &common.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        parse_config_text(&text).map_err(CliError::Config)?.apply_to(&mut cfg);
    }
    let flags = ConfigOverlay {
        k: common.k,
        nbd_sample_count_threshold: common.nbd_sample_count_threshold,
        learning_rate: common.learning_rate,
        max_iters_shift: common.max_iters_shift,
        shift_threshold: common.shift_threshold,
        max_iters_weight_count: common.max_iters_weight_count,
        satisfiability_proportion: common.satisfiability_proportion,
        batch_size: common.batch_size,
        seed: common.seed,
        standardize: common.no_standardize.then_some(false),
    };
    flags.apply_to(&mut cfg);
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = effective_config(&cli.common)?;
    let verbose = cli.common.verbose;
    match &cli.command {
        Command::Score {
            input,
            output,
            label_column,
        } => cmd_score(input, label_column.as_deref(), &cfg, output, verbose),
        Command::Bench {
            output_dir,
            modes,
            noise,
            seeds,
            n_normal,
            n_anomaly,
            dims,
            n_components,
            baseline_k,
        } => {
            let args = BenchArgs {
                modes: modes.clone(),
                noise: noise.clone(),
                seeds: *seeds,
                n_normal: *n_normal,
                n_anomaly: *n_anomaly,
                dims: *dims,
                n_components: *n_components,
                baseline_k: *baseline_k,
            };
            cmd_bench(&args, &cfg, output_dir, verbose)
        }
        Command::Export {
            input,
            kind,
            output,
            label_column,
        } => {
            let kind: ExportKind = kind.parse().map_err(CliError::Config)?;
            cmd_export(input, label_column.as_deref(), &cfg, kind, output, verbose)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
