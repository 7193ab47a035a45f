//! Subcommand implementations, separated from argument parsing so tests can
//! drive them directly.

use std::fs;
use std::io::Write;
use std::path::Path;

use msde::bench::{
    aggregate_text, run_benchmark, write_aggregate_csv, write_results_csv, AnomalyMode, BenchConfig,
    BenchGrid, SynthParams, NOISE_RATIOS,
};
use msde::dataset::{load_csv, standardize, RngSeed};
use msde::pipeline::run_msde;
use msde::weights::compute_weights;

use crate::config::RunConfig;

/// Errors carry their exit code: 1 for runtime and I/O failures, 2 for
/// configuration problems.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Runtime(m) => m,
        }
    }
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

fn log(verbose: bool, msg: &str) {
    if verbose {
        eprintln!("{msg}");
    }
}

fn echo_config(cfg: &RunConfig) {
    eprintln!("effective configuration:");
    for line in cfg.render().lines() {
        eprintln!("  {line}");
    }
}

/// `score`: fit on a CSV and write (row_index, displacement, score).
pub fn cmd_score(
    input: &Path,
    label_column: Option<&str>,
    cfg: &RunConfig,
    output: &Path,
    verbose: bool,
) -> Result<(), CliError> {
    cfg.validate().map_err(CliError::Config)?;
    echo_config(cfg);
    let data = load_csv(input, label_column).map_err(runtime)?;
    cfg.validate_for_rows(data.n()).map_err(CliError::Config)?;
    log(verbose, &format!("loaded {} rows x {} features", data.n(), data.d()));

    let outcome = run_msde(&data, &cfg.to_msde_config(), RngSeed(cfg.seed)).map_err(runtime)?;

    let mut out = String::from("row_index,displacement,score\n");
    for i in 0..data.n() {
        out.push_str(&format!(
            "{i},{},{}\n",
            outcome.state.cumulative[i], outcome.scores.scores[i]
        ));
    }
    fs::write(output, out).map_err(runtime)?;
    log(
        verbose,
        &format!(
            "wrote {} scores to {} ({} shift iterations)",
            data.n(),
            output.display(),
            outcome.state.iterations_run
        ),
    );
    Ok(())
}

pub struct BenchArgs {
    pub modes: Vec<String>,
    pub noise: Vec<f64>,
    pub seeds: u64,
    pub n_normal: usize,
    pub n_anomaly: usize,
    pub dims: usize,
    pub n_components: usize,
    pub baseline_k: usize,
}

/// `bench`: run the (mode × noise × seed) grid, writing per-cell results and
/// aggregate tables. Failed cells are logged and skipped; their presence
/// turns the final status into an error after everything else completes.
pub fn cmd_bench(
    args: &BenchArgs,
    cfg: &RunConfig,
    output_dir: &Path,
    verbose: bool,
) -> Result<(), CliError> {
    cfg.validate().map_err(CliError::Config)?;

    let mut modes = Vec::new();
    for name in &args.modes {
        modes.push(name.parse::<AnomalyMode>().map_err(|e| CliError::Config(e.to_string()))?);
    }
    for ratio in &args.noise {
        if !NOISE_RATIOS.contains(ratio) {
            return Err(CliError::Config(format!(
                "invalid parameter `noise`: ratio {ratio} not in {NOISE_RATIOS:?}"
            )));
        }
    }
    if args.seeds == 0 {
        return Err(CliError::Config("invalid parameter `seeds`: must be positive".into()));
    }
    let total_rows = args.n_normal + args.n_anomaly;
    cfg.validate_for_rows(total_rows).map_err(CliError::Config)?;
    if args.baseline_k >= total_rows {
        return Err(CliError::Config(format!(
            "invalid parameter `baseline_k`: {} must be smaller than the number of rows ({total_rows})",
            args.baseline_k
        )));
    }
    echo_config(cfg);

    fs::create_dir_all(output_dir).map_err(runtime)?;

    let grid = BenchGrid {
        modes,
        noise_ratios: args.noise.clone(),
        seeds: (cfg.seed..cfg.seed + args.seeds).collect(),
        synth: SynthParams {
            n_normal: args.n_normal,
            n_anomaly: args.n_anomaly,
            dims: args.dims,
            n_components: args.n_components,
            mode_scale: 5.0,
        },
    };
    let bench_cfg = BenchConfig {
        msde: cfg.to_msde_config(),
        baseline_k: args.baseline_k,
    };

    let report = run_benchmark(&grid, &bench_cfg, |key, outcome| match outcome {
        Ok(rs) => {
            eprintln!(
                "cell {key}: msde auc-roc {:.3}, knn auc-roc {:.3}",
                rs[0].auc_roc, rs[1].auc_roc
            );
        }
        Err(e) => eprintln!("cell {key}: FAILED: {e}"),
    });

    let mut results_csv = Vec::new();
    write_results_csv(&report.results, &mut results_csv).map_err(runtime)?;
    fs::write(output_dir.join("results.csv"), results_csv).map_err(runtime)?;

    let mut agg_csv = Vec::new();
    write_aggregate_csv(&report.results, &mut agg_csv).map_err(runtime)?;
    fs::write(output_dir.join("aggregate.csv"), agg_csv).map_err(runtime)?;

    let table = aggregate_text(&report.results);
    fs::write(output_dir.join("aggregate.txt"), &table).map_err(runtime)?;
    log(verbose, &table);

    if report.failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Runtime(format!(
            "{} of {} cells failed; partial results kept in {}",
            report.failures.len(),
            report.failures.len() + report.results.len() / 2,
            output_dir.display()
        )))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportKind {
    Trajectories,
    Weights,
    FeatureShift,
}

impl std::str::FromStr for ExportKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "trajectories" => Ok(ExportKind::Trajectories),
            "weights" => Ok(ExportKind::Weights),
            "feature-shift" => Ok(ExportKind::FeatureShift),
            other => Err(format!(
                "unknown export kind `{other}`; allowed: trajectories, weights, feature-shift"
            )),
        }
    }
}

/// `export`: run the pipeline and dump one of its internal artifacts.
pub fn cmd_export(
    input: &Path,
    label_column: Option<&str>,
    cfg: &RunConfig,
    kind: ExportKind,
    output: &Path,
    verbose: bool,
) -> Result<(), CliError> {
    cfg.validate().map_err(CliError::Config)?;
    echo_config(cfg);
    let data = load_csv(input, label_column).map_err(runtime)?;
    cfg.validate_for_rows(data.n()).map_err(CliError::Config)?;

    let mut buf: Vec<u8> = Vec::new();
    match kind {
        ExportKind::Weights => {
            // weights alone do not need the shift stage
            let input_data = if cfg.standardize {
                standardize(&data).map_err(runtime)?
            } else {
                data.clone()
            };
            let dw = compute_weights(
                &input_data,
                &cfg.to_msde_config().weights,
                RngSeed(cfg.seed).derive(msde::pipeline::WEIGHT_STAGE),
            )
            .map_err(runtime)?;
            dw.write_csv(&mut buf).map_err(runtime)?;
        }
        ExportKind::Trajectories => {
            let outcome =
                run_msde(&data, &cfg.to_msde_config(), RngSeed(cfg.seed)).map_err(runtime)?;
            outcome
                .state
                .write_trajectories(&data.feature_names, &mut buf)
                .map_err(runtime)?;
        }
        ExportKind::FeatureShift => {
            let outcome =
                run_msde(&data, &cfg.to_msde_config(), RngSeed(cfg.seed)).map_err(runtime)?;
            outcome
                .state
                .write_feature_shift(&data.feature_names, &mut buf)
                .map_err(runtime)?;
        }
    }
    let mut file = fs::File::create(output).map_err(runtime)?;
    file.write_all(&buf).map_err(runtime)?;
    log(verbose, &format!("wrote {} to {}", buf.len(), output.display()));
    Ok(())
}
