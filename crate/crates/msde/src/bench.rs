//! Benchmark harness: synthetic anomaly generation, noise injection,
//! ranking metrics, a kNN-distance baseline, and grid orchestration.
//!
//! Normal data come from a seeded Gaussian mixture; anomalies are injected
//! in four modes (global, local, cluster, dependency), irrelevant standard
//! normal features simulate measurement noise at six fixed ratios, and every
//! cell of a (mode × noise × seed) grid is scored with AUC-ROC, AUC-PR and
//! Precision@n.

use std::fmt;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dataset::{standardize, Dataset, Matrix, RngSeed};
use crate::error::{Error, Result};
use crate::neighbors::knn_exact;
use crate::pipeline::{run_msde, MsdeConfig};

/// The six supported noise ratios.
pub const NOISE_RATIOS: [f64; 6] = [0.00, 0.01, 0.05, 0.10, 0.25, 0.50];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AnomalyMode {
    /// Isolated from the overall distribution: per-feature uniform over the
    /// data range inflated by 10% on each side.
    Global,
    /// Normal globally, anomalous locally: mixture samples with covariance
    /// scaled up.
    Local,
    /// A compact displaced group: one mixture component with its mean scaled.
    Cluster,
    /// Marginals preserved, joint dependencies destroyed: feature columns
    /// permuted independently within the anomaly rows.
    Dependency,
}

pub const ALL_MODES: [AnomalyMode; 4] = [
    AnomalyMode::Global,
    AnomalyMode::Local,
    AnomalyMode::Cluster,
    AnomalyMode::Dependency,
];

impl AnomalyMode {
    pub fn name(self) -> &'static str {
        match self {
            AnomalyMode::Global => "global",
            AnomalyMode::Local => "local",
            AnomalyMode::Cluster => "cluster",
            AnomalyMode::Dependency => "dependency",
        }
    }

    fn index(self) -> u64 {
        ALL_MODES.iter().position(|&m| m == self).unwrap() as u64
    }
}

impl fmt::Display for AnomalyMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for AnomalyMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "global" => Ok(AnomalyMode::Global),
            "local" => Ok(AnomalyMode::Local),
            "cluster" => Ok(AnomalyMode::Cluster),
            "dependency" => Ok(AnomalyMode::Dependency),
            other => Err(Error::param(
                "mode",
                format!("unknown mode `{other}`; allowed: global, local, cluster, dependency"),
            )),
        }
    }
}

/// Recipe for one synthetic dataset.
#[derive(Debug, Clone)]
pub struct SyntheticSpec {
    pub n_normal: usize,
    pub n_anomaly: usize,
    pub dims: usize,
    pub mode: AnomalyMode,
    /// Gaussian mixture components behind the normal data.
    pub n_components: usize,
    /// Covariance multiplier (local) / mean multiplier (cluster).
    pub mode_scale: f64,
    pub seed: RngSeed,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_normal == 0 || self.dims == 0 {
            return Err(Error::param("synthetic", "need at least 1 normal row and 1 dim"));
        }
        if self.n_anomaly > self.n_normal {
            return Err(Error::param("n_anomaly", "must not exceed n_normal"));
        }
        if self.n_components == 0 {
            return Err(Error::param("n_components", "must be at least 1"));
        }
        if !(self.mode_scale > 0.0) {
            return Err(Error::param("mode_scale", "must be positive"));
        }
        Ok(())
    }
}

/// Noise-injection recipe; the ratio must be one of [`NOISE_RATIOS`].
#[derive(Debug, Clone, Copy)]
pub struct NoiseSpec {
    pub ratio: f64,
    pub seed: RngSeed,
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        if !NOISE_RATIOS.contains(&self.ratio) {
            return Err(Error::param(
                "noise",
                format!("ratio {} not in {NOISE_RATIOS:?}", self.ratio),
            ));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// gaussian mixture substrate
// ---------------------------------------------------------------------------

struct Component {
    mean: Vec<f64>,
    /// Q·diag(√λ); covariance is basis·basisᵀ = Q·diag(λ)·Qᵀ.
    basis: Matrix,
}

pub(crate) struct Mixture {
    components: Vec<Component>,
}

impl Mixture {
    /// The mixture is a pure function of the spec seed, so generators and
    /// injectors can re-derive the exact same distribution independently.
    pub(crate) fn from_spec(spec: &SyntheticSpec) -> Mixture {
        let mut rng = spec.seed.derive(0x6d6978).rng();
        let d = spec.dims;
        let components = (0..spec.n_components)
            .map(|_| {
                let mean: Vec<f64> = (0..d).map(|_| rng.gen_range(-5.0..5.0)).collect();
                let eigs: Vec<f64> = (0..d).map(|_| rng.gen_range(0.5..2.0)).collect();
                let q = random_orthogonal(d, &mut rng);
                let sqrt_eigs: Vec<f64> = eigs.iter().map(|v| v.sqrt()).collect();
                let mut basis = Matrix::zeros(d, d);
                for r in 0..d {
                    for c in 0..d {
                        basis.set(r, c, q.get(r, c) * sqrt_eigs[c]);
                    }
                }
                Component { mean, basis }
            })
            .collect();
        Mixture { components }
    }

    pub(crate) fn n_components(&self) -> usize {
        self.components.len()
    }

    #[cfg(test)]
    pub(crate) fn component_mean(&self, c: usize) -> &[f64] {
        &self.components[c].mean
    }

    fn sample_component(&self, c: usize, cov_scale: f64, mean_scale: f64, rng: &mut impl Rng) -> Vec<f64> {
        let comp = &self.components[c];
        let d = comp.mean.len();
        let z: Vec<f64> = (0..d)
            .map(|_| <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng))
            .collect();
        let s = cov_scale.sqrt();
        (0..d)
            .map(|r| {
                let mut v = comp.mean[r] * mean_scale;
                for c2 in 0..d {
                    v += s * comp.basis.get(r, c2) * z[c2];
                }
                v
            })
            .collect()
    }

    fn sample(&self, cov_scale: f64, rng: &mut impl Rng) -> Vec<f64> {
        let c = rng.gen_range(0..self.components.len());
        self.sample_component(c, cov_scale, 1.0, rng)
    }
}

/// Random orthogonal matrix via Gram-Schmidt on Gaussian columns.
fn random_orthogonal(d: usize, rng: &mut impl Rng) -> Matrix {
    let mut q = Matrix::zeros(d, d);
    for col in 0..d {
        loop {
            let mut v: Vec<f64> = (0..d)
                .map(|_| <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng))
                .collect();
            for prev in 0..col {
                let dot: f64 = (0..d).map(|r| v[r] * q.get(r, prev)).sum();
                for r in 0..d {
                    v[r] -= dot * q.get(r, prev);
                }
            }
            let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-9 {
                for r in 0..d {
                    q.set(r, col, v[r] / norm);
                }
                break;
            }
        }
    }
    q
}

fn feature_names(d: usize) -> Vec<String> {
    (0..d).map(|j| format!("f{j}")).collect()
}

/// Sample the normal (label 0) rows of a synthetic dataset from the spec's
/// seeded Gaussian mixture.
pub fn generate_normals(spec: &SyntheticSpec) -> Result<Dataset> {
    spec.validate()?;
    let mixture = Mixture::from_spec(spec);
    let mut rng = spec.seed.derive(0x6e6f726d).rng();
    let rows: Vec<Vec<f64>> = (0..spec.n_normal).map(|_| mixture.sample(1.0, &mut rng)).collect();
    Dataset::new(
        Matrix::from_rows(&rows),
        feature_names(spec.dims),
        Some(vec![0; spec.n_normal]),
    )
}

/// Independently permute each column among the given rows (marginals kept,
/// joint structure destroyed).
fn permute_columns(rows: &mut [Vec<f64>], seed: RngSeed) {
    let d = rows[0].len();
    for col in 0..d {
        let mut rng = seed.derive(col as u64).rng();
        let mut values: Vec<f64> = rows.iter().map(|r| r[col]).collect();
        values.shuffle(&mut rng);
        for (r, v) in rows.iter_mut().zip(values) {
            r[col] = v;
        }
    }
}

/// Append `n_anomaly` labeled anomalies in the spec's mode, then shuffle the
/// rows. Input rows are treated as normal (label 0). The local, cluster and
/// dependency modes re-derive the spec's mixture, so they expect `normals`
/// to come from [`generate_normals`] with the same spec; the global mode
/// only uses the observed feature ranges.
pub fn inject_anomalies(normals: &Dataset, spec: &SyntheticSpec) -> Result<Dataset> {
    spec.validate()?;
    if spec.mode == AnomalyMode::Dependency && spec.n_anomaly < 2 {
        return Err(Error::param(
            "n_anomaly",
            "dependency mode needs at least 2 anomalies to permute",
        ));
    }
    let d = normals.d();
    let n = normals.n();
    let mut rng = spec.seed.derive(0x616e6f6d).rng();

    let anomalies: Vec<Vec<f64>> = match spec.mode {
        AnomalyMode::Global => {
            let mut lo = vec![f64::INFINITY; d];
            let mut hi = vec![f64::NEG_INFINITY; d];
            for row in normals.values.iter_rows() {
                for j in 0..d {
                    lo[j] = lo[j].min(row[j]);
                    hi[j] = hi[j].max(row[j]);
                }
            }
            (0..spec.n_anomaly)
                .map(|_| {
                    (0..d)
                        .map(|j| {
                            let range = hi[j] - lo[j];
                            if range > 0.0 {
                                rng.gen_range(lo[j] - 0.1 * range..hi[j] + 0.1 * range)
                            } else {
                                lo[j]
                            }
                        })
                        .collect()
                })
                .collect()
        }
        AnomalyMode::Local => {
            let mixture = Mixture::from_spec(spec);
            (0..spec.n_anomaly)
                .map(|_| mixture.sample(spec.mode_scale, &mut rng))
                .collect()
        }
        AnomalyMode::Cluster => {
            let mixture = Mixture::from_spec(spec);
            let comp = rng.gen_range(0..mixture.n_components());
            (0..spec.n_anomaly)
                .map(|_| mixture.sample_component(comp, 1.0, spec.mode_scale, &mut rng))
                .collect()
        }
        AnomalyMode::Dependency => {
            let mixture = Mixture::from_spec(spec);
            let mut draws: Vec<Vec<f64>> =
                (0..spec.n_anomaly).map(|_| mixture.sample(1.0, &mut rng)).collect();
            permute_columns(&mut draws, spec.seed.derive(0x70657273));
            draws
        }
    };

    let total = n + anomalies.len();
    let mut rows: Vec<(Vec<f64>, u8)> = Vec::with_capacity(total);
    for i in 0..n {
        rows.push((normals.values.row(i).to_vec(), 0));
    }
    for a in anomalies {
        rows.push((a, 1));
    }
    rows.shuffle(&mut spec.seed.derive(0x73687566).rng());

    let labels: Vec<u8> = rows.iter().map(|(_, l)| *l).collect();
    let values: Vec<Vec<f64>> = rows.into_iter().map(|(r, _)| r).collect();
    Dataset::new(Matrix::from_rows(&values), normals.feature_names.clone(), Some(labels))
}

/// Append `round(ratio · d)` irrelevant standard-normal features named
/// `noise_*`. Ratio 0 returns the dataset unchanged.
pub fn inject_noise(data: &Dataset, spec: &NoiseSpec) -> Result<Dataset> {
    spec.validate()?;
    let d = data.d();
    let extra = (spec.ratio * d as f64).round() as usize;
    if extra == 0 {
        return Ok(data.clone());
    }
    let n = data.n();
    let mut rng = spec.seed.derive(0x6e6f6973).rng();
    let mut values = Matrix::zeros(n, d + extra);
    for i in 0..n {
        values.row_mut(i)[..d].copy_from_slice(data.values.row(i));
        for j in 0..extra {
            values.set(i, d + j, <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng));
        }
    }
    let mut names = data.feature_names.clone();
    names.extend((0..extra).map(|j| format!("noise_{j}")));
    Dataset::new(values, names, data.labels.clone())
}

// ---------------------------------------------------------------------------
// metrics
// ---------------------------------------------------------------------------

fn check_binary(scores: &[f64], labels: &[u8]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: scores.len(),
            got: labels.len(),
        });
    }
    let pos = labels.iter().filter(|&&l| l == 1).count();
    Ok((pos, labels.len() - pos))
}

/// AUC-ROC via the Mann-Whitney statistic with midranks for ties:
/// (#concordant + 0.5·#tied) / (#pos·#neg).
pub fn auc_roc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    let (pos, neg) = check_binary(scores, labels)?;
    if pos == 0 || neg == 0 {
        return Err(Error::param("labels", "both classes must be present"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // midrank sum over positives; dyadic arithmetic keeps this exactly equal
    // to pairwise enumeration
    let mut rank_sum = 0.0f64;
    let mut at = 0usize;
    while at < order.len() {
        let mut end = at + 1;
        while end < order.len() && scores[order[end]] == scores[order[at]] {
            end += 1;
        }
        let midrank = (at + 1 + end) as f64 / 2.0;
        for &i in &order[at..end] {
            if labels[i] == 1 {
                rank_sum += midrank;
            }
        }
        at = end;
    }
    let u = rank_sum - (pos * (pos + 1)) as f64 / 2.0;
    Ok(u / (pos as f64 * neg as f64))
}

/// Ranking permutation shared by the precision metrics: descending score,
/// ties by ascending index.
fn rank_descending(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

/// Average precision: mean over positives of the precision at each
/// positive's rank.
pub fn auc_pr(scores: &[f64], labels: &[u8]) -> Result<f64> {
    let (pos, _) = check_binary(scores, labels)?;
    if pos == 0 {
        return Err(Error::param("labels", "need at least one positive"));
    }
    let mut hits = 0usize;
    let mut sum = 0.0f64;
    for (rank0, &i) in rank_descending(scores).iter().enumerate() {
        if labels[i] == 1 {
            hits += 1;
            sum += hits as f64 / (rank0 + 1) as f64;
        }
    }
    Ok(sum / pos as f64)
}

/// Fraction of true anomalies among the top-n, n = number of positives.
pub fn precision_at_n(scores: &[f64], labels: &[u8]) -> Result<f64> {
    let (pos, _) = check_binary(scores, labels)?;
    if pos == 0 {
        return Err(Error::param("labels", "need at least one positive"));
    }
    let hits = rank_descending(scores)
        .iter()
        .take(pos)
        .filter(|&&i| labels[i] == 1)
        .count();
    Ok(hits as f64 / pos as f64)
}

/// Distance-to-kth-neighbor baseline; higher = more anomalous.
pub fn knn_baseline(data: &Dataset, k: usize) -> Result<Vec<f64>> {
    let graph = knn_exact(&data.values, k)?;
    Ok((0..data.n()).map(|i| graph.distances(i)[k - 1]).collect())
}

// ---------------------------------------------------------------------------
// grid orchestration
// ---------------------------------------------------------------------------

/// Synthetic substrate shared by every grid cell. The defaults are the
/// desk-scale setup: 950 normals + 50 anomalies (5% contamination) in 10
/// dimensions from a 3-component mixture.
#[derive(Debug, Clone)]
pub struct SynthParams {
    pub n_normal: usize,
    pub n_anomaly: usize,
    pub dims: usize,
    pub n_components: usize,
    pub mode_scale: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            n_normal: 950,
            n_anomaly: 50,
            dims: 10,
            n_components: 3,
            mode_scale: 5.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchGrid {
    pub modes: Vec<AnomalyMode>,
    pub noise_ratios: Vec<f64>,
    pub seeds: Vec<u64>,
    pub synth: SynthParams,
}

impl Default for BenchGrid {
    fn default() -> Self {
        BenchGrid {
            modes: ALL_MODES.to_vec(),
            noise_ratios: NOISE_RATIOS.to_vec(),
            seeds: vec![0, 1, 2],
            synth: SynthParams::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub msde: MsdeConfig,
    pub baseline_k: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            msde: MsdeConfig::new(),
            baseline_k: 10,
        }
    }
}

/// One grid cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellKey {
    pub mode: AnomalyMode,
    pub noise: f64,
    pub seed: u64,
}

impl fmt::Display for CellKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "mode={} noise={} seed={}", self.mode, self.noise, self.seed)
    }
}

/// Metrics for one method on one cell.
#[derive(Debug, Clone)]
pub struct EvalResult {
    pub method: String,
    pub mode: AnomalyMode,
    pub noise: f64,
    pub seed: u64,
    pub auc_roc: f64,
    pub auc_pr: f64,
    pub precision_at_n: f64,
}

#[derive(Debug)]
pub struct BenchReport {
    pub results: Vec<EvalResult>,
    pub failures: Vec<(CellKey, Error)>,
}

fn cell_seed(key: &CellKey) -> RngSeed {
    let noise_idx = NOISE_RATIOS
        .iter()
        .position(|&r| r == key.noise)
        .unwrap_or(NOISE_RATIOS.len()) as u64;
    RngSeed(key.seed)
        .derive(0x63656c6c)
        .derive(key.mode.index())
        .derive(noise_idx)
}

/// Run one cell: generate, inject anomalies, inject noise, standardize,
/// score with the detector and the kNN baseline, evaluate all three metrics.
pub fn run_cell(key: &CellKey, synth: &SynthParams, cfg: &BenchConfig) -> Result<Vec<EvalResult>> {
    let base = cell_seed(key);
    let spec = SyntheticSpec {
        n_normal: synth.n_normal,
        n_anomaly: synth.n_anomaly,
        dims: synth.dims,
        mode: key.mode,
        n_components: synth.n_components,
        mode_scale: synth.mode_scale,
        seed: base.derive(0),
    };
    let normals = generate_normals(&spec)?;
    let with_anomalies = inject_anomalies(&normals, &spec)?;
    let noisy = inject_noise(
        &with_anomalies,
        &NoiseSpec {
            ratio: key.noise,
            seed: base.derive(1),
        },
    )?;
    let labels = noisy.labels.clone().expect("synthetic data carries labels");

    let outcome = run_msde(&noisy, &cfg.msde, base.derive(2))?;

    let baseline_input = if cfg.msde.standardize {
        standardize(&noisy)?
    } else {
        noisy.clone()
    };
    let baseline_scores = knn_baseline(&baseline_input, cfg.baseline_k)?;

    let eval = |method: &str, scores: &[f64]| -> Result<EvalResult> {
        Ok(EvalResult {
            method: method.to_string(),
            mode: key.mode,
            noise: key.noise,
            seed: key.seed,
            auc_roc: auc_roc(scores, &labels)?,
            auc_pr: auc_pr(scores, &labels)?,
            precision_at_n: precision_at_n(scores, &labels)?,
        })
    };
    Ok(vec![
        eval("msde", &outcome.scores.scores)?,
        eval("knn", &baseline_scores)?,
    ])
}

/// Run every cell of the grid, reporting progress through the callback.
/// A failing cell is recorded and the remaining cells still run.
pub fn run_benchmark(
    grid: &BenchGrid,
    cfg: &BenchConfig,
    mut progress: impl FnMut(&CellKey, &Result<Vec<EvalResult>>),
) -> BenchReport {
    let mut results = Vec::new();
    let mut failures = Vec::new();
    for &seed in &grid.seeds {
        for &mode in &grid.modes {
            for &noise in &grid.noise_ratios {
                let key = CellKey { mode, noise, seed };
                let outcome = run_cell(&key, &grid.synth, cfg);
                progress(&key, &outcome);
                match outcome {
                    Ok(mut rs) => results.append(&mut rs),
                    Err(e) => failures.push((key, e)),
                }
            }
        }
    }
    BenchReport { results, failures }
}

/// Per-cell results CSV, metrics in 6-decimal fixed point.
pub fn write_results_csv(results: &[EvalResult], out: &mut impl Write) -> std::io::Result<()> {
    writeln!(out, "method,mode,noise,seed,auc_roc,auc_pr,precision_at_n")?;
    for r in results {
        writeln!(
            out,
            "{},{},{},{},{:.6},{:.6},{:.6}",
            r.method, r.mode, r.noise, r.seed, r.auc_roc, r.auc_pr, r.precision_at_n
        )?;
    }
    Ok(())
}

/// Mean of the three metrics over a result subset.
pub fn mean_metrics(results: &[&EvalResult]) -> (f64, f64, f64) {
    let n = results.len().max(1) as f64;
    let mut acc = (0.0, 0.0, 0.0);
    for r in results {
        acc.0 += r.auc_roc;
        acc.1 += r.auc_pr;
        acc.2 += r.precision_at_n;
    }
    (acc.0 / n, acc.1 / n, acc.2 / n)
}

fn methods_in(results: &[EvalResult]) -> Vec<String> {
    let mut methods: Vec<String> = Vec::new();
    for r in results {
        if !methods.contains(&r.method) {
            methods.push(r.method.clone());
        }
    }
    methods
}

/// Aggregate CSV: per (method, mode, noise), averaged over seeds.
pub fn write_aggregate_csv(results: &[EvalResult], out: &mut impl Write) -> std::io::Result<()> {
    writeln!(out, "method,mode,noise,cells,avg_auc_roc,avg_auc_pr,avg_precision_at_n")?;
    for method in methods_in(results) {
        for mode in ALL_MODES {
            for noise in NOISE_RATIOS {
                let subset: Vec<&EvalResult> = results
                    .iter()
                    .filter(|r| r.method == method && r.mode == mode && r.noise == noise)
                    .collect();
                if subset.is_empty() {
                    continue;
                }
                let (roc, pr, pn) = mean_metrics(&subset);
                writeln!(
                    out,
                    "{method},{mode},{noise},{},{roc:.6},{pr:.6},{pn:.6}",
                    subset.len()
                )?;
            }
        }
    }
    Ok(())
}

/// Aligned text table of per-method averages over every cell.
pub fn aggregate_text(results: &[EvalResult]) -> String {
    let mut rows: Vec<(String, f64, f64, f64)> = methods_in(results)
        .into_iter()
        .map(|method| {
            let subset: Vec<&EvalResult> = results.iter().filter(|r| r.method == method).collect();
            let (roc, pr, pn) = mean_metrics(&subset);
            (method, roc, pr, pn)
        })
        .collect();
    rows.sort_by(|a, b| b.1.total_cmp(&a.1));

    let mut out = String::new();
    out.push_str(&format!(
        "{:<10} {:>12} {:>12} {:>16}\n",
        "method", "avg auc-roc", "avg auc-pr", "avg precision@n"
    ));
    for (method, roc, pr, pn) in rows {
        out.push_str(&format!("{method:<10} {roc:>12.6} {pr:>12.6} {pn:>16.6}\n"));
    }
    out
}
