//! Weighted mean-shift on an evolving point cloud, displacement
//! accumulation, and sigmoid anomaly scoring.
//!
//! Each iteration rebuilds the kNN graph on the current positions, moves
//! every point toward the density-weighted mean of its neighbors with a
//! normalized, magnitude-scaled step, and records the pre-step residual
//! δ_i = ‖x_i − μ_i‖. Points well supported by local density barely move;
//! isolated points are dragged toward nearby modes, so the cumulative
//! displacement D_i = Σ_t δ_i is the raw anomaly signal.
//!
//! Updates are synchronous: every μ_i in an iteration is computed from the
//! frozen previous positions, in a fixed reduction order, so results do not
//! depend on scheduling.

use std::io::Write;

use rayon::prelude::*;

use crate::dataset::{euclidean, Dataset, Matrix, RngSeed};
use crate::error::{Error, Result};
use crate::neighbors::{knn_graph, NeighborGraph};
use crate::weights::DensityWeights;

/// Mean-shift parameters. Field names follow the CLI flags; defaults are
/// k = 100, learning rate 0.1, at most 6 iterations, stop threshold 0.003.
#[derive(Debug, Clone)]
pub struct ShiftConfig {
    pub k: usize,
    pub learning_rate: f64,
    pub max_iters_shift: usize,
    pub shift_threshold: f64,
    /// Stabilizer added to ‖μ − x‖ in the step denominator.
    pub eps_stab: f64,
}

impl Default for ShiftConfig {
    fn default() -> Self {
        ShiftConfig {
            k: 100,
            learning_rate: 0.1,
            max_iters_shift: 6,
            shift_threshold: 0.003,
            eps_stab: 1e-8,
        }
    }
}

impl ShiftConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::param("k", "must be positive"));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::param("learning_rate", "must be finite and nonnegative"));
        }
        if self.max_iters_shift == 0 {
            return Err(Error::param("max_iters_shift", "must be positive"));
        }
        if !(self.shift_threshold >= 0.0) {
            return Err(Error::param("shift_threshold", "must be nonnegative"));
        }
        if !(self.eps_stab > 0.0) {
            return Err(Error::param("eps_stab", "must be positive"));
        }
        Ok(())
    }
}

/// Evolving positions plus the full displacement record of a run.
#[derive(Debug, Clone)]
pub struct ShiftState {
    /// Current point positions.
    pub positions: Matrix,
    /// δ_i per executed iteration: `per_iter_delta[t][i]`.
    pub per_iter_delta: Vec<Vec<f64>>,
    /// D_i, the running sum of δ_i over executed iterations.
    pub cumulative: Vec<f64>,
    pub iterations_run: usize,
    pub converged_early: bool,
    /// Positions before the first iteration and after each executed one;
    /// feeds the trajectory and per-feature shift exports.
    snapshots: Vec<Matrix>,
}

impl ShiftState {
    pub fn new(initial: Matrix) -> Self {
        let n = initial.rows();
        ShiftState {
            positions: initial.clone(),
            per_iter_delta: Vec::new(),
            cumulative: vec![0.0; n],
            iterations_run: 0,
            converged_early: false,
            snapshots: vec![initial],
        }
    }

    pub fn n(&self) -> usize {
        self.positions.rows()
    }

    /// Positions before iteration t (t = 0 is the input data).
    pub fn snapshot(&self, t: usize) -> &Matrix {
        &self.snapshots[t]
    }

    /// One CSV row per point per executed iteration:
    /// iteration, row index, δ, then the post-update position.
    pub fn write_trajectories(
        &self,
        feature_names: &[String],
        out: &mut impl Write,
    ) -> std::io::Result<()> {
        write!(out, "iteration,row_index,delta")?;
        for name in feature_names {
            write!(out, ",{name}")?;
        }
        writeln!(out)?;
        for (t, deltas) in self.per_iter_delta.iter().enumerate() {
            let pos = &self.snapshots[t + 1];
            for (i, d) in deltas.iter().enumerate() {
                write!(out, "{t},{i},{d}")?;
                for v in pos.row(i) {
                    write!(out, ",{v}")?;
                }
                writeln!(out)?;
            }
        }
        Ok(())
    }

    /// Mean absolute per-feature displacement accumulated over iterations,
    /// averaged over points.
    pub fn feature_shift(&self) -> Vec<f64> {
        let n = self.positions.rows();
        let d = self.positions.cols();
        let mut acc = vec![0.0; d];
        for t in 0..self.iterations_run {
            let before = &self.snapshots[t];
            let after = &self.snapshots[t + 1];
            for i in 0..n {
                let (b, a) = (before.row(i), after.row(i));
                for c in 0..d {
                    acc[c] += (a[c] - b[c]).abs();
                }
            }
        }
        for v in &mut acc {
            *v /= n as f64;
        }
        acc
    }

    pub fn write_feature_shift(
        &self,
        feature_names: &[String],
        out: &mut impl Write,
    ) -> std::io::Result<()> {
        writeln!(out, "feature,mean_abs_shift")?;
        for (name, v) in feature_names.iter().zip(self.feature_shift()) {
            writeln!(out, "{name},{v}")?;
        }
        Ok(())
    }
}

/// Sigmoid-transformed anomaly scores with the displacement they came from.
#[derive(Debug, Clone)]
pub struct AnomalyScores {
    /// s_i ∈ (0, 1); higher is more anomalous.
    pub scores: Vec<f64>,
    /// Cumulative displacement D_i.
    pub displacement: Vec<f64>,
    /// Row indices by descending score, ties by ascending index.
    pub ranking: Vec<u32>,
}

/// Weighted neighborhood mean μ = Σ_j w̃_j x_j with w̃ normalized to sum 1.
/// All-zero weights fall back to the unweighted mean.
pub fn weighted_mean(neighbor_positions: &Matrix, neighbor_weights: &[f64]) -> Vec<f64> {
    let k = neighbor_positions.rows();
    assert!(k > 0, "weighted_mean of an empty neighborhood");
    assert_eq!(k, neighbor_weights.len());
    let mut mu = vec![0.0; neighbor_positions.cols()];
    let wsum: f64 = neighbor_weights.iter().sum();
    for (j, row) in neighbor_positions.iter_rows().enumerate() {
        let wt = if wsum > 0.0 {
            neighbor_weights[j] / wsum
        } else {
            1.0 / k as f64
        };
        for (m, &x) in mu.iter_mut().zip(row) {
            *m += wt * x;
        }
    }
    mu
}

/// One synchronous mean-shift iteration over the whole cloud: records
/// δ_i = ‖x_i − μ_i‖, adds it to D_i, and moves each point by
/// η·δ_i·(μ_i − x_i)/(δ_i + eps_stab), all from the pre-step positions.
pub fn shift_step(
    state: &mut ShiftState,
    graph: &NeighborGraph,
    weights: &[f64],
    cfg: &ShiftConfig,
) -> Result<()> {
    let n = state.positions.rows();
    let d = state.positions.cols();
    assert_eq!(graph.n(), n);
    assert_eq!(weights.len(), n);

    let prev = &state.positions;
    let results: Vec<(Vec<f64>, f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let x = prev.row(i);
            let nbrs = graph.neighbors(i);
            // same arithmetic as weighted_mean: normalize, then accumulate
            // in neighbor order
            let mut wsum = 0.0;
            for &j in nbrs {
                wsum += weights[j as usize];
            }
            let mut mu = vec![0.0; d];
            for &j in nbrs {
                let wt = if wsum > 0.0 {
                    weights[j as usize] / wsum
                } else {
                    1.0 / nbrs.len() as f64
                };
                for (m, &v) in mu.iter_mut().zip(prev.row(j as usize)) {
                    *m += wt * v;
                }
            }
            let delta = euclidean(x, &mu);
            let scale = cfg.learning_rate * delta / (delta + cfg.eps_stab);
            let next: Vec<f64> = x
                .iter()
                .zip(&mu)
                .map(|(&xv, &mv)| xv + scale * (mv - xv))
                .collect();
            (next, delta)
        })
        .collect();

    let mut next = Matrix::zeros(n, d);
    let mut deltas = Vec::with_capacity(n);
    for (i, (row, delta)) in results.into_iter().enumerate() {
        if !delta.is_finite() || row.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index: i });
        }
        next.row_mut(i).copy_from_slice(&row);
        state.cumulative[i] += delta;
        deltas.push(delta);
    }
    state.positions = next.clone();
    state.snapshots.push(next);
    state.per_iter_delta.push(deltas);
    state.iterations_run += 1;
    Ok(())
}

/// The full mean-shift loop: for up to `max_iters_shift` iterations, rebuild
/// the kNN graph on the current positions (small-N rule), apply one step,
/// and stop early once the mean δ of an iteration falls below the shift
/// threshold. Weights are estimated once on the original data and never
/// revisited.
pub fn run_meanshift(
    data: &Dataset,
    weights: &DensityWeights,
    cfg: &ShiftConfig,
    seed: RngSeed,
) -> Result<ShiftState> {
    cfg.validate()?;
    let n = data.n();
    if cfg.k >= n {
        return Err(Error::param(
            "k",
            format!("k = {} must be smaller than the number of rows ({n})", cfg.k),
        ));
    }
    if weights.w.len() != n {
        return Err(Error::param("weights", "length does not match the dataset"));
    }

    let mut state = ShiftState::new(data.values.clone());
    for t in 0..cfg.max_iters_shift {
        let graph = knn_graph(&state.positions, cfg.k, seed.derive(t as u64))?;
        shift_step(&mut state, &graph, &weights.w, cfg)?;
        let deltas = &state.per_iter_delta[t];
        let mean_delta: f64 = deltas.iter().sum::<f64>() / n as f64;
        if mean_delta < cfg.shift_threshold {
            state.converged_early = true;
            break;
        }
    }
    Ok(state)
}

/// Map cumulative displacements to anomaly scores: z-score with population
/// std, then the logistic sigmoid. Zero variance yields 0.5 everywhere.
/// Scores are clamped into the open interval (0, 1); the ranking sorts by
/// descending score with ties broken by ascending row index.
pub fn score(state: &ShiftState) -> AnomalyScores {
    let d = &state.cumulative;
    let n = d.len();
    let mean: f64 = d.iter().sum::<f64>() / n as f64;
    let var: f64 = d.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    // a constant vector must score 0.5 everywhere even when the rounded
    // mean leaves a nonzero residual variance
    let constant = d.iter().all(|&v| v == d[0]);
    let std = var.sqrt();

    let scores: Vec<f64> = d
        .iter()
        .map(|&v| {
            if std == 0.0 || constant {
                0.5
            } else {
                let z = (v - mean) / std;
                let s = 1.0 / (1.0 + (-z).exp());
                s.clamp(f64::MIN_POSITIVE, 1.0f64.next_down())
            }
        })
        .collect();

    let mut ranking: Vec<u32> = (0..n as u32).collect();
    ranking.sort_by(|&a, &b| {
        scores[b as usize]
            .total_cmp(&scores[a as usize])
            .then(a.cmp(&b))
    });

    AnomalyScores {
        scores,
        displacement: d.clone(),
        ranking,
    }
}
