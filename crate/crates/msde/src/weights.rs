//! Per-sample density weights from batched fuzzy graphs.
//!
//! Each batch is turned into a fuzzy similarity space where every point is
//! its membership row. A bisection finds the smallest radius ε at which a
//! proportion α of the batch has more than `nbd_sample_count_threshold`
//! similarity-space neighbors, and the weight of a sample is its neighbor
//! count averaged over m uniformly decreasing radii ε_r = ε − (r−1)Δ with
//! Δ = (ε − 10⁻⁶)/m.

use std::io::Write;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::dataset::{euclidean, Dataset, Matrix, RngSeed};
use crate::error::{Error, Result};
use crate::fuzzygraph::{build_fuzzy_graph, similarity_rows_sparse, sparse_row_distance, FuzzyGraph};
use crate::neighbors::max_pairwise_by;

/// Smallest radius the multi-radius schedule may reach; ε at or below this
/// is degenerate and the weights fall back to uniform.
pub const EPSILON_FLOOR: f64 = 1e-6;

const BISECTION_ITERS: usize = 40;

/// Weight-estimation parameters. Field names follow the CLI flags; the
/// defaults are the library defaults (threshold 70, proportion 0.3,
/// 4 radii, batches of 4096, 100-neighbor fuzzy graphs).
#[derive(Debug, Clone)]
pub struct WeightConfig {
    /// T_nbd: a point is "dense enough" at radius ε when strictly more than
    /// this many points sit within ε of it in similarity space.
    pub nbd_sample_count_threshold: usize,
    /// α: fraction of the batch that must be dense enough at the chosen ε.
    pub satisfiability_proportion: f64,
    /// m: number of radii averaged into each weight.
    pub max_iters_weight_count: usize,
    pub batch_size: usize,
    /// Neighbor count for the per-batch fuzzy graph, capped at B−1.
    pub k_graph: usize,
}

impl Default for WeightConfig {
    fn default() -> Self {
        WeightConfig {
            nbd_sample_count_threshold: 70,
            satisfiability_proportion: 0.3,
            max_iters_weight_count: 4,
            batch_size: 4096,
            k_graph: 100,
        }
    }
}

impl WeightConfig {
    pub fn validate(&self) -> Result<()> {
        if self.nbd_sample_count_threshold == 0 {
            return Err(Error::param("nbd_sample_count_threshold", "must be positive"));
        }
        let a = self.satisfiability_proportion;
        if !(a > 0.0 && a <= 1.0) {
            return Err(Error::param("satisfiability_proportion", "must be in (0, 1]"));
        }
        if self.max_iters_weight_count == 0 {
            return Err(Error::param("max_iters_weight_count", "must be positive"));
        }
        if self.batch_size < 4 {
            return Err(Error::param("batch_size", "must be at least 4"));
        }
        if self.k_graph < 2 {
            return Err(Error::param("k_graph", "must be at least 2"));
        }
        Ok(())
    }
}

/// Outcome of the ε search for one batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadiusSearch {
    pub epsilon: f64,
    /// The threshold/proportion pair was halved once before a radius was found.
    pub relaxed: bool,
    /// Even the relaxed condition was unsatisfiable; ε is the maximum
    /// observed distance.
    pub fallback: bool,
}

/// Multi-radius counting result for one batch.
#[derive(Debug, Clone)]
pub struct RadiusWeights {
    pub w: Vec<f64>,
    /// ε was at or below the floor; weights are uniform 1.
    pub degenerate: bool,
}

/// Per-batch diagnostics recorded alongside the assembled weights.
#[derive(Debug, Clone)]
pub struct BatchSummary {
    pub size: usize,
    pub epsilon: f64,
    pub relaxed: bool,
    pub fallback: bool,
    pub degenerate: bool,
}

/// Density weights for the full dataset, in original row order.
#[derive(Debug, Clone)]
pub struct DensityWeights {
    pub w: Vec<f64>,
    /// Batch id per row.
    pub batch_of: Vec<u32>,
    pub batches: Vec<BatchSummary>,
}

impl DensityWeights {
    /// Uniform weights; what the mean shift sees when weighting is disabled
    /// or degenerate.
    pub fn uniform(n: usize) -> Self {
        DensityWeights {
            w: vec![1.0; n],
            batch_of: vec![0; n],
            batches: vec![BatchSummary {
                size: n,
                epsilon: 0.0,
                relaxed: false,
                fallback: false,
                degenerate: true,
            }],
        }
    }

    pub fn write_csv(&self, out: &mut impl Write) -> std::io::Result<()> {
        writeln!(out, "row_index,weight,batch_id")?;
        for (i, (w, b)) in self.w.iter().zip(&self.batch_of).enumerate() {
            writeln!(out, "{i},{w},{b}")?;
        }
        Ok(())
    }
}

/// Pairwise distances in a similarity space, one sorted row per point.
/// Counting neighbors within a radius is a binary search per row.
pub(crate) struct SimDistances {
    sorted: Matrix,
    eps_max: f64,
}

impl SimDistances {
    /// Distances are symmetric bit-for-bit (fixed accumulation order), so
    /// only the upper triangle is computed and the lower half is mirrored.
    fn from_upper(b: usize, dist: impl Fn(usize, usize) -> f64 + Sync) -> Self {
        let mut mat = Matrix::zeros(b, b);
        let rows: Vec<Vec<f64>> = (0..b)
            .into_par_iter()
            .map(|i| (i + 1..b).map(|j| dist(i, j)).collect())
            .collect();
        for (i, row) in rows.into_iter().enumerate() {
            mat.row_mut(i)[i + 1..].copy_from_slice(&row);
        }
        for i in 0..b {
            for j in i + 1..b {
                let v = mat.get(i, j);
                mat.set(j, i, v);
            }
        }
        Self::finish(mat)
    }

    pub(crate) fn from_points(points: &Matrix) -> Self {
        Self::from_upper(points.rows(), |i, j| euclidean(points.row(i), points.row(j)))
    }

    pub(crate) fn from_fuzzy(graph: &FuzzyGraph) -> Self {
        let sim = similarity_rows_sparse(graph);
        Self::from_upper(graph.len(), |i, j| sparse_row_distance(&sim[i], &sim[j]))
    }

    fn finish(mut mat: Matrix) -> Self {
        let b = mat.rows();
        // same semantics as max_pairwise_distance: exact up to 4096 points,
        // seeded pair sample above
        let eps_max = if b < 2 {
            0.0
        } else {
            max_pairwise_by(b, |i, j| mat.get(i, j))
        };
        let cols = mat.cols();
        mat.as_mut_slice()
            .par_chunks_mut(cols)
            .for_each(|row| row.sort_unstable_by(f64::total_cmp));
        SimDistances { sorted: mat, eps_max }
    }

    #[inline]
    pub(crate) fn len(&self) -> usize {
        self.sorted.rows()
    }

    /// #{j : d(i, j) < radius}, the query point included at distance 0.
    #[inline]
    pub(crate) fn count(&self, i: usize, radius: f64) -> usize {
        self.sorted.row(i).partition_point(|&d| d < radius)
    }

    fn satisfied(&self, epsilon: f64, threshold: usize) -> usize {
        (0..self.len())
            .filter(|&i| self.count(i, epsilon) > threshold)
            .count()
    }

    pub(crate) fn eps_max(&self) -> f64 {
        self.eps_max
    }
}

fn ceil_needed(alpha: f64, b: usize) -> usize {
    ((alpha * b as f64).ceil() as usize).max(1)
}

pub(crate) fn find_radius_from(sim: &SimDistances, cfg: &WeightConfig) -> RadiusSearch {
    let b = sim.len();
    let eps_max = sim.eps_max();
    // all-duplicate batches have eps_max = 0; probe a unit interval so the
    // bisection can still close in on the feasibility floor
    let probe_hi = if eps_max > 0.0 { eps_max } else { 1.0 };

    let mut threshold = cfg.nbd_sample_count_threshold;
    let mut alpha = cfg.satisfiability_proportion;
    let mut relaxed = false;

    for _ in 0..2 {
        let needed = ceil_needed(alpha, b);
        if sim.satisfied(probe_hi, threshold) >= needed {
            // the satisfied count is monotone in ε, so bisection is sound
            let mut lo = 0.0f64;
            let mut hi = probe_hi;
            for _ in 0..BISECTION_ITERS {
                let mid = 0.5 * (lo + hi);
                if sim.satisfied(mid, threshold) >= needed {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return RadiusSearch {
                epsilon: hi,
                relaxed,
                fallback: false,
            };
        }
        // relax once: halve the threshold and the required proportion
        threshold = threshold.div_ceil(2);
        alpha /= 2.0;
        relaxed = true;
    }

    RadiusSearch {
        epsilon: eps_max,
        relaxed: true,
        fallback: true,
    }
}

/// Smallest ε at which at least ⌈α·B⌉ points have more than T_nbd
/// similarity-space neighbors, by 40-iteration bisection on (0, ε_max].
/// Unsatisfiable conditions are relaxed once (threshold and proportion
/// halved); if still unsatisfiable, ε_max itself is returned with
/// `fallback` set.
pub fn find_radius(sim_points: &Matrix, cfg: &WeightConfig) -> Result<RadiusSearch> {
    if sim_points.rows() < 2 {
        return Err(Error::param("sim_points", "need at least 2 points"));
    }
    cfg.validate()?;
    Ok(find_radius_from(&SimDistances::from_points(sim_points), cfg))
}

pub(crate) fn multi_radius_from(
    sim: &SimDistances,
    epsilon: f64,
    cfg: &WeightConfig,
) -> RadiusWeights {
    let b = sim.len();
    let m = cfg.max_iters_weight_count;
    if epsilon <= EPSILON_FLOOR {
        return RadiusWeights {
            w: vec![1.0; b],
            degenerate: true,
        };
    }
    let delta = (epsilon - EPSILON_FLOOR) / m as f64;
    let radii: Vec<f64> = (0..m).map(|r| epsilon - r as f64 * delta).collect();
    let w = (0..b)
        .map(|i| radii.iter().map(|&r| sim.count(i, r)).sum::<usize>() as f64 / m as f64)
        .collect();
    RadiusWeights { w, degenerate: false }
}

/// Average neighbor count over the m-radius schedule for every point.
/// A degenerate ε (≤ 10⁻⁶) yields uniform weights with the flag set, so the
/// mean shift degrades gracefully to its unweighted form.
pub fn multi_radius_weights(
    sim_points: &Matrix,
    epsilon: f64,
    cfg: &WeightConfig,
) -> Result<RadiusWeights> {
    cfg.validate()?;
    Ok(multi_radius_from(
        &SimDistances::from_points(sim_points),
        epsilon,
        cfg,
    ))
}

/// Estimate density weights for a dataset: seeded shuffle, contiguous
/// batches (a trailing batch shorter than half the batch size is merged
/// into its predecessor), fuzzy graph → radius search → multi-radius
/// counting per batch, weights gathered back into original row order.
///
/// Data that fits in a single batch skips the shuffle, so the result is
/// independent of the seed whenever the exact kNN path applies.
pub fn compute_weights(data: &Dataset, cfg: &WeightConfig, seed: RngSeed) -> Result<DensityWeights> {
    cfg.validate()?;
    let n = data.n();
    if n < 2 {
        return Err(Error::param("data", "need at least 2 rows"));
    }

    let mut order: Vec<usize> = (0..n).collect();
    if n > cfg.batch_size {
        order.shuffle(&mut seed.derive(0x73687566).rng());
    }

    let mut bounds: Vec<usize> = (0..n).step_by(cfg.batch_size).collect();
    bounds.push(n);
    if bounds.len() > 2 {
        let last = bounds.len() - 2;
        if n - bounds[last] < cfg.batch_size / 2 {
            bounds.remove(last);
        }
    }

    let mut w = vec![0.0; n];
    let mut batch_of = vec![0u32; n];
    let mut batches = Vec::with_capacity(bounds.len() - 1);

    for (batch_id, pair) in bounds.windows(2).enumerate() {
        let members = &order[pair[0]..pair[1]];
        let b = members.len();
        let k_graph = cfg.k_graph.min(b - 1);
        if k_graph < 2 {
            return Err(Error::param(
                "batch_size",
                format!("batch of {b} rows is too small for a fuzzy graph"),
            ));
        }
        let rows: Vec<Vec<f64>> = members.iter().map(|&i| data.values.row(i).to_vec()).collect();
        let batch = Matrix::from_rows(&rows);

        let graph = build_fuzzy_graph(&batch, k_graph, seed.derive(batch_id as u64))?;
        let sim = SimDistances::from_fuzzy(&graph);
        let search = find_radius_from(&sim, cfg);
        let rw = multi_radius_from(&sim, search.epsilon, cfg);

        for (local, &global) in members.iter().enumerate() {
            w[global] = rw.w[local];
            batch_of[global] = batch_id as u32;
        }
        batches.push(BatchSummary {
            size: b,
            epsilon: search.epsilon,
            relaxed: search.relaxed,
            fallback: search.fallback,
            degenerate: rw.degenerate,
        });
    }

    Ok(DensityWeights { w, batch_of, batches })
}
