//! Fuzzy neighborhood graph over a batch of points.
//!
//! This is the graph-construction stage of UMAP, used here purely as a
//! similarity space: per-point exponential kernels are calibrated so that
//! each point's kernel mass over its k neighbors equals log₂(k), and the
//! directed weights are symmetrized with the probabilistic t-conorm
//! `g = a + aᵀ − a ∘ aᵀ`. No embedding is ever optimized.
//!
//! Memberships are stored sparse (at most 2·k·B nonzeros) but are
//! contractually equivalent to a dense symmetric B×B matrix with zero
//! diagonal and entries in [0, 1].

use std::io::Write;

use rayon::prelude::*;

use crate::dataset::{Matrix, RngSeed};
use crate::error::{Error, Result};
use crate::neighbors::knn_graph;

const SIGMA_LO: f64 = 1e-12;
const SIGMA_HI: f64 = 1e6;
const SIGMA_ITERS: usize = 64;
const SUM_TOLERANCE: f64 = 1e-5;

/// Symmetric fuzzy membership graph over a batch of B points.
#[derive(Debug, Clone)]
pub struct FuzzyGraph {
    b: usize,
    k_graph: usize,
    /// Per-row nonzeros, sorted by column; symmetric, zero diagonal.
    rows: Vec<Vec<(u32, f64)>>,
    pub rho: Vec<f64>,
    pub sigma: Vec<f64>,
}

/// A point's coordinates in the similarity space: its membership row with
/// self-membership fixed at 1, scaled to unit length. The unit diagonal
/// makes duplicate points coincide (identical vectors, distance 0), and the
/// normalization makes distances measure membership *profiles* rather than
/// total edge mass — without it, sparse points with few incoming edges
/// carry systematically shorter rows and end up closer to everything,
/// inverting every density count.
fn similarity_row(graph: &FuzzyGraph, i: usize) -> Vec<(u32, f64)> {
    let row = graph.row(i);
    let at = row.partition_point(|e| (e.0 as usize) < i);
    let mut out = Vec::with_capacity(row.len() + 1);
    out.extend_from_slice(&row[..at]);
    out.push((i as u32, 1.0));
    out.extend_from_slice(&row[at..]);
    let norm = out.iter().map(|&(_, v)| v * v).sum::<f64>().sqrt();
    for (_, v) in &mut out {
        *v /= norm;
    }
    out
}

impl FuzzyGraph {
    #[inline]
    pub fn len(&self) -> usize {
        self.b
    }

    pub fn is_empty(&self) -> bool {
        self.b == 0
    }

    #[inline]
    pub fn k_graph(&self) -> usize {
        self.k_graph
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[(u32, f64)] {
        &self.rows[i]
    }

    /// Dense-equivalent accessor.
    pub fn membership(&self, i: usize, j: usize) -> f64 {
        match self.rows[i].binary_search_by_key(&(j as u32), |e| e.0) {
            Ok(at) => self.rows[i][at].1,
            Err(_) => 0.0,
        }
    }

    /// Debug dump as a 3-column edge list CSV, one line per undirected edge.
    pub fn write_edge_list(&self, out: &mut impl Write) -> std::io::Result<()> {
        writeln!(out, "i,j,g_ij")?;
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, g) in row {
                if (j as usize) > i {
                    writeln!(out, "{i},{j},{g}")?;
                }
            }
        }
        Ok(())
    }
}

/// Calibrate the kernel offset and bandwidth for one point from its sorted
/// kNN distances: rho is the smallest strictly positive distance (0 when all
/// are zero) and sigma solves Σ_j exp(−max(0, d_j − rho)/sigma) = log₂(k) by
/// bisection. When every distance equals rho the sum saturates at k and
/// sigma pins to the lower bracket.
pub fn smooth_knn_calibrate(distances: &[f64], k: usize) -> Result<(f64, f64)> {
    if k < 2 || distances.len() != k {
        return Err(Error::param("k", "need at least 2 sorted neighbor distances"));
    }
    if distances.iter().any(|d| d.is_nan() || *d < 0.0) {
        return Err(Error::param("distances", "must be nonnegative"));
    }
    if distances.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::param("distances", "must be sorted ascending"));
    }

    let rho = distances.iter().copied().find(|&d| d > 0.0).unwrap_or(0.0);
    let target = (k as f64).log2();

    let kernel_sum = |sigma: f64| -> f64 {
        distances
            .iter()
            .map(|&d| (-((d - rho).max(0.0)) / sigma).exp())
            .sum()
    };

    let mut lo = SIGMA_LO;
    let mut hi = SIGMA_HI;
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..SIGMA_ITERS {
        mid = 0.5 * (lo + hi);
        let sum = kernel_sum(mid);
        if (sum - target).abs() < SUM_TOLERANCE {
            break;
        }
        if sum > target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok((rho, mid))
}

/// Probabilistic union of two directed memberships. Written in complemented
/// form so the result stays in [0, 1] and is bit-symmetric in its arguments.
#[inline]
pub(crate) fn fuzzy_union(a: f64, b: f64) -> f64 {
    1.0 - (1.0 - a) * (1.0 - b)
}

/// Build the fuzzy graph over a batch: kNN (via the small-N rule), per-point
/// smooth-kNN calibration, directed kernel weights, probabilistic union.
pub fn build_fuzzy_graph(batch: &Matrix, k_graph: usize, seed: RngSeed) -> Result<FuzzyGraph> {
    let b = batch.rows();
    if k_graph < 2 {
        return Err(Error::param("k_graph", "must be at least 2"));
    }
    if k_graph >= b {
        return Err(Error::param(
            "k_graph",
            format!("k_graph = {k_graph} must be smaller than the batch size ({b})"),
        ));
    }

    let graph = knn_graph(batch, k_graph, seed)?;

    let calib: Vec<(f64, f64)> = (0..b)
        .into_par_iter()
        .map(|i| smooth_knn_calibrate(graph.distances(i), k_graph))
        .collect::<Result<_>>()?;

    // directed weights a_ij over the kNN edges, rows sorted by column
    let directed: Vec<Vec<(u32, f64)>> = (0..b)
        .into_par_iter()
        .map(|i| {
            let (rho, sigma) = calib[i];
            let mut row: Vec<(u32, f64)> = graph
                .neighbors(i)
                .iter()
                .zip(graph.distances(i))
                .map(|(&j, &d)| (j, (-((d - rho).max(0.0)) / sigma).exp()))
                .filter(|&(_, a)| a > 0.0)
                .collect();
            row.sort_unstable_by_key(|e| e.0);
            row
        })
        .collect();

    let lookup = |i: usize, j: usize| -> Option<f64> {
        directed[i]
            .binary_search_by_key(&(j as u32), |e| e.0)
            .ok()
            .map(|at| directed[i][at].1)
    };

    // union computed once per unordered pair, mirrored into both rows
    let mut rows: Vec<Vec<(u32, f64)>> = vec![Vec::new(); b];
    for i in 0..b {
        for &(jc, a) in &directed[i] {
            let j = jc as usize;
            if j > i {
                let g = fuzzy_union(a, lookup(j, i).unwrap_or(0.0));
                rows[i].push((jc, g));
                rows[j].push((i as u32, g));
            } else if lookup(j, i).is_none() {
                let g = fuzzy_union(a, 0.0);
                rows[j].push((i as u32, g));
                rows[i].push((jc, g));
            }
        }
    }
    for row in &mut rows {
        row.sort_unstable_by_key(|e| e.0);
    }

    let (rho, sigma) = calib.into_iter().unzip();
    Ok(FuzzyGraph {
        b,
        k_graph,
        rows,
        rho,
        sigma,
    })
}

/// Materialize the similarity vectors as a dense B×B matrix: row i is the
/// unit-normalized membership row of point i with self-membership 1 on the
/// diagonal. These rows are the points fed to radius counting during weight
/// estimation.
pub fn similarity_vectors(graph: &FuzzyGraph) -> Matrix {
    let b = graph.len();
    let mut out = Matrix::zeros(b, b);
    for (i, row) in similarity_rows_sparse(graph).into_iter().enumerate() {
        for (j, g) in row {
            out.set(i, j as usize, g);
        }
    }
    out
}

/// Sparse similarity vectors (see [`similarity_vectors`]); same rows,
/// nonzeros only.
pub(crate) fn similarity_rows_sparse(graph: &FuzzyGraph) -> Vec<Vec<(u32, f64)>> {
    (0..graph.len()).map(|i| similarity_row(graph, i)).collect()
}

/// Euclidean distance between two sparse membership rows, accumulating in
/// column order. Bit-identical to the dense left-to-right computation:
/// zero terms contribute exactly nothing to the running sum.
pub(crate) fn sparse_row_distance(a: &[(u32, f64)], b: &[(u32, f64)]) -> f64 {
    let mut sum = 0.0f64;
    let (mut ia, mut ib) = (0usize, 0usize);
    while ia < a.len() && ib < b.len() {
        let (ca, va) = a[ia];
        let (cb, vb) = b[ib];
        let d = match ca.cmp(&cb) {
            std::cmp::Ordering::Less => {
                ia += 1;
                va
            }
            std::cmp::Ordering::Greater => {
                ib += 1;
                -vb
            }
            std::cmp::Ordering::Equal => {
                ia += 1;
                ib += 1;
                va - vb
            }
        };
        sum += d * d;
    }
    for &(_, v) in &a[ia..] {
        sum += v * v;
    }
    for &(_, v) in &b[ib..] {
        sum += v * v;
    }
    sum.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::euclidean;
    use rand::Rng;

    fn random_batch(b: usize, d: usize, seed: u64) -> Matrix {
        let mut rng = RngSeed(seed).rng();
        let data: Vec<f64> = (0..b * d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        Matrix::from_vec(data, b, d)
    }

    #[test]
    fn calibrate_all_equal_distances_saturates() {
        let (rho, sigma) = smooth_knn_calibrate(&[1.0, 1.0, 1.0, 1.0], 4).unwrap();
        assert_eq!(rho, 1.0);
        // sum is pinned at 4 regardless of sigma; bisection collapses to the
        // lower bracket
        assert!(sigma < 1e-9, "sigma {sigma}");
    }

    #[test]
    fn calibrate_matches_dense_scan() {
        let dists = [1.0, 2.0, 3.0, 4.0];
        let (rho, sigma) = smooth_knn_calibrate(&dists, 4).unwrap();
        assert_eq!(rho, 1.0);
        let sum: f64 = dists.iter().map(|d| (-((d - rho).max(0.0)) / sigma).exp()).sum();
        assert!((sum - 2.0).abs() < 1e-3, "sum {sum}");

        // independent oracle: dense 1-D scan for the root
        let mut best = f64::INFINITY;
        let mut best_sigma = 0.0;
        for step in 1..200_000 {
            let s = step as f64 * 1e-4;
            let sum: f64 = dists.iter().map(|d| (-((d - rho).max(0.0)) / s).exp()).sum();
            if (sum - 2.0).abs() < best {
                best = (sum - 2.0).abs();
                best_sigma = s;
            }
        }
        assert!((sigma - best_sigma).abs() < 1e-3, "{sigma} vs {best_sigma}");
    }

    #[test]
    fn calibrate_rho_skips_zeros() {
        let (rho, _) = smooth_knn_calibrate(&[0.0, 0.0, 0.0, 1.0], 4).unwrap();
        assert_eq!(rho, 1.0);
        let (rho, _) = smooth_knn_calibrate(&[0.0, 0.0, 0.0, 0.0], 4).unwrap();
        assert_eq!(rho, 0.0);
    }

    #[test]
    fn calibrate_rejects_bad_input() {
        assert!(smooth_knn_calibrate(&[2.0, 1.0], 2).is_err());
        assert!(smooth_knn_calibrate(&[-1.0, 1.0], 2).is_err());
        assert!(smooth_knn_calibrate(&[1.0], 1).is_err());
    }

    #[test]
    fn union_arithmetic() {
        assert!((fuzzy_union(0.5, 0.2) - 0.6).abs() < 1e-15);
        assert_eq!(fuzzy_union(1.0, 1.0), 1.0);
        assert_eq!(fuzzy_union(1.0, 0.0), 1.0);
    }

    #[test]
    fn graph_invariants_on_random_batch() {
        let batch = random_batch(20, 2, 42);
        let g = build_fuzzy_graph(&batch, 5, RngSeed(0)).unwrap();

        for i in 0..20 {
            assert_eq!(g.membership(i, i), 0.0);
            for j in 0..20 {
                let v = g.membership(i, j);
                assert!((0.0..=1.0).contains(&v));
                assert_eq!(v.to_bits(), g.membership(j, i).to_bits(), "({i},{j})");
            }
        }

        // pre-union kernel-sum constraint, rechecked from the same kNN graph
        let knn = knn_graph(&batch, 5, RngSeed(0)).unwrap();
        for i in 0..20 {
            let sum: f64 = knn
                .distances(i)
                .iter()
                .map(|&d| (-((d - g.rho[i]).max(0.0)) / g.sigma[i]).exp())
                .sum();
            assert!((sum - 5f64.log2()).abs() < 1e-3, "row {i}: {sum}");
        }
    }

    #[test]
    fn graph_rejects_bad_k() {
        let batch = random_batch(10, 2, 1);
        assert!(build_fuzzy_graph(&batch, 1, RngSeed(0)).is_err());
        assert!(build_fuzzy_graph(&batch, 10, RngSeed(0)).is_err());
    }

    #[test]
    fn similarity_vectors_are_scaled_membership_rows() {
        let batch = random_batch(15, 3, 7);
        let g = build_fuzzy_graph(&batch, 4, RngSeed(1)).unwrap();
        let sim = similarity_vectors(&g);
        for i in 0..15 {
            // unit length, self-membership on the diagonal, and every other
            // coordinate proportional to the membership row
            let norm: f64 = sim.row(i).iter().map(|v| v * v).sum::<f64>();
            assert!((norm - 1.0).abs() < 1e-12);
            let scale = sim.get(i, i);
            assert!(scale > 0.0);
            for j in 0..15 {
                if i != j {
                    let expect = g.membership(i, j) * scale;
                    assert!((sim.get(i, j) - expect).abs() < 1e-12, "({i},{j})");
                }
            }
        }
    }

    #[test]
    fn sparse_distance_matches_dense() {
        let batch = random_batch(20, 2, 3);
        let g = build_fuzzy_graph(&batch, 5, RngSeed(5)).unwrap();
        let sparse_rows = similarity_rows_sparse(&g);
        let sim = similarity_vectors(&g);
        for i in 0..20 {
            for j in 0..20 {
                let sparse = sparse_row_distance(&sparse_rows[i], &sparse_rows[j]);
                let dense = euclidean(sim.row(i), sim.row(j));
                assert_eq!(sparse.to_bits(), dense.to_bits(), "({i},{j})");
            }
        }
    }

    #[test]
    fn duplicate_points_have_identical_similarity_rows() {
        // rows 0 and 1 are exact duplicates and k covers every other point,
        // so no neighbor list can split the tied pair. Mutual membership is 1,
        // the unit diagonal makes columns 0 and 1 agree, and everything else
        // coincides: the similarity rows are identical at distance 0.
        let rows: Vec<Vec<f64>> = vec![
            vec![0.5, 0.5],
            vec![0.5, 0.5],
            vec![1.5, 0.2],
            vec![-0.3, 0.9],
            vec![0.1, -1.2],
            vec![0.8, 1.1],
        ];
        let batch = Matrix::from_rows(&rows);
        let g = build_fuzzy_graph(&batch, 5, RngSeed(2)).unwrap();
        assert_eq!(g.membership(0, 1), 1.0);
        let sim = similarity_vectors(&g);
        for j in 0..6 {
            assert_eq!(sim.get(0, j).to_bits(), sim.get(1, j).to_bits());
        }
        let sparse = similarity_rows_sparse(&g);
        assert_eq!(sparse_row_distance(&sparse[0], &sparse[1]), 0.0);
    }

    #[test]
    fn permuting_batch_conjugates_graph() {
        let batch = random_batch(30, 3, 19);
        let n = batch.rows();
        let perm: Vec<usize> = (0..n).rev().collect();
        let permuted_rows: Vec<Vec<f64>> = perm.iter().map(|&i| batch.row(i).to_vec()).collect();
        let permuted = Matrix::from_rows(&permuted_rows);

        let g = build_fuzzy_graph(&batch, 6, RngSeed(0)).unwrap();
        let h = build_fuzzy_graph(&permuted, 6, RngSeed(0)).unwrap();
        for i in 0..n {
            for j in 0..n {
                let a = g.membership(i, j);
                let b = h.membership(n - 1 - i, n - 1 - j);
                assert_eq!(a.to_bits(), b.to_bits(), "({i},{j})");
            }
        }
    }

    #[test]
    fn edge_list_dump_has_header_and_edges() {
        let batch = random_batch(10, 2, 4);
        let g = build_fuzzy_graph(&batch, 3, RngSeed(0)).unwrap();
        let mut buf = Vec::new();
        g.write_edge_list(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("i,j,g_ij"));
        assert!(lines.count() > 0);
    }
}
