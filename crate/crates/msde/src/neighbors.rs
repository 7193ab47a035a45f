//! k-nearest-neighbor graphs and fixed-radius counting.
//!
//! Two graph constructions share one output type: an exact O(N²) scan and
//! NN-Descent ("a neighbor of a neighbor is likely also a neighbor"), the
//! near-linear approximate builder used once the dataset outgrows the exact
//! path. [`knn_graph`] picks between them with the small-N rule.
//!
//! Distance ties are always broken by ascending point index so that every
//! construction is deterministic.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use crate::dataset::{euclidean, Matrix, RngSeed};
use crate::error::{Error, Result};

/// Per-point list of the k nearest neighbor indices and distances,
/// rows sorted by (distance, index), self-loops excluded.
#[derive(Debug, Clone)]
pub struct NeighborGraph {
    n: usize,
    k: usize,
    indices: Vec<u32>,
    distances: Vec<f64>,
}

impl NeighborGraph {
    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn k(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn neighbors(&self, i: usize) -> &[u32] {
        &self.indices[i * self.k..(i + 1) * self.k]
    }

    #[inline]
    pub fn distances(&self, i: usize) -> &[f64] {
        &self.distances[i * self.k..(i + 1) * self.k]
    }

    /// Fraction of true nearest neighbors recovered, averaged over points.
    pub fn recall_against(&self, exact: &NeighborGraph) -> f64 {
        assert_eq!(self.n, exact.n);
        assert_eq!(self.k, exact.k);
        let mut hits = 0usize;
        for i in 0..self.n {
            let truth: std::collections::HashSet<u32> =
                exact.neighbors(i).iter().copied().collect();
            hits += self.neighbors(i).iter().filter(|j| truth.contains(j)).count();
        }
        hits as f64 / (self.n * self.k) as f64
    }
}

fn check_k(k: usize, n: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::param("k", "must be positive"));
    }
    if k >= n {
        return Err(Error::param(
            "k",
            format!("k = {k} must be smaller than the number of points ({n})"),
        ));
    }
    Ok(())
}

/// True k nearest neighbors per point under Euclidean distance,
/// ties broken by smaller index. O(N² d).
pub fn knn_exact(points: &Matrix, k: usize) -> Result<NeighborGraph> {
    let n = points.rows();
    check_k(k, n)?;

    let rows: Vec<(Vec<u32>, Vec<f64>)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut cand: Vec<(f64, u32)> = Vec::with_capacity(n - 1);
            let qi = points.row(i);
            for j in 0..n {
                if j == i {
                    continue;
                }
                cand.push((euclidean(qi, points.row(j)), j as u32));
            }
            cand.select_nth_unstable_by(k - 1, |a, b| {
                a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
            });
            cand.truncate(k);
            cand.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let idx: Vec<u32> = cand.iter().map(|c| c.1).collect();
            let dst: Vec<f64> = cand.iter().map(|c| c.0).collect();
            (idx, dst)
        })
        .collect();

    let mut indices = Vec::with_capacity(n * k);
    let mut distances = Vec::with_capacity(n * k);
    for (idx, dst) in rows {
        indices.extend_from_slice(&idx);
        distances.extend_from_slice(&dst);
    }
    Ok(NeighborGraph { n, k, indices, distances })
}

/// Tuning knobs for NN-Descent. Defaults follow common practice:
/// sample half of the candidate lists per round, stop after 10 rounds or
/// when fewer than 0.1% of the neighbor entries changed in a round.
#[derive(Debug, Clone)]
pub struct NnDescentParams {
    pub max_rounds: usize,
    pub sample_rate: f64,
}

impl Default for NnDescentParams {
    fn default() -> Self {
        NnDescentParams {
            max_rounds: 10,
            sample_rate: 0.5,
        }
    }
}

const NNDESCENT_CONVERGENCE: f64 = 0.001;

/// Max-heap over (distance, index) with fixed capacity k, tracking the
/// NN-Descent "new" flag per entry. Worst candidate sits at the root.
#[derive(Clone)]
struct CandidateHeap {
    dist: Vec<f64>,
    idx: Vec<u32>,
    new: Vec<bool>,
    k: usize,
}

impl CandidateHeap {
    fn new(k: usize) -> Self {
        CandidateHeap {
            dist: Vec::with_capacity(k),
            idx: Vec::with_capacity(k),
            new: Vec::with_capacity(k),
            k,
        }
    }

    #[inline]
    fn worse(&self, a: usize, d: f64, i: u32) -> bool {
        // lexicographic (distance, index): true when entry a is worse than (d, i)
        self.dist[a] > d || (self.dist[a] == d && self.idx[a] > i)
    }

    fn insert(&mut self, d: f64, i: u32) -> bool {
        if self.dist.len() == self.k && !self.worse(0, d, i) {
            return false;
        }
        if self.idx.contains(&i) {
            return false;
        }
        if self.dist.len() < self.k {
            self.dist.push(d);
            self.idx.push(i);
            self.new.push(true);
            self.sift_up(self.dist.len() - 1);
        } else {
            self.dist[0] = d;
            self.idx[0] = i;
            self.new[0] = true;
            self.sift_down(0);
        }
        true
    }

    fn sift_up(&mut self, mut at: usize) {
        while at > 0 {
            let parent = (at - 1) / 2;
            if self.worse(at, self.dist[parent], self.idx[parent]) {
                self.swap(at, parent);
                at = parent;
            } else {
                break;
            }
        }
    }

    fn sift_down(&mut self, mut at: usize) {
        let len = self.dist.len();
        loop {
            let (l, r) = (2 * at + 1, 2 * at + 2);
            let mut biggest = at;
            if l < len && self.worse(l, self.dist[biggest], self.idx[biggest]) {
                biggest = l;
            }
            if r < len && self.worse(r, self.dist[biggest], self.idx[biggest]) {
                biggest = r;
            }
            if biggest == at {
                break;
            }
            self.swap(at, biggest);
            at = biggest;
        }
    }

    fn swap(&mut self, a: usize, b: usize) {
        self.dist.swap(a, b);
        self.idx.swap(a, b);
        self.new.swap(a, b);
    }

    fn sorted(&self) -> (Vec<u32>, Vec<f64>) {
        let mut order: Vec<usize> = (0..self.dist.len()).collect();
        order.sort_unstable_by(|&a, &b| {
            self.dist[a]
                .total_cmp(&self.dist[b])
                .then(self.idx[a].cmp(&self.idx[b]))
        });
        (
            order.iter().map(|&q| self.idx[q]).collect(),
            order.iter().map(|&q| self.dist[q]).collect(),
        )
    }
}

/// Squared Euclidean distance, same accumulation order as [`euclidean`].
/// NN-Descent ranks candidates on squares and takes the root only when the
/// finished graph is extracted.
#[inline]
fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    let mut sum = 0.0;
    for i in 0..a.len() {
        let d = a[i] - b[i];
        sum += d * d;
    }
    sum
}

/// Approximate kNN graph via NN-Descent. Deterministic for a given seed:
/// candidate generation runs in parallel but updates are applied in point
/// order, and all sampling uses per-(round, point) derived streams.
pub fn knn_nndescent(
    points: &Matrix,
    k: usize,
    seed: RngSeed,
    params: &NnDescentParams,
) -> Result<NeighborGraph> {
    let n = points.rows();
    check_k(k, n)?;
    let max_samples = ((params.sample_rate * k as f64).ceil() as usize).max(1);

    // random initialization, k distinct neighbors per point
    let mut heaps: Vec<CandidateHeap> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = seed.derive(i as u64).rng();
            let mut heap = CandidateHeap::new(k);
            let mut attempts = 0;
            while heap.dist.len() < k && attempts < 20 * k {
                let j = rng.gen_range(0..n);
                if j != i {
                    heap.insert(dist_sq(points.row(i), points.row(j)), j as u32);
                }
                attempts += 1;
            }
            // tiny n relative to k can starve random draws; finish by scan
            if heap.dist.len() < k {
                for j in 0..n {
                    if j != i {
                        heap.insert(dist_sq(points.row(i), points.row(j)), j as u32);
                    }
                }
            }
            heap
        })
        .collect();

    for round in 0..params.max_rounds {
        let round_seed = seed.derive(0x4e4e_0000 + round as u64);

        // sample new-flagged forward neighbors; sampled entries turn old
        let mut new_fwd: Vec<Vec<u32>> = Vec::with_capacity(n);
        let mut old_fwd: Vec<Vec<u32>> = Vec::with_capacity(n);
        for (i, heap) in heaps.iter_mut().enumerate() {
            let mut fresh: Vec<usize> =
                (0..heap.dist.len()).filter(|&e| heap.new[e]).collect();
            let mut rng = round_seed.derive(i as u64).rng();
            if fresh.len() > max_samples {
                fresh.shuffle(&mut rng);
                fresh.truncate(max_samples);
            }
            let mut nf: Vec<u32> = fresh.iter().map(|&e| heap.idx[e]).collect();
            for &e in &fresh {
                heap.new[e] = false;
            }
            nf.sort_unstable();
            let mut of: Vec<u32> = (0..heap.dist.len())
                .filter(|&e| !heap.new[e] && !nf.contains(&heap.idx[e]))
                .map(|e| heap.idx[e])
                .collect();
            of.sort_unstable();
            new_fwd.push(nf);
            old_fwd.push(of);
        }

        // reverse lists, sampled to the same cap
        let mut new_rev: Vec<Vec<u32>> = vec![Vec::new(); n];
        let mut old_rev: Vec<Vec<u32>> = vec![Vec::new(); n];
        for i in 0..n {
            for &j in &new_fwd[i] {
                new_rev[j as usize].push(i as u32);
            }
            for &j in &old_fwd[i] {
                old_rev[j as usize].push(i as u32);
            }
        }
        let rev_seed = round_seed.derive(0x7265_7631);
        for (j, lst) in new_rev.iter_mut().chain(old_rev.iter_mut()).enumerate() {
            if lst.len() > max_samples {
                let mut rng = rev_seed.derive(j as u64).rng();
                lst.shuffle(&mut rng);
                lst.truncate(max_samples);
                lst.sort_unstable();
            }
        }

        // local joins: every pair with at least one new member is a candidate
        let updates: Vec<Vec<(u32, f64, u32)>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut fresh = new_fwd[i].clone();
                fresh.extend_from_slice(&new_rev[i]);
                fresh.sort_unstable();
                fresh.dedup();

                let mut stale = old_fwd[i].clone();
                stale.extend_from_slice(&old_rev[i]);
                stale.sort_unstable();
                stale.dedup();

                let mut out = Vec::new();
                for (a, &u) in fresh.iter().enumerate() {
                    let pu = points.row(u as usize);
                    for &v in &fresh[a + 1..] {
                        let d = dist_sq(pu, points.row(v as usize));
                        out.push((u, d, v));
                        out.push((v, d, u));
                    }
                    for &v in &stale {
                        if v == u {
                            continue;
                        }
                        let d = dist_sq(pu, points.row(v as usize));
                        out.push((u, d, v));
                        out.push((v, d, u));
                    }
                }
                out
            })
            .collect();

        let mut changed = 0usize;
        for batch in &updates {
            for &(p, d, q) in batch {
                if heaps[p as usize].insert(d, q) {
                    changed += 1;
                }
            }
        }

        if (changed as f64) < NNDESCENT_CONVERGENCE * (n * k) as f64 {
            break;
        }
    }

    let mut indices = Vec::with_capacity(n * k);
    let mut distances = Vec::with_capacity(n * k);
    for heap in &heaps {
        let (idx, dst) = heap.sorted();
        debug_assert_eq!(idx.len(), k);
        indices.extend_from_slice(&idx);
        distances.extend(dst.into_iter().map(f64::sqrt));
    }
    Ok(NeighborGraph { n, k, indices, distances })
}

/// Small-N rule: exact search when N ≤ 256 or k ≥ N/4, NN-Descent otherwise.
/// NN-Descent's overhead and failure modes dominate at small scale.
pub fn knn_graph(points: &Matrix, k: usize, seed: RngSeed) -> Result<NeighborGraph> {
    let n = points.rows();
    check_k(k, n)?;
    if n <= 256 || 4 * k >= n {
        knn_exact(points, k)
    } else {
        knn_nndescent(points, k, seed, &NnDescentParams::default())
    }
}

// ---------------------------------------------------------------------------
// fixed-radius counting
// ---------------------------------------------------------------------------

const KDTREE_MAX_DIM: usize = 32;
const KDTREE_LEAF: usize = 16;

enum KdNode {
    Leaf {
        lo: u32,
        hi: u32,
    },
    Split {
        dim: u32,
        value: f64,
        left: u32,
        right: u32,
    },
}

struct KdTree {
    nodes: Vec<KdNode>,
    order: Vec<u32>,
    root: u32,
}

impl KdTree {
    fn build(points: &Matrix) -> Self {
        let mut order: Vec<u32> = (0..points.rows() as u32).collect();
        let mut nodes = Vec::new();
        let n = order.len();
        let root = Self::build_range(points, &mut order, &mut nodes, 0, n);
        KdTree { nodes, order, root }
    }

    fn build_range(
        points: &Matrix,
        order: &mut [u32],
        nodes: &mut Vec<KdNode>,
        offset: usize,
        len: usize,
    ) -> u32 {
        if len <= KDTREE_LEAF {
            nodes.push(KdNode::Leaf {
                lo: offset as u32,
                hi: (offset + len) as u32,
            });
            return (nodes.len() - 1) as u32;
        }
        // split on the dimension with the widest spread
        let d = points.cols();
        let slice = &order[offset..offset + len];
        let mut best_dim = 0usize;
        let mut best_spread = -1.0f64;
        for dim in 0..d {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for &p in slice.iter() {
                let v = points.get(p as usize, dim);
                lo = lo.min(v);
                hi = hi.max(v);
            }
            if hi - lo > best_spread {
                best_spread = hi - lo;
                best_dim = dim;
            }
        }
        let mid = len / 2;
        let slice = &mut order[offset..offset + len];
        slice.select_nth_unstable_by(mid, |&a, &b| {
            points
                .get(a as usize, best_dim)
                .total_cmp(&points.get(b as usize, best_dim))
                .then(a.cmp(&b))
        });
        let split_value = points.get(slice[mid] as usize, best_dim);
        let me = nodes.len();
        nodes.push(KdNode::Leaf { lo: 0, hi: 0 }); // placeholder
        let left = Self::build_range(points, order, nodes, offset, mid);
        let right = Self::build_range(points, order, nodes, offset + mid, len - mid);
        nodes[me] = KdNode::Split {
            dim: best_dim as u32,
            value: split_value,
            left,
            right,
        };
        me as u32
    }

    fn count(&self, points: &Matrix, query: &[f64], radius: f64, node: u32) -> usize {
        match &self.nodes[node as usize] {
            KdNode::Leaf { lo, hi } => self.order[*lo as usize..*hi as usize]
                .iter()
                .filter(|&&p| euclidean(query, points.row(p as usize)) < radius)
                .count(),
            KdNode::Split {
                dim,
                value,
                left,
                right,
            } => {
                let gap = query[*dim as usize] - value;
                // conservative prune: the coordinate gap lower-bounds the true
                // distance; the 1e-12 slack covers rounding, the leaf test is exact
                let mut total = 0;
                if !(gap * (1.0 - 1e-12) >= radius) {
                    total += self.count(points, query, radius, *left);
                }
                if !(-gap * (1.0 - 1e-12) >= radius) {
                    total += self.count(points, query, radius, *right);
                }
                total
            }
        }
    }
}

/// Counts stored points strictly inside a radius around a query.
/// Space-partitioned for up to 32 dimensions, linear scan above that
/// (the fuzzy-similarity space has dimension = batch size, where
/// KD-trees degrade to scans anyway).
pub struct RangeCounter {
    points: Matrix,
    tree: Option<KdTree>,
}

impl RangeCounter {
    pub fn new(points: Matrix) -> Self {
        let tree = if points.cols() <= KDTREE_MAX_DIM && points.rows() > 0 {
            Some(KdTree::build(&points))
        } else {
            None
        };
        RangeCounter { points, tree }
    }

    pub fn dim(&self) -> usize {
        self.points.cols()
    }

    /// Number of stored points with `‖p − query‖ < radius` (strict).
    pub fn count(&self, query: &[f64], radius: f64) -> Result<usize> {
        if query.len() != self.points.cols() {
            return Err(Error::DimensionMismatch {
                expected: self.points.cols(),
                got: query.len(),
            });
        }
        if radius < 0.0 {
            return Err(Error::param("radius", "must be nonnegative"));
        }
        if radius == 0.0 {
            return Ok(0);
        }
        match &self.tree {
            Some(tree) => Ok(tree.count(&self.points, query, radius, tree.root)),
            None => Ok(self
                .points
                .iter_rows()
                .filter(|p| euclidean(query, p) < radius)
                .count()),
        }
    }
}

const MAX_PAIRWISE_EXACT: usize = 4096;
const MAX_PAIRWISE_SAMPLES: u64 = 1_000_000;
// fixed stream for the sampled fallback so the op stays deterministic
const MAX_PAIRWISE_SEED: u64 = 0x6d61_7870_6169;

/// Maximum pairwise distance under a caller-supplied metric: exact for
/// n ≤ 4096, otherwise the max over a seeded sample of 10⁶ pairs.
pub(crate) fn max_pairwise_by(n: usize, dist: impl Fn(usize, usize) -> f64 + Sync) -> f64 {
    if n <= MAX_PAIRWISE_EXACT {
        return (0..n - 1)
            .into_par_iter()
            .map(|i| {
                let mut best = 0.0f64;
                for j in i + 1..n {
                    best = best.max(dist(i, j));
                }
                best
            })
            .reduce(|| 0.0, f64::max);
    }
    let mut rng = RngSeed(MAX_PAIRWISE_SEED).rng();
    let mut best = 0.0f64;
    for _ in 0..MAX_PAIRWISE_SAMPLES {
        let i = rng.gen_range(0..n);
        let j = rng.gen_range(0..n);
        if i != j {
            best = best.max(dist(i, j));
        }
    }
    best
}

/// Largest Euclidean distance between any two rows.
pub fn max_pairwise_distance(points: &Matrix) -> Result<f64> {
    let n = points.rows();
    if n < 2 {
        return Err(Error::param("points", "need at least 2 points"));
    }
    Ok(max_pairwise_by(n, |i, j| euclidean(points.row(i), points.row(j))))
}
