//! Acceptance suite: every release gate runs here, one pass/fail line per
//! criterion. Tests share a lock so timing-sensitive checks never compete
//! for cores; run with `--nocapture` to watch the lines stream by.

use std::fs;
use std::process::Command;
use std::sync::Mutex;
use std::time::Instant;

use msde::bench::{
    auc_pr, auc_roc, generate_normals, inject_anomalies, precision_at_n, run_benchmark, AnomalyMode,
    BenchConfig, BenchGrid, EvalResult, SyntheticSpec, NOISE_RATIOS,
};
use msde::dataset::{csv_string, euclidean, write_csv, Dataset, Matrix, RngSeed};
use msde::fuzzygraph::{build_fuzzy_graph, similarity_vectors};
use msde::meanshift::{run_meanshift, ShiftConfig};
use msde::neighbors::{knn_exact, knn_graph, RangeCounter};
use msde::pipeline::{run_msde, MsdeConfig};
use msde::weights::{find_radius, DensityWeights, WeightConfig};
use rand::Rng;

static GATE: Mutex<()> = Mutex::new(());

fn locked() -> std::sync::MutexGuard<'static, ()> {
    GATE.lock().unwrap_or_else(|e| e.into_inner())
}

fn criterion(name: &str, ok: bool, detail: &str) {
    println!(
        "ACCEPTANCE {name}: {} ({detail})",
        if ok { "PASS" } else { "FAIL" }
    );
    assert!(ok, "{name}: {detail}");
}

fn random_matrix(rng: &mut impl Rng, n: usize, d: usize, lo: f64, hi: f64) -> Matrix {
    Matrix::from_vec((0..n * d).map(|_| rng.gen_range(lo..hi)).collect(), n, d)
}

// --- independent oracles -------------------------------------------------

fn brute_knn(points: &Matrix, k: usize) -> Vec<Vec<(f64, u32)>> {
    (0..points.rows())
        .map(|i| {
            let mut all: Vec<(f64, u32)> = (0..points.rows())
                .filter(|&j| j != i)
                .map(|j| (euclidean(points.row(i), points.row(j)), j as u32))
                .collect();
            all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            all.truncate(k);
            all
        })
        .collect()
}

/// Ranking by repeated maximum scan; independent of the sort-based path.
fn brute_ranking(scores: &[f64]) -> Vec<usize> {
    let mut remaining: Vec<usize> = (0..scores.len()).collect();
    let mut out = Vec::new();
    while !remaining.is_empty() {
        let mut best = 0;
        for (pos, &i) in remaining.iter().enumerate() {
            let b = remaining[best];
            if scores[i] > scores[b] || (scores[i] == scores[b] && i < b) {
                best = pos;
            }
        }
        out.push(remaining.remove(best));
    }
    out
}

fn brute_auc_roc(scores: &[f64], labels: &[u8]) -> f64 {
    let mut num = 0.0;
    let mut pairs = 0.0;
    for i in 0..scores.len() {
        for j in 0..scores.len() {
            if labels[i] == 1 && labels[j] == 0 {
                pairs += 1.0;
                if scores[i] > scores[j] {
                    num += 1.0;
                } else if scores[i] == scores[j] {
                    num += 0.5;
                }
            }
        }
    }
    num / pairs
}

fn brute_auc_pr(scores: &[f64], labels: &[u8]) -> f64 {
    let npos = labels.iter().filter(|&&l| l == 1).count();
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (rank0, &i) in brute_ranking(scores).iter().enumerate() {
        if labels[i] == 1 {
            hits += 1;
            sum += hits as f64 / (rank0 + 1) as f64;
        }
    }
    sum / npos as f64
}

fn brute_precision_at_n(scores: &[f64], labels: &[u8]) -> f64 {
    let npos = labels.iter().filter(|&&l| l == 1).count();
    let hits = brute_ranking(scores)
        .iter()
        .take(npos)
        .filter(|&&i| labels[i] == 1)
        .count();
    hits as f64 / npos as f64
}

fn tie_prone_instance(rng: &mut impl Rng) -> (Vec<f64>, Vec<u8>) {
    let n = rng.gen_range(4..=50);
    let scores: Vec<f64> = (0..n).map(|_| (rng.gen_range(0..10) as f64) / 4.0).collect();
    let mut labels: Vec<u8> = (0..n).map(|_| u8::from(rng.gen_bool(0.4))).collect();
    labels[0] = 1;
    labels[1] = 0;
    (scores, labels)
}

#[test]
fn c01_oracle_equivalence() {
    let _g = locked();
    let start = Instant::now();
    let mut rng = RngSeed(0xacce01).rng();

    for case in 0..100 {
        let n = rng.gen_range(10..=50);
        let d = rng.gen_range(1..=6);
        let k = rng.gen_range(1..n);
        let pts = random_matrix(&mut rng, n, d, -1.0, 1.0);
        let graph = knn_exact(&pts, k).unwrap();
        let brute = brute_knn(&pts, k);
        for i in 0..n {
            let idx: Vec<u32> = brute[i].iter().map(|c| c.1).collect();
            let dst: Vec<f64> = brute[i].iter().map(|c| c.0).collect();
            assert_eq!(graph.neighbors(i), idx.as_slice(), "case {case} row {i}");
            assert_eq!(graph.distances(i), dst.as_slice(), "case {case} row {i}");
        }
    }

    for case in 0..100 {
        let m = rng.gen_range(5..=50);
        // mix tree (p ≤ 32) and scan (p > 32) paths
        let p = if case % 5 == 0 { rng.gen_range(33..=40) } else { rng.gen_range(1..=8) };
        let pts = random_matrix(&mut rng, m, p, -1.0, 1.0);
        let counter = RangeCounter::new(pts.clone());
        let query: Vec<f64> = (0..p).map(|_| rng.gen_range(-1.2..1.2)).collect();
        let radius = rng.gen_range(0.0..3.0);
        let brute = pts.iter_rows().filter(|r| euclidean(&query, r) < radius).count();
        assert_eq!(counter.count(&query, radius).unwrap(), brute, "case {case}");
    }

    for case in 0..100 {
        let (scores, labels) = tie_prone_instance(&mut rng);
        assert_eq!(
            auc_roc(&scores, &labels).unwrap(),
            brute_auc_roc(&scores, &labels),
            "auc_roc case {case}"
        );
        assert_eq!(
            auc_pr(&scores, &labels).unwrap(),
            brute_auc_pr(&scores, &labels),
            "auc_pr case {case}"
        );
        assert_eq!(
            precision_at_n(&scores, &labels).unwrap(),
            brute_precision_at_n(&scores, &labels),
            "precision case {case}"
        );
    }

    let secs = start.elapsed().as_secs_f64();
    criterion(
        "C1 oracle equivalence",
        secs < 30.0,
        &format!("knn/range/metrics exact on 100 instances each, {secs:.1}s"),
    );
}

#[test]
fn c02_fuzzy_graph_invariants() {
    let _g = locked();
    let start = Instant::now();
    let mut rng = RngSeed(0xacce02).rng();
    let mut saturated = 0usize;

    for case in 0..50 {
        let b = rng.gen_range(20..=200);
        let d = rng.gen_range(2..=6);
        let k_graph = rng.gen_range(2..=20.min(b - 1));
        let seed = RngSeed(rng.gen());
        let batch = match case % 3 {
            0 => random_matrix(&mut rng, b, d, -1.0, 1.0),
            1 => random_matrix(&mut rng, b, d, 0.0, 0.1),
            _ => {
                let mut m = random_matrix(&mut rng, b, d, -0.5, 0.5);
                for i in 0..b / 2 {
                    for c in 0..d {
                        let v = m.get(i, c) + 4.0;
                        m.set(i, c, v);
                    }
                }
                m
            }
        };
        let graph = build_fuzzy_graph(&batch, k_graph, seed).unwrap();

        for i in 0..b {
            assert_eq!(graph.membership(i, i), 0.0, "case {case} diagonal {i}");
            for &(j, g) in graph.row(i) {
                assert!((0.0..=1.0).contains(&g), "case {case} ({i},{j}): {g}");
                assert_eq!(
                    g.to_bits(),
                    graph.membership(j as usize, i).to_bits(),
                    "case {case} asymmetric at ({i},{j})"
                );
            }
        }

        // kernel-sum constraint, rechecked against the same deterministic kNN
        let knn = knn_graph(&batch, k_graph, seed).unwrap();
        let target = (k_graph as f64).log2();
        for i in 0..b {
            let sum: f64 = knn
                .distances(i)
                .iter()
                .map(|&dd| (-((dd - graph.rho[i]).max(0.0)) / graph.sigma[i]).exp())
                .sum();
            if (sum - target).abs() >= 1e-3 {
                // only the documented saturation case may miss the target:
                // sigma pinned at the lower bracket
                assert!(graph.sigma[i] < 1e-9, "case {case} row {i}: sum {sum}");
                saturated += 1;
            }
        }
    }

    let secs = start.elapsed().as_secs_f64();
    criterion(
        "C2 fuzzy-graph invariants",
        secs < 60.0,
        &format!("50 batches clean, {saturated} saturated rows exempted, {secs:.1}s"),
    );
}

#[test]
fn c03_radius_search_vs_grid_scan() {
    let _g = locked();
    let start = Instant::now();
    let mut rng = RngSeed(0xacce03).rng();
    let mut worst_rel = 0.0f64;

    for case in 0..50 {
        let b = rng.gen_range(20..=120);
        let d = rng.gen_range(2..=5);
        let k_graph = rng.gen_range(5..=15.min(b - 1));
        let batch = random_matrix(&mut rng, b, d, -1.0, 1.0);
        let graph = build_fuzzy_graph(&batch, k_graph, RngSeed(rng.gen())).unwrap();
        let sim = similarity_vectors(&graph);

        let cfg = WeightConfig {
            nbd_sample_count_threshold: rng.gen_range(3..=(b / 3).max(4)),
            satisfiability_proportion: [0.2, 0.3, 0.5][case % 3],
            ..WeightConfig::default()
        };
        let search = find_radius(&sim, &cfg).unwrap();
        if search.fallback {
            continue;
        }

        // oracle: test-local distance matrix, sorted rows, dense radius grid
        let mut rows: Vec<Vec<f64>> = (0..b)
            .map(|i| (0..b).map(|j| euclidean(sim.row(i), sim.row(j))).collect())
            .collect();
        let eps_max = rows
            .iter()
            .flatten()
            .cloned()
            .fold(0.0f64, f64::max);
        for row in &mut rows {
            row.sort_by(f64::total_cmp);
        }
        let needed = ((cfg.satisfiability_proportion * b as f64).ceil() as usize).max(1);
        let feasible = |eps: f64| {
            rows.iter()
                .filter(|row| row.partition_point(|&x| x < eps) > cfg.nbd_sample_count_threshold)
                .count()
                >= needed
        };
        let mut oracle = eps_max;
        for step in 1..=10_000 {
            let eps = eps_max * step as f64 / 10_000.0;
            if feasible(eps) {
                oracle = eps;
                break;
            }
        }
        let rel = (search.epsilon - oracle).abs() / oracle;
        worst_rel = worst_rel.max(rel);
        assert!(
            rel < 1e-2,
            "case {case}: bisection {} vs grid {oracle} (rel {rel})",
            search.epsilon
        );
    }

    // constructed relaxation instance: nobody can see all 100 others at the
    // farthest observed distance under strict counting
    let pts = random_matrix(&mut rng, 100, 3, 0.0, 1.0);
    let relaxed = find_radius(
        &pts,
        &WeightConfig {
            nbd_sample_count_threshold: 99,
            satisfiability_proportion: 1.0,
            ..WeightConfig::default()
        },
    )
    .unwrap();
    assert!(relaxed.relaxed && !relaxed.fallback, "{relaxed:?}");

    // constructed fallback instance: two points can never satisfy count > 1
    let two = Matrix::from_vec(vec![0.0, 0.0, 3.0, 4.0], 2, 2);
    let fallback = find_radius(
        &two,
        &WeightConfig {
            nbd_sample_count_threshold: 1,
            satisfiability_proportion: 1.0,
            ..WeightConfig::default()
        },
    )
    .unwrap();
    assert!(fallback.fallback, "{fallback:?}");
    assert_eq!(fallback.epsilon, 5.0);

    let secs = start.elapsed().as_secs_f64();
    criterion(
        "C3 radius search",
        secs < 60.0,
        &format!("grid-scan agreement (worst rel {worst_rel:.1e}), relaxation and fallback exercised, {secs:.1}s"),
    );
}

#[test]
fn c04_meanshift_dynamics() {
    let _g = locked();
    let start = Instant::now();
    let mut rng = RngSeed(0xacce04).rng();

    for case in 0..20 {
        let d = rng.gen_range(1..=4);

        // fixed point: the midpoint of a pair, built with the same
        // normalize-then-accumulate arithmetic the update uses
        let a: Vec<f64> = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let b: Vec<f64> = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let mid: Vec<f64> = (0..d).map(|i| 0.5 * a[i] + 0.5 * b[i]).collect();
        let data = Dataset::new(
            Matrix::from_rows(&[a, b, mid]),
            (0..d).map(|j| format!("f{j}")).collect(),
            None,
        )
        .unwrap();
        let cfg = ShiftConfig {
            k: 2,
            max_iters_shift: 1,
            shift_threshold: 0.0,
            ..ShiftConfig::default()
        };
        let state = run_meanshift(&data, &DensityWeights::uniform(3), &cfg, RngSeed(0)).unwrap();
        assert_eq!(state.per_iter_delta[0][2], 0.0, "case {case}");
        assert_eq!(state.positions.row(2), data.values.row(2), "case {case}");

        // frozen dynamics at zero learning rate
        let n = rng.gen_range(20..=60);
        let pts = random_matrix(&mut rng, n, d, -2.0, 2.0);
        let data = Dataset::new(
            pts.clone(),
            (0..d).map(|j| format!("f{j}")).collect(),
            None,
        )
        .unwrap();
        let k = rng.gen_range(2..=6);
        let frozen = ShiftConfig {
            k,
            learning_rate: 0.0,
            max_iters_shift: 4,
            shift_threshold: 0.0,
            ..ShiftConfig::default()
        };
        let state = run_meanshift(&data, &DensityWeights::uniform(n), &frozen, RngSeed(1)).unwrap();
        assert_eq!(state.positions.as_slice(), pts.as_slice(), "case {case}");
        assert_eq!(state.iterations_run, 4);
        for i in 0..n {
            let expect = 4.0 * state.per_iter_delta[0][i];
            assert!((state.cumulative[i] - expect).abs() < 1e-12, "case {case}");
        }

        // early stop after exactly one iteration under an unreachable τ
        let huge = ShiftConfig {
            k,
            max_iters_shift: 6,
            shift_threshold: f64::MAX,
            ..ShiftConfig::default()
        };
        let state = run_meanshift(&data, &DensityWeights::uniform(n), &huge, RngSeed(1)).unwrap();
        assert_eq!(state.iterations_run, 1, "case {case}");
        assert!(state.converged_early);

        // translation equivariance within 1e-9
        let moving = ShiftConfig {
            k,
            max_iters_shift: 3,
            shift_threshold: 0.0,
            ..ShiftConfig::default()
        };
        let offset: Vec<f64> = (0..d).map(|_| rng.gen_range(-20.0..20.0)).collect();
        let mut shifted = pts.clone();
        for i in 0..n {
            for c in 0..d {
                let v = shifted.get(i, c) + offset[c];
                shifted.set(i, c, v);
            }
        }
        let data_shifted = Dataset::new(
            shifted,
            (0..d).map(|j| format!("f{j}")).collect(),
            None,
        )
        .unwrap();
        let sa = run_meanshift(&data, &DensityWeights::uniform(n), &moving, RngSeed(2)).unwrap();
        let sb =
            run_meanshift(&data_shifted, &DensityWeights::uniform(n), &moving, RngSeed(2)).unwrap();
        for i in 0..n {
            assert!(
                (sa.cumulative[i] - sb.cumulative[i]).abs() < 1e-9,
                "case {case} row {i}"
            );
            for c in 0..d {
                let diff = sa.positions.get(i, c) + offset[c] - sb.positions.get(i, c);
                assert!(diff.abs() < 1e-9, "case {case} row {i} coord {c}");
            }
        }

        // per-iteration movement bounded by η·δ
        for t in 0..sa.iterations_run {
            for i in 0..n {
                let moved = euclidean(sa.snapshot(t).row(i), sa.snapshot(t + 1).row(i));
                let bound = moving.learning_rate * sa.per_iter_delta[t][i];
                assert!(moved <= bound + 1e-12, "case {case} t={t} i={i}");
            }
        }
    }

    let secs = start.elapsed().as_secs_f64();
    criterion(
        "C4 mean-shift dynamics",
        secs < 30.0,
        &format!("fixed-point, freeze, early-stop, translation, step bound over 20 instances, {secs:.1}s"),
    );
}

fn mode_mean(results: &[EvalResult], method: &str, mode: AnomalyMode) -> f64 {
    let subset: Vec<&EvalResult> = results
        .iter()
        .filter(|r| r.method == method && r.mode == mode)
        .collect();
    subset.iter().map(|r| r.auc_roc).sum::<f64>() / subset.len() as f64
}

#[test]
fn c05_desk_scale_benchmark_noise_free() {
    let _g = locked();
    let start = Instant::now();
    let grid = BenchGrid {
        noise_ratios: vec![0.0],
        ..BenchGrid::default()
    };
    let report = run_benchmark(&grid, &BenchConfig::default(), |_, _| {});
    assert!(report.failures.is_empty(), "{:?}", report.failures);

    let thresholds = [
        (AnomalyMode::Global, 0.90),
        (AnomalyMode::Cluster, 0.80),
        (AnomalyMode::Local, 0.75),
        (AnomalyMode::Dependency, 0.70),
    ];
    let mut detail = String::new();
    let mut ok = true;
    for (mode, floor) in thresholds {
        let mean = mode_mean(&report.results, "msde", mode);
        detail.push_str(&format!("{mode} {mean:.3}≥{floor} "));
        ok &= mean >= floor;
    }
    let secs = start.elapsed().as_secs_f64();
    ok &= secs < 300.0;
    detail.push_str(&format!("{secs:.0}s"));
    criterion("C5 desk-scale benchmark", ok, detail.trim());
}

#[test]
fn c06_displacement_separation() {
    let _g = locked();
    let mut detail = String::new();
    let mut ok = true;
    for seed in 0..3u64 {
        let spec = SyntheticSpec {
            n_normal: 950,
            n_anomaly: 50,
            dims: 10,
            mode: AnomalyMode::Global,
            n_components: 3,
            mode_scale: 5.0,
            seed: RngSeed(seed).derive(0x6469),
        };
        let normals = generate_normals(&spec).unwrap();
        let data = inject_anomalies(&normals, &spec).unwrap();
        let labels = data.labels.clone().unwrap();
        let outcome = run_msde(&data, &MsdeConfig::new(), RngSeed(seed)).unwrap();
        let d = &outcome.state.cumulative;
        let mean_of = |want: u8| {
            let vals: Vec<f64> = labels
                .iter()
                .zip(d)
                .filter(|(&l, _)| l == want)
                .map(|(_, &v)| v)
                .collect();
            vals.iter().sum::<f64>() / vals.len() as f64
        };
        let ratio = mean_of(1) / mean_of(0);
        detail.push_str(&format!("seed {seed}: {ratio:.1}x "));
        ok &= ratio >= 2.0;
    }
    criterion("C6 displacement separation", ok, detail.trim());
}

#[test]
fn c07_noise_degradation_shape() {
    let _g = locked();
    let grid = BenchGrid::default();
    let report = run_benchmark(&grid, &BenchConfig::default(), |_, _| {});
    assert!(report.failures.is_empty(), "{:?}", report.failures);

    let mean_at = |noise: f64| {
        let subset: Vec<&EvalResult> = report
            .results
            .iter()
            .filter(|r| r.method == "msde" && r.noise == noise)
            .collect();
        subset.iter().map(|r| r.auc_roc).sum::<f64>() / subset.len() as f64
    };
    let low_band: Vec<f64> = [0.00, 0.01, 0.05, 0.10].iter().map(|&r| mean_at(r)).collect();

    let mut ok = true;
    for w in low_band.windows(2) {
        ok &= w[1] <= w[0] + 0.02;
    }
    let drop = low_band[0] - low_band[3];
    ok &= drop < 0.05;
    let all: Vec<String> = NOISE_RATIOS.iter().map(|&r| format!("{r}:{:.3}", mean_at(r))).collect();
    criterion(
        "C7 noise degradation shape",
        ok,
        &format!("auc by ratio [{}], drop 0→0.10 = {drop:.3}", all.join(" ")),
    );
}

#[test]
fn c08_baseline_ordering_echo() {
    let _g = locked();
    let grid = BenchGrid {
        modes: vec![AnomalyMode::Cluster, AnomalyMode::Global],
        noise_ratios: vec![0.0],
        ..BenchGrid::default()
    };
    let report = run_benchmark(&grid, &BenchConfig::default(), |_, _| {});
    assert!(report.failures.is_empty(), "{:?}", report.failures);

    let msde_cluster = mode_mean(&report.results, "msde", AnomalyMode::Cluster);
    let knn_cluster = mode_mean(&report.results, "knn", AnomalyMode::Cluster);
    let msde_global = mode_mean(&report.results, "msde", AnomalyMode::Global);
    let knn_global = mode_mean(&report.results, "knn", AnomalyMode::Global);

    let ok = knn_cluster < msde_cluster && msde_global > 0.90 && knn_global > 0.90;
    criterion(
        "C8 baseline ordering echo",
        ok,
        &format!(
            "cluster: knn {knn_cluster:.3} < msde {msde_cluster:.3}; global: msde {msde_global:.3}, knn {knn_global:.3} both > 0.90"
        ),
    );
}

#[test]
fn c09_runtime_scaling() {
    let _g = locked();

    let dataset_of = |n: usize| {
        let spec = SyntheticSpec {
            n_normal: n * 19 / 20,
            n_anomaly: n / 20,
            dims: 10,
            mode: AnomalyMode::Global,
            n_components: 3,
            mode_scale: 5.0,
            seed: RngSeed(0x5ca1e),
        };
        let normals = generate_normals(&spec).unwrap();
        inject_anomalies(&normals, &spec).unwrap()
    };
    let median_secs = |data: &Dataset| {
        let mut times: Vec<f64> = (0..3)
            .map(|_| {
                let t = Instant::now();
                run_msde(data, &MsdeConfig::new(), RngSeed(9)).unwrap();
                t.elapsed().as_secs_f64()
            })
            .collect();
        times.sort_by(f64::total_cmp);
        times[1]
    };

    let small = dataset_of(2000);
    let large = dataset_of(4000);
    let t_small = median_secs(&small);
    let t_large = median_secs(&large);
    let ratio = t_large / t_small;
    criterion(
        "C9 runtime scaling",
        ratio < 3.5,
        &format!("median N=4000 {t_large:.1}s / N=2000 {t_small:.1}s = {ratio:.2}x < 3.5x"),
    );
}

#[test]
fn c10_cli_determinism() {
    let _g = locked();
    let dir = tempfile::tempdir().unwrap();

    // synthetic input CSV for the score command
    let spec = SyntheticSpec {
        n_normal: 285,
        n_anomaly: 15,
        dims: 5,
        mode: AnomalyMode::Global,
        n_components: 2,
        mode_scale: 5.0,
        seed: RngSeed(77),
    };
    let normals = generate_normals(&spec).unwrap();
    let mut data = inject_anomalies(&normals, &spec).unwrap();
    data.labels = None;
    assert!(csv_string(&data).lines().count() == 301);
    let input = dir.path().join("input.csv");
    write_csv(&data, &input).unwrap();

    let run_score = |out: &std::path::Path| {
        let status = Command::new(env!("CARGO_BIN_EXE_msde"))
            .args(["--seed", "7", "score"])
            .arg(&input)
            .arg("-o")
            .arg(out)
            .status()
            .unwrap();
        assert!(status.success());
        fs::read(out).unwrap()
    };
    let score_a = run_score(&dir.path().join("a.csv"));
    let score_b = run_score(&dir.path().join("b.csv"));
    let score_ok = score_a == score_b;

    let run_bench = |out: &std::path::Path| {
        let status = Command::new(env!("CARGO_BIN_EXE_msde"))
            .args(["--seed", "7", "--k", "20", "--nbd-sample-count-threshold", "10"])
            .args(["bench", "--modes", "global,cluster", "--noise", "0", "--seeds", "2"])
            .args(["--n-normal", "190", "--n-anomaly", "10", "--dims", "4", "--baseline-k", "5"])
            .arg("--output-dir")
            .arg(out)
            .status()
            .unwrap();
        assert!(status.success());
        let mut bytes = fs::read(out.join("results.csv")).unwrap();
        bytes.extend(fs::read(out.join("aggregate.csv")).unwrap());
        bytes.extend(fs::read(out.join("aggregate.txt")).unwrap());
        bytes
    };
    let bench_a = run_bench(&dir.path().join("bench_a"));
    let bench_b = run_bench(&dir.path().join("bench_b"));
    let bench_ok = bench_a == bench_b;

    criterion(
        "C10 determinism",
        score_ok && bench_ok,
        &format!(
            "score outputs identical: {score_ok}; bench outputs identical: {bench_ok}"
        ),
    );
}
