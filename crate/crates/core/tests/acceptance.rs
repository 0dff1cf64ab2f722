//! Acceptance suite. Runs every criterion and prints one PASS/FAIL line each.
//!
//! `cargo test --test acceptance -- 3 7` runs only criteria 3 and 7.

use std::time::Instant;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cdeforest::basis::{basis_matrix, series_density, BasisSpec};
use cdeforest::bench::{
    demo_argmins, demo_split, run_bench, variant_config, write_bench_csv, BenchConfig, BenchRow, DemoConfig,
};
use cdeforest::datagen::{generate, SyntheticConfig, Variant};
use cdeforest::loss::trapezoid_integral;
use cdeforest::splitting::{split_targets, sweep_feature, Criterion};
use cdeforest::{predict, train, Bandwidth, EvalGrid, ForestConfig, GridPolicy, ModelFile, Query};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn sd(v: &[f64]) -> f64 {
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

/// Largest `|∫p̂² − Σβ̂²|` over random samples with responses in `[0,1]^r`.
fn parseval_gap(
    rng: &mut ChaCha8Rng,
    samples: usize,
    r: usize,
    max_n: usize,
    max_basis: usize,
    grid_points: usize,
) -> f64 {
    let grid = EvalGrid::uniform(&vec![(0.0, 1.0); r], grid_points).unwrap();
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let n = rng.random_range(1..=max_n);
        let n_basis = rng.random_range(1..=max_basis);
        let y = Array2::from_shape_fn((n, r), |_| rng.random::<f64>());
        let spec = BasisSpec::cosine(n_basis, r).unwrap();
        let coefs = basis_matrix(y.view(), spec).unwrap().coefficients();
        let squared: Vec<f64> = (0..grid.n_points())
            .map(|i| series_density(&coefs, &spec, &grid.point(i)).unwrap().powi(2))
            .collect();
        let lhs = trapezoid_integral(&grid, &squared);
        let rhs: f64 = coefs.iter().map(|b| b * b).sum();
        worst = worst.max((lhs - rhs).abs());
    }
    worst
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let gap = parseval_gap(&mut rng, 100, 1, 500, 31, 4001);
    let secs = start.elapsed().as_secs_f64();
    outcome(
        gap < 1e-6 && secs < 5.0,
        format!("max |∫p²-Σβ²| = {gap:.2e}, {secs:.2}s"),
    )
}

/// Brute-force best boundary: for each distinct value, split by `x <= v` and
/// score both sides from scratch. Returns `(threshold, score)` per boundary.
fn brute_force(x: &[f64], targets: &Array2<f64>, min_node_size: usize) -> Vec<(f64, f64)> {
    let mut distinct = x.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let mut out = Vec::new();
    for w in distinct.windows(2) {
        let left: Vec<usize> = (0..x.len()).filter(|&i| x[i] <= w[0]).collect();
        let right: Vec<usize> = (0..x.len()).filter(|&i| x[i] > w[0]).collect();
        if left.len() < min_node_size || right.len() < min_node_size {
            continue;
        }
        let side = |rows: &[usize]| -> f64 {
            (0..targets.ncols())
                .map(|j| rows.iter().map(|&i| targets[[i, j]]).sum::<f64>().powi(2))
                .sum::<f64>()
                / rows.len() as f64
        };
        out.push((w[0] + (w[1] - w[0]) / 2.0, side(&left) + side(&right)));
    }
    out
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    let mut mismatches = 0;
    for node in 0..200 {
        let n = rng.random_range(2..=200);
        let r = if node % 4 == 3 { 2 } else { 1 };
        let n_basis = if r == 2 {
            rng.random_range(1..=4)
        } else {
            rng.random_range(1..=16)
        };
        let criterion = if node % 5 == 4 { Criterion::Mse } else { Criterion::Cde };
        let min_node_size = rng.random_range(1..=5);
        let ties = rng.random_bool(0.3);
        let x: Vec<f64> = (0..n)
            .map(|_| {
                let v: f64 = rng.random();
                if ties {
                    (v * 10.0).floor() / 10.0
                } else {
                    v
                }
            })
            .collect();
        let y = Array2::from_shape_fn((n, r), |_| rng.random::<f64>());
        let targets = split_targets(criterion, y.view(), BasisSpec::cosine(n_basis, r).unwrap()).unwrap();
        let oracle = brute_force(&x, &targets, min_node_size);
        let got = sweep_feature(&x, targets.view(), min_node_size);
        match (got, oracle.is_empty()) {
            (None, true) => {}
            (Some((threshold, score)), false) => {
                let best = oracle.iter().map(|b| b.1).fold(f64::NEG_INFINITY, f64::max);
                // exact ties between boundaries may legitimately resolve either way
                // under different summation orders; the chosen boundary must be optimal
                let at_threshold = oracle.iter().find(|b| b.0 == threshold).map(|b| b.1);
                let first_best = oracle.iter().find(|b| b.1 >= best - 1e-10).unwrap();
                match at_threshold {
                    Some(s) => {
                        worst = worst.max((score - best).abs()).max((s - best).abs());
                        if first_best.0 != threshold && (first_best.1 - s).abs() > 1e-10 {
                            mismatches += 1;
                        }
                    }
                    None => mismatches += 1,
                }
            }
            _ => mismatches += 1,
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst < 1e-10 && mismatches == 0 && secs < 10.0,
        format!("200 nodes, max score gap {worst:.2e}, {mismatches} threshold mismatches, {secs:.2}s"),
    )
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let (cde, mse): (Vec<f64>, Vec<f64>) = (0..50)
        .map(|seed| {
            let rows = demo_split(&DemoConfig {
                seed,
                ..DemoConfig::default()
            })
            .unwrap();
            demo_argmins(&rows).unwrap()
        })
        .unzip();
    let inside = cde.iter().filter(|c| (0.45..=0.55).contains(*c)).count();
    let ratio = sd(&mse) / sd(&cde);
    let secs = start.elapsed().as_secs_f64();
    outcome(
        inside >= 45 && ratio >= 3.0 && secs < 60.0,
        format!("cde argmin in [0.45,0.55] for {inside}/50 seeds, sd(mse)/sd(cde) = {ratio:.1}, {secs:.1}s"),
    )
}

fn method_stats(rows: &[BenchRow], method: &str) -> (f64, f64, f64) {
    let picked: Vec<&BenchRow> = rows.iter().filter(|r| r.method == method).collect();
    let loss: Vec<f64> = picked.iter().map(|r| r.loss).collect();
    let se: Vec<f64> = picked.iter().map(|r| r.se).collect();
    let time: Vec<f64> = picked.iter().map(|r| r.train_time).collect();
    (mean(&loss), mean(&se), mean(&time))
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let rows = run_bench(&BenchConfig::new(Variant::MultimodalS31, vec![1000], 5)).unwrap();
    let (cde, cde_se, _) = method_stats(&rows, "cde");
    let (mse, mse_se, _) = method_stats(&rows, "mse");
    let combined = (cde_se.powi(2) + mse_se.powi(2)).sqrt();
    let secs = start.elapsed().as_secs_f64();
    outcome(
        mse - cde > 2.0 * combined && (-0.30..=-0.08).contains(&cde) && secs < 600.0,
        format!(
            "cde {cde:.4} vs mse {mse:.4}, gap {:.4} > 2x{combined:.4}, {secs:.0}s",
            mse - cde
        ),
    )
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let config = variant_config(Variant::MultimodalS31, 1000, 0);
    let time_at = |n: usize| {
        let data = generate(&SyntheticConfig::new(Variant::MultimodalS31, n, 0)).unwrap();
        median(
            (0..3)
                .map(|_| {
                    let t = Instant::now();
                    train(&data, &config).unwrap();
                    t.elapsed().as_secs_f64()
                })
                .collect(),
        )
    };
    let small = time_at(1000);
    let large = time_at(10_000);
    let ratio = large / small;
    let secs = start.elapsed().as_secs_f64();
    outcome(
        ratio <= 25.0 && secs < 900.0,
        format!("train {small:.2}s at n=1000, {large:.2}s at n=10000, ratio {ratio:.1}, {secs:.0}s"),
    )
}

fn criterion_6() -> Outcome {
    let mut worst_integral: f64 = 0.0;
    let mut worst_sum: f64 = 0.0;
    let mut negatives = 0;
    let mut queries = 0;
    for (variant, n) in [(Variant::MultimodalS31, 1000), (Variant::TransitionFig1, 500)] {
        let data = generate(&SyntheticConfig::new(variant, n, 6)).unwrap();
        let config = ForestConfig {
            n_trees: 200,
            ..variant_config(variant, 200, 6)
        };
        let forest = train(&data, &config).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for q in 0..500 {
            let x: Vec<f64> = (0..data.covariates.ncols()).map(|_| rng.random()).collect();
            let query = Query::scalar(&x);
            let weights = forest.query_weights(&query).unwrap();
            worst_sum = worst_sum.max((weights.sum() - 1.0).abs());
            let bandwidth = if q % 2 == 0 {
                Bandwidth::Fixed(0.2)
            } else {
                Bandwidth::Plugin
            };
            let est = predict(&forest, &query, &GridPolicy::default(), bandwidth).unwrap();
            negatives += est.values.iter().filter(|v| **v < 0.0).count();
            worst_integral = worst_integral.max((trapezoid_integral(&est.grid, &est.values) - 1.0).abs());
            queries += 1;
        }
    }
    outcome(
        worst_integral <= 0.01 && negatives == 0 && worst_sum <= 1e-12,
        format!("{queries} queries, max |∫p-1| = {worst_integral:.2e}, max |Σw-1| = {worst_sum:.1e}, {negatives} negative values"),
    )
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let data = generate(&SyntheticConfig::new(Variant::Ridge2d, 5000, 7)).unwrap();
    let forest = train(&data, &variant_config(Variant::Ridge2d, 500, 7)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut negative = 0;
    let mut correlations = Vec::new();
    for _ in 0..20 {
        let x = [rng.random_range(0.6..1.4)];
        let est = predict(
            &forest,
            &Query::scalar(&x),
            &GridPolicy::Auto { points: Some(150) },
            Bandwidth::Plugin,
        )
        .unwrap();
        let mut m = [0.0; 5];
        let total: f64 = est.values.iter().sum();
        for (i, p) in est.values.iter().enumerate() {
            let g = est.grid.point(i);
            let w = p / total;
            m[0] += w * g[0];
            m[1] += w * g[1];
            m[2] += w * g[0] * g[0];
            m[3] += w * g[1] * g[1];
            m[4] += w * g[0] * g[1];
        }
        let corr = (m[4] - m[0] * m[1]) / ((m[2] - m[0] * m[0]) * (m[3] - m[1] * m[1])).sqrt();
        if corr < -0.3 {
            negative += 1;
        }
        correlations.push(corr);
    }
    let gap = parseval_gap(&mut rng, 5, 2, 300, 12, 301);
    let secs = start.elapsed().as_secs_f64();
    outcome(
        negative >= 18 && gap < 1e-6 && secs < 300.0,
        format!(
            "corr < -0.3 in {negative}/20 (median {:.2}), 2-D Parseval gap {gap:.2e}, {secs:.0}s",
            median(correlations)
        ),
    )
}

fn criterion_8() -> Outcome {
    let start = Instant::now();
    let config = BenchConfig {
        n_trees: 500,
        ..BenchConfig::new(Variant::Functional, vec![2000], 1)
    };
    let rows = run_bench(&config).unwrap();
    let (functional, f_se, f_time) = method_stats(&rows, "functional");
    let (vector, v_se, v_time) = method_stats(&rows, "vector");
    let combined = (f_se.powi(2) + v_se.powi(2)).sqrt();
    let secs = start.elapsed().as_secs_f64();
    outcome(
        vector - functional > 2.0 * combined && f_time < v_time && secs < 600.0,
        format!(
            "functional {functional:.3} vs vector {vector:.3} (2x combined SE {:.3}), train {f_time:.1}s vs {v_time:.1}s, {secs:.0}s",
            2.0 * combined
        ),
    )
}

fn criterion_9() -> Outcome {
    let config = BenchConfig {
        n_test: 200,
        n_trees: 50,
        ..BenchConfig::new(Variant::MultimodalS31, vec![300, 600], 2)
    };
    let csv = || {
        let mut out = Vec::new();
        write_bench_csv(&mut out, &run_bench(&config).unwrap(), false).unwrap();
        out
    };
    let identical = csv() == csv();

    let data = generate(&SyntheticConfig::new(Variant::Functional, 300, 9)).unwrap();
    let forest = train(&data, &variant_config(Variant::Functional, 50, 9)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.cdef");
    ModelFile {
        forest: forest.clone(),
        covariate_names: data.covariate_names.clone(),
        response_names: data.response_names.clone(),
    }
    .save(&path)
    .unwrap();
    let loaded = ModelFile::load(&path).unwrap().forest;
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let q = data.query(i);
        let a = predict(&forest, &q, &GridPolicy::Auto { points: Some(200) }, Bandwidth::Plugin).unwrap();
        let b = predict(&loaded, &q, &GridPolicy::Auto { points: Some(200) }, Bandwidth::Plugin).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            worst = worst.max((x - y).abs());
        }
    }
    outcome(
        identical && worst <= 1e-12,
        format!("bench CSV bytes identical: {identical}, round-trip max diff {worst:.1e}"),
    )
}

type Check = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Check; 9] = [
        ("Parseval identity", criterion_1),
        ("split sweep matches brute force", criterion_2),
        ("transition cutpoint", criterion_3),
        ("cde beats mse criterion on multimodal data", criterion_4),
        ("training time scaling", criterion_5),
        ("KDE contracts", criterion_6),
        ("joint ridge density", criterion_7),
        ("functional beats vector treatment", criterion_8),
        ("determinism and persistence", criterion_9),
    ];
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let id = i + 1;
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let result = run();
        let status = if result.pass { "PASS" } else { "FAIL" };
        println!("criterion {id} [{status}] {name}: {}", result.detail);
        if !result.pass {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
