//! Benchmark tables and the split-profile demonstration.

use serde::Serialize;
use std::io::Write;
use std::time::Instant;

use crate::basis::{BasisSpec, ResponseScaler};
use crate::data::Dataset;
use crate::datagen::{gen_transition, generate, SyntheticConfig, Variant};
use crate::density::GridPolicy;
use crate::error::{CdeError, Result};
use crate::forest::{train, Bandwidth, ForestConfig};
use crate::loss::evaluate;
use crate::splitting::{split_targets, sweep_profile, Criterion};

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub variant: Variant,
    pub sizes: Vec<usize>,
    /// Number of seeds; seed values are `base_seed .. base_seed + seeds`.
    pub seeds: usize,
    pub base_seed: u64,
    pub n_test: usize,
    pub n_trees: usize,
}

impl BenchConfig {
    pub fn new(variant: Variant, sizes: Vec<usize>, seeds: usize) -> Self {
        BenchConfig {
            variant,
            sizes,
            seeds,
            base_seed: 0,
            n_test: 1000,
            n_trees: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub variant: String,
    pub n: usize,
    pub seed: u64,
    pub method: String,
    pub loss: f64,
    pub se: f64,
    pub n_eval: usize,
    pub coverage_warnings: usize,
    pub train_time: f64,
    pub predict_time: f64,
}

/// Forest settings used for each benchmark variant.
pub fn variant_config(variant: Variant, n_trees: usize, seed: u64) -> ForestConfig {
    let base = ForestConfig {
        n_trees,
        seed,
        ..ForestConfig::default()
    };
    match variant {
        Variant::MultimodalS31 => ForestConfig {
            mtry: Some(4),
            n_basis: 15,
            bandwidth: Bandwidth::Fixed(0.2),
            ..base
        },
        Variant::TransitionFig1 => ForestConfig {
            n_basis: 15,
            bandwidth: Bandwidth::Fixed(0.2),
            ..base
        },
        Variant::Ridge2d => ForestConfig { n_basis: 7, ..base },
        Variant::Functional => ForestConfig {
            n_basis: 31,
            lambda: 50.0,
            ..base
        },
    }
}

fn variant_grid(variant: Variant) -> GridPolicy {
    match variant {
        Variant::Ridge2d => GridPolicy::Auto { points: Some(150) },
        _ => GridPolicy::default(),
    }
}

fn run_one(
    method: &str,
    train_set: &Dataset,
    test_set: &Dataset,
    config: &ForestConfig,
    variant: Variant,
    n: usize,
    seed: u64,
) -> Result<BenchRow> {
    let start = Instant::now();
    let forest = train(train_set, config)?;
    let train_time = start.elapsed().as_secs_f64();
    let start = Instant::now();
    let report = evaluate(&forest, test_set, &variant_grid(variant), config.bandwidth)?;
    let predict_time = start.elapsed().as_secs_f64();
    Ok(BenchRow {
        variant: variant.name().to_string(),
        n,
        seed,
        method: method.to_string(),
        loss: report.loss,
        se: report.std_error,
        n_eval: report.n_eval,
        coverage_warnings: report.coverage_warnings,
        train_time,
        predict_time,
    })
}

/// For every size and seed: generate train and test data, fit both methods,
/// and score them on the test data.
///
/// Methods are `cde` and `mse` split criteria, or `functional` and `vector`
/// treatments for the functional variant.
pub fn run_bench(config: &BenchConfig) -> Result<Vec<BenchRow>> {
    if config.n_test < 2 {
        return Err(CdeError::config("benchmark needs at least 2 test rows"));
    }
    let mut rows = Vec::new();
    for &n in &config.sizes {
        for s in 0..config.seeds as u64 {
            let seed = config.base_seed + s;
            let data = generate(&SyntheticConfig::new(config.variant, n + config.n_test, seed))?;
            let train_set = data.slice_rows(0, n);
            let test_set = data.slice_rows(n, n + config.n_test);
            let forest_config = variant_config(config.variant, config.n_trees, seed);
            if config.variant == Variant::Functional {
                rows.push(run_one(
                    "functional",
                    &train_set,
                    &test_set,
                    &forest_config,
                    config.variant,
                    n,
                    seed,
                )?);
                rows.push(run_one(
                    "vector",
                    &train_set.flatten_functional(),
                    &test_set.flatten_functional(),
                    &forest_config,
                    config.variant,
                    n,
                    seed,
                )?);
            } else {
                for criterion in [Criterion::Cde, Criterion::Mse] {
                    let cfg = ForestConfig {
                        criterion,
                        ..forest_config.clone()
                    };
                    rows.push(run_one(
                        criterion.name(),
                        &train_set,
                        &test_set,
                        &cfg,
                        config.variant,
                        n,
                        seed,
                    )?);
                }
            }
        }
    }
    Ok(rows)
}

/// Writes benchmark rows as CSV. Without timing the timing columns are
/// omitted, so identical seeds give identical bytes.
pub fn write_bench_csv<W: Write>(writer: W, rows: &[BenchRow], include_timing: bool) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec![
        "variant",
        "n",
        "seed",
        "method",
        "loss",
        "se",
        "n_eval",
        "coverage_warnings",
    ];
    if include_timing {
        header.extend(["train_time", "predict_time"]);
    }
    let io = |e: csv::Error| CdeError::Format(e.to_string());
    w.write_record(&header).map_err(io)?;
    for r in rows {
        let mut rec = vec![
            r.variant.clone(),
            r.n.to_string(),
            r.seed.to_string(),
            r.method.clone(),
            format!("{:.6}", r.loss),
            format!("{:.6}", r.se),
            r.n_eval.to_string(),
            r.coverage_warnings.to_string(),
        ];
        if include_timing {
            rec.push(format!("{:.3}", r.train_time));
            rec.push(format!("{:.3}", r.predict_time));
        }
        w.write_record(&rec).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CutpointLoss {
    pub cutpoint: f64,
    /// CDE loss of the split, min-max normalized over all cutpoints.
    pub cde_loss: f64,
    /// Within-node squared error of the split, min-max normalized.
    pub mse_loss: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DemoConfig {
    pub n: usize,
    pub sigma: f64,
    pub seed: u64,
    pub n_basis: usize,
    pub min_node_size: usize,
}

impl Default for DemoConfig {
    fn default() -> Self {
        DemoConfig {
            n: 2000,
            sigma: 0.3,
            seed: 0,
            n_basis: 15,
            min_node_size: 5,
        }
    }
}

fn normalize(values: &mut [f64]) {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    for v in values.iter_mut() {
        *v = if span > 0.0 { (*v - lo) / span } else { 0.0 };
    }
}

/// Loss of every legal single split of transition data under both criteria.
pub fn demo_split(config: &DemoConfig) -> Result<Vec<CutpointLoss>> {
    let mut synth = SyntheticConfig::new(Variant::TransitionFig1, config.n, config.seed);
    synth.sigma = config.sigma;
    let data = gen_transition(&synth)?;
    let scaler = ResponseScaler::fit(data.responses.view())?;
    let scaled = scaler.transform(data.responses.view());
    let spec = BasisSpec::cosine(config.n_basis, 1)?;
    let x = data.covariates.column(0).to_vec();
    let profile = |criterion| -> Result<Vec<(f64, f64)>> {
        let targets = split_targets(criterion, scaled.view(), spec)?;
        Ok(sweep_profile(&x, targets.view(), config.min_node_size)
            .into_iter()
            .map(|b| (b.threshold, -b.score))
            .collect())
    };
    let cde = profile(Criterion::Cde)?;
    let mse = profile(Criterion::Mse)?;
    let mut cde_loss: Vec<f64> = cde.iter().map(|c| c.1).collect();
    let mut mse_loss: Vec<f64> = mse.iter().map(|c| c.1).collect();
    normalize(&mut cde_loss);
    normalize(&mut mse_loss);
    Ok(cde
        .iter()
        .zip(cde_loss.iter().zip(&mse_loss))
        .map(|(&(cutpoint, _), (&c, &m))| CutpointLoss {
            cutpoint,
            cde_loss: c,
            mse_loss: m,
        })
        .collect())
}

/// Cutpoints minimizing each criterion's loss: `(cde, mse)`.
pub fn demo_argmins(rows: &[CutpointLoss]) -> Option<(f64, f64)> {
    let argmin =
        |key: fn(&CutpointLoss) -> f64| rows.iter().min_by(|a, b| key(a).total_cmp(&key(b))).map(|r| r.cutpoint);
    Some((argmin(|r| r.cde_loss)?, argmin(|r| r.mse_loss)?))
}

pub fn write_demo_csv<W: Write>(writer: W, rows: &[CutpointLoss]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| CdeError::Format(e.to_string());
    w.write_record(["cutpoint", "cde_loss", "mse_loss"]).map_err(io)?;
    for r in rows {
        w.write_record([r.cutpoint.to_string(), r.cde_loss.to_string(), r.mse_loss.to_string()])
            .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}
