use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand};
use ndarray::Array2;
use serde_json::json;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::time::Instant;

use cdeforest::bench::{demo_split, run_bench, write_bench_csv, write_demo_csv, BenchConfig, DemoConfig};
use cdeforest::datagen::{generate, SyntheticConfig, Variant};
use cdeforest::density::{predict, DensityEstimate, EvalGrid, GridPolicy};
use cdeforest::io::{dataset_from_table, read_functional, read_table, write_dataset, write_functional, Table};
use cdeforest::loss::{evaluate, LossReport};
use cdeforest::{train, Bandwidth, Criterion, Dataset, ForestConfig, ModelFile};

#[derive(Debug, Parser)]
#[command(
    name = "cdeforest",
    version,
    about = "Random forests for conditional density estimation"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic dataset as CSV.
    Generate(GenerateArgs),
    /// Fit a forest and save it.
    Train(TrainArgs),
    /// Write conditional densities for every query row.
    Predict(PredictArgs),
    /// Score a model on held-out data with the CDE loss.
    Evaluate(EvaluateArgs),
    /// Compare split criteria (or functional treatments) on synthetic data.
    Bench(BenchArgs),
    /// Loss of every single-split cutpoint on transition data.
    DemoSplit(DemoArgs),
}

#[derive(Debug, Args)]
struct FunctionalArgs {
    /// Wide CSV of curves, one row per observation (repeatable).
    #[arg(long = "functional")]
    functional: Vec<PathBuf>,
    /// One-column CSV of domain points, one per --functional block.
    #[arg(long = "domain")]
    domain: Vec<PathBuf>,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[arg(long)]
    variant: Variant,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Response noise; defaults per variant.
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    functional_out: Option<PathBuf>,
    #[arg(long)]
    domain_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    /// Response column (repeat for joint responses).
    #[arg(long = "response", required = true)]
    response: Vec<String>,
    #[command(flatten)]
    functional: FunctionalArgs,
    /// Treat functional blocks as plain covariate vectors.
    #[arg(long)]
    vector: bool,
    #[arg(long, default_value_t = 1000)]
    ntrees: usize,
    #[arg(long)]
    mtry: Option<usize>,
    #[arg(long, default_value_t = 5)]
    min_node_size: usize,
    #[arg(long, default_value_t = 15)]
    nbasis: usize,
    #[arg(long, default_value = "cde")]
    criterion: Criterion,
    /// A positive number or `plugin`.
    #[arg(long, default_value = "plugin")]
    bandwidth: Bandwidth,
    #[arg(long, default_value_t = 50.0)]
    lambda: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct GridArgs {
    /// Grid points per response dimension.
    #[arg(long)]
    grid_points: Option<usize>,
    /// `LO:HI` range per response dimension; defaults to the training range
    /// widened by four bandwidths.
    #[arg(long = "grid-range", value_parser = parse_range, allow_hyphen_values = true)]
    grid_range: Vec<(f64, f64)>,
    /// Override the model's bandwidth: a positive number or `plugin`.
    #[arg(long)]
    bandwidth: Option<Bandwidth>,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    functional: FunctionalArgs,
    #[command(flatten)]
    grid: GridArgs,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    functional: FunctionalArgs,
    #[command(flatten)]
    grid: GridArgs,
    /// Score the uniform density on this `LO:HI` box (one per response
    /// dimension) instead of the model.
    #[arg(long = "uniform", value_parser = parse_range, allow_hyphen_values = true)]
    uniform: Vec<(f64, f64)>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(long)]
    variant: Variant,
    /// Comma-separated training sizes.
    #[arg(long, value_delimiter = ',', default_value = "1000")]
    sizes: Vec<usize>,
    /// Number of seeds per size.
    #[arg(long, default_value_t = 1)]
    seeds: usize,
    #[arg(long, default_value_t = 0)]
    base_seed: u64,
    #[arg(long, default_value_t = 1000)]
    ntest: usize,
    #[arg(long, default_value_t = 1000)]
    ntrees: usize,
    /// Leave out wall-clock columns so the output is reproducible byte for byte.
    #[arg(long)]
    no_timing: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DemoArgs {
    #[arg(long, default_value_t = 2000)]
    n: usize,
    #[arg(long, default_value_t = 0.3)]
    sigma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 15)]
    nbasis: usize,
    #[arg(long, default_value_t = 5)]
    min_node_size: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[allow(clippy::neg_cmp_op_on_partial_ord)]
fn parse_range(s: &str) -> std::result::Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(':').ok_or_else(|| format!("expected LO:HI, got '{s}'"))?;
    let lo: f64 = lo.trim().parse().map_err(|_| format!("bad lower bound in '{s}'"))?;
    let hi: f64 = hi.trim().parse().map_err(|_| format!("bad upper bound in '{s}'"))?;
    if !(hi > lo && (hi - lo).is_finite()) {
        return Err(format!("range '{s}' is empty"));
    }
    Ok((lo, hi))
}

fn round3(t: f64) -> f64 {
    (t * 1000.0).round() / 1000.0
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Train(a) => cmd_train(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Bench(a) => cmd_bench(a),
        Command::DemoSplit(a) => cmd_demo_split(a),
    }
}

fn cmd_generate(a: GenerateArgs) -> Result<()> {
    let mut cfg = SyntheticConfig::new(a.variant, a.n, a.seed);
    if let Some(s) = a.sigma {
        cfg.sigma = s;
    }
    let ds = generate(&cfg)?;
    write_dataset(&a.out, &ds)?;
    if let Some(block) = ds.functional.first() {
        let (Some(f), Some(d)) = (&a.functional_out, &a.domain_out) else {
            bail!(
                "variant {} has curves: pass --functional-out and --domain-out",
                a.variant.name()
            );
        };
        write_functional(f, d, block)?;
    }
    println!(
        "{}",
        json!({"command": "generate", "variant": a.variant.name(), "n": a.n, "seed": a.seed})
    );
    Ok(())
}

/// Reads the main table plus any functional blocks.
fn load_table(
    data: &PathBuf,
    functional: &FunctionalArgs,
) -> Result<(Table, Vec<cdeforest::functional::FunctionalBlock>)> {
    ensure!(
        functional.functional.len() == functional.domain.len(),
        "each --functional block needs a matching --domain file"
    );
    let table = read_table(data).with_context(|| format!("reading {}", data.display()))?;
    let blocks = functional
        .functional
        .iter()
        .zip(&functional.domain)
        .map(|(f, d)| read_functional(f, d).with_context(|| format!("reading {}", f.display())))
        .collect::<Result<Vec<_>>>()?;
    for (b, block) in blocks.iter().enumerate() {
        ensure!(
            block.n_curves() == table.values.nrows(),
            "functional block {b} has {} rows, data has {}",
            block.n_curves(),
            table.values.nrows()
        );
    }
    Ok((table, blocks))
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let (table, blocks) = load_table(&a.data, &a.functional)?;
    let mut ds = dataset_from_table(&table, &a.response)?;
    for block in blocks {
        ds = ds.with_functional(block)?;
    }
    if a.vector {
        ds = ds.flatten_functional();
    }
    let config = ForestConfig {
        n_trees: a.ntrees,
        mtry: a.mtry,
        min_node_size: a.min_node_size,
        n_basis: a.nbasis,
        criterion: a.criterion,
        bandwidth: a.bandwidth,
        lambda: a.lambda,
        seed: a.seed,
    };
    let start = Instant::now();
    let forest = train(&ds, &config)?;
    let elapsed = start.elapsed().as_secs_f64();
    let model = ModelFile {
        forest,
        covariate_names: ds.covariate_names.clone(),
        response_names: ds.response_names.clone(),
    };
    model
        .save(&a.out)
        .with_context(|| format!("writing {}", a.out.display()))?;
    let bandwidth = match config.bandwidth {
        Bandwidth::Fixed(h) => json!(h),
        Bandwidth::Plugin => json!("plugin"),
    };
    println!(
        "{}",
        json!({
            "command": "train",
            "train_time": round3(elapsed),
            "n": ds.n_rows(),
            "n_covariates": ds.covariates.ncols(),
            "functional_blocks": ds.functional.len(),
            "n_trees": config.n_trees,
            "mtry": config.mtry,
            "min_node_size": config.min_node_size,
            "n_basis": config.n_basis,
            "criterion": config.criterion.name(),
            "bandwidth": bandwidth,
            "lambda": config.lambda,
            "seed": config.seed,
        })
    );
    Ok(())
}

/// Query dataset laid out the way the model expects.
fn load_queries(model: &ModelFile, data: &PathBuf, functional: &FunctionalArgs) -> Result<Dataset> {
    let (table, blocks) = load_table(data, functional)?;
    let n = table.values.nrows();
    ensure!(n > 0, "{} has no rows", data.display());
    let mut ds = Dataset {
        covariates: table.values.clone(),
        responses: Array2::zeros((n, 0)),
        functional: Vec::new(),
        covariate_names: table.headers.clone(),
        response_names: Vec::new(),
    };
    for block in blocks {
        ds = ds.with_functional(block)?;
    }
    let expects_blocks = model.forest.functional_layout.as_ref().map_or(0, |l| l.domains.len());
    if expects_blocks == 0 {
        ds = ds.flatten_functional();
    } else {
        ensure!(
            ds.functional.len() == expects_blocks,
            "model expects {expects_blocks} functional blocks, got {}",
            ds.functional.len()
        );
    }
    let wide = Table {
        headers: ds.covariate_names.clone(),
        values: ds.covariates.clone(),
    };
    ds.covariates = wide
        .select(&model.covariate_names)
        .context("query covariates do not match the model")?;
    ds.covariate_names = model.covariate_names.clone();
    // responses are optional for prediction; take them when every column is present
    if let Ok(y) = table.select(&model.response_names) {
        ds.responses = y;
        ds.response_names = model.response_names.clone();
    }
    Ok(ds)
}

fn grid_policy(args: &GridArgs, dims: usize) -> Result<GridPolicy> {
    if args.grid_range.is_empty() {
        if let Some(p) = args.grid_points {
            ensure!(p >= 2, "--grid-points must be at least 2");
        }
        return Ok(GridPolicy::Auto {
            points: args.grid_points,
        });
    }
    ensure!(
        args.grid_range.len() == dims,
        "{} --grid-range values for {dims} response dimensions",
        args.grid_range.len()
    );
    let points = args.grid_points.unwrap_or(if dims >= 3 { 101 } else { 1000 });
    Ok(GridPolicy::Explicit(EvalGrid::uniform(&args.grid_range, points)?))
}

fn cmd_predict(a: PredictArgs) -> Result<()> {
    let model = ModelFile::load(&a.model).with_context(|| format!("loading {}", a.model.display()))?;
    let queries = load_queries(&model, &a.data, &a.functional)?;
    let r = model.forest.response_dims();
    let grid = grid_policy(&a.grid, r)?;
    let bandwidth = a.grid.bandwidth.unwrap_or(model.forest.config.bandwidth);
    let mut out = output(&a.out)?;
    let mut header = vec!["query_id".to_string()];
    if r == 1 {
        header.push("y".into());
    } else {
        header.extend((1..=r).map(|d| format!("y{d}")));
    }
    header.push("density".into());
    writeln!(out, "{}", header.join(","))?;
    for i in 0..queries.n_rows() {
        let est = predict(&model.forest, &queries.query(i), &grid, bandwidth).with_context(|| format!("query {i}"))?;
        for (g, v) in est.values.iter().enumerate() {
            let point = est.grid.point(g);
            let coords: Vec<String> = point.iter().map(f64::to_string).collect();
            writeln!(out, "{i},{},{v}", coords.join(","))?;
        }
    }
    out.flush()?;
    Ok(())
}

fn uniform_report(ranges: &[(f64, f64)], responses: ndarray::ArrayView2<f64>) -> Result<LossReport> {
    ensure!(
        ranges.len() == responses.ncols(),
        "{} --uniform ranges for {} response dimensions",
        ranges.len(),
        responses.ncols()
    );
    let volume: f64 = ranges.iter().map(|(lo, hi)| hi - lo).product();
    let grid = EvalGrid::uniform(ranges, 2)?;
    let est = DensityEstimate::new(grid.clone(), vec![1.0 / volume; grid.n_points()], vec![])?;
    let estimates = vec![est; responses.nrows()];
    Ok(cdeforest::cde_loss(&estimates, responses)?)
}

fn cmd_evaluate(a: EvaluateArgs) -> Result<()> {
    let model = ModelFile::load(&a.model).with_context(|| format!("loading {}", a.model.display()))?;
    let test = load_queries(&model, &a.data, &a.functional)?;
    ensure!(
        test.response_dims() == model.forest.response_dims(),
        "test data lacks response columns {:?}",
        model.response_names
    );
    let start = Instant::now();
    let report = if a.uniform.is_empty() {
        let grid = grid_policy(&a.grid, model.forest.response_dims())?;
        let bandwidth = a.grid.bandwidth.unwrap_or(model.forest.config.bandwidth);
        evaluate(&model.forest, &test, &grid, bandwidth)?
    } else {
        uniform_report(&a.uniform, test.responses.view())?
    };
    let elapsed = start.elapsed().as_secs_f64();
    println!(
        "{}",
        json!({
            "loss": report.loss,
            "se": report.std_error,
            "n_eval": report.n_eval,
            "coverage_warnings": report.coverage_warnings,
            "predict_wall_time": round3(elapsed),
        })
    );
    Ok(())
}

fn cmd_bench(a: BenchArgs) -> Result<()> {
    ensure!(a.seeds >= 1, "--seeds must be at least 1");
    ensure!(!a.sizes.is_empty(), "--sizes must list at least one size");
    let cfg = BenchConfig {
        variant: a.variant,
        sizes: a.sizes,
        seeds: a.seeds,
        base_seed: a.base_seed,
        n_test: a.ntest,
        n_trees: a.ntrees,
    };
    let rows = run_bench(&cfg)?;
    let out = output(&a.out)?;
    write_bench_csv(out, &rows, !a.no_timing)?;
    Ok(())
}

fn cmd_demo_split(a: DemoArgs) -> Result<()> {
    let rows = demo_split(&DemoConfig {
        n: a.n,
        sigma: a.sigma,
        seed: a.seed,
        n_basis: a.nbasis,
        min_node_size: a.min_node_size,
    })?;
    write_demo_csv(output(&a.out)?, &rows)?;
    Ok(())
}
