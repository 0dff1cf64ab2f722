//! Forest training and the per-query training-point weights.

use ndarray::{Array2, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{BasisSpec, ResponseScaler};
use crate::data::{Dataset, Query};
use crate::error::{CdeError, Result};
use crate::functional::{default_mtry, poisson_partition, DomainPartition, FunctionalLayout, PrefixedBlock};
use crate::splitting::{split_targets, Criterion};
use crate::tree::{build_tree, Tree, TreeParams};

/// Kernel bandwidth used at prediction time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Bandwidth {
    /// The same bandwidth in every response dimension.
    Fixed(f64),
    /// Weighted normal-reference rule, per query and per dimension.
    Plugin,
}

impl std::str::FromStr for Bandwidth {
    type Err = CdeError;

    fn from_str(s: &str) -> Result<Self> {
        if s == "plugin" {
            return Ok(Bandwidth::Plugin);
        }
        match s.parse::<f64>() {
            Ok(h) if h > 0.0 && h.is_finite() => Ok(Bandwidth::Fixed(h)),
            _ => Err(CdeError::config(format!(
                "bandwidth must be 'plugin' or a positive number, got '{s}'"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// Candidate features per split; `None` means `round(sqrt(p))` of the
    /// covariates each tree actually sees.
    pub mtry: Option<usize>,
    pub min_node_size: usize,
    pub n_basis: usize,
    pub criterion: Criterion,
    pub bandwidth: Bandwidth,
    /// Mean interval length (in grid points) of functional partitions.
    pub lambda: f64,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 1000,
            mtry: None,
            min_node_size: 5,
            n_basis: 15,
            criterion: Criterion::Cde,
            bandwidth: Bandwidth::Plugin,
            lambda: 50.0,
            seed: 0,
        }
    }
}

impl ForestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(CdeError::config("n_trees must be at least 1"));
        }
        if self.mtry == Some(0) {
            return Err(CdeError::config("mtry must be at least 1"));
        }
        if self.min_node_size == 0 {
            return Err(CdeError::config("min_node_size must be at least 1"));
        }
        if self.n_basis == 0 {
            return Err(CdeError::config("n_basis must be at least 1"));
        }
        if let Bandwidth::Fixed(h) = self.bandwidth {
            if !(h > 0.0 && h.is_finite()) {
                return Err(CdeError::config(format!("bandwidth must be positive, got {h}")));
            }
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(CdeError::config(format!(
                "lambda must be positive, got {}",
                self.lambda
            )));
        }
        Ok(())
    }
}

/// Trained ensemble together with everything prediction needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<Tree>,
    pub scaler: ResponseScaler,
    /// `n x r`, original scale.
    pub training_responses: Array2<f64>,
    pub config: ForestConfig,
    pub functional_layout: Option<FunctionalLayout>,
    pub n_scalar: usize,
}

/// Normalized training-point weights for one query.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    pub weights: Vec<f64>,
}

impl WeightVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(CdeError::domain("weights must be finite and non-negative"));
        }
        Ok(WeightVector { weights })
    }

    pub fn uniform(n: usize) -> Self {
        WeightVector {
            weights: vec![1.0 / n as f64; n],
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// `(sum w)^2 / sum w^2`.
    pub fn effective_size(&self) -> f64 {
        let s = self.sum();
        let s2: f64 = self.weights.iter().map(|w| w * w).sum();
        if s2 > 0.0 {
            s * s / s2
        } else {
            0.0
        }
    }

    /// `(row, weight)` pairs with positive weight.
    pub fn nonzero(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.weights.iter().copied().enumerate().filter(|(_, w)| *w > 0.0)
    }
}

/// Independent rng stream for tree `index`.
pub fn tree_rng(seed: u64, index: usize) -> ChaCha8Rng {
    // splitmix64 finalizer over (seed, index)
    let mut z = seed ^ (index as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    ChaCha8Rng::seed_from_u64(z ^ (z >> 31))
}

/// Fits a forest.
///
/// Responses are min-max scaled once and the split targets computed once;
/// trees are then grown in parallel on independent rng streams, so the result
/// does not depend on the thread count.
pub fn train(dataset: &Dataset, config: &ForestConfig) -> Result<Forest> {
    config.validate()?;
    dataset.validate()?;
    let n = dataset.n_rows();
    if n < 2 * config.min_node_size || n < 2 {
        return Err(CdeError::Fit(format!(
            "{n} rows is fewer than twice min_node_size ({})",
            config.min_node_size
        )));
    }
    let n_scalar = dataset.covariates.ncols();
    if n_scalar == 0 && dataset.functional.is_empty() {
        return Err(CdeError::Fit("dataset has no covariates".into()));
    }
    let scaler = ResponseScaler::fit(dataset.responses.view())?;
    let scaled = scaler.transform(dataset.responses.view());
    let spec = BasisSpec::cosine(config.n_basis, dataset.response_dims())?;
    let targets = split_targets(config.criterion, scaled.view(), spec)?;

    let trees = if dataset.functional.is_empty() {
        let mtry = match config.mtry {
            Some(m) if m > n_scalar => {
                return Err(CdeError::config(format!(
                    "mtry {m} exceeds the {n_scalar} available covariates"
                )))
            }
            Some(m) => m,
            None => default_mtry(n_scalar),
        };
        let features = dataset.covariates.t().as_standard_layout().into_owned();
        let params = TreeParams {
            mtry,
            min_node_size: config.min_node_size,
            criterion: config.criterion,
        };
        (0..config.n_trees)
            .into_par_iter()
            .map(|t| build_tree(features.view(), targets.view(), params, &mut tree_rng(config.seed, t)))
            .collect::<Result<Vec<_>>>()?
    } else {
        let prefixed: Vec<PrefixedBlock> = dataset.functional.iter().map(PrefixedBlock::new).collect();
        (0..config.n_trees)
            .into_par_iter()
            .map(|t| {
                functional_tree(
                    &prefixed,
                    dataset.covariates.view(),
                    targets.view(),
                    config,
                    &mut tree_rng(config.seed, t),
                )
            })
            .collect::<Result<Vec<_>>>()?
    };

    let functional_layout = (!dataset.functional.is_empty()).then(|| FunctionalLayout {
        domains: dataset.functional.iter().map(|b| b.domain_points.clone()).collect(),
        n_scalar,
    });
    Ok(Forest {
        trees,
        scaler,
        training_responses: dataset.responses.clone(),
        config: config.clone(),
        functional_layout,
        n_scalar,
    })
}

/// Draws this tree's partitions, builds its interval-mean covariates, and
/// grows it. `mtry` defaults to `round(sqrt(p))` of the reduced covariate count.
fn functional_tree(
    prefixed: &[PrefixedBlock],
    scalars: ArrayView2<f64>,
    targets: ArrayView2<f64>,
    config: &ForestConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Tree> {
    let partitions = prefixed
        .iter()
        .map(|b| poisson_partition(b.n_points(), config.lambda, rng))
        .collect::<Result<Vec<DomainPartition>>>()?;
    let features = FunctionalLayout::tree_features(prefixed, scalars, &partitions);
    let p = features.nrows();
    let mtry = config.mtry.unwrap_or_else(|| default_mtry(p)).min(p);
    let params = TreeParams {
        mtry,
        min_node_size: config.min_node_size,
        criterion: config.criterion,
    };
    let mut tree = build_tree(features.view(), targets, params, rng)?;
    tree.partitions = partitions;
    Ok(tree)
}

impl Forest {
    pub fn n_training(&self) -> usize {
        self.training_responses.nrows()
    }

    pub fn response_dims(&self) -> usize {
        self.training_responses.ncols()
    }

    /// Averaged leaf co-membership weights of every training row for `query`.
    ///
    /// Each tree gives `1 / |leaf|` to every (bootstrap) member of the leaf the
    /// query reaches; the average over trees is renormalized to sum to one.
    pub fn query_weights(&self, query: &Query) -> Result<WeightVector> {
        if query.scalars.len() != self.n_scalar {
            return Err(CdeError::domain(format!(
                "query has {} scalar covariates, model expects {}",
                query.scalars.len(),
                self.n_scalar
            )));
        }
        let mut weights = vec![0.0; self.n_training()];
        let per_tree = 1.0 / self.trees.len() as f64;
        match &self.functional_layout {
            None => {
                if !query.curves.is_empty() {
                    return Err(CdeError::domain("model was trained without functional covariates"));
                }
                let x = query.scalars.to_vec();
                for tree in &self.trees {
                    accumulate(tree, tree.leaf_index(&x)?, per_tree, &mut weights);
                }
            }
            Some(layout) => {
                let prefixed = layout.prefix_query(&query.curves)?;
                let mut x = Vec::new();
                for tree in &self.trees {
                    x.clear();
                    for (block, partition) in prefixed.iter().zip(&tree.partitions) {
                        block.means_into(0, partition, &mut x);
                    }
                    x.extend(query.scalars.iter());
                    accumulate(tree, tree.leaf_index(&x)?, per_tree, &mut weights);
                }
            }
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(CdeError::domain("query reached no training rows"));
        }
        for w in &mut weights {
            *w /= total;
        }
        Ok(WeightVector { weights })
    }
}

fn accumulate(tree: &Tree, leaf: usize, per_tree: f64, weights: &mut [f64]) {
    let members = tree.leaf_members(leaf);
    if members.is_empty() {
        return;
    }
    let share = per_tree / members.len() as f64;
    for &m in members {
        weights[m as usize] += share;
    }
}
