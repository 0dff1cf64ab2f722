//! Random forests whose splits minimize a conditional density estimation loss.
//!
//! Trees are grown on an orthogonal cosine-series criterion; predictions are
//! weighted kernel density estimates over the training responses, with
//! weights given by leaf co-membership across the forest. Multivariate
//! responses (up to three) use a tensor basis, and functional covariates are
//! reduced per tree to interval means over a random partition of the domain.

// `!(x >= 0.0)` is used on purpose to reject NaN along with negatives
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod basis;
pub mod bench;
pub mod data;
pub mod datagen;
pub mod density;
pub mod error;
pub mod forest;
pub mod functional;
pub mod io;
pub mod loss;
pub mod model;
pub mod splitting;
pub mod tree;

pub use basis::{BasisMatrix, BasisSpec, ResponseScaler};
pub use data::{Dataset, Query};
pub use density::{predict, weighted_kde, DensityEstimate, EvalGrid, GridPolicy};
pub use error::{CdeError, Result};
pub use forest::{train, Bandwidth, Forest, ForestConfig, WeightVector};
pub use loss::{cde_loss, evaluate, integral_squared, LossReport};
pub use model::ModelFile;
pub use splitting::Criterion;
pub use tree::Tree;
