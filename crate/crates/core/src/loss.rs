//! Held-out CDE loss `E[int p^2(y|X) dy] - 2 E[p(Y|X)]` (the L2 loss up to a
//! constant that does not depend on the estimate).
//!
//! Standard errors are over held-out points.

use ndarray::ArrayView2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::density::{predict, DensityEstimate, EvalGrid, GridPolicy};
use crate::error::{CdeError, Result};
use crate::forest::{Bandwidth, Forest};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub loss: f64,
    pub std_error: f64,
    pub n_eval: usize,
    /// Held-out responses that fell outside their estimate's grid.
    pub coverage_warnings: usize,
}

impl LossReport {
    /// Mean and standard error of per-point contributions.
    pub fn from_contributions(contributions: &[f64], coverage_warnings: usize) -> Result<Self> {
        let m = contributions.len();
        if m < 2 {
            return Err(CdeError::domain(format!(
                "loss needs at least 2 held-out points, got {m}"
            )));
        }
        let mean = contributions.iter().sum::<f64>() / m as f64;
        let var = contributions.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
        Ok(LossReport {
            loss: mean,
            std_error: (var / m as f64).sqrt(),
            n_eval: m,
            coverage_warnings,
        })
    }
}

/// Iterated trapezoid integral of grid-aligned values.
pub fn trapezoid_integral(grid: &EvalGrid, values: &[f64]) -> f64 {
    let mut current = values.to_vec();
    // integrate out the last dimension first
    for axis in grid.axes().iter().rev() {
        let len = axis.len();
        let mut next = Vec::with_capacity(current.len() / len);
        for chunk in current.chunks_exact(len) {
            let mut acc = 0.0;
            for k in 0..len - 1 {
                acc += 0.5 * (chunk[k] + chunk[k + 1]) * (axis[k + 1] - axis[k]);
            }
            next.push(acc);
        }
        current = next;
    }
    current[0]
}

/// `int p^2`, by trapezoid quadrature on the estimate's grid.
pub fn integral_squared(estimate: &DensityEstimate) -> f64 {
    let squared: Vec<f64> = estimate.values.iter().map(|v| v * v).collect();
    trapezoid_integral(&estimate.grid, &squared)
}

/// Multilinear interpolation at `y`; points outside the grid hull are clamped
/// to the nearest edge. Returns the value and whether clamping happened.
pub fn interpolate(estimate: &DensityEstimate, y: &[f64]) -> Result<(f64, bool)> {
    let axes = estimate.grid.axes();
    if y.len() != axes.len() {
        return Err(CdeError::domain(format!(
            "point has {} coordinates, grid has {} dimensions",
            y.len(),
            axes.len()
        )));
    }
    let mut outside = false;
    // per dimension: lower index and fractional position
    let mut cells = Vec::with_capacity(axes.len());
    for (axis, &v) in axes.iter().zip(y) {
        let last = axis.len() - 1;
        if !(v >= axis[0] && v <= axis[last]) {
            outside = true;
        }
        let v = v.clamp(axis[0], axis[last]);
        let k = axis.partition_point(|&g| g <= v).clamp(1, last) - 1;
        let t = (v - axis[k]) / (axis[k + 1] - axis[k]);
        cells.push((k, t));
    }
    let strides: Vec<usize> = (0..axes.len())
        .map(|d| axes[d + 1..].iter().map(Vec::len).product())
        .collect();
    let mut value = 0.0;
    for corner in 0..(1usize << axes.len()) {
        let mut weight = 1.0;
        let mut idx = 0;
        for (d, &(k, t)) in cells.iter().enumerate() {
            let upper = (corner >> d) & 1 == 1;
            weight *= if upper { t } else { 1.0 - t };
            idx += (k + upper as usize) * strides[d];
        }
        if weight != 0.0 {
            value += weight * estimate.values[idx];
        }
    }
    Ok((value, outside))
}

/// Per-point contribution `int p_i^2 - 2 p_i(y_i)` and whether `y_i` was outside the grid.
pub fn contribution(estimate: &DensityEstimate, y: &[f64]) -> Result<(f64, bool)> {
    let (at_y, outside) = interpolate(estimate, y)?;
    Ok((integral_squared(estimate) - 2.0 * at_y, outside))
}

/// Empirical CDE loss of estimates against their held-out responses.
pub fn cde_loss(estimates: &[DensityEstimate], true_responses: ArrayView2<f64>) -> Result<LossReport> {
    if estimates.len() != true_responses.nrows() {
        return Err(CdeError::domain(format!(
            "{} estimates for {} held-out responses",
            estimates.len(),
            true_responses.nrows()
        )));
    }
    let mut contributions = Vec::with_capacity(estimates.len());
    let mut warnings = 0;
    for (est, y) in estimates.iter().zip(true_responses.rows()) {
        let (c, outside) = contribution(est, &y.to_vec())?;
        contributions.push(c);
        warnings += outside as usize;
    }
    LossReport::from_contributions(&contributions, warnings)
}

/// Predicts every row of `test` and scores it, without retaining the estimates.
pub fn evaluate(forest: &Forest, test: &Dataset, grid: &GridPolicy, bandwidth: Bandwidth) -> Result<LossReport> {
    if test.n_rows() == 0 {
        return Err(CdeError::domain("test set is empty"));
    }
    if test.response_dims() != forest.response_dims() {
        return Err(CdeError::domain(format!(
            "test responses have {} dimensions, model has {}",
            test.response_dims(),
            forest.response_dims()
        )));
    }
    let scored = (0..test.n_rows())
        .into_par_iter()
        .map(|i| {
            let est = predict(forest, &test.query(i), grid, bandwidth)?;
            contribution(&est, &test.responses.row(i).to_vec())
        })
        .collect::<Result<Vec<_>>>()?;
    let contributions: Vec<f64> = scored.iter().map(|(c, _)| *c).collect();
    let warnings = scored.iter().filter(|(_, o)| *o).count();
    LossReport::from_contributions(&contributions, warnings)
}
