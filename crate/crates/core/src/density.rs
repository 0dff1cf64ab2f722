//! Weighted Gaussian kernel density estimates of `p(y | x)` on explicit grids.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::data::Query;
use crate::error::{CdeError, Result};
use crate::forest::{Bandwidth, Forest, WeightVector};

/// Kernel contributions beyond this many bandwidths are dropped; the Gaussian
/// tail there is below `1e-31` of the peak.
const KERNEL_CUTOFF: f64 = 12.0;
/// Default evaluation points per response dimension.
pub const DEFAULT_GRID_POINTS: usize = 1000;
/// Default points per dimension for three-dimensional responses.
pub const DEFAULT_GRID_POINTS_3D: usize = 101;
/// Default grid margin around the training range, in bandwidths.
pub const GRID_MARGIN: f64 = 4.0;

/// Cartesian product of per-dimension evaluation axes.
///
/// Values on the grid are stored row-major: the last dimension varies fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalGrid {
    axes: Vec<Vec<f64>>,
}

impl EvalGrid {
    pub fn new(axes: Vec<Vec<f64>>) -> Result<Self> {
        if axes.is_empty() {
            return Err(CdeError::domain("grid needs at least one dimension"));
        }
        for (d, axis) in axes.iter().enumerate() {
            if axis.len() < 2 {
                return Err(CdeError::domain(format!("grid axis {d} has fewer than 2 points")));
            }
            if axis.iter().any(|v| !v.is_finite()) || axis.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(CdeError::domain(format!("grid axis {d} is not strictly increasing")));
            }
        }
        Ok(EvalGrid { axes })
    }

    /// `points` evenly spaced values per dimension over the given ranges.
    pub fn uniform(ranges: &[(f64, f64)], points: usize) -> Result<Self> {
        let axes = ranges
            .iter()
            .map(|&(lo, hi)| Array1::linspace(lo, hi, points).to_vec())
            .collect();
        Self::new(axes)
    }

    pub fn axes(&self) -> &[Vec<f64>] {
        &self.axes
    }

    pub fn dims(&self) -> usize {
        self.axes.len()
    }

    pub fn n_points(&self) -> usize {
        self.axes.iter().map(Vec::len).product()
    }

    /// Coordinates of flat grid index `idx`.
    pub fn point(&self, mut idx: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dims()];
        for (d, axis) in self.axes.iter().enumerate().rev() {
            out[d] = axis[idx % axis.len()];
            idx /= axis.len();
        }
        out
    }
}

/// Density values aligned to a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityEstimate {
    pub grid: EvalGrid,
    pub values: Vec<f64>,
    pub bandwidth_used: Vec<f64>,
}

impl DensityEstimate {
    pub fn new(grid: EvalGrid, values: Vec<f64>, bandwidth_used: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_points() {
            return Err(CdeError::domain(format!(
                "{} values for a grid of {} points",
                values.len(),
                grid.n_points()
            )));
        }
        if values.iter().any(|v| !(*v >= 0.0)) {
            return Err(CdeError::domain("density values must be non-negative"));
        }
        Ok(DensityEstimate {
            grid,
            values,
            bandwidth_used,
        })
    }
}

#[inline]
fn gaussian(u: f64) -> f64 {
    (-0.5 * u * u).exp() / (2.0 * PI).sqrt()
}

/// Grid index range `[lo, hi)` within the kernel cutoff of `center`.
fn window(axis: &[f64], center: f64, h: f64) -> (usize, usize) {
    let reach = KERNEL_CUTOFF * h;
    let lo = axis.partition_point(|&g| g < center - reach);
    let hi = axis.partition_point(|&g| g <= center + reach);
    (lo, hi.max(lo))
}

/// `K_h(y - g)` for every grid point of `axis` inside the cutoff window.
fn kernel_row(axis: &[f64], center: f64, h: f64, out: &mut [f64]) -> (usize, usize) {
    let (lo, hi) = window(axis, center, h);
    for (o, g) in out[lo..hi].iter_mut().zip(&axis[lo..hi]) {
        *o = gaussian((center - g) / h) / h;
    }
    (lo, hi)
}

/// Weighted product-Gaussian KDE on `grid`:
/// `p(g) = sum_i w_i prod_d K_h(Y_id - g_d) / sum_i w_i`.
pub fn weighted_kde(
    weights: &WeightVector,
    responses: ArrayView2<f64>,
    grid: &EvalGrid,
    bandwidth: &[f64],
) -> Result<DensityEstimate> {
    let r = responses.ncols();
    if weights.len() != responses.nrows() {
        return Err(CdeError::domain(format!(
            "{} weights for {} responses",
            weights.len(),
            responses.nrows()
        )));
    }
    if grid.dims() != r || bandwidth.len() != r {
        return Err(CdeError::domain(format!(
            "grid has {} dims and {} bandwidths for {r}-dimensional responses",
            grid.dims(),
            bandwidth.len()
        )));
    }
    if let Some(h) = bandwidth.iter().find(|h| !(**h > 0.0 && h.is_finite())) {
        return Err(CdeError::domain(format!("bandwidth must be positive, got {h}")));
    }
    let total = weights.sum();
    if !(total > 0.0) {
        return Err(CdeError::domain("weights sum to zero"));
    }
    let support: Vec<(usize, f64)> = weights.nonzero().map(|(i, w)| (i, w / total)).collect();
    let axes = grid.axes();
    let mut values = vec![0.0; grid.n_points()];
    match r {
        1 => {
            let axis = &axes[0];
            let h = bandwidth[0];
            for &(i, w) in &support {
                let (lo, hi) = window(axis, responses[[i, 0]], h);
                let y = responses[[i, 0]];
                for (v, g) in values[lo..hi].iter_mut().zip(&axis[lo..hi]) {
                    *v += w * gaussian((y - g) / h) / h;
                }
            }
        }
        2 => {
            // values = K1^T diag(w) K2
            let (g1, g2) = (axes[0].len(), axes[1].len());
            let mut k1 = Array2::<f64>::zeros((support.len(), g1));
            let mut k2 = Array2::<f64>::zeros((support.len(), g2));
            for (s, &(i, w)) in support.iter().enumerate() {
                let mut row1 = k1.row_mut(s);
                let row1 = row1.as_slice_mut().expect("contiguous");
                let (lo, hi) = kernel_row(&axes[0], responses[[i, 0]], bandwidth[0], row1);
                for v in &mut row1[lo..hi] {
                    *v *= w;
                }
                let mut row2 = k2.row_mut(s);
                kernel_row(
                    &axes[1],
                    responses[[i, 1]],
                    bandwidth[1],
                    row2.as_slice_mut().expect("contiguous"),
                );
            }
            let prod = k1.t().dot(&k2);
            values.copy_from_slice(prod.as_standard_layout().as_slice().expect("standard layout"));
        }
        _ => {
            let strides: Vec<usize> = (0..r).map(|d| axes[d + 1..].iter().map(Vec::len).product()).collect();
            let mut rows: Vec<Vec<f64>> = axes.iter().map(|a| vec![0.0; a.len()]).collect();
            let mut windows = vec![(0, 0); r];
            for &(i, w) in &support {
                for d in 0..r {
                    windows[d] = kernel_row(&axes[d], responses[[i, d]], bandwidth[d], &mut rows[d]);
                }
                accumulate_product(&mut values, &rows, &windows, &strides, 0, 0, w);
            }
        }
    }
    DensityEstimate::new(grid.clone(), values, bandwidth.to_vec())
}

fn accumulate_product(
    values: &mut [f64],
    rows: &[Vec<f64>],
    windows: &[(usize, usize)],
    strides: &[usize],
    dim: usize,
    offset: usize,
    scale: f64,
) {
    let (lo, hi) = windows[dim];
    if dim + 1 == rows.len() {
        for g in lo..hi {
            values[offset + g] += scale * rows[dim][g];
        }
    } else {
        for g in lo..hi {
            let s = scale * rows[dim][g];
            if s != 0.0 {
                accumulate_product(values, rows, windows, strides, dim + 1, offset + g * strides[dim], s);
            }
        }
    }
}

/// Weighted normal-reference bandwidth `1.06 sigma_w n_eff^(-1/5)`.
///
/// Falls back to `range / 4` in place of `sigma_w` when the weighted sample is
/// degenerate (`n_eff < 2` or zero spread); fails if the weighted support has
/// zero range.
pub fn plugin_bandwidth(weights: &WeightVector, responses: ArrayView1<f64>) -> Result<f64> {
    if weights.len() != responses.len() {
        return Err(CdeError::domain("weights and responses differ in length"));
    }
    let total = weights.sum();
    if !(total > 0.0) {
        return Err(CdeError::domain("weights sum to zero"));
    }
    let n_eff = weights.effective_size();
    let mean: f64 = weights.nonzero().map(|(i, w)| w * responses[i]).sum::<f64>() / total;
    let var: f64 = weights
        .nonzero()
        .map(|(i, w)| w * (responses[i] - mean).powi(2))
        .sum::<f64>()
        / total;
    let sd = var.max(0.0).sqrt();
    let factor = 1.06 * n_eff.powf(-0.2);
    if n_eff >= 2.0 && sd > 0.0 {
        return Ok(factor * sd);
    }
    let (lo, hi) = weights
        .nonzero()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (i, _)| {
            (lo.min(responses[i]), hi.max(responses[i]))
        });
    let range = hi - lo;
    if range > 0.0 {
        Ok(factor * range / 4.0)
    } else {
        Err(CdeError::domain(
            "weighted sample is degenerate: all weight on one response value",
        ))
    }
}

/// Where to evaluate a prediction.
#[derive(Debug, Clone, PartialEq)]
pub enum GridPolicy {
    /// Training response range widened by four bandwidths on each side, with
    /// the given points per dimension (default 1000; 101 for three dimensions).
    Auto {
        points: Option<usize>,
    },
    Explicit(EvalGrid),
}

impl Default for GridPolicy {
    fn default() -> Self {
        GridPolicy::Auto { points: None }
    }
}

impl GridPolicy {
    pub fn resolve(&self, forest: &Forest, bandwidth: &[f64]) -> Result<EvalGrid> {
        match self {
            GridPolicy::Explicit(grid) => Ok(grid.clone()),
            GridPolicy::Auto { points } => {
                let r = forest.response_dims();
                let points = points.unwrap_or(if r >= 3 {
                    DEFAULT_GRID_POINTS_3D
                } else {
                    DEFAULT_GRID_POINTS
                });
                let ranges: Vec<(f64, f64)> = (0..r)
                    .map(|d| {
                        let m = GRID_MARGIN * bandwidth[d];
                        (forest.scaler.min[d] - m, forest.scaler.max[d] + m)
                    })
                    .collect();
                EvalGrid::uniform(&ranges, points)
            }
        }
    }
}

/// Per-dimension bandwidths for a weight vector.
pub fn resolve_bandwidth(policy: Bandwidth, weights: &WeightVector, responses: ArrayView2<f64>) -> Result<Vec<f64>> {
    match policy {
        Bandwidth::Fixed(h) => {
            if !(h > 0.0 && h.is_finite()) {
                return Err(CdeError::domain(format!("bandwidth must be positive, got {h}")));
            }
            Ok(vec![h; responses.ncols()])
        }
        Bandwidth::Plugin => responses
            .columns()
            .into_iter()
            .map(|col| plugin_bandwidth(weights, col))
            .collect(),
    }
}

/// Conditional density estimate for one query: forest weights, bandwidth, KDE.
pub fn predict(forest: &Forest, query: &Query, grid: &GridPolicy, bandwidth: Bandwidth) -> Result<DensityEstimate> {
    if !query.is_finite() {
        return Err(CdeError::domain("query contains non-finite values"));
    }
    let weights = forest.query_weights(query)?;
    let responses = forest.training_responses.view();
    let h = resolve_bandwidth(bandwidth, &weights, responses)?;
    let grid = grid.resolve(forest, &h)?;
    weighted_kde(&weights, responses, &grid, &h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn single_point_is_normal_density() {
        let w = WeightVector::new(vec![1.0]).unwrap();
        let y = array![[0.7]];
        let grid = EvalGrid::uniform(&[(-1.0, 2.0)], 31).unwrap();
        let est = weighted_kde(&w, y.view(), &grid, &[0.2]).unwrap();
        for (g, v) in grid.axes()[0].iter().zip(&est.values) {
            let z = (g - 0.7) / 0.2;
            let expect = (-0.5 * z * z).exp() / (0.2 * (2.0 * PI).sqrt());
            assert!((v - expect).abs() < 1e-14, "{g}: {v} vs {expect}");
        }
    }

    #[test]
    fn bandwidth_must_be_positive() {
        let w = WeightVector::uniform(2);
        let y = array![[0.0], [1.0]];
        let grid = EvalGrid::uniform(&[(0.0, 1.0)], 5).unwrap();
        assert!(weighted_kde(&w, y.view(), &grid, &[0.0]).is_err());
        assert!(weighted_kde(&w, y.view(), &grid, &[-1.0]).is_err());
    }

    #[test]
    fn plugin_closed_form() {
        let w = WeightVector::new(vec![0.5, 0.5]).unwrap();
        let h = plugin_bandwidth(&w, array![0.0, 1.0].view()).unwrap();
        assert!((h - 1.06 * 0.5 * 2f64.powf(-0.2)).abs() < 1e-15);
    }

    #[test]
    fn plugin_uniform_is_classic_rule() {
        let y = array![1.0f64, 2.0, 4.0, 7.0, 11.0];
        let w = WeightVector::uniform(5);
        let mean = y.mean().unwrap();
        let sd = (y.mapv(|v| (v - mean).powi(2)).sum() / 5.0).sqrt();
        let h = plugin_bandwidth(&w, y.view()).unwrap();
        assert!((h - 1.06 * sd * 5f64.powf(-0.2)).abs() < 1e-12);
    }

    #[test]
    fn plugin_degenerate_cases() {
        let w = WeightVector::new(vec![1.0, 0.0, 0.0]).unwrap();
        assert!(plugin_bandwidth(&w, array![1.0, 2.0, 3.0].view()).is_err());
        // n_eff < 2 but two distinct support points: range fallback
        let w = WeightVector::new(vec![0.9, 0.1]).unwrap();
        let h = plugin_bandwidth(&w, array![0.0, 2.0].view()).unwrap();
        let n_eff = 1.0 / (0.81 + 0.01);
        assert!((h - 1.06 * 0.5 * f64::powf(n_eff, -0.2)).abs() < 1e-12);
    }

    #[test]
    fn grid_validation_and_points() {
        assert!(EvalGrid::new(vec![vec![0.0]]).is_err());
        assert!(EvalGrid::new(vec![vec![0.0, 0.0]]).is_err());
        let g = EvalGrid::new(vec![vec![0.0, 1.0], vec![5.0, 6.0, 7.0]]).unwrap();
        assert_eq!(g.n_points(), 6);
        assert_eq!(g.point(0), vec![0.0, 5.0]);
        assert_eq!(g.point(4), vec![1.0, 6.0]);
    }

    #[test]
    fn three_dims_match_direct_sum() {
        let y = array![[0.1, 0.2, 0.3], [0.5, 0.4, 0.9]];
        let w = WeightVector::new(vec![0.25, 0.75]).unwrap();
        let grid = EvalGrid::uniform(&[(0.0, 1.0), (0.0, 1.0), (0.0, 1.0)], 6).unwrap();
        let h = [0.3, 0.2, 0.25];
        let est = weighted_kde(&w, y.view(), &grid, &h).unwrap();
        for idx in 0..grid.n_points() {
            let p = grid.point(idx);
            let mut expect = 0.0;
            for i in 0..2 {
                let mut k = w.weights[i];
                for d in 0..3 {
                    k *= gaussian((y[[i, d]] - p[d]) / h[d]) / h[d];
                }
                expect += k;
            }
            assert!((est.values[idx] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn two_dims_match_direct_sum() {
        let y = array![[0.1, 0.2], [0.5, 0.4], [0.9, 0.1]];
        let w = WeightVector::new(vec![0.2, 0.5, 0.3]).unwrap();
        let grid = EvalGrid::new(vec![vec![0.0, 0.3, 0.6, 1.0], vec![-0.2, 0.1, 0.5]]).unwrap();
        let h = [0.3, 0.2];
        let est = weighted_kde(&w, y.view(), &grid, &h).unwrap();
        for idx in 0..grid.n_points() {
            let p = grid.point(idx);
            let expect: f64 = (0..3)
                .map(|i| {
                    w.weights[i] * gaussian((y[[i, 0]] - p[0]) / h[0]) / h[0] * gaussian((y[[i, 1]] - p[1]) / h[1])
                        / h[1]
                })
                .sum();
            assert!((est.values[idx] - expect).abs() < 1e-12);
        }
    }
}
