//! Orthonormal cosine basis on `[0, 1]`, min-max response scaling, and tensor
//! bases for multivariate responses.
//!
//! The split criterion only ever needs sums of basis evaluations over the rows
//! of a node, so the basis is evaluated once per training row and kept in a
//! dense row-major [`BasisMatrix`].

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, SQRT_2};

use crate::error::{CdeError, Result};

/// Largest supported number of response dimensions.
pub const MAX_RESPONSE_DIMS: usize = 3;
/// Upper bound on `n_basis^response_dims`.
pub const MAX_TENSOR_SIZE: usize = 65_536;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BasisFamily {
    Cosine,
}

/// Basis family, functions per response dimension, and response dimensionality.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasisSpec {
    pub family: BasisFamily,
    pub n_basis: usize,
    pub response_dims: usize,
}

impl BasisSpec {
    pub fn cosine(n_basis: usize, response_dims: usize) -> Result<Self> {
        let spec = BasisSpec {
            family: BasisFamily::Cosine,
            n_basis,
            response_dims,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_basis == 0 {
            return Err(CdeError::config("n_basis must be at least 1"));
        }
        if self.response_dims == 0 || self.response_dims > MAX_RESPONSE_DIMS {
            return Err(CdeError::config(format!(
                "response dimensionality {} not in 1..={MAX_RESPONSE_DIMS}",
                self.response_dims
            )));
        }
        match self.n_basis.checked_pow(self.response_dims as u32) {
            Some(size) if size <= MAX_TENSOR_SIZE => Ok(()),
            _ => Err(CdeError::config(format!(
                "tensor basis size {}^{} exceeds {MAX_TENSOR_SIZE}",
                self.n_basis, self.response_dims
            ))),
        }
    }

    /// Total number of (tensor) basis functions `J`.
    pub fn size(&self) -> usize {
        self.n_basis.pow(self.response_dims as u32)
    }

    /// Writes all `J` tensor basis values at the scaled point `y` into `out`.
    ///
    /// Columns enumerate `(j1, j2, ...)` in row-major order, last index fastest.
    pub fn eval_into(&self, y: &[f64], out: &mut [f64]) -> Result<()> {
        if y.len() != self.response_dims {
            return Err(CdeError::domain(format!(
                "point has {} coordinates, basis expects {}",
                y.len(),
                self.response_dims
            )));
        }
        debug_assert_eq!(out.len(), self.size());
        let nb = self.n_basis;
        let mut per_dim = Vec::with_capacity(nb * y.len());
        for &v in y {
            for j in 0..nb {
                per_dim.push(cosine_eval(j, v)?);
            }
        }
        out[0] = 1.0;
        let mut filled = 1;
        for d in 0..y.len() {
            let factors = &per_dim[d * nb..(d + 1) * nb];
            // expand in place from the back so earlier products stay readable
            for idx in (0..filled).rev() {
                let base = out[idx];
                for (j, f) in factors.iter().enumerate().rev() {
                    out[idx * nb + j] = base * f;
                }
            }
            filled *= nb;
        }
        Ok(())
    }

    pub fn eval(&self, y: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.size()];
        self.eval_into(y, &mut out)?;
        Ok(out)
    }
}

/// Cosine basis function `j` at `y`: `1` for `j = 0`, `sqrt(2) cos(pi j y)` otherwise.
pub fn cosine_eval(j: usize, y: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&y) {
        return Err(CdeError::domain(format!("basis argument {y} outside [0, 1]")));
    }
    Ok(if j == 0 {
        1.0
    } else {
        SQRT_2 * (PI * j as f64 * y).cos()
    })
}

/// Per-dimension min-max map from the training response range onto `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseScaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl ResponseScaler {
    /// Fits the scaler to an `n x r` response matrix.
    pub fn fit(responses: ArrayView2<f64>) -> Result<Self> {
        let (n, r) = responses.dim();
        if n < 2 {
            return Err(CdeError::Fit(format!("need at least 2 responses, got {n}")));
        }
        let mut min = Vec::with_capacity(r);
        let mut max = Vec::with_capacity(r);
        for (d, col) in responses.columns().into_iter().enumerate() {
            let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if !lo.is_finite() || !hi.is_finite() {
                return Err(CdeError::Fit(format!("response dimension {d} has non-finite values")));
            }
            if hi <= lo {
                return Err(CdeError::Fit(format!("response dimension {d} is constant")));
            }
            min.push(lo);
            max.push(hi);
        }
        Ok(ResponseScaler { min, max })
    }

    pub fn dims(&self) -> usize {
        self.min.len()
    }

    pub fn scale(&self, dim: usize, y: f64) -> f64 {
        (y - self.min[dim]) / (self.max[dim] - self.min[dim])
    }

    pub fn unscale(&self, dim: usize, u: f64) -> f64 {
        self.min[dim] + u * (self.max[dim] - self.min[dim])
    }

    /// Scales every response; values outside the training range map outside `[0, 1]`.
    pub fn transform(&self, responses: ArrayView2<f64>) -> Array2<f64> {
        let mut out = responses.to_owned();
        for (d, mut col) in out.columns_mut().into_iter().enumerate() {
            col.mapv_inplace(|y| self.scale(d, y));
        }
        out
    }

    /// Scales and clamps into `[0, 1]`, for held-out responses.
    pub fn transform_clamped(&self, responses: ArrayView2<f64>) -> Array2<f64> {
        self.transform(responses).mapv(|u| u.clamp(0.0, 1.0))
    }

    pub fn inverse(&self, scaled: ArrayView2<f64>) -> Array2<f64> {
        let mut out = scaled.to_owned();
        for (d, mut col) in out.columns_mut().into_iter().enumerate() {
            col.mapv_inplace(|u| self.unscale(d, u));
        }
        out
    }
}

/// Basis evaluations `phi_j(y_i)`, one row per response.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisMatrix {
    pub values: Array2<f64>,
    pub spec: BasisSpec,
}

impl BasisMatrix {
    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.values.ncols()
    }

    /// Column sums `S_j` over the given rows (duplicates count with multiplicity).
    pub fn coefficient_sums(&self, rows: &[usize]) -> Vec<f64> {
        let mut sums = vec![0.0; self.n_cols()];
        for &i in rows {
            for (s, v) in sums.iter_mut().zip(self.values.row(i)) {
                *s += v;
            }
        }
        sums
    }

    /// Empirical coefficients `beta_j = S_j / n` over all rows.
    pub fn coefficients(&self) -> Vec<f64> {
        let rows: Vec<usize> = (0..self.n_rows()).collect();
        let n = rows.len() as f64;
        self.coefficient_sums(&rows).into_iter().map(|s| s / n).collect()
    }
}

/// Evaluates the basis on every row of a scaled `n x r` response matrix.
pub fn basis_matrix(scaled: ArrayView2<f64>, spec: BasisSpec) -> Result<BasisMatrix> {
    spec.validate()?;
    let (n, r) = scaled.dim();
    if r != spec.response_dims {
        return Err(CdeError::domain(format!(
            "responses have {r} columns, basis expects {}",
            spec.response_dims
        )));
    }
    let j = spec.size();
    let mut values = Array2::zeros((n, j));
    let mut point = vec![0.0; r];
    for (i, mut row) in values.rows_mut().into_iter().enumerate() {
        for (p, v) in point.iter_mut().zip(scaled.row(i)) {
            *p = *v;
        }
        let out = row.as_slice_mut().expect("freshly allocated rows are contiguous");
        spec.eval_into(&point, out)?;
    }
    Ok(BasisMatrix { values, spec })
}

/// Evaluates the orthogonal-series density `sum_j beta_j phi_j(y)` at a scaled point.
pub fn series_density(coefs: &[f64], spec: &BasisSpec, y: &[f64]) -> Result<f64> {
    let phi = spec.eval(y)?;
    Ok(coefs.iter().zip(&phi).map(|(b, p)| b * p).sum())
}
