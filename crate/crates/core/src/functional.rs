//! Functional covariates: Poisson-process partitions of a curve's domain and
//! interval-mean features.
//!
//! Each tree draws its own partition per functional block. The tree then sees
//! `[interval means of block 0 | block 1 | ... | scalar covariates]`.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{CdeError, Result};

/// `n` curves observed on `m` ordered domain points.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalBlock {
    pub values: Array2<f64>,
    pub domain_points: Vec<f64>,
}

impl FunctionalBlock {
    pub fn new(values: Array2<f64>, domain_points: Vec<f64>) -> Result<Self> {
        validate_domain(&domain_points)?;
        if values.ncols() != domain_points.len() {
            return Err(CdeError::domain(format!(
                "curves have {} points, domain has {}",
                values.ncols(),
                domain_points.len()
            )));
        }
        Ok(FunctionalBlock { values, domain_points })
    }

    pub fn n_curves(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_points(&self) -> usize {
        self.domain_points.len()
    }
}

fn validate_domain(points: &[f64]) -> Result<()> {
    if points.len() < 2 {
        return Err(CdeError::domain("a functional block needs at least 2 domain points"));
    }
    if points.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(CdeError::domain("domain points must be strictly increasing"));
    }
    Ok(())
}

/// Contiguous, disjoint index ranges `(first, last)` (inclusive) covering `0..m`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainPartition {
    pub intervals: Vec<(usize, usize)>,
}

impl DomainPartition {
    /// Partition with the given interval lengths, each clamped to at least 1
    /// and to what remains of `0..m`.
    pub fn from_lengths(m: usize, lengths: impl IntoIterator<Item = usize>) -> Self {
        let mut intervals = Vec::new();
        let mut start = 0;
        let mut lengths = lengths.into_iter();
        while start < m {
            let k = lengths.next().unwrap_or(1).max(1).min(m - start);
            intervals.push((start, start + k - 1));
            start += k;
        }
        DomainPartition { intervals }
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// Whether the intervals tile `0..m` with no gaps or overlaps.
    pub fn is_valid_for(&self, m: usize) -> bool {
        let mut next = 0;
        for &(lo, hi) in &self.intervals {
            if lo != next || hi < lo {
                return false;
            }
            next = hi + 1;
        }
        next == m && m > 0
    }
}

/// Splits `0..m` into intervals whose lengths are `Poisson(lambda)` draws,
/// clamped to at least one point.
pub fn poisson_partition<R: Rng + ?Sized>(m: usize, lambda: f64, rng: &mut R) -> Result<DomainPartition> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(CdeError::config(format!(
            "partition rate must be positive, got {lambda}"
        )));
    }
    let poisson = Poisson::new(lambda).map_err(|e| CdeError::config(e.to_string()))?;
    let mut intervals = Vec::new();
    let mut start = 0;
    while start < m {
        let draw = poisson.sample(rng);
        let k = if draw.is_finite() { draw as usize } else { m };
        let k = k.max(1).min(m - start);
        intervals.push((start, start + k - 1));
        start += k;
    }
    Ok(DomainPartition { intervals })
}

/// Width of the domain cell owned by each evaluation point: half the distance
/// to each neighbour, with the end points owning a full spacing. On a uniform
/// grid every cell has the same width.
fn cell_widths(domain: &[f64]) -> Vec<f64> {
    let m = domain.len();
    (0..m)
        .map(|k| {
            if k == 0 {
                domain[1] - domain[0]
            } else if k == m - 1 {
                domain[m - 1] - domain[m - 2]
            } else {
                (domain[k + 1] - domain[k - 1]) / 2.0
            }
        })
        .collect()
}

/// Cumulative cell-weighted integrals of every curve in a block, so that any
/// interval mean costs O(1).
#[derive(Debug, Clone, PartialEq)]
pub struct PrefixedBlock {
    /// `n x (m + 1)`; column `k` is the integral over points `0..k`.
    integrals: Array2<f64>,
    /// length `m + 1`; cumulative cell widths.
    widths: Vec<f64>,
}

impl PrefixedBlock {
    pub fn new(block: &FunctionalBlock) -> Self {
        let cells = cell_widths(&block.domain_points);
        let mut widths = Vec::with_capacity(cells.len() + 1);
        widths.push(0.0);
        let mut acc = 0.0;
        for c in &cells {
            acc += c;
            widths.push(acc);
        }
        let (n, m) = block.values.dim();
        let mut integrals = Array2::zeros((n, m + 1));
        for (curve, mut out) in block.values.rows().into_iter().zip(integrals.rows_mut()) {
            let mut acc = 0.0;
            for (k, (f, c)) in curve.iter().zip(&cells).enumerate() {
                acc += f * c;
                out[k + 1] = acc;
            }
        }
        PrefixedBlock { integrals, widths }
    }

    pub fn n_points(&self) -> usize {
        self.widths.len() - 1
    }

    fn mean(prefix: ArrayView1<f64>, widths: &[f64], lo: usize, hi: usize) -> f64 {
        (prefix[hi + 1] - prefix[lo]) / (widths[hi + 1] - widths[lo])
    }

    /// Interval means of curve `row` under `partition`, appended to `out`.
    pub fn means_into(&self, row: usize, partition: &DomainPartition, out: &mut Vec<f64>) {
        let prefix = self.integrals.row(row);
        out.extend(
            partition
                .intervals
                .iter()
                .map(|&(lo, hi)| Self::mean(prefix, &self.widths, lo, hi)),
        );
    }
}

/// Cell-weighted mean of every curve over each interval (`n x k`).
///
/// On a uniform grid this is the arithmetic mean of the interval's values.
pub fn interval_means(block: &FunctionalBlock, partition: &DomainPartition) -> Result<Array2<f64>> {
    if !partition.is_valid_for(block.n_points()) {
        return Err(CdeError::domain("partition does not tile the block's domain"));
    }
    let prefixed = PrefixedBlock::new(block);
    let n = block.n_curves();
    let mut out = Vec::with_capacity(n * partition.len());
    for i in 0..n {
        prefixed.means_into(i, partition, &mut out);
    }
    Ok(Array2::from_shape_vec((n, partition.len()), out).expect("shape matches"))
}

/// Domain grids of the functional blocks a forest was trained on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalLayout {
    pub domains: Vec<Vec<f64>>,
    pub n_scalar: usize,
}

impl FunctionalLayout {
    /// Feature-major covariates one tree trains on: interval means of each
    /// block under that tree's partitions, then the scalar covariates.
    pub fn tree_features(
        prefixed: &[PrefixedBlock],
        scalars: ArrayView2<f64>,
        partitions: &[DomainPartition],
    ) -> Array2<f64> {
        let n = scalars.nrows();
        let k: usize = partitions.iter().map(|p| p.len()).sum();
        let p = k + scalars.ncols();
        let mut features = Array2::zeros((p, n));
        let mut row = Vec::with_capacity(k);
        for i in 0..n {
            row.clear();
            for (block, partition) in prefixed.iter().zip(partitions) {
                block.means_into(i, partition, &mut row);
            }
            for (f, v) in row.iter().enumerate() {
                features[[f, i]] = *v;
            }
        }
        for (j, col) in scalars.columns().into_iter().enumerate() {
            features.row_mut(k + j).assign(&col);
        }
        features
    }

    /// Prefix integrals of one query's curves, checked against the layout.
    pub fn prefix_query(&self, curves: &[ArrayView1<f64>]) -> Result<Vec<PrefixedBlock>> {
        if curves.len() != self.domains.len() {
            return Err(CdeError::domain(format!(
                "query has {} functional blocks, model expects {}",
                curves.len(),
                self.domains.len()
            )));
        }
        curves
            .iter()
            .zip(&self.domains)
            .map(|(curve, domain)| {
                if curve.len() != domain.len() {
                    return Err(CdeError::domain(format!(
                        "curve has {} points, model expects {}",
                        curve.len(),
                        domain.len()
                    )));
                }
                let values = curve.to_owned().insert_axis(ndarray::Axis(0));
                let block = FunctionalBlock {
                    values,
                    domain_points: domain.clone(),
                };
                Ok(PrefixedBlock::new(&block))
            })
            .collect()
    }
}

/// Default `mtry`: `round(sqrt(p))`, at least 1.
pub fn default_mtry(n_features: usize) -> usize {
    ((n_features as f64).sqrt().round() as usize).max(1)
}

/// Uniform grid of `m` points on `[0, 1]`.
pub fn unit_grid(m: usize) -> Vec<f64> {
    Array1::linspace(0.0, 1.0, m).to_vec()
}
