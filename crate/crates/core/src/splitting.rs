//! Split search for CDE trees.
//!
//! The orthogonal-series loss of a node with coefficient sums `S_j` over `n`
//! rows is `-sum_j S_j^2 / n^2` per unit mass, so maximizing
//! `score(left) + score(right)` with `score = sum_j S_j^2 / n` minimizes the
//! empirical CDE loss of the split. Only running sums are needed, which makes
//! one sorted sweep per feature enough.
//!
//! The MSE baseline uses the same sweep with targets `[1 | y]`: the score then
//! becomes `n + sum_d S_d^2 / n`, whose gain is the usual reduction in the
//! within-node sum of squares.

use ndarray::{Array2, ArrayView2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::basis::{basis_matrix, BasisSpec};
use crate::error::{CdeError, Result};

/// Which loss the tree splits minimize.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Criterion {
    Cde,
    Mse,
}

impl Criterion {
    pub fn name(self) -> &'static str {
        match self {
            Criterion::Cde => "cde",
            Criterion::Mse => "mse",
        }
    }
}

impl std::str::FromStr for Criterion {
    type Err = CdeError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cde" => Ok(Criterion::Cde),
            "mse" => Ok(Criterion::Mse),
            other => Err(CdeError::config(format!(
                "unknown criterion '{other}' (expected cde or mse)"
            ))),
        }
    }
}

/// A criterion value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitScore {
    pub criterion: Criterion,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitDecision {
    pub feature_index: usize,
    pub threshold: f64,
    pub score_gain: f64,
    pub left_count: usize,
    pub right_count: usize,
}

/// One legal boundary visited by the sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Boundary {
    pub threshold: f64,
    pub score: f64,
    pub left_count: usize,
}

/// Relative tolerance below which a split gain counts as rounding noise.
const GAIN_TOLERANCE: f64 = 1e-12;

/// Builds the per-row sweep targets for a criterion from scaled responses.
///
/// `Cde` gives the basis matrix; `Mse` gives a ones column followed by the
/// scaled responses.
pub fn split_targets(criterion: Criterion, scaled: ArrayView2<f64>, spec: BasisSpec) -> Result<Array2<f64>> {
    match criterion {
        Criterion::Cde => Ok(basis_matrix(scaled, spec)?.values),
        Criterion::Mse => {
            let (n, r) = scaled.dim();
            let mut out = Array2::ones((n, r + 1));
            out.slice_mut(ndarray::s![.., 1..]).assign(&scaled);
            Ok(out)
        }
    }
}

/// `sum_j S_j^2 / count`, the node score maximized by the split search.
pub fn node_score_cde(coef_sums: &[f64], count: usize) -> Result<f64> {
    if count == 0 {
        return Err(CdeError::domain("node score of an empty node"));
    }
    Ok(score_unchecked(coef_sums, count))
}

#[inline]
fn score_unchecked(sums: &[f64], count: usize) -> f64 {
    sums.iter().map(|s| s * s).sum::<f64>() / count as f64
}

#[inline]
fn split_score(left: &[f64], total: &[f64], n_left: usize, n_right: usize) -> f64 {
    let mut l = 0.0;
    let mut r = 0.0;
    for (sl, st) in left.iter().zip(total) {
        let sr = st - sl;
        l += sl * sl;
        r += sr * sr;
    }
    l / n_left as f64 + r / n_right as f64
}

fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) / 2.0;
    // adjacent floats can round the midpoint up onto `hi`
    if mid < hi {
        mid
    } else {
        lo
    }
}

/// Reusable buffers for the sweep.
#[derive(Debug, Default)]
pub struct SweepScratch {
    order: Vec<(f64, usize)>,
    left: Vec<f64>,
    total: Vec<f64>,
}

/// Sweeps the sorted values of one feature over `rows`, calling `visit` at each
/// legal boundary. Returns the node's total coefficient sums via `scratch.total`.
fn sweep_rows(
    column: &[f64],
    targets: ArrayView2<f64>,
    rows: &[usize],
    min_node_size: usize,
    scratch: &mut SweepScratch,
    mut visit: impl FnMut(Boundary),
) {
    let n = rows.len();
    let width = targets.ncols();
    let min_node_size = min_node_size.max(1);
    scratch.total.clear();
    scratch.total.resize(width, 0.0);
    scratch.left.clear();
    scratch.left.resize(width, 0.0);
    if n < 2 * min_node_size {
        return;
    }
    scratch.order.clear();
    scratch.order.extend(rows.iter().map(|&i| (column[i], i)));
    scratch
        .order
        .sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let first = scratch.order[0].0;
    let last = scratch.order[n - 1].0;
    for &(_, i) in &scratch.order {
        let row = targets.row(i);
        for (t, v) in scratch.total.iter_mut().zip(row.iter()) {
            *t += v;
        }
    }
    if first == last {
        return;
    }
    for k in 0..n - min_node_size {
        let (value, i) = scratch.order[k];
        let row = targets.row(i);
        for (l, v) in scratch.left.iter_mut().zip(row.iter()) {
            *l += v;
        }
        let n_left = k + 1;
        if n_left < min_node_size {
            continue;
        }
        let next = scratch.order[k + 1].0;
        if next <= value {
            continue;
        }
        let score = split_score(&scratch.left, &scratch.total, n_left, n - n_left);
        visit(Boundary {
            threshold: midpoint(value, next),
            score,
            left_count: n_left,
        });
    }
}

/// Every legal boundary of a feature in ascending threshold order.
pub fn sweep_profile(feature_values: &[f64], targets: ArrayView2<f64>, min_node_size: usize) -> Vec<Boundary> {
    assert_eq!(
        feature_values.len(),
        targets.nrows(),
        "feature and target rows must align"
    );
    let rows: Vec<usize> = (0..feature_values.len()).collect();
    let mut scratch = SweepScratch::default();
    let mut out = Vec::new();
    sweep_rows(feature_values, targets, &rows, min_node_size, &mut scratch, |b| {
        out.push(b)
    });
    out
}

/// Best boundary of one feature: `(threshold, score(left) + score(right))`.
///
/// Ties keep the lowest threshold. Empty when no legal boundary exists.
pub fn sweep_feature(feature_values: &[f64], targets: ArrayView2<f64>, min_node_size: usize) -> Option<(f64, f64)> {
    assert_eq!(
        feature_values.len(),
        targets.nrows(),
        "feature and target rows must align"
    );
    let rows: Vec<usize> = (0..feature_values.len()).collect();
    let mut scratch = SweepScratch::default();
    best_boundary(feature_values, targets, &rows, min_node_size, &mut scratch).map(|b| (b.threshold, b.score))
}

fn best_boundary(
    column: &[f64],
    targets: ArrayView2<f64>,
    rows: &[usize],
    min_node_size: usize,
    scratch: &mut SweepScratch,
) -> Option<Boundary> {
    let mut best: Option<Boundary> = None;
    sweep_rows(column, targets, rows, min_node_size, scratch, |b| {
        if best.is_none_or(|cur| b.score > cur.score) {
            best = Some(b);
        }
    });
    best
}

/// Searches `mtry` randomly chosen features for the best split of a node.
///
/// `features` is feature-major: row `f` holds feature `f` for every training
/// row. A decision is returned only if it strictly improves on the unsplit
/// node's score and both children hold at least `min_node_size` rows. Ties go
/// to the lowest feature index, then the lowest threshold.
#[allow(clippy::too_many_arguments)]
pub fn best_split<R: Rng + ?Sized>(
    rows: &[usize],
    features: ArrayView2<f64>,
    targets: ArrayView2<f64>,
    mtry: usize,
    min_node_size: usize,
    rng: &mut R,
    scratch: &mut SweepScratch,
) -> Option<SplitDecision> {
    let n_features = features.nrows();
    let min_node_size = min_node_size.max(1);
    if rows.len() < 2 * min_node_size || n_features == 0 {
        return None;
    }
    let mtry = mtry.clamp(1, n_features);
    let mut candidates = if mtry == n_features {
        (0..n_features).collect::<Vec<_>>()
    } else {
        rand::seq::index::sample(rng, n_features, mtry).into_vec()
    };
    candidates.sort_unstable();

    let mut best: Option<(usize, Boundary)> = None;
    let mut parent = 0.0;
    for &f in &candidates {
        let column = features.row(f);
        let column = column.as_slice().expect("feature rows are contiguous");
        let found = best_boundary(column, targets, rows, min_node_size, scratch);
        parent = score_unchecked(&scratch.total, rows.len());
        if let Some(b) = found {
            if best.is_none_or(|(_, cur)| b.score > cur.score) {
                best = Some((f, b));
            }
        }
    }
    let (feature_index, boundary) = best?;
    let gain = boundary.score - parent;
    if gain <= GAIN_TOLERANCE * parent.abs().max(1.0) {
        return None;
    }
    Some(SplitDecision {
        feature_index,
        threshold: boundary.threshold,
        score_gain: gain,
        left_count: boundary.left_count,
        right_count: rows.len() - boundary.left_count,
    })
}
