//! Single CDE trees: bootstrap, recursive partitioning, and routing.

use ndarray::ArrayView2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CdeError, Result};
use crate::functional::DomainPartition;
use crate::splitting::{best_split, Criterion, SweepScratch};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Internal {
        feature_index: usize,
        threshold: f64,
        left_child: usize,
        right_child: usize,
    },
    /// Training-row indices of the bootstrap sample that landed here, with
    /// multiplicity.
    Leaf { member_rows: Vec<u32> },
}

/// A fitted tree stored as a flat node array; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
    pub bootstrap_indices: Vec<u32>,
    pub criterion: Criterion,
    /// Per functional block, the domain partition this tree was trained with.
    /// Empty for trees on scalar covariates only.
    pub partitions: Vec<DomainPartition>,
    /// Covariate count the tree routes on.
    pub n_features: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeParams {
    pub mtry: usize,
    pub min_node_size: usize,
    pub criterion: Criterion,
}

/// Grows a tree on a bootstrap sample of the `n` training rows.
///
/// `features` is feature-major (`p x n`), `targets` holds the per-row split
/// targets (`n x J`).
pub fn build_tree<R: Rng + ?Sized>(
    features: ArrayView2<f64>,
    targets: ArrayView2<f64>,
    params: TreeParams,
    rng: &mut R,
) -> Result<Tree> {
    let n = targets.nrows();
    if n < 2 {
        return Err(CdeError::Fit(format!("cannot build a tree on {n} rows")));
    }
    if features.ncols() != n {
        return Err(CdeError::domain(format!(
            "features cover {} rows, targets {n}",
            features.ncols()
        )));
    }
    let bootstrap: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();

    let mut nodes = vec![Node::Leaf {
        member_rows: Vec::new(),
    }];
    let mut stack = vec![(0usize, bootstrap.clone())];
    let mut scratch = SweepScratch::default();
    while let Some((idx, rows)) = stack.pop() {
        let decision = best_split(
            &rows,
            features,
            targets,
            params.mtry,
            params.min_node_size,
            rng,
            &mut scratch,
        );
        match decision {
            Some(split) => {
                let column = features.row(split.feature_index);
                let (left, right): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| column[i] <= split.threshold);
                debug_assert_eq!(left.len(), split.left_count);
                let left_child = nodes.len();
                let right_child = left_child + 1;
                nodes.push(Node::Leaf {
                    member_rows: Vec::new(),
                });
                nodes.push(Node::Leaf {
                    member_rows: Vec::new(),
                });
                nodes[idx] = Node::Internal {
                    feature_index: split.feature_index,
                    threshold: split.threshold,
                    left_child,
                    right_child,
                };
                stack.push((right_child, right));
                stack.push((left_child, left));
            }
            None => {
                nodes[idx] = Node::Leaf {
                    member_rows: rows.iter().map(|&i| i as u32).collect(),
                };
            }
        }
    }

    Ok(Tree {
        nodes,
        bootstrap_indices: bootstrap.into_iter().map(|i| i as u32).collect(),
        criterion: params.criterion,
        partitions: Vec::new(),
        n_features: features.nrows(),
    })
}

impl Tree {
    /// Index of the leaf reached by `x`; `x[f] <= threshold` goes left.
    pub fn leaf_index(&self, x: &[f64]) -> Result<usize> {
        if x.len() != self.n_features {
            return Err(CdeError::domain(format!(
                "query has {} covariates, tree expects {}",
                x.len(),
                self.n_features
            )));
        }
        Ok(self.leaf_index_unchecked(x))
    }

    pub(crate) fn leaf_index_unchecked(&self, x: &[f64]) -> usize {
        let mut idx = 0;
        loop {
            match &self.nodes[idx] {
                Node::Internal {
                    feature_index,
                    threshold,
                    left_child,
                    right_child,
                } => {
                    idx = if x[*feature_index] <= *threshold {
                        *left_child
                    } else {
                        *right_child
                    };
                }
                Node::Leaf { .. } => return idx,
            }
        }
    }

    pub fn leaf_members(&self, idx: usize) -> &[u32] {
        match &self.nodes[idx] {
            Node::Leaf { member_rows } => member_rows,
            Node::Internal { .. } => &[],
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], idx: usize) -> usize {
            match &nodes[idx] {
                Node::Leaf { .. } => 0,
                Node::Internal {
                    left_child,
                    right_child,
                    ..
                } => 1 + walk(nodes, *left_child).max(walk(nodes, *right_child)),
            }
        }
        walk(&self.nodes, 0)
    }

    /// Checks the structural invariants of a (possibly deserialized) tree.
    pub fn validate(&self, n_rows: usize) -> Result<()> {
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![0usize];
        let mut members = 0usize;
        while let Some(idx) = stack.pop() {
            if idx >= self.nodes.len() || seen[idx] {
                return Err(CdeError::Format(format!("node {idx} is out of range or shared")));
            }
            seen[idx] = true;
            match &self.nodes[idx] {
                Node::Internal {
                    feature_index,
                    left_child,
                    right_child,
                    ..
                } => {
                    if *feature_index >= self.n_features || left_child == right_child {
                        return Err(CdeError::Format(format!("node {idx} is malformed")));
                    }
                    stack.push(*left_child);
                    stack.push(*right_child);
                }
                Node::Leaf { member_rows } => {
                    if member_rows.is_empty() || member_rows.iter().any(|&r| r as usize >= n_rows) {
                        return Err(CdeError::Format(format!("leaf {idx} has invalid members")));
                    }
                    members += member_rows.len();
                }
            }
        }
        if seen.iter().any(|s| !s) || members != self.bootstrap_indices.len() {
            return Err(CdeError::Format("tree nodes do not form a single binary tree".into()));
        }
        Ok(())
    }
}
