//! Binary decision trees and the quantile binning shared by the forest and
//! boosting learners.

use serde::{Deserialize, Serialize};

use crate::features::FeatureMatrix;
use crate::scalar::{decimal, Scalar};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub enum Node<T> {
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        #[serde(with = "decimal")]
        threshold: T,
        left: usize,
        right: usize,
    },
    Leaf {
        #[serde(with = "decimal")]
        value: T,
    },
}

/// Flat tree with its root at index 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub struct Tree<T> {
    pub nodes: Vec<Node<T>>,
}

impl<T: Scalar> Tree<T> {
    pub fn leaf(value: T) -> Self {
        Self { nodes: vec![Node::Leaf { value }] }
    }

    pub fn predict(&self, x: &[T]) -> T {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value } => return *value,
                Node::Split { feature, threshold, left, right } => {
                    i = if x[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    pub fn depth(&self) -> usize {
        fn go<T>(nodes: &[Node<T>], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
            }
        }
        go(&self.nodes, 0)
    }

    pub fn max_feature(&self) -> Option<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Split { feature, .. } => Some(*feature),
                Node::Leaf { .. } => None,
            })
            .max()
    }
}

/// Column-major bin codes. For feature `f`, a row with value `x` falls in
/// bin `#{t in thresholds[f] : t < x}`, so `bin <= b` exactly when
/// `x <= thresholds[f][b]`.
#[derive(Debug, Clone)]
pub struct BinnedMatrix<T> {
    pub n_rows: usize,
    pub bins: Vec<Vec<u8>>,
    pub thresholds: Vec<Vec<T>>,
}

impl<T: Scalar> BinnedMatrix<T> {
    pub fn new(m: &FeatureMatrix<T>, max_bins: usize) -> Self {
        let max_bins = max_bins.clamp(2, 256);
        let n = m.n_rows();
        let mut bins = Vec::with_capacity(m.n_cols());
        let mut thresholds = Vec::with_capacity(m.n_cols());
        for j in 0..m.n_cols() {
            let col = m.column(j);
            let t = cut_points(&col, max_bins);
            bins.push(col.iter().map(|&x| t.partition_point(|c| *c < x) as u8).collect());
            thresholds.push(t);
        }
        Self { n_rows: n, bins, thresholds }
    }

    pub fn n_features(&self) -> usize {
        self.bins.len()
    }

    pub fn n_bins(&self, f: usize) -> usize {
        self.thresholds[f].len() + 1
    }
}

/// Thresholds between consecutive distinct values, thinned to quantiles when
/// there are more than `max_bins` distinct values.
fn cut_points<T: Scalar>(col: &[T], max_bins: usize) -> Vec<T> {
    let mut sorted: Vec<T> = col.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let mut distinct: Vec<T> = sorted.clone();
    distinct.dedup();
    if distinct.len() <= 1 {
        return Vec::new();
    }
    let mid = |k: usize| (distinct[k] + distinct[k + 1]) * T::half();
    if distinct.len() <= max_bins {
        return (0..distinct.len() - 1).map(mid).collect();
    }
    let n = sorted.len();
    let mut out: Vec<T> = Vec::with_capacity(max_bins - 1);
    for q in 1..max_bins {
        let v = sorted[(q * n / max_bins).min(n - 1)];
        // last distinct value <= v, then cut just above it
        let k = distinct.partition_point(|d| *d <= v) - 1;
        if k + 1 < distinct.len() {
            let t = mid(k);
            if out.last().is_none_or(|last| *last < t) {
                out.push(t);
            }
        }
    }
    out
}
