//! CART decision tree: greedy axis-aligned splits on gini or entropy.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::data::StageLabel;
use crate::error::{Error, Result};
use crate::rng::{self, stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    #[default]
    Gini,
    Entropy,
}

impl Criterion {
    fn impurity(self, counts: [usize; 2]) -> f64 {
        let n = (counts[0] + counts[1]) as f64;
        if n == 0.0 {
            return 0.0;
        }
        let p0 = counts[0] as f64 / n;
        let p1 = counts[1] as f64 / n;
        match self {
            Criterion::Gini => 1.0 - p0 * p0 - p1 * p1,
            Criterion::Entropy => {
                let term = |p: f64| if p > 0.0 { -p * p.log2() } else { 0.0 };
                term(p0) + term(p1)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DTParams {
    pub criterion: Criterion,
    /// None = grow until other stops; Some(0) = root leaf only.
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    /// Absolute number of features examined per split, sampled without
    /// replacement; None = all. Values above the feature count clamp to all.
    pub max_features: Option<usize>,
}

impl Default for DTParams {
    fn default() -> Self {
        DTParams {
            criterion: Criterion::Gini,
            max_depth: None,
            min_samples_split: 2,
            min_samples_leaf: 1,
            max_features: None,
        }
    }
}

impl DTParams {
    pub fn validate(&self) -> Result<()> {
        if self.min_samples_split < 2 {
            return Err(Error::InvalidParameter {
                name: "min_samples_split".into(),
                reason: format!("{} below 2", self.min_samples_split),
            });
        }
        if self.min_samples_leaf < 1 {
            return Err(Error::InvalidParameter {
                name: "min_samples_leaf".into(),
                reason: "must be at least 1".into(),
            });
        }
        if self.max_features == Some(0) {
            return Err(Error::InvalidParameter {
                name: "max_features".into(),
                reason: "must be at least 1".into(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        counts: [usize; 2],
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// A grown tree's node arena; index 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNodes(pub Vec<Node>);

impl TreeNodes {
    /// Leaf class counts reached by one sample row.
    fn leaf_counts(&self, row: ndarray::ArrayView1<f64>) -> [usize; 2] {
        let mut at = 0;
        loop {
            match &self.0[at] {
                Node::Leaf { counts } => return *counts,
                Node::Split { feature, threshold, left, right } => {
                    at = if row[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn predict_row(&self, row: ndarray::ArrayView1<f64>) -> StageLabel {
        let counts = self.leaf_counts(row);
        if counts[1] > counts[0] {
            StageLabel::Late
        } else {
            StageLabel::Early
        }
    }

    /// Fraction of late-stage training samples in the reached leaf.
    pub fn score_row(&self, row: ndarray::ArrayView1<f64>) -> f64 {
        let counts = self.leaf_counts(row);
        let total = counts[0] + counts[1];
        if total == 0 {
            0.5
        } else {
            counts[1] as f64 / total as f64
        }
    }
}

pub(crate) struct GrowOpts {
    pub criterion: Criterion,
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    /// Resolved feature-subset size; equal to the feature count means "all"
    /// and consumes no randomness.
    pub max_features: usize,
}

/// Per-feature dense value ranks, built once per fitted tree or forest.
///
/// Split search only needs value ORDER, not the values themselves: candidate
/// thresholds sit between distinct neighbors, and prefix class counts at such
/// a boundary do not depend on how equal values are ordered among themselves.
/// Ranks are stored feature-major so a node's lookups stay in a few cache
/// lines no matter how wide the matrix is, and `uniques` maps a rank back to
/// its value for the final threshold midpoint.
pub(crate) struct SplitIndex {
    ranks: Vec<u32>,
    uniques: Vec<Vec<f64>>,
    n: usize,
}

impl SplitIndex {
    pub(crate) fn build(x: &Array2<f64>) -> Self {
        let (n, p) = x.dim();
        let mut ranks = vec![0u32; p * n];
        let mut uniques = Vec::with_capacity(p);
        let mut col = vec![0.0f64; n];
        let mut order: Vec<u32> = Vec::new();
        for f in 0..p {
            for (i, v) in col.iter_mut().enumerate() {
                *v = x[[i, f]];
            }
            order.clear();
            order.extend(0..n as u32);
            order.sort_unstable_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]));
            let row = &mut ranks[f * n..(f + 1) * n];
            let mut uf: Vec<f64> = Vec::new();
            for &i in &order {
                let v = col[i as usize];
                if uf.last() != Some(&v) {
                    uf.push(v);
                }
                row[i as usize] = (uf.len() - 1) as u32;
            }
            uniques.push(uf);
        }
        SplitIndex { ranks, uniques, n }
    }
}

/// Grows a tree on the rows named by `indices` (repeats allowed, as from a
/// bootstrap). Splits maximize impurity decrease; ties go to the lowest
/// feature index, then the lowest threshold (guaranteed by scan order). A
/// zero-gain split is still taken when valid, mirroring common library
/// behavior; recursion always terminates because both sides of a threshold
/// between distinct values are nonempty.
pub(crate) fn grow_tree(
    x: &Array2<f64>,
    y: &[StageLabel],
    indices: Vec<usize>,
    opts: &GrowOpts,
    rng: &mut impl rand::Rng,
    si: &SplitIndex,
) -> TreeNodes {
    let mut nodes = Vec::new();
    let mut scratch = Vec::new();
    grow_node(x, y, indices, 0, opts, rng, si, &mut scratch, &mut nodes);
    TreeNodes(nodes)
}

fn class_counts(y: &[StageLabel], indices: &[usize]) -> [usize; 2] {
    let mut counts = [0usize; 2];
    for &i in indices {
        counts[y[i].index()] += 1;
    }
    counts
}

#[allow(clippy::too_many_arguments)]
fn grow_node(
    x: &Array2<f64>,
    y: &[StageLabel],
    indices: Vec<usize>,
    depth: usize,
    opts: &GrowOpts,
    rng: &mut impl rand::Rng,
    si: &SplitIndex,
    scratch: &mut Vec<u32>,
    nodes: &mut Vec<Node>,
) -> usize {
    let counts = class_counts(y, &indices);
    let id = nodes.len();
    nodes.push(Node::Leaf { counts });

    let pure = counts[0] == 0 || counts[1] == 0;
    let depth_stop = opts.max_depth.is_some_and(|d| depth >= d);
    if pure || depth_stop || indices.len() < opts.min_samples_split {
        return id;
    }

    let p = x.ncols();
    let features: Vec<usize> = if opts.max_features >= p {
        (0..p).collect()
    } else {
        let mut sampled = rand::seq::index::sample(rng, p, opts.max_features).into_vec();
        sampled.sort_unstable();
        sampled
    };

    let Some((feature, threshold)) = best_split(si, y, counts, &indices, &features, opts, scratch)
    else {
        return id;
    };

    let (left_idx, right_idx): (Vec<usize>, Vec<usize>) =
        indices.into_iter().partition(|&i| x[[i, feature]] <= threshold);
    let left = grow_node(x, y, left_idx, depth + 1, opts, rng, si, scratch, nodes);
    let right = grow_node(x, y, right_idx, depth + 1, opts, rng, si, scratch, nodes);
    nodes[id] = Node::Split { feature, threshold, left, right };
    id
}

/// Best (feature, threshold) by minimum weighted child impurity. Returns
/// None when no candidate satisfies min_samples_leaf on both sides.
///
/// Works entirely on packed `rank << 1 | class` keys: one unstable integer
/// sort per candidate feature, then a prefix-count scan with no matrix
/// access. Boundaries exist exactly where neighboring ranks differ, which
/// matches value-space boundaries by construction of the index.
fn best_split(
    si: &SplitIndex,
    y: &[StageLabel],
    total: [usize; 2],
    indices: &[usize],
    features: &[usize],
    opts: &GrowOpts,
    scratch: &mut Vec<u32>,
) -> Option<(usize, f64)> {
    let m = indices.len() as f64;
    let mut best: Option<(f64, usize, f64)> = None; // (weighted impurity, feature, threshold)
    for &f in features {
        let row = &si.ranks[f * si.n..(f + 1) * si.n];
        scratch.clear();
        scratch.extend(indices.iter().map(|&i| (row[i] << 1) | y[i].index() as u32));
        scratch.sort_unstable();
        let mut left = [0usize; 2];
        for pos in 1..scratch.len() {
            let prev = scratch[pos - 1];
            left[(prev & 1) as usize] += 1;
            if scratch[pos] >> 1 == prev >> 1 {
                continue;
            }
            let nl = pos;
            let nr = scratch.len() - pos;
            if nl < opts.min_samples_leaf || nr < opts.min_samples_leaf {
                continue;
            }
            let right = [total[0] - left[0], total[1] - left[1]];
            let weighted = (nl as f64 * opts.criterion.impurity(left)
                + nr as f64 * opts.criterion.impurity(right))
                / m;
            // strict < keeps the first (lowest feature, lowest threshold) on ties
            if best.is_none() || weighted < best.unwrap().0 {
                let uf = &si.uniques[f];
                let (pr, cr) = ((prev >> 1) as usize, (scratch[pos] >> 1) as usize);
                best = Some((weighted, f, midpoint(uf[pr], uf[cr])));
            }
        }
    }
    best.map(|(_, f, t)| (f, t))
}

/// Midpoint clamped into [prev, cur): when adjacent floats leave nothing
/// between, `prev` itself keeps the partition consistent with the prefix
/// counts (x <= threshold goes left).
pub(crate) fn midpoint(prev: f64, cur: f64) -> f64 {
    let t = (prev + cur) / 2.0;
    if t.is_finite() && t < cur {
        t.max(prev)
    } else {
        prev
    }
}

/// Fitted decision tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    pub params: DTParams,
    pub nodes: TreeNodes,
    pub n_features: usize,
    pub seed: u64,
}

impl TreeModel {
    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn predict(&self, x: &Array2<f64>) -> Vec<StageLabel> {
        x.rows().into_iter().map(|r| self.nodes.predict_row(r)).collect()
    }

    pub fn scores(&self, x: &Array2<f64>) -> Vec<f64> {
        x.rows().into_iter().map(|r| self.nodes.score_row(r)).collect()
    }
}

pub(crate) fn fit_tree(
    x: &Array2<f64>,
    y: &[StageLabel],
    params: &DTParams,
    seed: u64,
) -> TreeModel {
    let p = x.ncols();
    let opts = GrowOpts {
        criterion: params.criterion,
        max_depth: params.max_depth,
        min_samples_split: params.min_samples_split,
        min_samples_leaf: params.min_samples_leaf,
        max_features: params.max_features.map_or(p, |m| m.min(p)),
    };
    let mut rng = rng::rng_from(rng::derive(seed, stream::TREE));
    let si = SplitIndex::build(x);
    let nodes = grow_tree(x, y, (0..x.nrows()).collect(), &opts, &mut rng, &si);
    TreeModel { params: params.clone(), nodes, n_features: p, seed }
}
