//! CART-style binary decision tree on Gini impurity.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::features::{BinaryLabel, FeatureVector, LabeledVector};

/// Impurity improvements smaller than this count as no improvement, and
/// candidates within it of the current best count as ties.
pub const GAIN_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: 20,
            min_samples_leaf: 1,
        }
    }
}

/// Gini impurity of a node with the given class counts (M, T).
pub fn gini(counts: [usize; 2]) -> f64 {
    let n = (counts[0] + counts[1]) as f64;
    if n == 0.0 {
        return 0.0;
    }
    let (pm, pt) = (counts[0] as f64 / n, counts[1] as f64 / n);
    1.0 - pm * pm - pt * pt
}

fn weighted_gini(left: [usize; 2], right: [usize; 2]) -> f64 {
    let nl = (left[0] + left[1]) as f64;
    let nr = (right[0] + right[1]) as f64;
    let n = nl + nr;
    (nl / n) * gini(left) + (nr / n) * gini(right)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitDecision {
    pub feature: usize,
    /// Rows with value `<= threshold` go left.
    pub threshold: f64,
    /// Parent impurity minus weighted child impurity.
    pub gain: f64,
    /// Weighted child impurity.
    pub impurity: f64,
}

/// Best (feature, threshold) over `candidate_features`, minimizing weighted
/// child Gini. Thresholds are midpoints between consecutive distinct observed
/// values. Equal impurities go to the lowest feature index, then the lowest
/// threshold. Returns `None` when no candidate improves on the parent.
pub fn best_split(rows: &[LabeledVector], candidate_features: &[usize]) -> Option<SplitDecision> {
    let refs: Vec<&LabeledVector> = rows.iter().collect();
    let mut candidates = candidate_features.to_vec();
    candidates.sort_unstable();
    candidates.dedup();
    find_split(&refs, &Candidates::List(&candidates), 1)
}

pub(crate) enum Candidates<'a> {
    All,
    /// Sorted, deduplicated positions.
    List(&'a [usize]),
}

impl Candidates<'_> {
    fn contains(&self, f: usize) -> bool {
        match self {
            Candidates::All => true,
            Candidates::List(l) => l.binary_search(&f).is_ok(),
        }
    }
}

pub(crate) fn find_split(rows: &[&LabeledVector], candidates: &Candidates<'_>, min_leaf: usize) -> Option<SplitDecision> {
    let mut totals = [0usize; 2];
    for r in rows {
        totals[r.label.index()] += 1;
    }
    let n = rows.len();
    let parent = gini(totals);
    if parent <= GAIN_EPSILON {
        return None;
    }

    // Nonzero (value, class) observations per candidate feature; every other
    // row sits at zero.
    let mut columns: BTreeMap<usize, Vec<(f64, usize)>> = BTreeMap::new();
    for r in rows {
        for &(f, v) in r.vector.entries() {
            if candidates.contains(f) {
                columns.entry(f).or_default().push((v, r.label.index()));
            }
        }
    }

    let mut best: Option<SplitDecision> = None;
    for (feature, mut obs) in columns {
        let mut zero = totals;
        for &(_, c) in &obs {
            zero[c] -= 1;
        }
        if zero[0] + zero[1] > 0 {
            obs.push((0.0, usize::MAX));
        }
        obs.sort_by(|a, b| a.0.total_cmp(&b.0));

        // Group into distinct values with class counts.
        let mut groups: Vec<(f64, [usize; 2])> = Vec::new();
        for (v, c) in obs {
            let add = if c == usize::MAX { zero } else if c == 0 { [1, 0] } else { [0, 1] };
            match groups.last_mut() {
                Some((gv, counts)) if *gv == v => {
                    counts[0] += add[0];
                    counts[1] += add[1];
                }
                _ => groups.push((v, add)),
            }
        }

        let mut left = [0usize; 2];
        for k in 0..groups.len().saturating_sub(1) {
            left[0] += groups[k].1[0];
            left[1] += groups[k].1[1];
            let right = [totals[0] - left[0], totals[1] - left[1]];
            let (nl, nr) = (left[0] + left[1], right[0] + right[1]);
            if nl < min_leaf || nr < min_leaf {
                continue;
            }
            let impurity = weighted_gini(left, right);
            let better = match &best {
                None => true,
                Some(b) => impurity < b.impurity - GAIN_EPSILON,
            };
            if better && parent - impurity > GAIN_EPSILON {
                best = Some(SplitDecision {
                    feature,
                    threshold: (groups[k].0 + groups[k + 1].0) / 2.0,
                    gain: parent - impurity,
                    impurity,
                });
            }
        }
        debug_assert!(n > 0);
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Node {
    Leaf {
        /// Training rows per class (M, T).
        counts: [usize; 2],
        /// Class distribution (M, T), sums to 1.
        dist: [f64; 2],
        label: BinaryLabel,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

/// How each node picks its candidate features.
pub(crate) enum FeatureSampling<'r, R: Rng> {
    All,
    Random { dim: usize, k: usize, rng: &'r mut R },
}

fn leaf(rows: &[&LabeledVector]) -> Node {
    let mut counts = [0usize; 2];
    for r in rows {
        counts[r.label.index()] += 1;
    }
    let n = (counts[0] + counts[1]) as f64;
    // ties go to T, matching the forest vote
    let label = if counts[0] > counts[1] { BinaryLabel::M } else { BinaryLabel::T };
    Node::Leaf {
        counts,
        dist: [counts[0] as f64 / n, counts[1] as f64 / n],
        label,
    }
}

impl Tree {
    pub fn grow(rows: &[&LabeledVector], params: &TreeParams) -> Tree {
        Tree::grow_with::<rand_chacha::ChaCha8Rng>(rows, params, &mut FeatureSampling::All)
    }

    pub(crate) fn grow_with<R: Rng>(rows: &[&LabeledVector], params: &TreeParams, sampling: &mut FeatureSampling<'_, R>) -> Tree {
        let mut tree = Tree { nodes: Vec::new() };
        tree.build(rows, 0, params, sampling);
        tree
    }

    fn build<R: Rng>(&mut self, rows: &[&LabeledVector], depth: usize, params: &TreeParams, sampling: &mut FeatureSampling<'_, R>) -> usize {
        let id = self.nodes.len();
        self.nodes.push(leaf(rows));
        if depth >= params.max_depth || rows.len() < 2 * params.min_samples_leaf.max(1) {
            return id;
        }
        let split = match sampling {
            FeatureSampling::All => find_split(rows, &Candidates::All, params.min_samples_leaf.max(1)),
            FeatureSampling::Random { dim, k, rng } => {
                let mut picked = rand::seq::index::sample(&mut **rng, *dim, (*k).min(*dim)).into_vec();
                picked.sort_unstable();
                find_split(rows, &Candidates::List(&picked), params.min_samples_leaf.max(1))
            }
        };
        let Some(split) = split else {
            return id;
        };
        let (left_rows, right_rows): (Vec<&LabeledVector>, Vec<&LabeledVector>) = rows
            .iter()
            .partition(|r| r.vector.get(split.feature) <= split.threshold);
        let left = self.build(&left_rows, depth + 1, params, sampling);
        let right = self.build(&right_rows, depth + 1, params, sampling);
        self.nodes[id] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        id
    }

    pub fn leaf_for(&self, v: &FeatureVector) -> &Node {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if v.get(*feature) <= *threshold { *left } else { *right },
                leaf => return leaf,
            }
        }
    }

    pub fn predict(&self, v: &FeatureVector) -> (BinaryLabel, [f64; 2]) {
        match self.leaf_for(v) {
            Node::Leaf { dist, label, .. } => (*label, *dist),
            Node::Split { .. } => unreachable!("leaf_for returns leaves"),
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
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
