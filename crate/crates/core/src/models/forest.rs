use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{FeatureSampling, Tree, TreeParams};
use crate::features::{BinaryLabel, FeatureVector, LabeledVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaxFeatures {
    /// ceil(sqrt(vocabulary size)) random candidates per split.
    Sqrt,
    /// Every feature is a candidate at every split.
    All,
    #[serde(untagged)]
    Count(usize),
}

impl MaxFeatures {
    pub fn resolve(self, dim: usize) -> Option<usize> {
        match self {
            MaxFeatures::All => None,
            MaxFeatures::Sqrt => Some((dim as f64).sqrt().ceil() as usize),
            MaxFeatures::Count(k) if k >= dim => None,
            MaxFeatures::Count(k) => Some(k.max(1)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub num_trees: usize,
    pub bootstrap: bool,
    pub max_features: MaxFeatures,
    pub tree: TreeParams,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            num_trees: 100,
            bootstrap: true,
            max_features: MaxFeatures::Sqrt,
            tree: TreeParams::default(),
        }
    }
}

/// Each tree draws from its own ChaCha8 stream: the config seed with the
/// tree index as stream id.
fn tree_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

pub fn train(rows: &[LabeledVector], dim: usize, params: &ForestParams, seed: u64) -> Vec<Tree> {
    let k = params.max_features.resolve(dim);
    (0..params.num_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = tree_rng(seed, t);
            let sample: Vec<&LabeledVector> = if params.bootstrap {
                (0..rows.len()).map(|_| &rows[rng.random_range(0..rows.len())]).collect()
            } else {
                rows.iter().collect()
            };
            match k {
                None => Tree::grow_with::<ChaCha8Rng>(&sample, &params.tree, &mut FeatureSampling::All),
                Some(k) => Tree::grow_with(&sample, &params.tree, &mut FeatureSampling::Random { dim, k, rng: &mut rng }),
            }
        })
        .collect()
}

/// Plurality over tree labels; an even split goes to T.
pub fn rf_vote(labels: &[BinaryLabel]) -> BinaryLabel {
    let m = labels.iter().filter(|&&l| l == BinaryLabel::M).count();
    if m * 2 > labels.len() {
        BinaryLabel::M
    } else {
        BinaryLabel::T
    }
}

/// The forest's label and the fraction of trees voting (M, T).
pub fn predict(trees: &[Tree], v: &FeatureVector) -> (BinaryLabel, [f64; 2]) {
    let labels: Vec<BinaryLabel> = trees.iter().map(|t| t.predict(v).0).collect();
    let m = labels.iter().filter(|&&l| l == BinaryLabel::M).count() as f64;
    let n = labels.len() as f64;
    (rf_vote(&labels), [m / n, (n - m) / n])
}
