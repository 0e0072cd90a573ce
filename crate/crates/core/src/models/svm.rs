//! Linear SVM trained in the primal with Pegasos subgradient steps.
//!
//! The bias is handled as the weight of a constant feature, so it is shrunk
//! along with the other weights and enters the regularizer.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{BinaryLabel, FeatureVector, LabeledVector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub lambda: f64,
    pub epochs: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            lambda: 1e-3,
            epochs: 50,
        }
    }
}

/// One Pegasos step at (1-based) `step_index` with rate 1/(lambda*t):
/// shrink by (1 - 1/t), then, if the margin was below 1, add
/// `label * rate * x` (and `label * rate` to the bias).
pub fn svm_update(
    weights: &mut [f64],
    bias: &mut f64,
    x: &FeatureVector,
    label: BinaryLabel,
    step_index: usize,
    lambda: f64,
) {
    let y = label.sign();
    let t = step_index as f64;
    let rate = 1.0 / (lambda * t);
    let margin = y * (x.dot(weights) + *bias);
    let shrink = 1.0 - 1.0 / t;
    for w in weights.iter_mut() {
        *w *= shrink;
    }
    *bias *= shrink;
    if margin < 1.0 {
        for &(p, v) in x.entries() {
            weights[p] += y * rate * v;
        }
        *bias += y * rate;
    }
}

/// lambda/2 * (|w|^2 + b^2) + mean hinge loss.
pub fn objective(weights: &[f64], bias: f64, rows: &[LabeledVector], lambda: f64) -> f64 {
    let norm: f64 = weights.iter().map(|w| w * w).sum::<f64>() + bias * bias;
    let hinge: f64 = rows
        .iter()
        .map(|r| (1.0 - r.label.sign() * (r.vector.dot(weights) + bias)).max(0.0))
        .sum();
    0.5 * lambda * norm + hinge / rows.len() as f64
}

/// Weight vector stored as `scale * v` so the per-step shrink is O(1).
struct ScaledWeights {
    scale: f64,
    v: Vec<f64>,
    bias: f64,
}

impl ScaledWeights {
    fn step(&mut self, x: &FeatureVector, label: BinaryLabel, step_index: usize, lambda: f64) {
        let y = label.sign();
        let t = step_index as f64;
        let rate = 1.0 / (lambda * t);
        let margin = y * (self.scale * x.dot(&self.v) + self.bias);
        let shrink = 1.0 - 1.0 / t;
        if shrink == 0.0 {
            self.v.iter_mut().for_each(|w| *w = 0.0);
            self.scale = 1.0;
        } else {
            self.scale *= shrink;
        }
        self.bias *= shrink;
        if margin < 1.0 {
            let add = y * rate / self.scale;
            for &(p, val) in x.entries() {
                self.v[p] += add * val;
            }
            self.bias += y * rate;
        }
    }

    fn dense(&self) -> Vec<f64> {
        self.v.iter().map(|w| w * self.scale).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

pub struct SvmTrace {
    pub model: SvmModel,
    /// Regularized objective after each epoch.
    pub objectives: Vec<f64>,
}

/// Runs `epochs` passes, each over a fresh seeded permutation of the rows.
/// The final model is the last iterate.
pub fn train(rows: &[LabeledVector], dim: usize, params: &SvmParams, seed: u64) -> Result<SvmTrace> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = ScaledWeights {
        scale: 1.0,
        v: vec![0.0; dim],
        bias: 0.0,
    };
    let mut order: Vec<usize> = (0..rows.len()).collect();
    let mut objectives = Vec::with_capacity(params.epochs);
    let mut t = 0usize;
    for epoch in 1..=params.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            t += 1;
            w.step(&rows[i].vector, rows[i].label, t, params.lambda);
        }
        let dense = w.dense();
        let obj = objective(&dense, w.bias, rows, params.lambda);
        if !obj.is_finite() || !w.scale.is_finite() {
            return Err(Error::Numeric {
                epoch,
                what: "svm objective".into(),
            });
        }
        objectives.push(obj);
    }
    Ok(SvmTrace {
        model: SvmModel {
            weights: w.dense(),
            bias: w.bias,
        },
        objectives,
    })
}

pub fn margin(model: &SvmModel, v: &FeatureVector) -> f64 {
    v.dot(&model.weights) + model.bias
}

/// Non-negative margin means T.
pub fn predict(model: &SvmModel, v: &FeatureVector) -> (BinaryLabel, f64) {
    let m = margin(model, v);
    (if m >= 0.0 { BinaryLabel::T } else { BinaryLabel::M }, m)
}

#[cfg(test)]
pub(crate) fn train_dense(rows: &[LabeledVector], dim: usize, params: &SvmParams, seed: u64) -> SvmModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut weights = vec![0.0; dim];
    let mut bias = 0.0;
    let mut order: Vec<usize> = (0..rows.len()).collect();
    let mut t = 0;
    for _ in 0..params.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            t += 1;
            svm_update(&mut weights, &mut bias, &rows[i].vector, rows[i].label, t, params.lambda);
        }
    }
    SvmModel { weights, bias }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::separable_toy;

    #[test]
    fn scaled_route_matches_dense_updates() {
        let (space, rows) = separable_toy();
        let params = SvmParams { lambda: 0.05, epochs: 7 };
        let scaled = train(&rows, space.len(), &params, 9).unwrap().model;
        let dense = train_dense(&rows, space.len(), &params, 9);
        for (a, b) in scaled.weights.iter().zip(&dense.weights) {
            assert!((a - b).abs() <= 1e-9 * (1.0 + b.abs()), "{a} vs {b}");
        }
        assert!((scaled.bias - dense.bias).abs() <= 1e-9 * (1.0 + dense.bias.abs()));
    }
}
