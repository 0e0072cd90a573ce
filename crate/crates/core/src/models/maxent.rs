//! Two-class maximum entropy model, i.e. L2-regularized logistic regression
//! fitted by full-batch gradient descent. T is the positive class.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{BinaryLabel, FeatureVector, LabeledVector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaxentParams {
    pub step: f64,
    pub l2: f64,
    pub tolerance: f64,
    pub max_epochs: usize,
}

impl Default for MaxentParams {
    fn default() -> Self {
        MaxentParams {
            step: 0.1,
            l2: 1e-3,
            tolerance: 1e-6,
            max_epochs: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl Gradient {
    pub fn norm(&self) -> f64 {
        (self.weights.iter().map(|g| g * g).sum::<f64>() + self.bias * self.bias).sqrt()
    }
}

fn target(label: BinaryLabel) -> f64 {
    match label {
        BinaryLabel::T => 1.0,
        BinaryLabel::M => 0.0,
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// log(1 + e^z) without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Mean negative log-likelihood plus `l2/2 * |w|^2` (bias unregularized).
pub fn objective(weights: &[f64], bias: f64, batch: &[LabeledVector], l2: f64) -> f64 {
    let nll: f64 = batch
        .iter()
        .map(|r| {
            let z = r.vector.dot(weights) + bias;
            softplus(z) - target(r.label) * z
        })
        .sum();
    nll / batch.len() as f64 + 0.5 * l2 * weights.iter().map(|w| w * w).sum::<f64>()
}

/// Gradient of [`objective`] with respect to the weights and bias.
pub fn maxent_gradient(weights: &[f64], bias: f64, batch: &[LabeledVector], l2: f64) -> Gradient {
    let n = batch.len() as f64;
    let mut g: Vec<f64> = weights.iter().map(|w| l2 * w).collect();
    let mut gb = 0.0;
    for r in batch {
        let err = (sigmoid(r.vector.dot(weights) + bias) - target(r.label)) / n;
        for &(p, v) in r.vector.entries() {
            g[p] += err * v;
        }
        gb += err;
    }
    Gradient { weights: g, bias: gb }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxentModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

pub struct MaxentTrace {
    pub model: MaxentModel,
    pub objectives: Vec<f64>,
    pub epochs: usize,
}

/// Gradient descent with a fixed step, stopping once the gradient norm drops
/// below `tolerance` or after `max_epochs` steps.
pub fn train(rows: &[LabeledVector], dim: usize, params: &MaxentParams) -> Result<MaxentTrace> {
    let mut weights = vec![0.0; dim];
    let mut bias = 0.0;
    let mut objectives = vec![objective(&weights, bias, rows, params.l2)];
    let mut epochs = 0;
    for epoch in 1..=params.max_epochs {
        let g = maxent_gradient(&weights, bias, rows, params.l2);
        let norm = g.norm();
        if !norm.is_finite() {
            return Err(Error::Numeric {
                epoch,
                what: "maxent gradient".into(),
            });
        }
        if norm < params.tolerance {
            break;
        }
        for (w, gw) in weights.iter_mut().zip(&g.weights) {
            *w -= params.step * gw;
        }
        bias -= params.step * g.bias;
        let obj = objective(&weights, bias, rows, params.l2);
        if !obj.is_finite() {
            return Err(Error::Numeric {
                epoch,
                what: "maxent objective".into(),
            });
        }
        objectives.push(obj);
        epochs = epoch;
    }
    Ok(MaxentTrace {
        model: MaxentModel { weights, bias },
        objectives,
        epochs,
    })
}

/// Label, log-odds of T, and class probabilities (M, T).
pub fn predict(model: &MaxentModel, v: &FeatureVector) -> (BinaryLabel, f64, [f64; 2]) {
    let z = v.dot(&model.weights) + model.bias;
    let p = sigmoid(z);
    let label = if z >= 0.0 { BinaryLabel::T } else { BinaryLabel::M };
    (label, z, [1.0 - p, p])
}
