//! Naive Bayes with Laplace smoothing.
//!
//! Bag-of-words vectors use the multinomial event model (counts weight the
//! log-likelihood); binary n-gram vectors use the Bernoulli model, where
//! every vocabulary entry contributes through its presence or absence.

use serde::{Deserialize, Serialize};

use crate::features::{BinaryLabel, FeatureVector, LabeledVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventModel {
    Multinomial,
    Bernoulli,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NbParams {
    pub event_model: EventModel,
    pub alpha: f64,
    /// Log prior per class, indexed M then T.
    pub log_prior: [f64; 2],
    /// log P(feature | class), per class.
    pub log_prob: [Vec<f64>; 2],
    /// Bernoulli only: log(1 - P(feature | class)), per class.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_absent: Option<[Vec<f64>; 2]>,
    /// Bernoulli only: sum of `log_absent` per class (the all-absent score).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub absent_total: Option<[f64; 2]>,
}

pub fn train(rows: &[LabeledVector], dim: usize, event_model: EventModel, alpha: f64) -> NbParams {
    let mut docs = [0usize; 2];
    let mut feature_mass = [vec![0.0; dim], vec![0.0; dim]];
    for r in rows {
        let c = r.label.index();
        docs[c] += 1;
        for &(p, v) in r.vector.entries() {
            feature_mass[c][p] += match event_model {
                EventModel::Multinomial => v,
                EventModel::Bernoulli => 1.0,
            };
        }
    }
    let n = rows.len() as f64;
    let log_prior = [(docs[0] as f64 / n).ln(), (docs[1] as f64 / n).ln()];

    match event_model {
        EventModel::Multinomial => {
            let log_prob = [0, 1].map(|c| {
                let total: f64 = feature_mass[c].iter().sum();
                let denom = total + alpha * dim as f64;
                feature_mass[c].iter().map(|&k| ((k + alpha) / denom).ln()).collect()
            });
            NbParams {
                event_model,
                alpha,
                log_prior,
                log_prob,
                log_absent: None,
                absent_total: None,
            }
        }
        EventModel::Bernoulli => {
            let probs: [Vec<f64>; 2] = [0, 1].map(|c| {
                let denom = docs[c] as f64 + 2.0 * alpha;
                feature_mass[c].iter().map(|&k| (k + alpha) / denom).collect()
            });
            let log_prob = [0, 1].map(|c| probs[c].iter().map(|p| p.ln()).collect::<Vec<_>>());
            let log_absent = [0, 1].map(|c| probs[c].iter().map(|p| (1.0 - p).ln()).collect::<Vec<_>>());
            let absent_total = [0, 1].map(|c| log_absent[c].iter().sum());
            NbParams {
                event_model,
                alpha,
                log_prior,
                log_prob,
                log_absent: Some(log_absent),
                absent_total: Some(absent_total),
            }
        }
    }
}

/// Unnormalized log P(class) + sum of feature log-likelihoods, indexed M then T.
pub fn log_joint(params: &NbParams, v: &FeatureVector) -> [f64; 2] {
    [0, 1].map(|c| {
        let mut score = params.log_prior[c];
        match (&params.log_absent, &params.absent_total) {
            (Some(absent), Some(total)) => {
                score += total[c];
                for &(p, _) in v.entries() {
                    score += params.log_prob[c][p] - absent[c][p];
                }
            }
            _ => {
                for &(p, x) in v.entries() {
                    score += x * params.log_prob[c][p];
                }
            }
        }
        score
    })
}

pub fn predict(params: &NbParams, v: &FeatureVector) -> (BinaryLabel, [f64; 2]) {
    let s = log_joint(params, v);
    let label = if s[0] > s[1] { BinaryLabel::M } else { BinaryLabel::T };
    (label, s)
}
