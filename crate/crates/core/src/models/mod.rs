//! The five classifiers and their shared train/predict/persist surface.

pub mod forest;
pub mod maxent;
pub mod nb;
pub mod svm;
pub mod tree;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{BinaryLabel, FeatureMethod, FeatureVector, LabeledVector, SpaceInfo};
use crate::fsutil;

pub use forest::{rf_vote, ForestParams, MaxFeatures};
pub use maxent::{maxent_gradient, Gradient, MaxentParams};
pub use nb::EventModel;
pub use svm::{svm_update, SvmParams};
pub use tree::{best_split, SplitDecision, TreeParams};

/// Model types in the order the result grid lists them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelType {
    Nb,
    Dt,
    Mem,
    Rf,
    Svm,
}

impl ModelType {
    pub const ALL: [ModelType; 5] = [ModelType::Nb, ModelType::Dt, ModelType::Mem, ModelType::Rf, ModelType::Svm];

    pub fn key(self) -> &'static str {
        match self {
            ModelType::Nb => "nb",
            ModelType::Dt => "dt",
            ModelType::Mem => "mem",
            ModelType::Rf => "rf",
            ModelType::Svm => "svm",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            ModelType::Nb => "NB",
            ModelType::Dt => "DT",
            ModelType::Mem => "MEM",
            ModelType::Rf => "RF",
            ModelType::Svm => "SVM",
        }
    }
}

impl fmt::Display for ModelType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for ModelType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "nb" => Ok(ModelType::Nb),
            "dt" => Ok(ModelType::Dt),
            "mem" | "maxent" => Ok(ModelType::Mem),
            "rf" => Ok(ModelType::Rf),
            "svm" => Ok(ModelType::Svm),
            other => Err(Error::Validation(format!(
                "unknown model {other:?}; expected nb, dt, mem, rf or svm"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model_type", rename_all = "lowercase")]
pub enum Hyperparameters {
    Nb { alpha: f64 },
    Dt(TreeParams),
    Mem(MaxentParams),
    Rf(ForestParams),
    Svm(SvmParams),
}

impl Hyperparameters {
    pub fn defaults(model_type: ModelType) -> Self {
        match model_type {
            ModelType::Nb => Hyperparameters::Nb { alpha: 1.0 },
            ModelType::Dt => Hyperparameters::Dt(TreeParams::default()),
            ModelType::Mem => Hyperparameters::Mem(MaxentParams::default()),
            ModelType::Rf => Hyperparameters::Rf(ForestParams::default()),
            ModelType::Svm => Hyperparameters::Svm(SvmParams::default()),
        }
    }

    pub fn model_type(&self) -> ModelType {
        match self {
            Hyperparameters::Nb { .. } => ModelType::Nb,
            Hyperparameters::Dt(_) => ModelType::Dt,
            Hyperparameters::Mem(_) => ModelType::Mem,
            Hyperparameters::Rf(_) => ModelType::Rf,
            Hyperparameters::Svm(_) => ModelType::Svm,
        }
    }

    /// Overrides one hyperparameter by name. Unknown names are rejected.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .trim()
                .parse()
                .map_err(|_| Error::Validation(format!("hyperparameter {key}: cannot parse {value:?}")))
        }
        fn positive(key: &str, v: f64) -> Result<f64> {
            if v.is_finite() && v > 0.0 {
                Ok(v)
            } else {
                Err(Error::Validation(format!("hyperparameter {key} must be positive, got {v}")))
            }
        }
        fn tree_key(t: &mut TreeParams, key: &str, value: &str) -> Result<bool> {
            match key {
                "max_depth" => t.max_depth = num(key, value)?,
                "min_samples_leaf" => t.min_samples_leaf = num::<usize>(key, value)?.max(1),
                _ => return Ok(false),
            }
            Ok(true)
        }
        let known = match self {
            Hyperparameters::Nb { alpha } => match key {
                "alpha" => {
                    *alpha = positive(key, num(key, value)?)?;
                    true
                }
                _ => false,
            },
            Hyperparameters::Dt(t) => tree_key(t, key, value)?,
            Hyperparameters::Rf(f) => match key {
                "num_trees" => {
                    f.num_trees = num::<usize>(key, value)?.max(1);
                    true
                }
                "bootstrap" => {
                    f.bootstrap = num(key, value)?;
                    true
                }
                "max_features" => {
                    f.max_features = match value.trim() {
                        "sqrt" => MaxFeatures::Sqrt,
                        "all" => MaxFeatures::All,
                        n => MaxFeatures::Count(num(key, n)?),
                    };
                    true
                }
                _ => tree_key(&mut f.tree, key, value)?,
            },
            Hyperparameters::Svm(s) => match key {
                "lambda" => {
                    s.lambda = positive(key, num(key, value)?)?;
                    true
                }
                "epochs" => {
                    s.epochs = num::<usize>(key, value)?.max(1);
                    true
                }
                _ => false,
            },
            Hyperparameters::Mem(m) => match key {
                "step" => {
                    m.step = positive(key, num(key, value)?)?;
                    true
                }
                "l2" => {
                    let v: f64 = num(key, value)?;
                    if !(v.is_finite() && v >= 0.0) {
                        return Err(Error::Validation(format!("hyperparameter l2 must be >= 0, got {v}")));
                    }
                    m.l2 = v;
                    true
                }
                "tolerance" => {
                    m.tolerance = positive(key, num(key, value)?)?;
                    true
                }
                "max_epochs" => {
                    m.max_epochs = num(key, value)?;
                    true
                }
                _ => false,
            },
        };
        if known {
            Ok(())
        } else {
            Err(Error::Validation(format!(
                "unknown hyperparameter {key:?} for {}",
                self.model_type().display_name()
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConfig {
    pub hyperparameters: Hyperparameters,
    pub seed: u64,
}

impl ModelConfig {
    pub fn new(model_type: ModelType, seed: u64) -> Self {
        ModelConfig {
            hyperparameters: Hyperparameters::defaults(model_type),
            seed,
        }
    }

    /// Defaults for `model_type` with `key=value` overrides applied.
    pub fn with_overrides<'a>(
        model_type: ModelType,
        seed: u64,
        overrides: impl IntoIterator<Item = (&'a str, &'a str)>,
    ) -> Result<Self> {
        let mut cfg = ModelConfig::new(model_type, seed);
        for (k, v) in overrides {
            cfg.hyperparameters.set(k, v)?;
        }
        Ok(cfg)
    }

    pub fn model_type(&self) -> ModelType {
        self.hyperparameters.model_type()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Parameters {
    Nb(nb::NbParams),
    Dt(tree::Tree),
    Rf { trees: Vec<tree::Tree> },
    Svm(svm::SvmModel),
    Mem(maxent::MaxentModel),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub seed: u64,
    pub epochs: usize,
    pub final_objective: Option<f64>,
    pub train_rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub model_type: ModelType,
    pub hyperparameters: Hyperparameters,
    pub space: SpaceInfo,
    pub parameters: Parameters,
    pub training_meta: TrainingMeta,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prediction {
    pub label: BinaryLabel,
    /// Positive favours T: log-odds for NB and MEM, margin for SVM, vote
    /// share difference for RF, leaf distribution difference for DT.
    pub score: f64,
    pub per_class: Option<BTreeMap<BinaryLabel, f64>>,
}

fn per_class(scores: [f64; 2]) -> Option<BTreeMap<BinaryLabel, f64>> {
    Some(BTreeMap::from([(BinaryLabel::M, scores[0]), (BinaryLabel::T, scores[1])]))
}

/// Fits the configured classifier. Deterministic given the seed and row order.
pub fn train(config: &ModelConfig, space: &SpaceInfo, rows: &[LabeledVector]) -> Result<TrainedModel> {
    if rows.is_empty() {
        return Err(Error::Degenerate("empty training set".into()));
    }
    if let Some(r) = rows.iter().find(|r| r.vector.space() != space.digest) {
        return Err(Error::SpaceMismatch {
            expected: space.digest.to_string(),
            found: format!("{} (row {})", r.vector.space(), r.id),
        });
    }
    let has = |l: BinaryLabel| rows.iter().any(|r| r.label == l);
    if !has(BinaryLabel::M) || !has(BinaryLabel::T) {
        return Err(Error::Degenerate("training set holds a single class".into()));
    }

    let dim = space.dim;
    let mut meta = TrainingMeta {
        seed: config.seed,
        epochs: 0,
        final_objective: None,
        train_rows: rows.len(),
    };
    let parameters = match config.hyperparameters {
        Hyperparameters::Nb { alpha } => {
            let event = if space.method.is_binary() {
                EventModel::Bernoulli
            } else {
                EventModel::Multinomial
            };
            Parameters::Nb(nb::train(rows, dim, event, alpha))
        }
        Hyperparameters::Dt(p) => {
            let refs: Vec<&LabeledVector> = rows.iter().collect();
            Parameters::Dt(tree::Tree::grow(&refs, &p))
        }
        Hyperparameters::Rf(p) => Parameters::Rf {
            trees: forest::train(rows, dim, &p, config.seed),
        },
        Hyperparameters::Svm(p) => {
            let trace = svm::train(rows, dim, &p, config.seed)?;
            meta.epochs = p.epochs;
            meta.final_objective = trace.objectives.last().copied();
            Parameters::Svm(trace.model)
        }
        Hyperparameters::Mem(p) => {
            let trace = maxent::train(rows, dim, &p)?;
            meta.epochs = trace.epochs;
            meta.final_objective = trace.objectives.last().copied();
            Parameters::Mem(trace.model)
        }
    };
    Ok(TrainedModel {
        model_type: config.model_type(),
        hyperparameters: config.hyperparameters,
        space: *space,
        parameters,
        training_meta: meta,
    })
}

impl TrainedModel {
    fn check_space(&self, v: &FeatureVector) -> Result<()> {
        if v.space() == self.space.digest {
            Ok(())
        } else {
            Err(Error::SpaceMismatch {
                expected: self.space.digest.to_string(),
                found: v.space().to_string(),
            })
        }
    }

    pub fn predict(&self, v: &FeatureVector) -> Result<Prediction> {
        self.check_space(v)?;
        Ok(match &self.parameters {
            Parameters::Nb(p) => {
                let (label, s) = nb::predict(p, v);
                Prediction {
                    label,
                    score: s[1] - s[0],
                    per_class: per_class(s),
                }
            }
            Parameters::Dt(t) => {
                let (label, dist) = t.predict(v);
                Prediction {
                    label,
                    score: dist[1] - dist[0],
                    per_class: per_class(dist),
                }
            }
            Parameters::Rf { trees } => {
                let (label, share) = forest::predict(trees, v);
                Prediction {
                    label,
                    score: share[1] - share[0],
                    per_class: per_class(share),
                }
            }
            Parameters::Svm(m) => {
                let (label, margin) = svm::predict(m, v);
                Prediction {
                    label,
                    score: margin,
                    per_class: None,
                }
            }
            Parameters::Mem(m) => {
                let (label, z, probs) = maxent::predict(m, v);
                Prediction {
                    label,
                    score: z,
                    per_class: per_class(probs),
                }
            }
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            model: self.clone(),
        };
        let mut bytes = serde_json::to_vec(&file).map_err(|e| Error::Validation(e.to_string()))?;
        bytes.push(b'\n');
        fsutil::write_atomic(path, &bytes)
    }

    pub fn load(path: &Path) -> Result<TrainedModel> {
        let text = fsutil::read_to_string(path)?;
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| Error::format(path, format!("not a model file: {e}")))?;
        let found = value
            .get("format_version")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| Error::format(path, "missing format_version"))?;
        if found != u64::from(MODEL_FORMAT_VERSION) {
            return Err(Error::Version {
                found: found as u32,
                expected: MODEL_FORMAT_VERSION,
            });
        }
        let file: ModelFile = serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
        file.model.validate().map_err(|e| Error::format(path, e.to_string()))?;
        Ok(file.model)
    }

    fn validate(&self) -> Result<()> {
        if self.hyperparameters.model_type() != self.model_type {
            return Err(Error::Validation("hyperparameters do not match model type".into()));
        }
        let dim = self.space.dim;
        let tree_ok = |t: &tree::Tree| {
            !t.nodes.is_empty()
                && t.max_feature().is_none_or(|f| f < dim)
                && t.nodes.iter().all(|n| match n {
                    tree::Node::Split { left, right, .. } => *left < t.nodes.len() && *right < t.nodes.len(),
                    tree::Node::Leaf { .. } => true,
                })
        };
        let ok = match &self.parameters {
            Parameters::Nb(p) => p.log_prob.iter().all(|v| v.len() == dim),
            Parameters::Dt(t) => tree_ok(t),
            Parameters::Rf { trees } => !trees.is_empty() && trees.iter().all(tree_ok),
            Parameters::Svm(m) => m.weights.len() == dim,
            Parameters::Mem(m) => m.weights.len() == dim,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Validation("model parameters inconsistent with its feature space".into()))
        }
    }
}

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    #[serde(flatten)]
    model: TrainedModel,
}

/// Per-class log P(c) + sum of log P(feature | c) for a Naive Bayes model.
pub fn nb_log_posterior(model: &TrainedModel, v: &FeatureVector) -> Result<BTreeMap<BinaryLabel, f64>> {
    model.check_space(v)?;
    match &model.parameters {
        Parameters::Nb(p) => {
            let s = nb::log_joint(p, v);
            Ok(BTreeMap::from([(BinaryLabel::M, s[0]), (BinaryLabel::T, s[1])]))
        }
        _ => Err(Error::Contract(format!("{} is not a Naive Bayes model", model.model_type.display_name()))),
    }
}

/// Convenience for callers holding the method rather than a full [`SpaceInfo`].
pub fn event_model_for(method: FeatureMethod) -> EventModel {
    if method.is_binary() {
        EventModel::Bernoulli
    } else {
        EventModel::Multinomial
    }
}
