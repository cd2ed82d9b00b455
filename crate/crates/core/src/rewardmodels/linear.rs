use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::features::{extract_features_with, FeatureSpec, FeatureVector, FEATURE_SCHEMA_VERSION};
use super::mining::DEFAULT_MARGIN;
use super::ModelError;
use crate::corpus::{CtrPair, LabeledQuality};
use crate::rewards::{HeadlineScorer, ScoreError};

/// Numerically stable logistic function.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub spec: FeatureSpec,
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearModel {
    pub fn zeros(spec: FeatureSpec) -> Self {
        Self {
            spec,
            weights: vec![0.0; spec.dim],
            bias: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn logit(&self, features: &FeatureVector) -> Result<f64, ModelError> {
        if features.dim() != self.dim() {
            return Err(ModelError::DimensionMismatch {
                model: self.dim(),
                features: features.dim(),
            });
        }
        Ok(features.dot(&self.weights) + self.bias)
    }

    pub fn score_text(&self, content: &str, headline: &str) -> Result<f64, ModelError> {
        let f = extract_features_with(&self.spec, content, headline)?;
        predict(self, &f)
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        let file = ModelFile {
            schema_version: FEATURE_SCHEMA_VERSION,
            dim: self.dim(),
            hash_seed: self.spec.hash_seed,
            bias: self.bias,
            weights: self.weights.clone(),
        };
        let mut text =
            serde_json::to_string(&file).map_err(|e| ModelError::Format(e.to_string()))?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let text = std::fs::read_to_string(path)?;
        let file: ModelFile =
            serde_json::from_str(&text).map_err(|e| ModelError::Format(e.to_string()))?;
        if file.schema_version != FEATURE_SCHEMA_VERSION {
            return Err(ModelError::Format(format!(
                "feature schema version {} is not supported",
                file.schema_version
            )));
        }
        if file.weights.len() != file.dim {
            return Err(ModelError::Format(format!(
                "{} weights for dimension {}",
                file.weights.len(),
                file.dim
            )));
        }
        if !file.bias.is_finite() || file.weights.iter().any(|w| !w.is_finite()) {
            return Err(ModelError::NonFinite);
        }
        let spec = FeatureSpec {
            dim: file.dim,
            hash_seed: file.hash_seed,
        };
        spec.validate()?;
        Ok(Self {
            spec,
            weights: file.weights,
            bias: file.bias,
        })
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    schema_version: u32,
    dim: usize,
    hash_seed: u64,
    bias: f64,
    weights: Vec<f64>,
}

/// `logistic(w·f + b)`.
pub fn predict(model: &LinearModel, features: &FeatureVector) -> Result<f64, ModelError> {
    Ok(sigmoid(model.logit(features)?))
}

/// A trained model used as a reward scorer.
#[derive(Debug, Clone)]
pub struct LinearScorer(pub LinearModel);

impl HeadlineScorer for LinearScorer {
    fn score(&self, content: &str, headline: &str) -> Result<f64, ScoreError> {
        self.0
            .score_text(content, headline)
            .map_err(|e| ScoreError::Other(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub l2: f64,
    pub margin: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1.0,
            epochs: 200,
            batch_size: 32,
            seed: 0,
            l2: 0.0,
            margin: DEFAULT_MARGIN,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(ModelError::Config("learning_rate must be positive".into()));
        }
        if self.epochs < 1 || self.batch_size < 1 {
            return Err(ModelError::Config(
                "epochs and batch_size must be at least 1".into(),
            ));
        }
        if !(self.l2 >= 0.0) {
            return Err(ModelError::Config("l2 must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub model: LinearModel,
    /// Full-data objective after each epoch.
    pub loss_trace: Vec<f64>,
}

/// Dense gradient of a training objective.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl Gradient {
    fn zeros(dim: usize) -> Self {
        Self {
            weights: vec![0.0; dim],
            bias: 0.0,
        }
    }

    fn add_l2(&mut self, model: &LinearModel, l2: f64) {
        if l2 > 0.0 {
            for (g, w) in self.weights.iter_mut().zip(&model.weights) {
                *g += 2.0 * l2 * w;
            }
        }
    }
}

fn l2_penalty(model: &LinearModel, l2: f64) -> f64 {
    if l2 == 0.0 {
        0.0
    } else {
        l2 * model.weights.iter().map(|w| w * w).sum::<f64>()
    }
}

/// Mean binary cross-entropy plus `l2·‖w‖²`, with its gradient.
pub fn bce_objective(
    model: &LinearModel,
    data: &[(FeatureVector, f64)],
    l2: f64,
) -> Result<(f64, Gradient), ModelError> {
    let mut grad = Gradient::zeros(model.dim());
    let mut loss = 0.0;
    let n = data.len().max(1) as f64;
    for (f, y) in data {
        let z = model.logit(f)?;
        loss += softplus(z) - y * z;
        let r = (sigmoid(z) - y) / n;
        for &(i, v) in f.entries() {
            grad.weights[i] += r * v;
        }
        grad.bias += r;
    }
    grad.add_l2(model, l2);
    Ok((loss / n + l2_penalty(model, l2), grad))
}

/// Mean hinge `max(0, margin − s⁺ + s⁻)` on logistic scores plus `l2·‖w‖²`.
/// At the kink the hinge is treated as inactive.
pub fn margin_objective(
    model: &LinearModel,
    pairs: &[(FeatureVector, FeatureVector)],
    margin: f64,
    l2: f64,
) -> Result<(f64, Gradient), ModelError> {
    let mut grad = Gradient::zeros(model.dim());
    let mut loss = 0.0;
    let n = pairs.len().max(1) as f64;
    for (pos, neg) in pairs {
        let sp = sigmoid(model.logit(pos)?);
        let sn = sigmoid(model.logit(neg)?);
        let h = margin - (sp - sn);
        if h > 0.0 {
            loss += h;
            let dp = -sp * (1.0 - sp) / n;
            let dn = sn * (1.0 - sn) / n;
            for &(i, v) in pos.entries() {
                grad.weights[i] += dp * v;
            }
            for &(i, v) in neg.entries() {
                grad.weights[i] += dn * v;
            }
            grad.bias += dp + dn;
        }
    }
    grad.add_l2(model, l2);
    Ok((loss / n + l2_penalty(model, l2), grad))
}

fn apply(model: &mut LinearModel, grad: &Gradient, lr: f64) {
    for (w, g) in model.weights.iter_mut().zip(&grad.weights) {
        *w -= lr * g;
    }
    model.bias -= lr * grad.bias;
}

/// Shuffled mini-batch gradient descent shared by both trainers.
fn descend<T>(
    spec: FeatureSpec,
    data: &[T],
    config: &TrainConfig,
    objective: impl Fn(&LinearModel, &[T]) -> Result<(f64, Gradient), ModelError>,
) -> Result<TrainedModel, ModelError>
where
    T: Clone,
{
    let mut model = LinearModel::zeros(spec);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut loss_trace = Vec::with_capacity(config.epochs);
    let mut batch = Vec::with_capacity(config.batch_size);
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| data[i].clone()));
            let (_, grad) = objective(&model, &batch)?;
            apply(&mut model, &grad, config.learning_rate);
        }
        loss_trace.push(objective(&model, data)?.0);
    }
    Ok(TrainedModel { model, loss_trace })
}

/// Trains the faithfulness classifier with binary cross-entropy.
pub fn train_quality(
    data: &[LabeledQuality],
    spec: FeatureSpec,
    config: &TrainConfig,
) -> Result<TrainedModel, ModelError> {
    config.validate()?;
    spec.validate()?;
    let has = |l: u8| data.iter().any(|d| d.label == l);
    if !(has(0) && has(1)) {
        return Err(ModelError::SingleClass);
    }
    let examples = data
        .iter()
        .map(|d| {
            Ok((
                extract_features_with(&spec, &d.content, &d.headline)?,
                f64::from(d.label),
            ))
        })
        .collect::<Result<Vec<_>, ModelError>>()?;
    descend(spec, &examples, config, |m, batch| {
        bce_objective(m, batch, config.l2)
    })
}

/// Trains the CTR scorer with the pairwise margin loss.
pub fn train_ctr(
    pairs: &[CtrPair],
    spec: FeatureSpec,
    config: &TrainConfig,
) -> Result<TrainedModel, ModelError> {
    config.validate()?;
    spec.validate()?;
    if pairs.is_empty() {
        return Err(ModelError::EmptyPairs);
    }
    let examples = pairs
        .iter()
        .map(|p| {
            Ok((
                extract_features_with(&spec, &p.content, &p.positive)?,
                extract_features_with(&spec, &p.content, &p.negative)?,
            ))
        })
        .collect::<Result<Vec<_>, ModelError>>()?;
    descend(spec, &examples, config, |m, batch| {
        margin_objective(m, batch, config.margin, config.l2)
    })
}
