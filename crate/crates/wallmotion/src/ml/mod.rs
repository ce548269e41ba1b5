//! Binary classifiers with a uniform train/predict contract.
//!
//! Five model families are implemented natively: decision trees, random
//! forests, support vector machines (SMO solver), k-nearest neighbors, and
//! a small two-block 1D convolutional network. All stochastic choices flow
//! from the spec seed through named PRNG streams, so training is
//! reproducible bit for bit.

mod cnn;
mod complexity;
mod dt;
mod knn;
mod rf;
mod serialize;
mod svm;

pub use cnn::{cnn_forward, cnn_gradient, cnn_loss, init_model as cnn_init, CnnDims, CnnModel, CnnParams};
pub use complexity::{arch_multiplications, conv_backprop_multiplications};
pub use dt::{Criterion, DecisionTree, DtParams, MaxFeatures, Splitter};
pub use knn::{DistanceMetric, KnnAlgorithm, KnnModel, KnnParams, KnnWeights};
pub use rf::{ClassWeight, RandomForest, RfParams};
pub use svm::{fit as svm_fit, kkt_residuals, SvmFit, SvmKernel, SvmModel, SvmParams};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataio::BinaryLabel;

#[derive(Debug, Error)]
pub enum MlError {
    #[error("training needs at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("training data contains a single class")]
    SingleClass,
    #[error("feature vectors are empty")]
    EmptyFeatures,
    #[error("row {row} has {got} features, expected {expected}")]
    InconsistentRows {
        row: usize,
        expected: usize,
        got: usize,
    },
    #[error("expected {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("hyperparameter outside its domain: {0}")]
    InvalidHyperparameter(String),
    #[error("1D-CNN architecture invalid: {0}")]
    CnnArchitecture(String),
    #[error("k = {k} exceeds the {n} training samples")]
    KTooLarge { k: usize, n: usize },
    #[error("arithmetic overflow in complexity estimate")]
    Overflow,
    #[error("model serialization failed: {0}")]
    Serialization(String),
}

/// Classifier family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Dt,
    Rf,
    Svm,
    Knn,
    #[serde(rename = "cnn")]
    Cnn1d,
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ModelKind::Dt => "dt",
            ModelKind::Rf => "rf",
            ModelKind::Svm => "svm",
            ModelKind::Knn => "knn",
            ModelKind::Cnn1d => "cnn",
        };
        write!(f, "{s}")
    }
}

/// Kind-specific hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelParams {
    Dt(DtParams),
    Rf(RfParams),
    Svm(SvmParams),
    Knn(KnnParams),
    #[serde(rename = "cnn")]
    Cnn(CnnParams),
}

impl ModelParams {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelParams::Dt(_) => ModelKind::Dt,
            ModelParams::Rf(_) => ModelKind::Rf,
            ModelParams::Svm(_) => ModelKind::Svm,
            ModelParams::Knn(_) => ModelKind::Knn,
            ModelParams::Cnn(_) => ModelKind::Cnn1d,
        }
    }

    /// Rejects values outside the admissible per-kind domains.
    pub fn validate(&self) -> Result<(), MlError> {
        match self {
            ModelParams::Dt(_) => Ok(()),
            ModelParams::Rf(p) => {
                if p.n_trees == 0 {
                    return Err(MlError::InvalidHyperparameter("n_trees = 0".into()));
                }
                Ok(())
            }
            ModelParams::Svm(p) => {
                if !(p.c > 0.0) {
                    return Err(MlError::InvalidHyperparameter(format!("C = {}", p.c)));
                }
                if !(p.gamma > 0.0) {
                    return Err(MlError::InvalidHyperparameter(format!(
                        "gamma = {}",
                        p.gamma
                    )));
                }
                Ok(())
            }
            ModelParams::Knn(p) => {
                if p.k == 0 {
                    return Err(MlError::InvalidHyperparameter("k = 0".into()));
                }
                Ok(())
            }
            ModelParams::Cnn(p) => {
                if !(p.learning_rate > 0.0 && p.learning_rate <= 1.0) {
                    return Err(MlError::InvalidHyperparameter(format!(
                        "learning rate = {}",
                        p.learning_rate
                    )));
                }
                if p.filters == 0 {
                    return Err(MlError::InvalidHyperparameter("filters = 0".into()));
                }
                if p.kernel_size % 2 == 0 || !(3..=15).contains(&p.kernel_size) {
                    return Err(MlError::InvalidHyperparameter(format!(
                        "kernel size = {} (odd sizes 3..=15)",
                        p.kernel_size
                    )));
                }
                if p.epochs == 0 {
                    return Err(MlError::InvalidHyperparameter("epochs = 0".into()));
                }
                if p.fc_width == 0 {
                    return Err(MlError::InvalidHyperparameter("fc_width = 0".into()));
                }
                Ok(())
            }
        }
    }
}

/// Hyperparameters plus the seed feeding every stochastic choice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub params: ModelParams,
    pub seed: u64,
}

impl ModelSpec {
    pub fn new(params: ModelParams, seed: u64) -> Self {
        Self { params, seed }
    }

    pub fn kind(&self) -> ModelKind {
        self.params.kind()
    }
}

/// A fitted classifier.
#[derive(Debug, Clone)]
pub enum TrainedModel {
    Dt(DecisionTree),
    Rf(RandomForest),
    Svm(SvmModel),
    Knn(KnnModel),
    Cnn(CnnModel),
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            TrainedModel::Dt(_) => ModelKind::Dt,
            TrainedModel::Rf(_) => ModelKind::Rf,
            TrainedModel::Svm(_) => ModelKind::Svm,
            TrainedModel::Knn(_) => ModelKind::Knn,
            TrainedModel::Cnn(_) => ModelKind::Cnn1d,
        }
    }

    pub fn n_features(&self) -> usize {
        match self {
            TrainedModel::Dt(m) => m.n_features,
            TrainedModel::Rf(m) => m.n_features,
            TrainedModel::Svm(m) => m.n_features,
            TrainedModel::Knn(m) => m.n_features(),
            TrainedModel::Cnn(m) => m.input_len,
        }
    }

    pub fn to_json(&self) -> Result<String, MlError> {
        serialize::to_json(self)
    }

    pub fn from_json(json: &str) -> Result<Self, MlError> {
        serialize::from_json(json)
    }
}

/// Label plus a confidence score for the positive (infarcted) class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: BinaryLabel,
    pub score: f64,
}

impl Prediction {
    /// Scores at exactly one half resolve to the positive class, keeping
    /// ties on the sensitive side.
    pub fn from_mi_score(score: f64) -> Self {
        let label = if score >= 0.5 {
            BinaryLabel::Mi
        } else {
            BinaryLabel::NonMi
        };
        Self { label, score }
    }
}

fn check_training_data(x: &[Vec<f64>], y: &[BinaryLabel]) -> Result<usize, MlError> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(MlError::TooFewSamples(x.len().min(y.len())));
    }
    let dim = x[0].len();
    if dim == 0 {
        return Err(MlError::EmptyFeatures);
    }
    for (row, xi) in x.iter().enumerate() {
        if xi.len() != dim {
            return Err(MlError::InconsistentRows {
                row,
                expected: dim,
                got: xi.len(),
            });
        }
    }
    let mi = y.iter().filter(|l| l.is_mi()).count();
    if mi == 0 || mi == y.len() {
        return Err(MlError::SingleClass);
    }
    Ok(dim)
}

/// Fits a model of the requested kind.
pub fn train(spec: &ModelSpec, x: &[Vec<f64>], y: &[BinaryLabel]) -> Result<TrainedModel, MlError> {
    spec.params.validate()?;
    let dim = check_training_data(x, y)?;
    match &spec.params {
        ModelParams::Dt(p) => Ok(TrainedModel::Dt(dt::fit_standalone(x, y, p, spec.seed))),
        ModelParams::Rf(p) => Ok(TrainedModel::Rf(rf::fit(x, y, p, spec.seed))),
        ModelParams::Svm(p) => Ok(TrainedModel::Svm(svm::fit(x, y, p).model)),
        ModelParams::Knn(p) => {
            if p.k > x.len() {
                return Err(MlError::KTooLarge { k: p.k, n: x.len() });
            }
            Ok(TrainedModel::Knn(KnnModel::fit(x, y, p.clone())))
        }
        ModelParams::Cnn(p) => Ok(TrainedModel::Cnn(cnn::fit(x, y, p, spec.seed, dim)?)),
    }
}

/// Applies a trained model to one feature vector.
pub fn predict(model: &TrainedModel, x: &[f64]) -> Result<Prediction, MlError> {
    let expected = model.n_features();
    if x.len() != expected {
        return Err(MlError::DimensionMismatch {
            expected,
            got: x.len(),
        });
    }
    let score = match model {
        TrainedModel::Dt(m) => m.predict_score(x),
        TrainedModel::Rf(m) => m.predict_score(x),
        TrainedModel::Svm(m) => m.predict_score(x),
        TrainedModel::Knn(m) => m.predict_score(x),
        TrainedModel::Cnn(m) => cnn::cnn_forward(m, x)?[1],
    };
    Ok(Prediction::from_mi_score(score))
}
