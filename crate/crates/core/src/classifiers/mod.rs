//! Kernel SVM and gradient-boosted trees, plus the persisted model container.
//!
//! [`TrainedModel`] bundles a classifier with the feature signature it was
//! trained on and the standardizer fitted on the training split, so a single
//! file is enough to score new feature vectors.

mod gbdt;
mod persist;
mod svm;

pub use gbdt::{gbdt_train, GbdtModel, Growth, Node, Tree};
pub use persist::{decode_model, encode_model, load_model, save_model};
pub use svm::{svm_train, BinarySvm, SvmModel};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fusion::{FeatureMatrix, FusionError, Signature, Standardizer};
use crate::handcrafted::HandcraftedConfig;
use crate::label::ClassLabel;
use crate::preprocess::PreprocessConfig;
use crate::scalar::Real;

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error("training data holds a single class ({0})")]
    SingleClass(ClassLabel),
    #[error("training data is empty")]
    EmptyTrainingSet,
    #[error("non-finite feature at row {row}, column {col}")]
    NonFiniteFeature { row: usize, col: usize },
    #[error("{labels} labels for {rows} feature rows")]
    LengthMismatch { rows: usize, labels: usize },
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    #[error("feature vector has length {actual}, model expects {expected}")]
    DimMismatch { expected: usize, actual: usize },
    #[error("model file: bad magic")]
    BadMagic,
    #[error("model file: unsupported version {0}")]
    VersionUnsupported(u16),
    #[error("model file holds a {actual} model, expected {expected}")]
    KindMismatch { expected: ClassifierKind, actual: ClassifierKind },
    #[error("model file stores {stored}-byte scalars, reader uses {requested}-byte scalars")]
    ScalarWidth { stored: u8, requested: u8 },
    #[error("corrupt model file: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Fusion(#[from] FusionError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Classifier family and, for boosting, its tree growth policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ClassifierKind {
    #[serde(rename = "SVM")]
    Svm,
    #[serde(rename = "GBDT-levelwise")]
    GbdtLevelwise,
    #[serde(rename = "GBDT-leafwise")]
    GbdtLeafwise,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 3] = [ClassifierKind::Svm, ClassifierKind::GbdtLevelwise, ClassifierKind::GbdtLeafwise];

    pub fn name(self) -> &'static str {
        match self {
            ClassifierKind::Svm => "SVM",
            ClassifierKind::GbdtLevelwise => "GBDT-levelwise",
            ClassifierKind::GbdtLeafwise => "GBDT-leafwise",
        }
    }

    pub(crate) fn code(self) -> u8 {
        self as u8 + 1
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(usize::from(code).checked_sub(1)?).copied()
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ClassifierKind {
    type Err = ClassifierError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "svm" => Ok(ClassifierKind::Svm),
            "gbdt-levelwise" | "levelwise" | "xgboost" => Ok(ClassifierKind::GbdtLevelwise),
            "gbdt-leafwise" | "leafwise" | "lightgbm" | "lgbm" => Ok(ClassifierKind::GbdtLeafwise),
            _ => Err(ClassifierError::InvalidParams(format!("unknown classifier {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Linear,
    Rbf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmParams {
    pub c: f64,
    pub kernel: KernelKind,
    /// RBF width; `None` means `1 / (dim · variance of the training features)`.
    pub gamma: Option<f64>,
    pub tol: f64,
    pub max_iter: usize,
    /// Kernel row cache budget in MiB per binary problem.
    pub cache_mb: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self { c: 1.0, kernel: KernelKind::Rbf, gamma: None, tol: 1e-3, max_iter: 10_000_000, cache_mb: 256 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GbdtParams {
    pub rounds: usize,
    pub eta: f64,
    pub max_depth: usize,
    pub max_leaves: usize,
    pub min_samples_leaf: usize,
    pub histogram_bins: usize,
    pub lambda: f64,
}

impl Default for GbdtParams {
    fn default() -> Self {
        Self { rounds: 200, eta: 0.1, max_depth: 6, max_leaves: 31, min_samples_leaf: 5, histogram_bins: 64, lambda: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainParams {
    pub svm: SvmParams,
    pub gbdt: GbdtParams,
}

impl TrainParams {
    pub fn validate(&self) -> Result<(), ClassifierError> {
        let bad = |m: &str| Err(ClassifierError::InvalidParams(m.to_string()));
        let s = &self.svm;
        if !(s.c > 0.0) || !s.c.is_finite() {
            return bad("svm.c must be positive");
        }
        if let Some(g) = s.gamma {
            if !(g > 0.0) || !g.is_finite() {
                return bad("svm.gamma must be positive");
            }
        }
        if !(s.tol > 0.0) || s.max_iter == 0 {
            return bad("svm.tol and svm.max_iter must be positive");
        }
        let g = &self.gbdt;
        if g.rounds == 0 {
            return bad("gbdt.rounds must be at least 1");
        }
        // eta = 0 is accepted so the frozen-model case can be exercised
        if !(0.0..=1.0).contains(&g.eta) {
            return bad("gbdt.eta must lie in [0, 1]");
        }
        if g.max_depth == 0 || g.max_leaves < 2 || g.min_samples_leaf == 0 {
            return bad("gbdt tree limits must be positive (max_leaves >= 2)");
        }
        if !(2..=256).contains(&g.histogram_bins) {
            return bad("gbdt.histogram_bins must lie in 2..=256");
        }
        if !(g.lambda >= 0.0) || !g.lambda.is_finite() {
            return bad("gbdt.lambda must be non-negative");
        }
        Ok(())
    }
}

/// Validates a training set and returns the class codes it contains, sorted.
pub(crate) fn check_training<T: Real>(data: &[T], dim: usize, labels: &[ClassLabel]) -> Result<Vec<ClassLabel>, ClassifierError> {
    let rows = data.len().checked_div(dim).unwrap_or(0);
    if rows != labels.len() || rows * dim != data.len() {
        return Err(ClassifierError::LengthMismatch { rows, labels: labels.len() });
    }
    if rows == 0 {
        return Err(ClassifierError::EmptyTrainingSet);
    }
    if let Some(i) = data.iter().position(|v| !v.is_finite()) {
        return Err(ClassifierError::NonFiniteFeature { row: i / dim, col: i % dim });
    }
    let mut present: Vec<ClassLabel> = labels.to_vec();
    present.sort();
    present.dedup();
    if present.len() < 2 {
        return Err(ClassifierError::SingleClass(present[0]));
    }
    Ok(present)
}

/// Output of a single prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub label: ClassLabel,
    /// Vote share for SVM, class probability for GBDT.
    pub score: f64,
    /// Per-class votes (SVM) or probabilities (GBDT), indexed by class code.
    pub scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelBody<T> {
    Svm(SvmModel<T>),
    Gbdt(GbdtModel<T>),
}

/// Free-form context saved next to a model.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelMeta {
    pub params: TrainParams,
    pub handcrafted: Option<HandcraftedConfig>,
    pub preprocess: Option<PreprocessConfig>,
    pub standardized: bool,
}

/// Classifier plus the feature layout and scaling it expects.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel<T> {
    pub kind: ClassifierKind,
    pub signature: Signature,
    pub standardizer: Standardizer<T>,
    pub body: ModelBody<T>,
    pub meta: ModelMeta,
}

impl<T: Real> TrainedModel<T> {
    /// Fits the standardizer (unless disabled) and the classifier on `train`.
    pub fn fit(
        kind: ClassifierKind,
        train: &FeatureMatrix<T>,
        labels: &[ClassLabel],
        params: &TrainParams,
        standardize: bool,
    ) -> Result<Self, ClassifierError> {
        params.validate()?;
        let standardizer =
            if standardize { Standardizer::fit(train)? } else { Standardizer::identity(train.signature().clone()) };
        let z = if standardize { standardizer.apply(train)? } else { train.clone() };
        let body = match kind {
            ClassifierKind::Svm => ModelBody::Svm(svm_train(z.data(), z.dim(), labels, &params.svm)?),
            ClassifierKind::GbdtLevelwise => {
                ModelBody::Gbdt(gbdt_train(z.data(), z.dim(), labels, &params.gbdt, Growth::Levelwise)?)
            }
            ClassifierKind::GbdtLeafwise => {
                ModelBody::Gbdt(gbdt_train(z.data(), z.dim(), labels, &params.gbdt, Growth::Leafwise)?)
            }
        };
        Ok(Self {
            kind,
            signature: train.signature().clone(),
            standardizer,
            body,
            meta: ModelMeta { params: params.clone(), handcrafted: None, preprocess: None, standardized: standardize },
        })
    }

    /// Scores one raw (unstandardized) feature vector.
    pub fn predict(&self, x: &[T]) -> Result<Prediction, ClassifierError> {
        if x.len() != self.signature.total_dim() {
            return Err(ClassifierError::DimMismatch { expected: self.signature.total_dim(), actual: x.len() });
        }
        let z = self.standardizer.apply_slice(x)?;
        Ok(match &self.body {
            ModelBody::Svm(m) => m.predict(&z),
            ModelBody::Gbdt(m) => m.predict(&z),
        })
    }

    /// Scores every row of `m` after checking its signature.
    pub fn predict_matrix(&self, m: &FeatureMatrix<T>) -> Result<Vec<Prediction>, ClassifierError> {
        if m.signature() != &self.signature {
            return Err(FusionError::SignatureMismatch { expected: self.signature.clone(), actual: m.signature().clone() }.into());
        }
        m.rows().map(|r| self.predict(r)).collect()
    }
}
