//! Photovoltaic panel defect classification.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod augment;
pub mod binio;
pub mod classifiers;
pub mod deepfeat;
pub mod eval;
pub mod fusion;
pub mod handcrafted;
pub mod imagecore;
pub mod label;
pub mod preprocess;
pub mod rng;
pub mod scalar;
pub mod synth;

pub use imagecore::{ImageError, ImageF32, ImageU8};
pub use label::ClassLabel;
pub use scalar::Real;

pub type FeatureMatrixF32 = fusion::FeatureMatrix<f32>;
pub type FeatureMatrixF64 = fusion::FeatureMatrix<f64>;
pub type StandardizerF32 = fusion::Standardizer<f32>;
pub type StandardizerF64 = fusion::Standardizer<f64>;
pub type EmbeddingSetF32 = deepfeat::EmbeddingSet<f32>;
pub type EmbeddingSetF64 = deepfeat::EmbeddingSet<f64>;
pub type TrainedModelF32 = classifiers::TrainedModel<f32>;
pub type TrainedModelF64 = classifiers::TrainedModel<f64>;
