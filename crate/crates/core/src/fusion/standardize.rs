use serde::{Deserialize, Serialize};

use super::{FeatureMatrix, FusionError, Signature};
use crate::scalar::Real;

/// Per-dimension z-score fitted on a training matrix.
///
/// Dimensions whose spread is negligible relative to their mean get σ = 1, so
/// they are centred but not scaled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer<T> {
    signature: Signature,
    mean: Vec<T>,
    std: Vec<T>,
}

impl<T: Real> Standardizer<T> {
    pub fn fit(train: &FeatureMatrix<T>) -> Result<Self, FusionError> {
        if train.is_empty() {
            return Err(FusionError::EmptyMatrix);
        }
        let d = train.dim();
        let n = train.len() as f64;
        let first = train.row(0);
        // shifted accumulation keeps large offsets from swamping the variance
        let mut sum = vec![0.0f64; d];
        let mut sq = vec![0.0f64; d];
        for row in train.rows() {
            for j in 0..d {
                let v = row[j].as_f64() - first[j].as_f64();
                sum[j] += v;
                sq[j] += v * v;
            }
        }
        let mut mean = Vec::with_capacity(d);
        let mut std = Vec::with_capacity(d);
        for j in 0..d {
            let shift_mean = sum[j] / n;
            let m = first[j].as_f64() + shift_mean;
            let var = (sq[j] / n - shift_mean * shift_mean).max(0.0);
            let s = var.sqrt();
            let s = if s <= 1e-9 * m.abs().max(1.0) { 1.0 } else { s };
            mean.push(T::from_f64_lossy(m));
            std.push(T::from_f64_lossy(s));
        }
        Ok(Self { signature: train.signature().clone(), mean, std })
    }

    /// Identity transform for a signature (used when standardisation is disabled).
    pub fn identity(signature: Signature) -> Self {
        let d = signature.total_dim();
        Self { signature, mean: vec![T::zero(); d], std: vec![T::one(); d] }
    }

    pub fn from_parts(signature: Signature, mean: Vec<T>, std: Vec<T>) -> Result<Self, FusionError> {
        let d = signature.total_dim();
        if mean.len() != d || std.len() != d {
            return Err(FusionError::DimMismatch { expected: d, actual: mean.len().max(std.len()) });
        }
        if std.iter().any(|s| !(*s > T::zero()) || !s.is_finite()) || mean.iter().any(|m| !m.is_finite()) {
            return Err(FusionError::Format("standardizer parameters must be finite with positive σ".into()));
        }
        Ok(Self { signature, mean, std })
    }

    pub fn signature(&self) -> &Signature {
        &self.signature
    }

    pub fn mean(&self) -> &[T] {
        &self.mean
    }

    pub fn std(&self) -> &[T] {
        &self.std
    }

    pub fn is_identity(&self) -> bool {
        self.mean.iter().all(|m| m.is_zero()) && self.std.iter().all(|s| *s == T::one())
    }

    pub fn apply_slice(&self, x: &[T]) -> Result<Vec<T>, FusionError> {
        if x.len() != self.mean.len() {
            return Err(FusionError::DimMismatch { expected: self.mean.len(), actual: x.len() });
        }
        Ok(x.iter().zip(&self.mean).zip(&self.std).map(|((&v, &m), &s)| (v - m) / s).collect())
    }

    pub fn apply(&self, m: &FeatureMatrix<T>) -> Result<FeatureMatrix<T>, FusionError> {
        self.check(m.signature())?;
        let mut data = Vec::with_capacity(m.data().len());
        for row in m.rows() {
            data.extend(self.apply_slice(row)?);
        }
        FeatureMatrix::new(m.signature().clone(), m.ids().to_vec(), data)
    }

    pub fn invert_slice(&self, z: &[T]) -> Result<Vec<T>, FusionError> {
        if z.len() != self.mean.len() {
            return Err(FusionError::DimMismatch { expected: self.mean.len(), actual: z.len() });
        }
        Ok(z.iter().zip(&self.mean).zip(&self.std).map(|((&v, &m), &s)| v * s + m).collect())
    }

    pub fn check(&self, sig: &Signature) -> Result<(), FusionError> {
        if sig != &self.signature {
            return Err(FusionError::SignatureMismatch { expected: self.signature.clone(), actual: sig.clone() });
        }
        Ok(())
    }
}
