//! Deep embedding ingestion through the `PVEM` file format.
//!
//! ```text
//! "PVEM" | u16 version=1 | u32 dim | u64 count
//! count × (u16 id_len | id bytes (UTF-8) | dim × f32)
//! ```
//! Integers and floats are little-endian; records are written sorted by id.
//! The synthetic provider stands in for a real network in tests and demos.

use std::collections::BTreeMap;
use std::path::Path;

use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::binio::{put_f32, put_u16, put_u32, put_u64, Reader};
use crate::fusion::{BlockKind, FeatureMatrix, FusionError, Signature};
use crate::label::ClassLabel;
use crate::rng::keyed_rng;
use crate::scalar::Real;

const MAGIC: &[u8; 4] = b"PVEM";
const VERSION: u16 = 1;
const HEADER_LEN: usize = 18;
const NOISE_SALT: u64 = 0xDEE9_FEA7;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("not an embedding file (bad magic)")]
    BadMagic,
    #[error("unsupported embedding file version {0}")]
    VersionUnsupported(u16),
    #[error("record {id:?} holds fewer than {dim} values")]
    DimMismatch { id: String, dim: usize },
    #[error("duplicate sample id {0:?}")]
    DuplicateId(String),
    #[error("file ends after {found} of {declared} records")]
    TruncatedFile { declared: u64, found: u64 },
    #[error("{0} bytes after the last record")]
    TrailingBytes(usize),
    #[error("non-finite value in record {0:?}")]
    NonFinite(String),
    #[error("empty sample id")]
    EmptyId,
    #[error("vector for {id:?} has length {actual}, expected {expected}")]
    WrongLength { id: String, expected: usize, actual: usize },
    #[error("dimension must be at least {min}, got {dim}")]
    InvalidDim { dim: usize, min: usize },
    #[error("no labels given")]
    EmptyLabels,
    #[error("separation must be finite and non-negative, got {0}")]
    InvalidSeparation(f64),
    #[error("id {0:?} is too long for the file format")]
    IdTooLong(String),
    #[error(transparent)]
    Fusion(#[from] FusionError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Id-keyed deep feature vectors of a common length.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet<T> {
    dim: usize,
    entries: BTreeMap<String, Vec<T>>,
}

impl<T: Real> EmbeddingSet<T> {
    pub fn new(dim: usize) -> Result<Self, EmbeddingError> {
        if dim == 0 {
            return Err(EmbeddingError::InvalidDim { dim, min: 1 });
        }
        Ok(Self { dim, entries: BTreeMap::new() })
    }

    pub fn insert(&mut self, id: impl Into<String>, values: Vec<T>) -> Result<(), EmbeddingError> {
        let id = id.into();
        if id.is_empty() {
            return Err(EmbeddingError::EmptyId);
        }
        if values.len() != self.dim {
            return Err(EmbeddingError::WrongLength { id, expected: self.dim, actual: values.len() });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(EmbeddingError::NonFinite(id));
        }
        if self.entries.contains_key(&id) {
            return Err(EmbeddingError::DuplicateId(id));
        }
        self.entries.insert(id, values);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&[T]> {
        self.entries.get(id).map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[T])> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    /// DEEP-only feature matrix with rows for `ids`, in that order.
    pub fn to_matrix(&self, ids: &[String]) -> Result<FeatureMatrix<T>, EmbeddingError> {
        let mut data = Vec::with_capacity(ids.len() * self.dim);
        for id in ids {
            let v = self.get(id).ok_or_else(|| FusionError::MissingSample(id.clone()))?;
            data.extend_from_slice(v);
        }
        Ok(FeatureMatrix::new(Signature::new(vec![(BlockKind::Deep, self.dim)])?, ids.to_vec(), data)?)
    }

    pub fn encode(&self) -> Result<Vec<u8>, EmbeddingError> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.len() * (self.dim * 4 + 16));
        out.extend_from_slice(MAGIC);
        put_u16(&mut out, VERSION);
        put_u32(&mut out, u32::try_from(self.dim).map_err(|_| EmbeddingError::InvalidDim { dim: self.dim, min: 1 })?);
        put_u64(&mut out, self.len() as u64);
        for (id, values) in &self.entries {
            let len = u16::try_from(id.len()).map_err(|_| EmbeddingError::IdTooLong(id.clone()))?;
            put_u16(&mut out, len);
            out.extend_from_slice(id.as_bytes());
            for v in values {
                put_f32(&mut out, v.to_f32().unwrap_or(f32::NAN));
            }
        }
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, EmbeddingError> {
        let mut r = Reader::new(bytes);
        if r.bytes(4).map_err(|_| EmbeddingError::BadMagic)? != MAGIC {
            return Err(EmbeddingError::BadMagic);
        }
        let header_eof = |_| EmbeddingError::TruncatedFile { declared: 0, found: 0 };
        let version = r.u16().map_err(header_eof)?;
        if version != VERSION {
            return Err(EmbeddingError::VersionUnsupported(version));
        }
        let dim = r.u32().map_err(header_eof)? as usize;
        let count = r.u64().map_err(header_eof)?;
        let mut set = Self::new(dim)?;
        for found in 0..count {
            let truncated = |_| EmbeddingError::TruncatedFile { declared: count, found };
            let len = r.u16().map_err(truncated)? as usize;
            let id = std::str::from_utf8(r.bytes(len).map_err(truncated)?).map_err(|_| EmbeddingError::EmptyId)?.to_string();
            if r.remaining() < dim * 4 {
                return Err(EmbeddingError::DimMismatch { id, dim });
            }
            let values = (0..dim).map(|_| T::from_f64_lossy(f64::from(r.f32().expect("length checked")))).collect();
            set.insert(id, values)?;
        }
        if !r.is_empty() {
            return Err(EmbeddingError::TrailingBytes(r.remaining()));
        }
        Ok(set)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), EmbeddingError> {
        std::fs::write(path, self.encode()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, EmbeddingError> {
        Self::decode(&std::fs::read(path)?)
    }
}

/// Class mean for `label`: `separation` along one axis, with the sign flipped
/// when classes outnumber dimensions.
pub fn class_mean(label: ClassLabel, dim: usize, separation: f64) -> Vec<f64> {
    let c = label.code();
    let mut mu = vec![0.0; dim];
    let sign = if (c / dim).is_multiple_of(2) { 1.0 } else { -1.0 };
    mu[c % dim] = sign * separation;
    mu
}

/// Gaussian class clusters: each sample is its class mean plus unit noise drawn
/// from a stream keyed by `(seed, id)`.
pub fn synthetic_embeddings<'a, T: Real>(
    labels: impl IntoIterator<Item = (&'a str, ClassLabel)>,
    dim: usize,
    seed: u64,
    separation: f64,
) -> Result<EmbeddingSet<T>, EmbeddingError> {
    if dim < 2 {
        return Err(EmbeddingError::InvalidDim { dim, min: 2 });
    }
    if !(separation >= 0.0) || !separation.is_finite() {
        return Err(EmbeddingError::InvalidSeparation(separation));
    }
    let mut set = EmbeddingSet::new(dim)?;
    for (id, label) in labels {
        let mut rng = keyed_rng(seed, id, NOISE_SALT);
        let values = class_mean(label, dim, separation)
            .into_iter()
            .map(|m| {
                let z: f64 = StandardNormal.sample(&mut rng);
                // rounded through f32 so the set survives a file round trip unchanged
                T::from_f64_lossy(f64::from((m + z) as f32))
            })
            .collect();
        set.insert(id, values)?;
    }
    if set.is_empty() {
        return Err(EmbeddingError::EmptyLabels);
    }
    Ok(set)
}
