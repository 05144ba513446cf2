//! Feature blocks, fused vectors and feature matrices.
//!
//! Blocks are always concatenated in the canonical order DEEP, LBP, HOG,
//! GABOR so that a signature fully describes the column layout of a vector.

mod standardize;
mod store;

pub use standardize::Standardizer;
pub use store::{decode_store, encode_store, read_store, write_store};

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Error)]
pub enum FusionError {
    #[error("blocks out of canonical order: {after} after {before}")]
    OrderViolation { before: BlockKind, after: BlockKind },
    #[error("block {0} appears more than once")]
    DuplicateBlock(BlockKind),
    #[error("signature mismatch: expected {expected}, got {actual}")]
    SignatureMismatch { expected: Signature, actual: Signature },
    #[error("feature matrix is empty")]
    EmptyMatrix,
    #[error("non-finite value in block {0}")]
    NonFinite(BlockKind),
    #[error("row length {actual} does not match signature dimension {expected}")]
    DimMismatch { expected: usize, actual: usize },
    #[error("no features for sample {0:?}")]
    MissingSample(String),
    #[error("block {0} is not available")]
    MissingBlock(BlockKind),
    #[error("duplicate sample id {0:?}")]
    DuplicateId(String),
    #[error("unknown block name {0:?}")]
    UnknownBlock(String),
    #[error("feature store: {0}")]
    Format(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Feature extractor family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum BlockKind {
    Deep,
    Lbp,
    Hog,
    Gabor,
}

impl BlockKind {
    pub const ALL: [BlockKind; 4] = [BlockKind::Deep, BlockKind::Lbp, BlockKind::Hog, BlockKind::Gabor];

    pub fn name(self) -> &'static str {
        match self {
            BlockKind::Deep => "DEEP",
            BlockKind::Lbp => "LBP",
            BlockKind::Hog => "HOG",
            BlockKind::Gabor => "GABOR",
        }
    }

    /// Name used in report tables.
    pub fn display_name(self) -> &'static str {
        match self {
            BlockKind::Deep => "DenseNet-169",
            BlockKind::Lbp => "LBP",
            BlockKind::Hog => "HOG",
            BlockKind::Gabor => "Gabor",
        }
    }

    pub(crate) fn code(self) -> u8 {
        self as u8 + 1
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(usize::from(code).checked_sub(1)?).copied()
    }

    pub fn is_handcrafted(self) -> bool {
        self != BlockKind::Deep
    }
}

impl fmt::Display for BlockKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BlockKind {
    type Err = FusionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_uppercase();
        match norm.as_str() {
            "DEEP" | "DENSENET" | "DENSENET-169" | "DENSENET169" => Ok(BlockKind::Deep),
            "LBP" => Ok(BlockKind::Lbp),
            "HOG" => Ok(BlockKind::Hog),
            "GABOR" => Ok(BlockKind::Gabor),
            _ => Err(FusionError::UnknownBlock(s.to_string())),
        }
    }
}

/// One extractor's output for one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBlock<T> {
    kind: BlockKind,
    values: Vec<T>,
}

impl<T: Real> FeatureBlock<T> {
    pub fn new(kind: BlockKind, values: Vec<T>) -> Result<Self, FusionError> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(FusionError::NonFinite(kind));
        }
        Ok(Self { kind, values })
    }

    pub fn kind(&self) -> BlockKind {
        self.kind
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// Ordered `(block, dim)` list describing the column layout of a fused vector.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Signature(Vec<(BlockKind, usize)>);

impl Signature {
    /// Checks canonical order and uniqueness.
    pub fn new(parts: Vec<(BlockKind, usize)>) -> Result<Self, FusionError> {
        for pair in parts.windows(2) {
            let (a, b) = (pair[0].0, pair[1].0);
            if a == b {
                return Err(FusionError::DuplicateBlock(a));
            }
            if a > b {
                return Err(FusionError::OrderViolation { before: a, after: b });
            }
        }
        Ok(Self(parts))
    }

    pub fn parts(&self) -> &[(BlockKind, usize)] {
        &self.0
    }

    pub fn total_dim(&self) -> usize {
        self.0.iter().map(|(_, d)| d).sum()
    }

    pub fn kinds(&self) -> impl Iterator<Item = BlockKind> + '_ {
        self.0.iter().map(|(k, _)| *k)
    }

    pub fn contains(&self, kind: BlockKind) -> bool {
        self.0.iter().any(|(k, _)| *k == kind)
    }

    /// Column range of `kind`, if present.
    pub fn range_of(&self, kind: BlockKind) -> Option<std::ops::Range<usize>> {
        let mut start = 0;
        for &(k, d) in &self.0 {
            if k == kind {
                return Some(start..start + d);
            }
            start += d;
        }
        None
    }

    pub fn concat(&self, other: &Signature) -> Result<Signature, FusionError> {
        Signature::new(self.0.iter().chain(&other.0).copied().collect())
    }
}

impl fmt::Display for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("<empty>");
        }
        let parts: Vec<String> = self.0.iter().map(|(k, d)| format!("{k}:{d}")).collect();
        f.write_str(&parts.join("+"))
    }
}

/// Concatenated features of one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector<T> {
    pub sample_id: String,
    pub values: Vec<T>,
    pub signature: Signature,
}

/// Concatenates blocks presented in canonical order into one vector.
pub fn fuse_blocks<T: Real>(sample_id: impl Into<String>, blocks: &[FeatureBlock<T>]) -> Result<FeatureVector<T>, FusionError> {
    let signature = Signature::new(blocks.iter().map(|b| (b.kind, b.dim())).collect())?;
    let values = blocks.iter().flat_map(|b| b.values.iter().copied()).collect();
    Ok(FeatureVector { sample_id: sample_id.into(), values, signature })
}

/// Concatenates already-fused vectors of the same sample.
pub fn fuse_vectors<T: Real>(parts: &[FeatureVector<T>]) -> Result<FeatureVector<T>, FusionError> {
    let first = parts.first().ok_or(FusionError::EmptyMatrix)?;
    let mut signature = Signature::default();
    let mut values = Vec::new();
    for p in parts {
        if p.sample_id != first.sample_id {
            return Err(FusionError::MissingSample(p.sample_id.clone()));
        }
        signature = signature.concat(&p.signature)?;
        values.extend_from_slice(&p.values);
    }
    Ok(FeatureVector { sample_id: first.sample_id.clone(), values, signature })
}

/// Ordered set of blocks evaluated together, e.g. `DEEP+GABOR`.
///
/// The listed order is the display order used in reports; fusion always uses
/// the canonical order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct FeatureCombo(Vec<BlockKind>);

impl FeatureCombo {
    pub fn new(blocks: Vec<BlockKind>) -> Result<Self, FusionError> {
        if blocks.is_empty() {
            return Err(FusionError::EmptyMatrix);
        }
        let mut seen = Vec::new();
        for b in &blocks {
            if seen.contains(b) {
                return Err(FusionError::DuplicateBlock(*b));
            }
            seen.push(*b);
        }
        Ok(Self(blocks))
    }

    pub fn blocks(&self) -> &[BlockKind] {
        &self.0
    }

    pub fn canonical(&self) -> Vec<BlockKind> {
        let mut v = self.0.clone();
        v.sort();
        v
    }

    pub fn contains(&self, kind: BlockKind) -> bool {
        self.0.contains(&kind)
    }

    pub fn display_name(&self) -> String {
        self.0.iter().map(|b| b.display_name()).collect::<Vec<_>>().join(" + ")
    }
}

impl fmt::Display for FeatureCombo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.0.iter().map(|b| b.name()).collect();
        f.write_str(&names.join("+"))
    }
}

impl FromStr for FeatureCombo {
    type Err = FusionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let blocks = s.split(['+', ',']).map(str::parse).collect::<Result<Vec<_>, _>>()?;
        Self::new(blocks)
    }
}

impl TryFrom<String> for FeatureCombo {
    type Error = FusionError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<FeatureCombo> for String {
    fn from(c: FeatureCombo) -> String {
        c.to_string()
    }
}

/// Row-major matrix of fused vectors sharing one signature.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix<T> {
    signature: Signature,
    ids: Vec<String>,
    data: Vec<T>,
}

impl<T: Real> FeatureMatrix<T> {
    pub fn new(signature: Signature, ids: Vec<String>, data: Vec<T>) -> Result<Self, FusionError> {
        let dim = signature.total_dim();
        if data.len() != ids.len() * dim {
            return Err(FusionError::DimMismatch { expected: ids.len() * dim, actual: data.len() });
        }
        let mut seen = std::collections::HashSet::with_capacity(ids.len());
        for id in &ids {
            if !seen.insert(id.as_str()) {
                return Err(FusionError::DuplicateId(id.clone()));
            }
        }
        Ok(Self { signature, ids, data })
    }

    pub fn from_vectors(vectors: Vec<FeatureVector<T>>) -> Result<Self, FusionError> {
        let signature = vectors.first().ok_or(FusionError::EmptyMatrix)?.signature.clone();
        let mut ids = Vec::with_capacity(vectors.len());
        let mut data = Vec::with_capacity(vectors.len() * signature.total_dim());
        for v in vectors {
            if v.signature != signature {
                return Err(FusionError::SignatureMismatch { expected: signature, actual: v.signature });
            }
            ids.push(v.sample_id);
            data.extend(v.values);
        }
        Self::new(signature, ids, data)
    }

    pub fn signature(&self) -> &Signature {
        &self.signature
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn dim(&self) -> usize {
        self.signature.total_dim()
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        let d = self.dim();
        &self.data[i * d..(i + 1) * d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[T]> {
        // chunks_exact(0) panics; a zero-dimensional matrix has no meaningful rows
        self.data.chunks_exact(self.dim().max(1)).take(if self.dim() == 0 { 0 } else { self.len() })
    }

    pub fn vector(&self, i: usize) -> FeatureVector<T> {
        FeatureVector { sample_id: self.ids[i].clone(), values: self.row(i).to_vec(), signature: self.signature.clone() }
    }

    pub fn index_of(&self) -> HashMap<&str, usize> {
        self.ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect()
    }

    /// Column subset holding only `kinds` (kept in canonical order).
    pub fn select(&self, kinds: &[BlockKind]) -> Result<Self, FusionError> {
        let mut kinds = kinds.to_vec();
        kinds.sort();
        kinds.dedup();
        let mut ranges = Vec::with_capacity(kinds.len());
        let mut parts = Vec::with_capacity(kinds.len());
        for k in kinds {
            let r = self.signature.range_of(k).ok_or(FusionError::MissingBlock(k))?;
            parts.push((k, r.len()));
            ranges.push(r);
        }
        let signature = Signature::new(parts)?;
        let mut data = Vec::with_capacity(self.len() * signature.total_dim());
        for row in self.rows() {
            for r in &ranges {
                data.extend_from_slice(&row[r.clone()]);
            }
        }
        Self::new(signature, self.ids.clone(), data)
    }

    /// Rows for `ids`, in that order.
    pub fn subset(&self, ids: &[String]) -> Result<Self, FusionError> {
        let index = self.index_of();
        let mut data = Vec::with_capacity(ids.len() * self.dim());
        for id in ids {
            let &i = index.get(id.as_str()).ok_or_else(|| FusionError::MissingSample(id.clone()))?;
            data.extend_from_slice(self.row(i));
        }
        Self::new(self.signature.clone(), ids.to_vec(), data)
    }

    /// Column-wise concatenation of two matrices over the ids of `self`.
    pub fn join(&self, other: &Self) -> Result<Self, FusionError> {
        let signature = self.signature.concat(&other.signature)?;
        let index = other.index_of();
        let mut data = Vec::with_capacity(self.len() * signature.total_dim());
        for (i, id) in self.ids.iter().enumerate() {
            let &j = index.get(id.as_str()).ok_or_else(|| FusionError::MissingSample(id.clone()))?;
            data.extend_from_slice(self.row(i));
            data.extend_from_slice(other.row(j));
        }
        Self::new(signature, self.ids.clone(), data)
    }

    /// Same matrix with values converted to another scalar type.
    pub fn cast<U: Real>(&self) -> FeatureMatrix<U> {
        FeatureMatrix {
            signature: self.signature.clone(),
            ids: self.ids.clone(),
            data: self.data.iter().map(|v| U::from_f64_lossy(v.as_f64())).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn block(kind: BlockKind, n: usize, base: f64) -> FeatureBlock<f64> {
        FeatureBlock::new(kind, (0..n).map(|i| base + i as f64).collect()).unwrap()
    }

    #[test]
    fn deep_plus_gabor_dimension() {
        let v = fuse_blocks("s", &[block(BlockKind::Deep, 1664, 0.0), block(BlockKind::Gabor, 32, 0.0)]).unwrap();
        assert_eq!(v.values.len(), 1696);
        assert_eq!(v.signature.to_string(), "DEEP:1664+GABOR:32");
    }

    #[test]
    fn single_block_is_identity() {
        let b = block(BlockKind::Lbp, 59, 0.5);
        let v = fuse_blocks("s", std::slice::from_ref(&b)).unwrap();
        assert_eq!(v.values, b.values());
    }

    #[test]
    fn order_and_duplicates_are_enforced() {
        let err = fuse_blocks("s", &[block(BlockKind::Gabor, 2, 0.0), block(BlockKind::Lbp, 2, 0.0)]).unwrap_err();
        assert!(matches!(err, FusionError::OrderViolation { before: BlockKind::Gabor, after: BlockKind::Lbp }));
        let err = fuse_blocks("s", &[block(BlockKind::Hog, 2, 0.0), block(BlockKind::Hog, 2, 0.0)]).unwrap_err();
        assert!(matches!(err, FusionError::DuplicateBlock(BlockKind::Hog)));
    }

    #[test]
    fn non_finite_values_are_rejected() {
        assert!(matches!(FeatureBlock::new(BlockKind::Hog, vec![1.0, f64::NAN]), Err(FusionError::NonFinite(_))));
    }

    #[test]
    fn fusion_is_associative_in_effect() {
        let (d, l, h, g) = (
            block(BlockKind::Deep, 3, 0.0),
            block(BlockKind::Lbp, 2, 10.0),
            block(BlockKind::Hog, 4, 20.0),
            block(BlockKind::Gabor, 1, 30.0),
        );
        let all = fuse_blocks("s", &[d.clone(), l.clone(), h.clone(), g.clone()]).unwrap();
        let left = fuse_blocks("s", &[d, l]).unwrap();
        let right = fuse_blocks("s", &[h, g]).unwrap();
        assert_eq!(fuse_vectors(&[left.clone(), right.clone()]).unwrap(), all);
        assert!(fuse_vectors(&[right, left]).is_err());
    }

    #[test]
    fn combo_parsing_and_names() {
        let c: FeatureCombo = "DEEP+GABOR+HOG".parse().unwrap();
        assert_eq!(c.canonical(), vec![BlockKind::Deep, BlockKind::Hog, BlockKind::Gabor]);
        assert_eq!(c.display_name(), "DenseNet-169 + Gabor + HOG");
        assert_eq!(c.to_string(), "DEEP+GABOR+HOG");
        assert!("LBP+LBP".parse::<FeatureCombo>().is_err());
        assert!("LBP+SIFT".parse::<FeatureCombo>().is_err());
        let js = serde_json::to_string(&c).unwrap();
        assert_eq!(js, "\"DEEP+GABOR+HOG\"");
        assert_eq!(serde_json::from_str::<FeatureCombo>(&js).unwrap(), c);
    }

    #[test]
    fn matrix_select_subset_join() {
        let vectors: Vec<_> = (0..3)
            .map(|i| {
                fuse_blocks(format!("id{i}"), &[block(BlockKind::Lbp, 2, i as f64), block(BlockKind::Gabor, 1, 100.0 + i as f64)])
                    .unwrap()
            })
            .collect();
        let m = FeatureMatrix::from_vectors(vectors).unwrap();
        let g = m.select(&[BlockKind::Gabor]).unwrap();
        assert_eq!(g.data(), &[100.0, 101.0, 102.0]);
        assert!(matches!(m.select(&[BlockKind::Hog]), Err(FusionError::MissingBlock(BlockKind::Hog))));
        let s = m.subset(&["id2".to_string(), "id0".to_string()]).unwrap();
        assert_eq!(s.row(0), &[2.0, 3.0, 102.0]);
        let deep = FeatureMatrix::new(
            Signature::new(vec![(BlockKind::Deep, 1)]).unwrap(),
            vec!["id1".into(), "id0".into(), "id2".into()],
            vec![-1.0, -0.0, -2.0],
        )
        .unwrap();
        let j = deep.join(&g).unwrap();
        assert_eq!(j.ids(), &["id1", "id0", "id2"]);
        assert_eq!(j.row(0), &[-1.0, 101.0]);
        assert!(g.join(&deep).is_err(), "DEEP must come first");
    }
}
