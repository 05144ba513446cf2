//! `PVML` model container.
//!
//! ```text
//! "PVML" | u16 version=1 | u8 kind | u8 scalar width (4 or 8)
//! u32 header_len | header JSON {signature, meta}
//! u32 dim | dim × T mean | dim × T std                      (standardizer)
//! body (SVM or GBDT, see encode_svm / encode_gbdt)
//! ```
//! Integers and scalars are little-endian. `T` is the scalar type named by the width byte.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::gbdt::{GbdtModel, Growth, Node, Tree};
use super::svm::{BinarySvm, SvmModel};
use super::{ClassifierError, ClassifierKind, KernelKind, ModelBody, ModelMeta, TrainedModel};
use crate::binio::{put_u16, put_u32, put_u64, Reader};
use crate::fusion::{Signature, Standardizer};
use crate::label::ClassLabel;
use crate::scalar::Real;

const MAGIC: &[u8; 4] = b"PVML";
const VERSION: u16 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    signature: Signature,
    meta: ModelMeta,
}

fn corrupt(msg: impl Into<String>) -> ClassifierError {
    ClassifierError::Corrupt(msg.into())
}

struct In<'a, T> {
    r: Reader<'a>,
    _t: std::marker::PhantomData<T>,
}

impl<'a, T: Real> In<'a, T> {
    fn eof(&self) -> ClassifierError {
        corrupt(format!("truncated at byte {}", self.r.position()))
    }
    fn u8(&mut self) -> Result<u8, ClassifierError> {
        self.r.u8().map_err(|_| self.eof())
    }
    fn u16(&mut self) -> Result<u16, ClassifierError> {
        self.r.u16().map_err(|_| self.eof())
    }
    fn u32(&mut self) -> Result<u32, ClassifierError> {
        self.r.u32().map_err(|_| self.eof())
    }
    fn u64(&mut self) -> Result<u64, ClassifierError> {
        self.r.u64().map_err(|_| self.eof())
    }
    fn bytes(&mut self, n: usize) -> Result<&'a [u8], ClassifierError> {
        self.r.bytes(n).map_err(|_| self.eof())
    }
    fn t(&mut self) -> Result<T, ClassifierError> {
        let v = T::read_le(self.bytes(usize::from(T::WIDTH))?);
        if !v.is_finite() {
            return Err(corrupt("non-finite scalar"));
        }
        Ok(v)
    }
    fn ts(&mut self, n: usize) -> Result<Vec<T>, ClassifierError> {
        if self.r.remaining() < n.saturating_mul(usize::from(T::WIDTH)) {
            return Err(self.eof());
        }
        (0..n).map(|_| self.t()).collect()
    }
    fn label(&mut self) -> Result<ClassLabel, ClassifierError> {
        let c = self.u8()?;
        ClassLabel::from_code(usize::from(c)).ok_or_else(|| corrupt(format!("class code {c}")))
    }
    /// Length prefix that cannot exceed the bytes left, given a minimum item size.
    fn len(&mut self, item: usize) -> Result<usize, ClassifierError> {
        let n = self.u32()? as usize;
        if n.saturating_mul(item) > self.r.remaining() {
            return Err(self.eof());
        }
        Ok(n)
    }
}

fn put_t<T: Real>(out: &mut Vec<u8>, v: T) {
    v.write_le(out);
}

fn encode_svm<T: Real>(m: &SvmModel<T>, out: &mut Vec<u8>) {
    out.push(match m.kernel {
        KernelKind::Linear => 0,
        KernelKind::Rbf => 1,
    });
    put_t(out, m.gamma);
    put_t(out, m.c);
    put_u32(out, m.dim as u32);
    out.push(m.classes.len() as u8);
    out.extend(m.classes.iter().map(|c| c.code() as u8));
    put_u32(out, m.n_sv() as u32);
    m.sv.iter().for_each(|v| put_t(out, *v));
    put_u16(out, m.pairs.len() as u16);
    for p in &m.pairs {
        out.push(p.positive.code() as u8);
        out.push(p.negative.code() as u8);
        put_t(out, p.bias);
        put_u64(out, p.kkt_gap.to_bits());
        put_u64(out, p.iterations as u64);
        put_u32(out, p.sv_index.len() as u32);
        p.sv_index.iter().for_each(|i| put_u32(out, *i));
        p.coef.iter().for_each(|c| put_t(out, *c));
    }
}

fn decode_svm<T: Real>(r: &mut In<'_, T>, dim_expected: usize) -> Result<SvmModel<T>, ClassifierError> {
    let kernel = match r.u8()? {
        0 => KernelKind::Linear,
        1 => KernelKind::Rbf,
        k => return Err(corrupt(format!("kernel tag {k}"))),
    };
    let gamma = r.t()?;
    let c = r.t()?;
    let dim = r.u32()? as usize;
    if dim != dim_expected {
        return Err(corrupt(format!("SVM dimension {dim} does not match signature {dim_expected}")));
    }
    let n_classes = r.u8()?;
    let classes = (0..n_classes).map(|_| r.label()).collect::<Result<Vec<_>, _>>()?;
    if classes.len() < 2 {
        return Err(corrupt("SVM needs at least two classes"));
    }
    let n_sv = r.len(dim * usize::from(T::WIDTH))?;
    let sv = r.ts(n_sv * dim)?;
    let n_pairs = r.u16()?;
    let mut pairs = Vec::with_capacity(usize::from(n_pairs));
    for _ in 0..n_pairs {
        let positive = r.label()?;
        let negative = r.label()?;
        let bias = r.t()?;
        let kkt_gap = f64::from_bits(r.u64()?);
        let iterations = r.u64()? as usize;
        let n = r.len(4 + usize::from(T::WIDTH))?;
        let sv_index = (0..n).map(|_| r.u32()).collect::<Result<Vec<_>, _>>()?;
        if sv_index.iter().any(|&i| i as usize >= n_sv) {
            return Err(corrupt("support vector index out of range"));
        }
        let coef = r.ts(n)?;
        pairs.push(BinarySvm { positive, negative, sv_index, coef, bias, kkt_gap, iterations });
    }
    if pairs.is_empty() {
        return Err(corrupt("SVM without class pairs"));
    }
    Ok(SvmModel { kernel, gamma, c, dim, classes, sv, pairs })
}

fn encode_gbdt<T: Real>(m: &GbdtModel<T>, out: &mut Vec<u8>) {
    out.push(match m.growth {
        Growth::Levelwise => 0,
        Growth::Leafwise => 1,
    });
    out.push(m.n_classes as u8);
    put_t(out, m.eta);
    put_u32(out, m.dim as u32);
    put_u32(out, m.loss_history.len() as u32);
    m.loss_history.iter().for_each(|l| put_u64(out, l.to_bits()));
    put_u32(out, m.trees.len() as u32);
    for t in &m.trees {
        put_u32(out, t.nodes.len() as u32);
        for n in &t.nodes {
            match n {
                Node::Leaf { weight } => {
                    out.push(0);
                    put_t(out, *weight);
                }
                Node::Split { feature, threshold, left, right } => {
                    out.push(1);
                    put_u32(out, *feature);
                    put_t(out, *threshold);
                    put_u32(out, *left);
                    put_u32(out, *right);
                }
            }
        }
    }
}

fn decode_gbdt<T: Real>(r: &mut In<'_, T>, dim_expected: usize) -> Result<GbdtModel<T>, ClassifierError> {
    let growth = match r.u8()? {
        0 => Growth::Levelwise,
        1 => Growth::Leafwise,
        g => return Err(corrupt(format!("growth tag {g}"))),
    };
    let n_classes = usize::from(r.u8()?);
    if n_classes != ClassLabel::COUNT {
        return Err(corrupt(format!("{n_classes} classes")));
    }
    let eta = r.t()?;
    let dim = r.u32()? as usize;
    if dim != dim_expected {
        return Err(corrupt(format!("GBDT dimension {dim} does not match signature {dim_expected}")));
    }
    let n_loss = r.len(8)?;
    let loss_history = (0..n_loss).map(|_| r.u64().map(f64::from_bits)).collect::<Result<Vec<_>, _>>()?;
    let n_trees = r.len(4)?;
    if n_trees % n_classes != 0 {
        return Err(corrupt("tree count is not a multiple of the class count"));
    }
    let mut trees = Vec::with_capacity(n_trees);
    for _ in 0..n_trees {
        let n_nodes = r.len(1 + usize::from(T::WIDTH))?;
        if n_nodes == 0 {
            return Err(corrupt("empty tree"));
        }
        let mut nodes = Vec::with_capacity(n_nodes);
        for i in 0..n_nodes {
            nodes.push(match r.u8()? {
                0 => Node::Leaf { weight: r.t()? },
                1 => {
                    let feature = r.u32()?;
                    let threshold = r.t()?;
                    let (left, right) = (r.u32()?, r.u32()?);
                    // children after the parent rules out cycles
                    let ok = |c: u32| (c as usize) > i && (c as usize) < n_nodes;
                    if feature as usize >= dim || !ok(left) || !ok(right) {
                        return Err(corrupt("tree node out of range"));
                    }
                    Node::Split { feature, threshold, left, right }
                }
                t => return Err(corrupt(format!("node tag {t}"))),
            });
        }
        trees.push(Tree { nodes });
    }
    Ok(GbdtModel { growth, n_classes, eta, dim, trees, loss_history })
}

pub fn encode_model<T: Real>(m: &TrainedModel<T>) -> Result<Vec<u8>, ClassifierError> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    put_u16(&mut out, VERSION);
    out.push(m.kind.code());
    out.push(T::WIDTH);
    let header = serde_json::to_vec(&Header { signature: m.signature.clone(), meta: m.meta.clone() })
        .map_err(|e| corrupt(e.to_string()))?;
    put_u32(&mut out, header.len() as u32);
    out.extend_from_slice(&header);
    let d = m.standardizer.mean().len();
    put_u32(&mut out, d as u32);
    m.standardizer.mean().iter().for_each(|v| put_t(&mut out, *v));
    m.standardizer.std().iter().for_each(|v| put_t(&mut out, *v));
    match &m.body {
        ModelBody::Svm(s) => encode_svm(s, &mut out),
        ModelBody::Gbdt(g) => encode_gbdt(g, &mut out),
    }
    Ok(out)
}

pub fn decode_model<T: Real>(bytes: &[u8]) -> Result<TrainedModel<T>, ClassifierError> {
    let mut r = In::<T> { r: Reader::new(bytes), _t: std::marker::PhantomData };
    if r.r.bytes(4).map_err(|_| ClassifierError::BadMagic)? != MAGIC {
        return Err(ClassifierError::BadMagic);
    }
    let version = r.u16()?;
    if version != VERSION {
        return Err(ClassifierError::VersionUnsupported(version));
    }
    let code = r.u8()?;
    let kind = ClassifierKind::from_code(code).ok_or_else(|| corrupt(format!("model kind {code}")))?;
    let width = r.u8()?;
    if width != T::WIDTH {
        return Err(ClassifierError::ScalarWidth { stored: width, requested: T::WIDTH });
    }
    let hlen = r.len(1)?;
    let header: Header = serde_json::from_slice(r.bytes(hlen)?).map_err(|e| corrupt(format!("header: {e}")))?;
    let dim = header.signature.total_dim();
    let d = r.len(2 * usize::from(T::WIDTH))?;
    if d != dim {
        return Err(corrupt(format!("standardizer dimension {d} does not match signature {dim}")));
    }
    let mean = r.ts(d)?;
    let std = r.ts(d)?;
    let standardizer = Standardizer::from_parts(header.signature.clone(), mean, std).map_err(|e| corrupt(e.to_string()))?;
    let body = match kind {
        ClassifierKind::Svm => ModelBody::Svm(decode_svm(&mut r, dim)?),
        ClassifierKind::GbdtLevelwise | ClassifierKind::GbdtLeafwise => {
            let g = decode_gbdt(&mut r, dim)?;
            let expected = if kind == ClassifierKind::GbdtLevelwise { Growth::Levelwise } else { Growth::Leafwise };
            if g.growth != expected {
                return Err(corrupt("growth mode disagrees with model kind"));
            }
            ModelBody::Gbdt(g)
        }
    };
    if !r.r.is_empty() {
        return Err(corrupt(format!("{} trailing bytes", r.r.remaining())));
    }
    Ok(TrainedModel { kind, signature: header.signature, standardizer, body, meta: header.meta })
}

pub fn save_model<T: Real>(m: &TrainedModel<T>, path: impl AsRef<Path>) -> Result<(), ClassifierError> {
    std::fs::write(path, encode_model(m)?)?;
    Ok(())
}

pub fn load_model<T: Real>(path: impl AsRef<Path>) -> Result<TrainedModel<T>, ClassifierError> {
    decode_model(&std::fs::read(path)?)
}

impl<T: Real> TrainedModel<T> {
    /// Rejects a model whose kind differs from `expected`.
    pub fn expect_kind(self, expected: ClassifierKind) -> Result<Self, ClassifierError> {
        if self.kind != expected {
            return Err(ClassifierError::KindMismatch { expected, actual: self.kind });
        }
        Ok(self)
    }
}
