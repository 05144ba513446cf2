//! `PVFS` feature store: a signature header followed by id-sorted f32 records.
//!
//! ```text
//! "PVFS" | u16 version=1 | u16 n_blocks | n_blocks × (u8 kind, u32 dim) | u64 count
//! count × (u16 id_len | id bytes | total_dim × f32)
//! ```
//! All integers and floats are little-endian.

use std::path::Path;

use super::{BlockKind, FeatureMatrix, FusionError, Signature};
use crate::binio::{put_f32, put_u16, put_u32, put_u64, Reader};
use crate::scalar::Real;

const MAGIC: &[u8; 4] = b"PVFS";
const VERSION: u16 = 1;

fn eof(_: crate::binio::Eof) -> FusionError {
    FusionError::Format("truncated feature store".into())
}

pub fn encode_store<T: Real>(m: &FeatureMatrix<T>) -> Result<Vec<u8>, FusionError> {
    let sig = m.signature();
    let mut out = Vec::with_capacity(18 + m.data().len() * 4);
    out.extend_from_slice(MAGIC);
    put_u16(&mut out, VERSION);
    put_u16(&mut out, sig.parts().len() as u16);
    for &(k, d) in sig.parts() {
        out.push(k.code());
        put_u32(&mut out, u32::try_from(d).map_err(|_| FusionError::Format("block too large".into()))?);
    }
    put_u64(&mut out, m.len() as u64);
    let mut order: Vec<usize> = (0..m.len()).collect();
    order.sort_by(|&a, &b| m.ids()[a].cmp(&m.ids()[b]));
    for i in order {
        let id = m.ids()[i].as_bytes();
        put_u16(&mut out, u16::try_from(id.len()).map_err(|_| FusionError::Format("sample id too long".into()))?);
        out.extend_from_slice(id);
        for v in m.row(i) {
            put_f32(&mut out, v.to_f32().unwrap_or(f32::NAN));
        }
    }
    Ok(out)
}

pub fn decode_store<T: Real>(bytes: &[u8]) -> Result<FeatureMatrix<T>, FusionError> {
    let mut r = Reader::new(bytes);
    if r.bytes(4).map_err(eof)? != MAGIC {
        return Err(FusionError::Format("bad magic".into()));
    }
    let version = r.u16().map_err(eof)?;
    if version != VERSION {
        return Err(FusionError::Format(format!("unsupported version {version}")));
    }
    let n_blocks = r.u16().map_err(eof)?;
    let mut parts = Vec::with_capacity(n_blocks as usize);
    for _ in 0..n_blocks {
        let code = r.u8().map_err(eof)?;
        let kind = BlockKind::from_code(code).ok_or_else(|| FusionError::Format(format!("unknown block code {code}")))?;
        parts.push((kind, r.u32().map_err(eof)? as usize));
    }
    let sig = Signature::new(parts)?;
    let dim = sig.total_dim();
    let count = r.u64().map_err(eof)?;
    let mut ids = Vec::new();
    let mut data = Vec::new();
    for _ in 0..count {
        let len = r.u16().map_err(eof)? as usize;
        let id =
            std::str::from_utf8(r.bytes(len).map_err(eof)?).map_err(|_| FusionError::Format("sample id is not UTF-8".into()))?;
        ids.push(id.to_string());
        for _ in 0..dim {
            let v = r.f32().map_err(eof)?;
            if !v.is_finite() {
                return Err(FusionError::Format(format!("non-finite value for {id:?}")));
            }
            data.push(T::from_f64_lossy(f64::from(v)));
        }
    }
    if !r.is_empty() {
        return Err(FusionError::Format(format!("{} trailing bytes", r.remaining())));
    }
    FeatureMatrix::new(sig, ids, data)
}

pub fn write_store<T: Real>(m: &FeatureMatrix<T>, path: impl AsRef<Path>) -> Result<(), FusionError> {
    std::fs::write(path, encode_store(m)?)?;
    Ok(())
}

pub fn read_store<T: Real>(path: impl AsRef<Path>) -> Result<FeatureMatrix<T>, FusionError> {
    decode_store(&std::fs::read(path)?)
}
