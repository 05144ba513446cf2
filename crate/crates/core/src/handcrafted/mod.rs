//! Handcrafted texture and shape descriptors: LBP, HOG and a Gabor bank.

mod gabor;
mod hog;
mod lbp;

pub use gabor::{gabor_features, GaborBank};
pub use hog::hog_descriptor;
pub use lbp::{lbp_codes, lbp_histogram, lbp_offsets, uniform_table};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fusion::{BlockKind, FeatureBlock, FusionError};
use crate::imagecore::{to_gray_or_identity, ImageError, ImageU8};
use crate::scalar::Real;

#[derive(Debug, Error)]
pub enum HandcraftedError {
    #[error("image {width}x{height} is too small (needs more than {min} pixels per side)")]
    ImageTooSmall { width: usize, height: usize, min: usize },
    #[error("no descriptor selected")]
    EmptySelection,
    #[error("{0} is not a handcrafted descriptor")]
    NotHandcrafted(BlockKind),
    #[error("invalid descriptor config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Fusion(#[from] FusionError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HandcraftedConfig {
    pub lbp_points: usize,
    pub lbp_radius: f64,
    pub hog_input: (usize, usize),
    pub hog_cell: usize,
    pub hog_block: usize,
    pub hog_stride: usize,
    pub hog_bins: usize,
    pub gabor_orientations: Vec<f64>,
    pub gabor_wavelengths: Vec<f64>,
    pub gabor_sigma_ratio: f64,
    pub gabor_aspect: f64,
    /// Working resolution for the Gabor bank; `None` filters at native size.
    pub gabor_input: Option<(usize, usize)>,
}

impl Default for HandcraftedConfig {
    fn default() -> Self {
        Self {
            lbp_points: 8,
            lbp_radius: 1.0,
            hog_input: (128, 128),
            hog_cell: 8,
            hog_block: 2,
            hog_stride: 1,
            hog_bins: 9,
            gabor_orientations: vec![0.0, 45.0, 90.0, 135.0],
            gabor_wavelengths: vec![4.0, 8.0, 16.0, 32.0],
            gabor_sigma_ratio: 0.56,
            gabor_aspect: 0.5,
            gabor_input: Some((128, 128)),
        }
    }
}

impl HandcraftedConfig {
    pub fn validate(&self) -> Result<(), HandcraftedError> {
        let bad = |m: String| Err(HandcraftedError::InvalidConfig(m));
        if !(2..=16).contains(&self.lbp_points) {
            return bad(format!("lbp_points must be in 2..=16, got {}", self.lbp_points));
        }
        if !(self.lbp_radius >= 0.5) || !self.lbp_radius.is_finite() {
            return bad(format!("lbp_radius must be >= 0.5, got {}", self.lbp_radius));
        }
        let (w, h) = self.hog_input;
        if self.hog_cell == 0 || self.hog_block == 0 || self.hog_stride == 0 || self.hog_bins == 0 {
            return bad("HOG cell, block, stride and bins must be positive".into());
        }
        if w == 0 || h == 0 || w % self.hog_cell != 0 || h % self.hog_cell != 0 {
            return bad(format!("hog_input {w}x{h} must be a positive multiple of hog_cell {}", self.hog_cell));
        }
        if w / self.hog_cell < self.hog_block || h / self.hog_cell < self.hog_block {
            return bad("hog_input holds fewer cells than one block".into());
        }
        if self.gabor_orientations.is_empty() || self.gabor_wavelengths.is_empty() {
            return bad("Gabor bank needs at least one orientation and one wavelength".into());
        }
        if self.gabor_orientations.iter().any(|o| !o.is_finite()) || self.gabor_wavelengths.iter().any(|l| !(*l >= 2.0)) {
            return bad("Gabor wavelengths must be >= 2 px and orientations finite".into());
        }
        if !(self.gabor_sigma_ratio > 0.0) || !(self.gabor_aspect > 0.0) {
            return bad("Gabor sigma ratio and aspect must be positive".into());
        }
        if matches!(self.gabor_input, Some((0, _)) | Some((_, 0))) {
            return bad("gabor_input must be positive".into());
        }
        Ok(())
    }

    pub fn lbp_bins(&self) -> usize {
        self.lbp_points * (self.lbp_points - 1) + 3
    }

    pub fn hog_blocks(&self) -> (usize, usize) {
        let per_axis = |len: usize| (len / self.hog_cell - self.hog_block) / self.hog_stride + 1;
        (per_axis(self.hog_input.0), per_axis(self.hog_input.1))
    }

    /// Output length of a descriptor under this config.
    pub fn dim(&self, kind: BlockKind) -> Option<usize> {
        match kind {
            BlockKind::Lbp => Some(self.lbp_bins()),
            BlockKind::Hog => {
                let (bx, by) = self.hog_blocks();
                Some(bx * by * self.hog_block * self.hog_block * self.hog_bins)
            }
            BlockKind::Gabor => Some(2 * self.gabor_orientations.len() * self.gabor_wavelengths.len()),
            BlockKind::Deep => None,
        }
    }
}

/// Converts to gray once and emits the selected blocks in canonical order.
pub fn extract_handcrafted<T: Real>(
    img: &ImageU8,
    which: &[BlockKind],
    cfg: &HandcraftedConfig,
) -> Result<Vec<FeatureBlock<T>>, HandcraftedError> {
    extract_with_bank(img, which, cfg, None)
}

/// Like [`extract_handcrafted`], reusing a prebuilt Gabor bank.
pub fn extract_with_bank<T: Real>(
    img: &ImageU8,
    which: &[BlockKind],
    cfg: &HandcraftedConfig,
    bank: Option<&GaborBank>,
) -> Result<Vec<FeatureBlock<T>>, HandcraftedError> {
    if which.is_empty() {
        return Err(HandcraftedError::EmptySelection);
    }
    if let Some(k) = which.iter().find(|k| !k.is_handcrafted()) {
        return Err(HandcraftedError::NotHandcrafted(*k));
    }
    cfg.validate()?;
    let mut kinds = which.to_vec();
    kinds.sort();
    kinds.dedup();
    let gray = to_gray_or_identity(img);
    let mut out = Vec::with_capacity(kinds.len());
    for k in kinds {
        let block = match k {
            BlockKind::Lbp => lbp_histogram(&gray, cfg)?,
            BlockKind::Hog => hog_descriptor(&gray, cfg)?,
            BlockKind::Gabor => match bank {
                Some(b) => b.features(&gray)?,
                None => gabor_features(&gray, cfg)?,
            },
            BlockKind::Deep => unreachable!("rejected above"),
        };
        out.push(block);
    }
    Ok(out)
}
