//! Noise reduction and contrast enhancement.
//!
//! The default pipeline is resize → bilateral → non-local means → CLAHE on
//! LAB lightness → gamma. Every stage maps constant images to constant images
//! and is a pure function of its input.

mod bilateral;
mod clahe;
mod gamma;
mod nlm;

pub use bilateral::bilateral_filter;
pub use clahe::{clahe_lab, clahe_luminance};
pub use gamma::{gamma_correct, gamma_lut};
pub use nlm::nlm_denoise;

#[allow(unused_imports)]
pub(crate) use clahe::{clip_histogram, clip_limit, quantize_lightness, tile_grid};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imagecore::{gray_to_rgb, reflect_index, resize_bilinear, ImageError, ImageU8};

#[derive(Debug, Error)]
pub enum PreprocessError {
    #[error("bilateral diameter must be odd and positive, got {0}")]
    InvalidDiameter(usize),
    #[error("NLM windows must be odd with template < search (template {template}, search {search})")]
    WindowShape { template: usize, search: usize },
    #[error("gamma must be positive, got {0}")]
    NonPositiveGamma(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Image(#[from] ImageError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    pub bilateral_d: usize,
    pub sigma_color: f64,
    pub sigma_space: f64,
    pub nlm_h: f64,
    pub nlm_h_color: f64,
    pub nlm_template: usize,
    pub nlm_search: usize,
    pub clahe_clip: f64,
    pub clahe_tiles: (usize, usize),
    pub gamma: f64,
    pub target_size: (usize, usize),
    pub enable_clahe: bool,
    pub enable_gamma: bool,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            bilateral_d: 9,
            sigma_color: 75.0,
            sigma_space: 75.0,
            nlm_h: 10.0,
            nlm_h_color: 10.0,
            nlm_template: 7,
            nlm_search: 21,
            clahe_clip: 2.0,
            clahe_tiles: (8, 8),
            gamma: 1.5,
            target_size: (640, 640),
            enable_clahe: true,
            enable_gamma: true,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<(), PreprocessError> {
        if self.bilateral_d < 3 || self.bilateral_d.is_multiple_of(2) {
            return Err(PreprocessError::InvalidDiameter(self.bilateral_d));
        }
        if self.nlm_template.is_multiple_of(2) || self.nlm_search.is_multiple_of(2) || self.nlm_template >= self.nlm_search {
            return Err(PreprocessError::WindowShape { template: self.nlm_template, search: self.nlm_search });
        }
        if !(self.clahe_clip >= 1.0) {
            return Err(PreprocessError::InvalidParameter(format!("clahe_clip must be >= 1, got {}", self.clahe_clip)));
        }
        if self.clahe_tiles.0 == 0 || self.clahe_tiles.1 == 0 {
            return Err(PreprocessError::InvalidParameter("clahe_tiles must be positive".into()));
        }
        if !(self.gamma > 0.0) {
            return Err(PreprocessError::NonPositiveGamma(self.gamma));
        }
        if self.target_size.0 == 0 || self.target_size.1 == 0 {
            return Err(PreprocessError::InvalidParameter("target_size must be positive".into()));
        }
        for (name, v) in [
            ("sigma_color", self.sigma_color),
            ("sigma_space", self.sigma_space),
            ("nlm_h", self.nlm_h),
            ("nlm_h_color", self.nlm_h_color),
        ] {
            if !(v > 0.0) {
                return Err(PreprocessError::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Runs the full preprocessing chain. Gray input is replicated to RGB first.
pub fn preprocess_pipeline(img: &ImageU8, cfg: &PreprocessConfig) -> Result<ImageU8, PreprocessError> {
    cfg.validate()?;
    let rgb;
    let img = if img.is_gray() {
        rgb = gray_to_rgb(img)?;
        &rgb
    } else {
        img
    };
    let (tw, th) = cfg.target_size;
    let mut out = resize_bilinear(img, tw, th)?;
    out = bilateral_filter(&out, cfg.bilateral_d, cfg.sigma_color, cfg.sigma_space)?;
    out = nlm_denoise(&out, cfg.nlm_h, cfg.nlm_h_color, cfg.nlm_template, cfg.nlm_search)?;
    if cfg.enable_clahe {
        out = clahe_luminance(&out, cfg.clahe_clip, cfg.clahe_tiles)?;
    }
    if cfg.enable_gamma {
        out = gamma_correct(&out, cfg.gamma)?;
    }
    Ok(out)
}

/// Copy of `img` with `pad` reflected samples on every side, interleaved like the source.
pub(crate) fn pad_reflect(img: &ImageU8, pad: usize) -> Vec<u8> {
    let (w, h, ch) = (img.width(), img.height(), img.channels());
    let pw = w + 2 * pad;
    let ph = h + 2 * pad;
    let mut out = Vec::with_capacity(pw * ph * ch);
    for py in 0..ph {
        let sy = reflect_index(py as isize - pad as isize, h);
        for px in 0..pw {
            let sx = reflect_index(px as isize - pad as isize, w);
            let i = img.index(sx, sy);
            out.extend_from_slice(&img.data()[i..i + ch]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg() -> PreprocessConfig {
        PreprocessConfig { target_size: (24, 20), nlm_template: 3, nlm_search: 7, ..Default::default() }
    }

    #[test]
    fn defaults_match_published_settings() {
        let c = PreprocessConfig::default();
        assert_eq!((c.bilateral_d, c.sigma_color, c.sigma_space), (9, 75.0, 75.0));
        assert_eq!((c.nlm_h, c.nlm_h_color, c.nlm_template, c.nlm_search), (10.0, 10.0, 7, 21));
        assert_eq!((c.clahe_clip, c.clahe_tiles, c.gamma, c.target_size), (2.0, (8, 8), 1.5, (640, 640)));
        c.validate().unwrap();
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let bad = [
            PreprocessConfig { bilateral_d: 8, ..Default::default() },
            PreprocessConfig { bilateral_d: 1, ..Default::default() },
            PreprocessConfig { nlm_template: 21, ..Default::default() },
            PreprocessConfig { clahe_clip: 0.5, ..Default::default() },
            PreprocessConfig { gamma: 0.0, ..Default::default() },
            PreprocessConfig { sigma_color: -1.0, ..Default::default() },
        ];
        for c in bad {
            assert!(c.validate().is_err(), "{c:?}");
        }
    }

    #[test]
    fn config_json_roundtrip_and_partial_documents() {
        let c = small_cfg();
        let js = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<PreprocessConfig>(&js).unwrap(), c);
        let partial: PreprocessConfig = serde_json::from_str(r#"{"gamma": 2.2}"#).unwrap();
        assert_eq!(partial.gamma, 2.2);
        assert_eq!(partial.bilateral_d, 9);
        assert!(serde_json::from_str::<PreprocessConfig>(r#"{"gama": 2.2}"#).is_err());
    }

    #[test]
    fn constant_rgb_maps_to_constant_rgb() {
        let img = ImageU8::filled(30, 17, 3, 77).unwrap();
        let out = preprocess_pipeline(&img, &small_cfg()).unwrap();
        assert_eq!((out.width(), out.height(), out.channels()), (24, 20, 3));
        assert!(out.is_constant());
    }

    #[test]
    fn pipeline_is_deterministic_and_accepts_gray() {
        let img = ImageU8::from_fn(33, 29, 1, |x, y, _| ((x * 37 + y * 91) % 256) as u8).unwrap();
        let a = preprocess_pipeline(&img, &small_cfg()).unwrap();
        let b = preprocess_pipeline(&img, &small_cfg()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.channels(), 3);
    }

    #[test]
    fn stages_can_be_disabled() {
        let img = ImageU8::from_fn(24, 20, 3, |x, y, c| ((x * 11 + y * 3 + c * 50) % 256) as u8).unwrap();
        let base = PreprocessConfig { enable_clahe: false, enable_gamma: false, ..small_cfg() };
        let only_denoise = preprocess_pipeline(&img, &base).unwrap();
        let with_gamma = preprocess_pipeline(&img, &PreprocessConfig { enable_gamma: true, ..base.clone() }).unwrap();
        assert_eq!(with_gamma, gamma_correct(&only_denoise, 1.5).unwrap());
    }

    #[test]
    fn reflect_padding_layout() {
        let img = ImageU8::new(3, 1, 1, vec![1, 2, 3]).unwrap();
        let p = pad_reflect(&img, 2);
        // rows are all copies of the single source row
        assert_eq!(&p[..7], &[2, 1, 1, 2, 3, 3, 2]);
        assert_eq!(p.len(), 7 * 5);
    }
}
