use super::PreprocessError;
use crate::imagecore::ImageU8;

/// `LUT[i] = round(255 · (i/255)^(1/gamma))`; gamma above 1 brightens mid-tones.
pub fn gamma_lut(gamma: f64) -> Result<[u8; 256], PreprocessError> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(PreprocessError::NonPositiveGamma(gamma));
    }
    let inv = 1.0 / gamma;
    let mut lut = [0u8; 256];
    for (i, v) in lut.iter_mut().enumerate() {
        *v = (255.0 * (i as f64 / 255.0).powf(inv)).round().clamp(0.0, 255.0) as u8;
    }
    Ok(lut)
}

pub fn gamma_correct(img: &ImageU8, gamma: f64) -> Result<ImageU8, PreprocessError> {
    let lut = gamma_lut(gamma)?;
    let data = img.data().iter().map(|&v| lut[usize::from(v)]).collect();
    Ok(ImageU8::new(img.width(), img.height(), img.channels(), data)?)
}
