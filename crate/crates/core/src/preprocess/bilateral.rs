use super::{pad_reflect, PreprocessError};
use crate::imagecore::ImageU8;

/// Edge-preserving bilateral smoothing over a `d x d` window.
///
/// Each output sample is the mean of its neighbourhood weighted by
/// `exp(-(dx²+dy²) / 2σs²) · exp(-|Δ|² / 2σc²)`, where `|Δ|²` is the squared
/// colour distance summed over channels. Borders are reflected.
pub fn bilateral_filter(img: &ImageU8, d: usize, sigma_color: f64, sigma_space: f64) -> Result<ImageU8, PreprocessError> {
    if d == 0 || d.is_multiple_of(2) {
        return Err(PreprocessError::InvalidDiameter(d));
    }
    if !(sigma_color > 0.0) || !(sigma_space > 0.0) {
        return Err(PreprocessError::InvalidParameter(format!(
            "bilateral sigmas must be positive (color {sigma_color}, space {sigma_space})"
        )));
    }
    let r = d / 2;
    let ch = img.channels();
    let (w, h) = (img.width(), img.height());
    let padded = pad_reflect(img, r);
    let pw = w + 2 * r;

    let space_coef = -0.5 / (sigma_space * sigma_space);
    let spatial: Vec<f64> = (0..d * d)
        .map(|k| {
            let dy = (k / d) as f64 - r as f64;
            let dx = (k % d) as f64 - r as f64;
            ((dx * dx + dy * dy) * space_coef).exp()
        })
        .collect();
    let color_coef = -0.5 / (sigma_color * sigma_color);
    let range_lut: Vec<f64> = (0..=255 * 255 * ch).map(|s| (s as f64 * color_coef).exp()).collect();

    let mut out = Vec::with_capacity(w * h * ch);
    let mut acc = vec![0.0f64; ch];
    for y in 0..h {
        for x in 0..w {
            let centre = ((y + r) * pw + x + r) * ch;
            let cpx = &padded[centre..centre + ch];
            acc.iter_mut().for_each(|a| *a = 0.0);
            let mut wsum = 0.0;
            for ky in 0..d {
                let row = ((y + ky) * pw + x) * ch;
                for kx in 0..d {
                    let npx = &padded[row + kx * ch..row + kx * ch + ch];
                    let dist2: usize = cpx
                        .iter()
                        .zip(npx)
                        .map(|(&a, &b)| {
                            let t = a.abs_diff(b) as usize;
                            t * t
                        })
                        .sum();
                    let wgt = spatial[ky * d + kx] * range_lut[dist2];
                    wsum += wgt;
                    for (a, &v) in acc.iter_mut().zip(npx) {
                        *a += wgt * f64::from(v);
                    }
                }
            }
            out.extend(acc.iter().map(|a| (a / wsum).round().clamp(0.0, 255.0) as u8));
        }
    }
    Ok(ImageU8::new(w, h, ch, out)?)
}
