use super::{ImageError, ImageF32, ImageU8};

const WEIGHT_R: f64 = 0.299;
const WEIGHT_G: f64 = 0.587;
const WEIGHT_B: f64 = 0.114;

// D65 reference white.
const WHITE_X: f64 = 0.950_47;
const WHITE_Y: f64 = 1.0;
const WHITE_Z: f64 = 1.088_83;

/// BT.601 luma: `round(0.299 R + 0.587 G + 0.114 B)`.
///
/// Returns [`ImageError::AlreadyGray`] for single-channel input; use
/// [`to_gray_or_identity`] when gray input should pass through unchanged.
pub fn to_gray(img: &ImageU8) -> Result<ImageU8, ImageError> {
    match img.channels() {
        1 => Err(ImageError::AlreadyGray),
        3 => {
            let data = img
                .data()
                .chunks_exact(3)
                .map(|px| {
                    let y = WEIGHT_R * f64::from(px[0]) + WEIGHT_G * f64::from(px[1]) + WEIGHT_B * f64::from(px[2]);
                    y.round().clamp(0.0, 255.0) as u8
                })
                .collect();
            ImageU8::new(img.width(), img.height(), 1, data)
        }
        n => Err(ImageError::ChannelMismatch { expected: 3, actual: n }),
    }
}

pub fn to_gray_or_identity(img: &ImageU8) -> ImageU8 {
    match to_gray(img) {
        Ok(g) => g,
        Err(_) => img.clone(),
    }
}

/// Replicates a gray image into three identical channels.
pub fn gray_to_rgb(img: &ImageU8) -> Result<ImageU8, ImageError> {
    if img.channels() != 1 {
        return Err(ImageError::ChannelMismatch { expected: 1, actual: img.channels() });
    }
    let data = img.data().iter().flat_map(|&v| [v, v, v]).collect();
    ImageU8::new(img.width(), img.height(), 3, data)
}

#[inline]
fn srgb_to_linear(c: f64) -> f64 {
    if c <= 0.040_45 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

#[inline]
fn linear_to_srgb(c: f64) -> f64 {
    if c <= 0.003_130_8 {
        c * 12.92
    } else {
        1.055 * c.powf(1.0 / 2.4) - 0.055
    }
}

const DELTA: f64 = 6.0 / 29.0;

#[inline]
fn lab_f(t: f64) -> f64 {
    if t > DELTA * DELTA * DELTA {
        t.cbrt()
    } else {
        t / (3.0 * DELTA * DELTA) + 4.0 / 29.0
    }
}

#[inline]
fn lab_f_inv(t: f64) -> f64 {
    if t > DELTA {
        t * t * t
    } else {
        3.0 * DELTA * DELTA * (t - 4.0 / 29.0)
    }
}

pub(crate) fn rgb_pixel_to_lab(r: u8, g: u8, b: u8) -> [f64; 3] {
    let r = srgb_to_linear(f64::from(r) / 255.0);
    let g = srgb_to_linear(f64::from(g) / 255.0);
    let b = srgb_to_linear(f64::from(b) / 255.0);
    let x = 0.412_456_4 * r + 0.357_576_1 * g + 0.180_437_5 * b;
    let y = 0.212_672_9 * r + 0.715_152_2 * g + 0.072_175_0 * b;
    let z = 0.019_333_9 * r + 0.119_192_0 * g + 0.950_304_1 * b;
    let fx = lab_f(x / WHITE_X);
    let fy = lab_f(y / WHITE_Y);
    let fz = lab_f(z / WHITE_Z);
    [116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)]
}

pub(crate) fn lab_pixel_to_rgb(l: f64, a: f64, b: f64) -> [u8; 3] {
    let fy = (l + 16.0) / 116.0;
    let fx = fy + a / 500.0;
    let fz = fy - b / 200.0;
    let x = WHITE_X * lab_f_inv(fx);
    let y = WHITE_Y * lab_f_inv(fy);
    let z = WHITE_Z * lab_f_inv(fz);
    let r = 3.240_454_2 * x - 1.537_138_5 * y - 0.498_531_4 * z;
    let g = -0.969_266_0 * x + 1.876_010_8 * y + 0.041_556_0 * z;
    let bl = 0.055_643_4 * x - 0.204_025_9 * y + 1.057_225_2 * z;
    let enc = |c: f64| (linear_to_srgb(c.clamp(0.0, 1.0)) * 255.0).round().clamp(0.0, 255.0) as u8;
    [enc(r), enc(g), enc(bl)]
}

/// sRGB (D65) to CIELAB. Output channels are `L, a, b` with `L` in `0..=100`.
pub fn rgb_to_lab(img: &ImageU8) -> Result<ImageF32, ImageError> {
    if img.channels() != 3 {
        return Err(ImageError::ChannelMismatch { expected: 3, actual: img.channels() });
    }
    let mut data = Vec::with_capacity(img.data().len());
    for px in img.data().chunks_exact(3) {
        let lab = rgb_pixel_to_lab(px[0], px[1], px[2]);
        data.extend(lab.iter().map(|&v| v as f32));
    }
    ImageF32::new_lab(img.width(), img.height(), data)
}

/// CIELAB back to 8-bit sRGB; out-of-gamut values are clipped.
pub fn lab_to_rgb(img: &ImageF32) -> Result<ImageU8, ImageError> {
    if img.channels() != 3 {
        return Err(ImageError::ChannelMismatch { expected: 3, actual: img.channels() });
    }
    let mut data = Vec::with_capacity(img.data().len());
    for px in img.data().chunks_exact(3) {
        data.extend(lab_pixel_to_rgb(f64::from(px[0]), f64::from(px[1]), f64::from(px[2])));
    }
    ImageU8::new(img.width(), img.height(), 3, data)
}
