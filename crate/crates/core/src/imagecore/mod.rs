//! Raster image types and the conversions every pipeline stage builds on.

mod codec;
mod color;
mod resize;

pub use codec::{decode_image, encode_png, load_image, save_png};
pub use color::{gray_to_rgb, lab_to_rgb, rgb_to_lab, to_gray, to_gray_or_identity};
pub use resize::resize_bilinear;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("file not found: {0}")]
    FileNotFound(String),
    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),
    #[error("corrupt image: {0}")]
    CorruptImage(String),
    #[error("image is already single-channel")]
    AlreadyGray,
    #[error("expected {expected} channel(s), got {actual}")]
    ChannelMismatch { expected: usize, actual: usize },
    #[error("zero output dimension {width}x{height}")]
    ZeroDimension { width: usize, height: usize },
    #[error("invalid image geometry: {0}")]
    InvalidGeometry(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Interleaved 8-bit image, row-major, 1 (gray) or 3 (RGB) channels.
#[derive(Clone, PartialEq, Eq)]
pub struct ImageU8 {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<u8>,
}

impl std::fmt::Debug for ImageU8 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ImageU8")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("channels", &self.channels)
            .finish_non_exhaustive()
    }
}

fn check_geometry(width: usize, height: usize, channels: usize, len: usize) -> Result<(), ImageError> {
    if width == 0 || height == 0 {
        return Err(ImageError::InvalidGeometry(format!("{width}x{height}")));
    }
    if channels != 1 && channels != 3 {
        return Err(ImageError::InvalidGeometry(format!("{channels} channels")));
    }
    if len != width * height * channels {
        return Err(ImageError::InvalidGeometry(format!("data length {len} != {width}x{height}x{channels}")));
    }
    Ok(())
}

impl ImageU8 {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<u8>) -> Result<Self, ImageError> {
        check_geometry(width, height, channels, data.len())?;
        Ok(Self { width, height, channels, data })
    }

    /// Builds an image from wider samples, rejecting anything outside `0..=255`.
    pub fn from_samples(width: usize, height: usize, channels: usize, samples: &[i32]) -> Result<Self, ImageError> {
        let data = samples
            .iter()
            .map(|&v| u8::try_from(v).map_err(|_| ImageError::InvalidGeometry(format!("sample {v} out of range"))))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(width, height, channels, data)
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: u8) -> Result<Self, ImageError> {
        Self::new(width, height, channels, vec![value; width * height * channels])
    }

    /// Builds an image by evaluating `f(x, y, c)` for every sample.
    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> u8,
    ) -> Result<Self, ImageError> {
        let mut data = Vec::with_capacity(width * height * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(x, y, c));
                }
            }
        }
        Self::new(width, height, channels, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> u8 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub(crate) fn index(&self, x: usize, y: usize) -> usize {
        (y * self.width + x) * self.channels
    }

    pub fn is_gray(&self) -> bool {
        self.channels == 1
    }

    /// True when every sample of every channel has the same value.
    pub fn is_constant(&self) -> bool {
        let c = self.channels;
        self.data.chunks_exact(c).all(|px| px == &self.data[..c])
    }
}

/// Colour space tag for floating-point images.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColorSpace {
    Generic,
    Lab,
}

/// Real-valued image used for CIELAB data and intermediate filter math.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageF32 {
    width: usize,
    height: usize,
    channels: usize,
    space: ColorSpace,
    data: Vec<f32>,
}

impl ImageF32 {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Result<Self, ImageError> {
        check_geometry(width, height, channels, data.len())?;
        Ok(Self { width, height, channels, space: ColorSpace::Generic, data })
    }

    /// LAB image; lightness is clamped into `0..=100`.
    pub fn new_lab(width: usize, height: usize, mut data: Vec<f32>) -> Result<Self, ImageError> {
        check_geometry(width, height, 3, data.len())?;
        for px in data.chunks_exact_mut(3) {
            px[0] = px[0].clamp(0.0, 100.0);
        }
        Ok(Self { width, height, channels: 3, space: ColorSpace::Lab, data })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn space(&self) -> ColorSpace {
        self.space
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f32 {
        self.data[(y * self.width + x) * self.channels + c]
    }
}

/// Symmetric reflection of `i` into `0..n` (`cba|abc|cba`), valid for any offset.
#[inline]
pub fn reflect_index(i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let m = i.rem_euclid(period);
    if m < n {
        m as usize
    } else {
        (period - 1 - m) as usize
    }
}
