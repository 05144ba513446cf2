use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex};

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::{HandcraftedConfig, HandcraftedError};
use crate::fusion::{BlockKind, FeatureBlock};
use crate::imagecore::{reflect_index, resize_bilinear, ImageError, ImageU8};
use crate::scalar::Real;

/// Spatial taps of one even Gabor filter, row-major over `(2ry+1) × (2rx+1)`.
#[derive(Debug, Clone)]
pub struct GaborKernel {
    pub orientation_deg: f64,
    pub wavelength: f64,
    pub rx: usize,
    pub ry: usize,
    pub taps: Vec<f64>,
}

impl GaborKernel {
    fn new(orientation_deg: f64, wavelength: f64, sigma_ratio: f64, aspect: f64) -> Self {
        let theta = orientation_deg.to_radians();
        let sigma = sigma_ratio * wavelength;
        let (sx, sy) = (sigma, sigma / aspect);
        let (s, c) = theta.sin_cos();
        let rx = (3.0 * sx * c).abs().max((3.0 * sy * s).abs()).max(1.0).ceil() as usize;
        let ry = (3.0 * sx * s).abs().max((3.0 * sy * c).abs()).max(1.0).ceil() as usize;
        let mut taps = Vec::with_capacity((2 * rx + 1) * (2 * ry + 1));
        for dy in -(ry as isize)..=ry as isize {
            for dx in -(rx as isize)..=rx as isize {
                let (x, y) = (dx as f64, dy as f64);
                let xr = x * c + y * s;
                let yr = -x * s + y * c;
                let env = (-(xr * xr + aspect * aspect * yr * yr) / (2.0 * sigma * sigma)).exp();
                taps.push(env * (2.0 * PI * xr / wavelength).cos());
            }
        }
        let mean = taps.iter().sum::<f64>() / taps.len() as f64;
        taps.iter_mut().for_each(|t| *t -= mean);
        let l1: f64 = taps.iter().map(|t| t.abs()).sum();
        taps.iter_mut().for_each(|t| *t /= l1);
        Self { orientation_deg, wavelength, rx, ry, taps }
    }
}

/// FFT plans and kernel spectra for one padded frame size.
struct Frame {
    pw: usize,
    ph: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
    spectra: Vec<Vec<Complex<f64>>>,
}

impl Frame {
    fn fft2(&self, data: &mut [Complex<f64>], forward: bool) {
        let (row, col) = if forward { (&self.row_fwd, &self.col_fwd) } else { (&self.row_inv, &self.col_inv) };
        row.process(data);
        let mut column = vec![Complex::default(); self.ph];
        for x in 0..self.pw {
            for y in 0..self.ph {
                column[y] = data[y * self.pw + x];
            }
            col.process(&mut column);
            for y in 0..self.ph {
                data[y * self.pw + x] = column[y];
            }
        }
    }
}

/// Smallest 5-smooth integer `>= n`.
fn fast_len(n: usize) -> usize {
    (n..)
        .find(|&m| {
            let mut m = m;
            for p in [2, 3, 5] {
                while m % p == 0 {
                    m /= p;
                }
            }
            m == 1
        })
        .expect("5-smooth numbers are unbounded")
}

/// Precomputed Gabor filter bank. Kernel spectra are cached per image size.
pub struct GaborBank {
    kernels: Vec<GaborKernel>,
    input: Option<(usize, usize)>,
    pad: (usize, usize),
    frames: Mutex<HashMap<(usize, usize), Arc<Frame>>>,
}

impl GaborBank {
    pub fn new(cfg: &HandcraftedConfig) -> Result<Self, HandcraftedError> {
        cfg.validate()?;
        let mut kernels = Vec::new();
        for &o in &cfg.gabor_orientations {
            for &l in &cfg.gabor_wavelengths {
                kernels.push(GaborKernel::new(o, l, cfg.gabor_sigma_ratio, cfg.gabor_aspect));
            }
        }
        let pad = (kernels.iter().map(|k| k.rx).max().unwrap_or(1), kernels.iter().map(|k| k.ry).max().unwrap_or(1));
        Ok(Self { kernels, input: cfg.gabor_input, pad, frames: Mutex::new(HashMap::new()) })
    }

    /// Kernels in output order: orientation-major, then wavelength.
    pub fn kernels(&self) -> &[GaborKernel] {
        &self.kernels
    }

    fn frame(&self, w: usize, h: usize) -> Arc<Frame> {
        let mut cache = self.frames.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(f) = cache.get(&(w, h)) {
            return Arc::clone(f);
        }
        let pw = fast_len(w + 2 * self.pad.0);
        let ph = fast_len(h + 2 * self.pad.1);
        let mut planner = FftPlanner::new();
        let mut frame = Frame {
            pw,
            ph,
            row_fwd: planner.plan_fft_forward(pw),
            col_fwd: planner.plan_fft_forward(ph),
            row_inv: planner.plan_fft_inverse(pw),
            col_inv: planner.plan_fft_inverse(ph),
            spectra: Vec::with_capacity(self.kernels.len()),
        };
        for k in &self.kernels {
            let mut buf = vec![Complex::default(); pw * ph];
            let kw = 2 * k.rx + 1;
            for (i, &t) in k.taps.iter().enumerate() {
                let dx = (i % kw) as isize - k.rx as isize;
                let dy = (i / kw) as isize - k.ry as isize;
                let x = dx.rem_euclid(pw as isize) as usize;
                let y = dy.rem_euclid(ph as isize) as usize;
                buf[y * pw + x] = Complex::new(t, 0.0);
            }
            frame.fft2(&mut buf, true);
            frame.spectra.push(buf);
        }
        let frame = Arc::new(frame);
        cache.insert((w, h), Arc::clone(&frame));
        frame
    }

    /// Filtered responses at native size, one row-major map per kernel.
    pub fn responses(&self, gray: &ImageU8) -> Result<Vec<Vec<f64>>, HandcraftedError> {
        if gray.channels() != 1 {
            return Err(ImageError::ChannelMismatch { expected: 1, actual: gray.channels() }.into());
        }
        let (w, h) = (gray.width(), gray.height());
        let f = self.frame(w, h);
        let (px, py) = self.pad;
        let mut img = vec![Complex::default(); f.pw * f.ph];
        for y in 0..f.ph {
            let sy = reflect_index(y as isize - py as isize, h);
            for x in 0..f.pw {
                let sx = reflect_index(x as isize - px as isize, w);
                img[y * f.pw + x] = Complex::new(f64::from(gray.get(sx, sy, 0)), 0.0);
            }
        }
        f.fft2(&mut img, true);
        let scale = 1.0 / (f.pw * f.ph) as f64;
        let mut out = Vec::with_capacity(self.kernels.len());
        let mut buf = vec![Complex::default(); f.pw * f.ph];
        for spec in &f.spectra {
            for ((b, a), k) in buf.iter_mut().zip(&img).zip(spec) {
                *b = a * k;
            }
            f.fft2(&mut buf, false);
            let mut map = Vec::with_capacity(w * h);
            for y in 0..h {
                let row = (y + py) * f.pw + px;
                map.extend(buf[row..row + w].iter().map(|c| c.re * scale));
            }
            out.push(map);
        }
        Ok(out)
    }

    /// Mean and standard deviation of `|response|` per filter.
    pub fn features<T: Real>(&self, gray: &ImageU8) -> Result<FeatureBlock<T>, HandcraftedError> {
        let resized;
        let gray = match self.input {
            Some((w, h)) => {
                resized = resize_bilinear(gray, w, h)?;
                &resized
            }
            None => gray,
        };
        let mut values = Vec::with_capacity(2 * self.kernels.len());
        for map in self.responses(gray)? {
            let n = map.len() as f64;
            let mean = map.iter().map(|v| v.abs()).sum::<f64>() / n;
            let var = map.iter().map(|v| (v.abs() - mean).powi(2)).sum::<f64>() / n;
            values.push(T::from_f64_lossy(mean));
            values.push(T::from_f64_lossy(var.sqrt()));
        }
        Ok(FeatureBlock::new(BlockKind::Gabor, values)?)
    }
}

/// Gabor magnitude statistics with a bank built from `cfg`.
pub fn gabor_features<T: Real>(gray: &ImageU8, cfg: &HandcraftedConfig) -> Result<FeatureBlock<T>, HandcraftedError> {
    GaborBank::new(cfg)?.features(gray)
}
