use super::{HandcraftedConfig, HandcraftedError};
use crate::fusion::{BlockKind, FeatureBlock};
use crate::imagecore::{reflect_index, resize_bilinear, ImageError, ImageU8};
use crate::scalar::Real;

const L2HYS_CLIP: f64 = 0.2;
const L2HYS_EPS: f64 = 1e-5;

/// Cell orientation histograms, indexed `[(cy * cells_x + cx) * bins + b]`.
fn cell_histograms<T: Real>(gray: &ImageU8, cell: usize, bins: usize) -> (usize, usize, Vec<T>) {
    let (w, h) = (gray.width(), gray.height());
    let (cells_x, cells_y) = (w / cell, h / cell);
    let px = |x: isize, y: isize| T::from(gray.get(reflect_index(x, w), reflect_index(y, h), 0)).unwrap();
    let half_turn = T::from_f64_lossy(180.0);
    let bin_width = T::from_f64_lossy(180.0 / bins as f64);
    let mut hist = vec![T::zero(); cells_x * cells_y * bins];
    for y in 0..cells_y * cell {
        for x in 0..cells_x * cell {
            let (xi, yi) = (x as isize, y as isize);
            let gx = px(xi + 1, yi) - px(xi - 1, yi);
            let gy = px(xi, yi + 1) - px(xi, yi - 1);
            let mag = (gx * gx + gy * gy).sqrt();
            if mag.is_zero() {
                continue;
            }
            let mut theta = gy.atan2(gx).to_degrees();
            if theta < T::zero() {
                theta = theta + half_turn;
            }
            if theta >= half_turn {
                theta = theta - half_turn;
            }
            let pos = theta / bin_width;
            let lo = pos.floor();
            let frac = pos - lo;
            let b0 = lo.to_usize().unwrap_or(0) % bins;
            let b1 = (b0 + 1) % bins;
            let base = ((y / cell) * cells_x + x / cell) * bins;
            hist[base + b0] = hist[base + b0] + mag * (T::one() - frac);
            hist[base + b1] = hist[base + b1] + mag * frac;
        }
    }
    (cells_x, cells_y, hist)
}

fn l2_normalise<T: Real>(v: &mut [T]) {
    let eps = T::from_f64_lossy(L2HYS_EPS);
    let norm = (v.iter().map(|&a| a * a).sum::<T>() + eps * eps).sqrt();
    for a in v.iter_mut() {
        *a = *a / norm;
    }
}

/// HOG descriptor on the configured internal resolution.
///
/// Gradients use central differences with symmetric borders; orientation is
/// unsigned and bins are centred on multiples of `180 / bins` degrees.
pub fn hog_descriptor<T: Real>(gray: &ImageU8, cfg: &HandcraftedConfig) -> Result<FeatureBlock<T>, HandcraftedError> {
    if gray.channels() != 1 {
        return Err(ImageError::ChannelMismatch { expected: 1, actual: gray.channels() }.into());
    }
    let (iw, ih) = cfg.hog_input;
    let resized = resize_bilinear(gray, iw, ih)?;
    let bins = cfg.hog_bins;
    let (cells_x, _, hist) = cell_histograms::<T>(&resized, cfg.hog_cell, bins);
    let (bx_n, by_n) = cfg.hog_blocks();
    let b = cfg.hog_block;
    let clip = T::from_f64_lossy(L2HYS_CLIP);
    let mut out = Vec::with_capacity(bx_n * by_n * b * b * bins);
    let mut block = Vec::with_capacity(b * b * bins);
    for by in 0..by_n {
        for bx in 0..bx_n {
            block.clear();
            for cy in by * cfg.hog_stride..by * cfg.hog_stride + b {
                for cx in bx * cfg.hog_stride..bx * cfg.hog_stride + b {
                    let base = (cy * cells_x + cx) * bins;
                    block.extend_from_slice(&hist[base..base + bins]);
                }
            }
            l2_normalise(&mut block);
            for a in block.iter_mut() {
                *a = a.min(clip);
            }
            l2_normalise(&mut block);
            out.extend_from_slice(&block);
        }
    }
    Ok(FeatureBlock::new(BlockKind::Hog, out)?)
}
