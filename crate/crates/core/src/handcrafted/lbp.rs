use super::{HandcraftedConfig, HandcraftedError};
use crate::fusion::{BlockKind, FeatureBlock};
use crate::imagecore::{ImageError, ImageU8};
use crate::scalar::Real;

/// Neighbour offsets `(dx, dy)` for `points` samples on a circle of `radius`,
/// snapped to the nearest pixel. Sample 0 lies to the right, then counter-clockwise.
pub fn lbp_offsets(points: usize, radius: f64) -> Vec<(isize, isize)> {
    (0..points)
        .map(|k| {
            let a = 2.0 * std::f64::consts::PI * k as f64 / points as f64;
            ((radius * a.cos()).round() as isize, (-radius * a.sin()).round() as isize)
        })
        .collect()
}

fn transitions(code: u32, points: usize) -> u32 {
    let mask = (1u32 << points) - 1;
    let rotated = ((code >> 1) | (code << (points - 1))) & mask;
    (code ^ rotated).count_ones()
}

/// Maps every `points`-bit code to its histogram bin. Uniform codes take bins in
/// ascending code order; all other codes share the last bin.
pub fn uniform_table(points: usize) -> Vec<u16> {
    let n_codes = 1usize << points;
    let catch_all = (points * (points - 1) + 2) as u16;
    let mut next = 0u16;
    (0..n_codes as u32)
        .map(|code| {
            if transitions(code, points) <= 2 {
                next += 1;
                next - 1
            } else {
                catch_all
            }
        })
        .collect()
}

/// Raw LBP code of every interior pixel, row-major.
pub fn lbp_codes(gray: &ImageU8, points: usize, radius: f64) -> Result<(usize, usize, Vec<u32>), HandcraftedError> {
    if gray.channels() != 1 {
        return Err(ImageError::ChannelMismatch { expected: 1, actual: gray.channels() }.into());
    }
    let offsets = lbp_offsets(points, radius);
    let margin = offsets.iter().map(|(dx, dy)| dx.unsigned_abs().max(dy.unsigned_abs())).max().unwrap_or(0).max(1);
    let (w, h) = (gray.width(), gray.height());
    if w <= 2 * margin || h <= 2 * margin {
        return Err(HandcraftedError::ImageTooSmall { width: w, height: h, min: 2 * margin });
    }
    let data = gray.data();
    let (iw, ih) = (w - 2 * margin, h - 2 * margin);
    let mut codes = Vec::with_capacity(iw * ih);
    for y in margin..h - margin {
        for x in margin..w - margin {
            let c = data[y * w + x];
            let mut code = 0u32;
            for (k, &(dx, dy)) in offsets.iter().enumerate() {
                let n = data[(y as isize + dy) as usize * w + (x as isize + dx) as usize];
                if n >= c {
                    code |= 1 << k;
                }
            }
            codes.push(code);
        }
    }
    Ok((iw, ih, codes))
}

/// L1-normalised uniform-pattern histogram of a gray image.
pub fn lbp_histogram<T: Real>(gray: &ImageU8, cfg: &HandcraftedConfig) -> Result<FeatureBlock<T>, HandcraftedError> {
    let (_, _, codes) = lbp_codes(gray, cfg.lbp_points, cfg.lbp_radius)?;
    let table = uniform_table(cfg.lbp_points);
    let mut counts = vec![0usize; cfg.lbp_bins()];
    for c in &codes {
        counts[table[*c as usize] as usize] += 1;
    }
    let total = codes.len() as f64;
    let values = counts.iter().map(|&n| T::from_f64_lossy(n as f64 / total)).collect();
    Ok(FeatureBlock::new(BlockKind::Lbp, values)?)
}
