use super::PreprocessError;
use crate::imagecore::{lab_to_rgb, reflect_index, rgb_to_lab, ImageError, ImageF32, ImageU8};

const BINS: usize = 256;

/// Tile grid along one axis: `(count, size)` with `count * size >= len`.
///
/// Tiles all share one size; the part of the last tile that runs past the
/// image reads reflected samples, so every tile histogram has the same area.
pub(crate) fn tile_grid(len: usize, tiles: usize) -> (usize, usize) {
    let n = tiles.min(len).max(1);
    (n, len.div_ceil(n))
}

/// Clips `hist` at `limit` and spreads the clipped mass evenly over all bins (one pass).
pub(crate) fn clip_histogram(hist: &mut [f64; BINS], limit: f64) {
    let mut excess = 0.0;
    for b in hist.iter_mut() {
        if *b > limit {
            excess += *b - limit;
            *b = limit;
        }
    }
    let share = excess / BINS as f64;
    for b in hist.iter_mut() {
        *b += share;
    }
}

/// Clip limit in counts for a tile of `area` pixels.
pub(crate) fn clip_limit(clip: f64, area: usize) -> f64 {
    (clip * area as f64 / BINS as f64).max(1.0)
}

#[inline]
pub(crate) fn quantize_lightness(l: f32) -> usize {
    (f64::from(l) * 255.0 / 100.0).round().clamp(0.0, 255.0) as usize
}

/// Equalisation curve of one tile: cumulative clipped histogram scaled to `0..=255`.
fn tile_mapping(levels: impl Iterator<Item = usize>, area: usize, clip: f64) -> [f64; BINS] {
    let mut hist = [0.0f64; BINS];
    for q in levels {
        hist[q] += 1.0;
    }
    clip_histogram(&mut hist, clip_limit(clip, area));
    let scale = 255.0 / area as f64;
    let mut lut = [0.0f64; BINS];
    let mut cdf = 0.0;
    for (v, h) in hist.iter().enumerate() {
        cdf += h;
        lut[v] = (cdf * scale).min(255.0);
    }
    lut
}

/// Interpolation anchors along one axis for pixel centre `p + 0.5`.
fn anchors(centres: &[f64], p: usize) -> (usize, usize, f64) {
    let pos = p as f64 + 0.5;
    let last = centres.len() - 1;
    if pos <= centres[0] {
        return (0, 0, 0.0);
    }
    if pos >= centres[last] {
        return (last, last, 0.0);
    }
    let i = centres.partition_point(|&c| c <= pos) - 1;
    (i, i + 1, (pos - centres[i]) / (centres[i + 1] - centres[i]))
}

/// CLAHE on the lightness channel of a LAB image. `a` and `b` are copied bit-for-bit.
pub fn clahe_lab(lab: &ImageF32, clip: f64, tiles: (usize, usize)) -> Result<ImageF32, PreprocessError> {
    if lab.channels() != 3 {
        return Err(ImageError::ChannelMismatch { expected: 3, actual: lab.channels() }.into());
    }
    if !(clip >= 1.0) || tiles.0 == 0 || tiles.1 == 0 {
        return Err(PreprocessError::InvalidParameter(format!("CLAHE clip {clip} tiles {tiles:?}")));
    }
    let (w, h) = (lab.width(), lab.height());
    let levels: Vec<usize> = lab.data().chunks_exact(3).map(|px| quantize_lightness(px[0])).collect();
    let (nx, tw) = tile_grid(w, tiles.0);
    let (ny, th) = tile_grid(h, tiles.1);
    let area = tw * th;

    let mut luts = Vec::with_capacity(nx * ny);
    for ty in 0..ny {
        for tx in 0..nx {
            let it = (ty * th..(ty + 1) * th).flat_map(|y| (tx * tw..(tx + 1) * tw).map(move |x| (x, y)));
            let levels = &levels;
            luts.push(tile_mapping(
                it.map(|(x, y)| levels[reflect_index(y as isize, h) * w + reflect_index(x as isize, w)]),
                area,
                clip,
            ));
        }
    }

    let cx: Vec<f64> = (0..nx).map(|i| (i as f64 + 0.5) * tw as f64).collect();
    let cy: Vec<f64> = (0..ny).map(|i| (i as f64 + 0.5) * th as f64).collect();
    let mut data = lab.data().to_vec();
    for y in 0..h {
        let (y0, y1, fy) = anchors(&cy, y);
        for x in 0..w {
            let (x0, x1, fx) = anchors(&cx, x);
            let q = levels[y * w + x];
            let top = luts[y0 * nx + x0][q] * (1.0 - fx) + luts[y0 * nx + x1][q] * fx;
            let bottom = luts[y1 * nx + x0][q] * (1.0 - fx) + luts[y1 * nx + x1][q] * fx;
            let v = top * (1.0 - fy) + bottom * fy;
            data[(y * w + x) * 3] = (v * 100.0 / 255.0) as f32;
        }
    }
    Ok(ImageF32::new_lab(w, h, data)?)
}

/// RGB → LAB → CLAHE on lightness → RGB.
pub fn clahe_luminance(img: &ImageU8, clip: f64, tiles: (usize, usize)) -> Result<ImageU8, PreprocessError> {
    if img.channels() != 3 {
        return Err(ImageError::ChannelMismatch { expected: 3, actual: img.channels() }.into());
    }
    let lab = rgb_to_lab(img)?;
    Ok(lab_to_rgb(&clahe_lab(&lab, clip, tiles)?)?)
}
