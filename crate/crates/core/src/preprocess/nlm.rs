use super::{pad_reflect, PreprocessError};
use crate::imagecore::ImageU8;

/// Non-local means denoising.
///
/// For every pixel, candidates in a `search x search` window are averaged with
/// weights `exp(-d² / h²)`, where `d²` is the mean squared difference between
/// the `template x template` patches around the pixel and the candidate (over
/// all channels). Gray images use `h`, colour images use `h_color`. Borders are
/// reflected.
///
/// Patch distances for one search offset are read from an integral image of
/// the per-pixel squared differences, so each offset costs O(pixels)
/// regardless of template size.
pub fn nlm_denoise(img: &ImageU8, h: f64, h_color: f64, template: usize, search: usize) -> Result<ImageU8, PreprocessError> {
    if template.is_multiple_of(2) || search.is_multiple_of(2) || template >= search {
        return Err(PreprocessError::WindowShape { template, search });
    }
    let strength = if img.is_gray() { h } else { h_color };
    if !(strength > 0.0) {
        return Err(PreprocessError::InvalidParameter(format!("NLM filter strength must be positive, got {strength}")));
    }
    let ch = img.channels();
    let (w, hgt) = (img.width(), img.height());
    let tr = template / 2;
    let sr = search / 2;
    let pad = tr + sr;
    let padded = pad_reflect(img, pad);
    let pw = w + 2 * pad;

    // Region of squared differences needed by the patch sums: [-tr, w+tr) x [-tr, h+tr).
    let rw = w + 2 * tr;
    let rh = hgt + 2 * tr;
    let iw = rw + 1;
    let mut integral = vec![0u64; iw * (rh + 1)];
    let norm = 1.0 / ((template * template * ch) as f64 * strength * strength);

    let mut acc = vec![0.0f64; w * hgt * ch];
    let mut wsum = vec![0.0f64; w * hgt];

    let search_i = sr as isize;
    let row_len = pw * ch;
    for oy in -search_i..=search_i {
        for ox in -search_i..=search_i {
            // integral[(ry+1) * iw + rx+1] = sum of diffs over region rows <= ry, cols <= rx
            for ry in 0..rh {
                let py = ry + sr;
                let qy = (py as isize + oy) as usize;
                let a = &padded[py * row_len + sr * ch..py * row_len + (sr + rw) * ch];
                let qx0 = (sr as isize + ox) as usize;
                let b = &padded[qy * row_len + qx0 * ch..qy * row_len + (qx0 + rw) * ch];
                let (prev, cur) = integral.split_at_mut((ry + 1) * iw);
                let prev = &prev[ry * iw..];
                let mut row_sum = 0u64;
                for (rx, (pa, pb)) in a.chunks_exact(ch).zip(b.chunks_exact(ch)).enumerate() {
                    for (&u, &v) in pa.iter().zip(pb) {
                        let t = u64::from(u.abs_diff(v));
                        row_sum += t * t;
                    }
                    cur[rx + 1] = prev[rx + 1] + row_sum;
                }
            }
            for y in 0..hgt {
                let qy = ((y + pad) as isize + oy) as usize;
                let qx0 = ((pad as isize) + ox) as usize;
                let q_row = &padded[qy * row_len + qx0 * ch..qy * row_len + (qx0 + w) * ch];
                let top = &integral[y * iw..];
                let bottom = &integral[(y + template) * iw..];
                for x in 0..w {
                    let s = bottom[x + template] + top[x] - top[x + template] - bottom[x];
                    let e = s as f64 * norm;
                    // negligible next to the self-match weight of 1
                    if e > 36.0 {
                        continue;
                    }
                    let wgt = (-e).exp();
                    let p = y * w + x;
                    wsum[p] += wgt;
                    for (a, &v) in acc[p * ch..p * ch + ch].iter_mut().zip(&q_row[x * ch..x * ch + ch]) {
                        *a += wgt * f64::from(v);
                    }
                }
            }
        }
    }

    let out = acc.iter().enumerate().map(|(i, a)| (a / wsum[i / ch]).round().clamp(0.0, 255.0) as u8).collect();
    Ok(ImageU8::new(w, hgt, ch, out)?)
}
