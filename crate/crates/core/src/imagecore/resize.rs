use super::{ImageError, ImageU8};

/// Sampling table for one axis: source pair and weight of the upper sample.
fn axis_taps(src: usize, dst: usize) -> Vec<(usize, usize, f64)> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|o| {
            let s = ((o as f64 + 0.5) * scale - 0.5).clamp(0.0, (src - 1) as f64);
            let i0 = s.floor() as usize;
            let i1 = (i0 + 1).min(src - 1);
            (i0, i1, s - i0 as f64)
        })
        .collect()
}

/// Bilinear resampling with half-pixel-centred sample positions.
///
/// Resizing to the source dimensions returns an identical copy.
pub fn resize_bilinear(img: &ImageU8, out_w: usize, out_h: usize) -> Result<ImageU8, ImageError> {
    if out_w == 0 || out_h == 0 {
        return Err(ImageError::ZeroDimension { width: out_w, height: out_h });
    }
    if out_w == img.width() && out_h == img.height() {
        return Ok(img.clone());
    }
    let ch = img.channels();
    let xs = axis_taps(img.width(), out_w);
    let ys = axis_taps(img.height(), out_h);
    let mut data = Vec::with_capacity(out_w * out_h * ch);
    for &(y0, y1, fy) in &ys {
        for &(x0, x1, fx) in &xs {
            for c in 0..ch {
                let p00 = f64::from(img.get(x0, y0, c));
                let p10 = f64::from(img.get(x1, y0, c));
                let p01 = f64::from(img.get(x0, y1, c));
                let p11 = f64::from(img.get(x1, y1, c));
                let top = p00 + (p10 - p00) * fx;
                let bottom = p01 + (p11 - p01) * fx;
                let v = top + (bottom - top) * fy;
                data.push(v.round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    ImageU8::new(out_w, out_h, ch, data)
}
