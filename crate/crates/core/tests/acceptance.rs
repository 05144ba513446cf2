//! Acceptance suite. Prints one PASS/FAIL/SKIP line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::Instant;

use pvdefect::augment::{augment_dataset, AugmentConfig};
use pvdefect::classifiers::{
    decode_model, encode_model, gbdt_train, load_model, save_model, svm_train, ClassifierKind, GbdtParams, Growth, SvmParams,
    TrainParams, TrainedModel,
};
use pvdefect::deepfeat::{synthetic_embeddings, EmbeddingSet};
use pvdefect::eval::{
    compute_metrics, render_report, run_experiment_grid, stratified_split, Averaging, ConfusionMatrix, DatasetEntry, GridConfig,
    LabeledDataset, MetricsRow, ReportFormat, Split,
};
use pvdefect::fusion::{fuse_blocks, BlockKind, FeatureMatrix};
use pvdefect::handcrafted::{
    extract_handcrafted, extract_with_bank, gabor_features, hog_descriptor, lbp_histogram, GaborBank, HandcraftedConfig,
};
use pvdefect::imagecore::{lab_to_rgb, load_image, rgb_to_lab, to_gray_or_identity, ImageF32};
use pvdefect::preprocess::{
    bilateral_filter, clahe_lab, clahe_luminance, gamma_correct, gamma_lut, nlm_denoise, preprocess_pipeline, PreprocessConfig,
};
use pvdefect::{ClassLabel, ImageU8};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---------------------------------------------------------------------------
// Independent reference implementations
// ---------------------------------------------------------------------------

fn mirror(mut i: isize, n: usize) -> usize {
    let n = n as isize;
    loop {
        if i < 0 {
            i = -i - 1;
        } else if i >= n {
            i = 2 * n - i - 1;
        } else {
            return i as usize;
        }
    }
}

fn px(img: &ImageU8, x: isize, y: isize, c: usize) -> f64 {
    f64::from(img.get(mirror(x, img.width()), mirror(y, img.height()), c))
}

fn ref_bilateral(img: &ImageU8, d: usize, sigma_color: f64, sigma_space: f64) -> Vec<u8> {
    let r = (d / 2) as isize;
    let ch = img.channels();
    let mut out = Vec::new();
    for y in 0..img.height() as isize {
        for x in 0..img.width() as isize {
            let mut sum = vec![0.0; ch];
            let mut norm = 0.0;
            for dy in -r..=r {
                for dx in -r..=r {
                    let ws = (-((dx * dx + dy * dy) as f64) / (2.0 * sigma_space * sigma_space)).exp();
                    let dist2: f64 = (0..ch).map(|c| (px(img, x + dx, y + dy, c) - px(img, x, y, c)).powi(2)).sum();
                    let wgt = ws * (-dist2 / (2.0 * sigma_color * sigma_color)).exp();
                    norm += wgt;
                    for (c, s) in sum.iter_mut().enumerate() {
                        *s += wgt * px(img, x + dx, y + dy, c);
                    }
                }
            }
            out.extend(sum.iter().map(|s| (s / norm).round() as u8));
        }
    }
    out
}

fn ref_nlm(img: &ImageU8, h: f64, template: usize, search: usize) -> Vec<u8> {
    let (t, s) = ((template / 2) as isize, (search / 2) as isize);
    let ch = img.channels();
    let denom = (template * template * ch) as f64 * h * h;
    let mut out = Vec::new();
    for y in 0..img.height() as isize {
        for x in 0..img.width() as isize {
            let mut sum = vec![0.0; ch];
            let mut norm = 0.0;
            for oy in -s..=s {
                for ox in -s..=s {
                    let mut d2 = 0.0;
                    for ty in -t..=t {
                        for tx in -t..=t {
                            for c in 0..ch {
                                d2 += (px(img, x + tx, y + ty, c) - px(img, x + ox + tx, y + oy + ty, c)).powi(2);
                            }
                        }
                    }
                    let wgt = (-d2 / denom).exp();
                    norm += wgt;
                    for (c, v) in sum.iter_mut().enumerate() {
                        *v += wgt * px(img, x + ox, y + oy, c);
                    }
                }
            }
            out.extend(sum.iter().map(|v| (v / norm).round() as u8));
        }
    }
    out
}

/// CLAHE on lightness quantised to 0..=255. Returns the equalised level per pixel.
fn ref_clahe_levels(levels: &[usize], w: usize, h: usize, clip: f64, tiles: usize) -> Vec<f64> {
    let nx = tiles.min(w);
    let ny = tiles.min(h);
    let tw = w.div_ceil(nx);
    let th = h.div_ceil(ny);
    let area = (tw * th) as f64;
    let mut maps = vec![vec![0.0; 256]; nx * ny];
    for ty in 0..ny {
        for tx in 0..nx {
            let mut hist = vec![0.0; 256];
            for y in ty * th..(ty + 1) * th {
                for x in tx * tw..(tx + 1) * tw {
                    hist[levels[mirror(y as isize, h) * w + mirror(x as isize, w)]] += 1.0;
                }
            }
            let limit = f64::max(clip * area / 256.0, 1.0);
            let excess: f64 = hist.iter().map(|&b| f64::max(b - limit, 0.0)).sum();
            let mut cum = 0.0;
            for v in 0..256 {
                cum += f64::min(hist[v], limit) + excess / 256.0;
                maps[ty * nx + tx][v] = f64::min(cum * 255.0 / area, 255.0);
            }
        }
    }
    let coord = |p: usize, size: usize, n: usize| {
        let g = ((p as f64 + 0.5) / size as f64 - 0.5).clamp(0.0, (n - 1) as f64);
        let i0 = g.floor() as usize;
        (i0, (i0 + 1).min(n - 1), g - i0 as f64)
    };
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        let (y0, y1, fy) = coord(y, th, ny);
        for x in 0..w {
            let (x0, x1, fx) = coord(x, tw, nx);
            let v = levels[y * w + x];
            let m = |ty: usize, tx: usize| maps[ty * nx + tx][v];
            out.push((1.0 - fy) * ((1.0 - fx) * m(y0, x0) + fx * m(y0, x1)) + fy * ((1.0 - fx) * m(y1, x0) + fx * m(y1, x1)));
        }
    }
    out
}

fn uniform_bins() -> Vec<usize> {
    let mut next = 0;
    (0..256u32)
        .map(|code| {
            let bits: Vec<u32> = (0..8).map(|i| (code >> i) & 1).collect();
            let changes = (0..8).filter(|&i| bits[i] != bits[(i + 1) % 8]).count();
            if changes <= 2 {
                next += 1;
                next - 1
            } else {
                58
            }
        })
        .collect()
}

fn ref_lbp(gray: &ImageU8) -> Vec<f64> {
    // right, then counter-clockwise with y pointing down
    const NB: [(isize, isize); 8] = [(1, 0), (1, -1), (0, -1), (-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1)];
    let bins = uniform_bins();
    let mut hist = vec![0usize; 59];
    let mut n = 0;
    for y in 1..gray.height() - 1 {
        for x in 1..gray.width() - 1 {
            let c = gray.get(x, y, 0);
            let mut code = 0;
            for (k, (dx, dy)) in NB.iter().enumerate() {
                if gray.get((x as isize + dx) as usize, (y as isize + dy) as usize, 0) >= c {
                    code |= 1 << k;
                }
            }
            hist[bins[code]] += 1;
            n += 1;
        }
    }
    hist.iter().map(|&c| c as f64 / n as f64).collect()
}

fn ref_hog(gray: &ImageU8) -> Vec<f64> {
    let (cell, bins) = (8usize, 9usize);
    let (cx_n, cy_n) = (gray.width() / cell, gray.height() / cell);
    let mut cells = vec![vec![0.0; bins]; cx_n * cy_n];
    for y in 0..cy_n * cell {
        for x in 0..cx_n * cell {
            let (xi, yi) = (x as isize, y as isize);
            let gx = px(gray, xi + 1, yi, 0) - px(gray, xi - 1, yi, 0);
            let gy = px(gray, xi, yi + 1, 0) - px(gray, xi, yi - 1, 0);
            let mag = gx.hypot(gy);
            if mag == 0.0 {
                continue;
            }
            let ang = gy.atan2(gx).to_degrees().rem_euclid(180.0);
            let pos = ang / 20.0;
            let j = pos.floor();
            let frac = pos - j;
            let hist = &mut cells[(y / cell) * cx_n + x / cell];
            hist[j as usize % bins] += mag * (1.0 - frac);
            hist[(j as usize + 1) % bins] += mag * frac;
        }
    }
    let l2 = |v: &mut Vec<f64>| {
        let n = (v.iter().map(|a| a * a).sum::<f64>() + 1e-10).sqrt();
        v.iter_mut().for_each(|a| *a /= n);
    };
    let mut out = Vec::new();
    for by in 0..cy_n - 1 {
        for bx in 0..cx_n - 1 {
            let mut block = Vec::new();
            for cy in by..by + 2 {
                for cx in bx..bx + 2 {
                    block.extend_from_slice(&cells[cy * cx_n + cx]);
                }
            }
            l2(&mut block);
            block.iter_mut().for_each(|a| *a = a.min(0.2));
            l2(&mut block);
            out.extend(block);
        }
    }
    out
}

fn ref_gabor(gray: &ImageU8) -> Vec<f64> {
    let (ratio, gamma) = (0.56, 0.5);
    let n = (gray.width() * gray.height()) as f64;
    let mut out = Vec::new();
    for theta_deg in [0.0f64, 45.0, 90.0, 135.0] {
        for lambda in [4.0, 8.0, 16.0, 32.0] {
            let th = theta_deg.to_radians();
            let sigma = ratio * lambda;
            let rx =
                f64::max(f64::max((3.0 * sigma * th.cos()).abs(), (3.0 * sigma / gamma * th.sin()).abs()), 1.0).ceil() as isize;
            let ry =
                f64::max(f64::max((3.0 * sigma * th.sin()).abs(), (3.0 * sigma / gamma * th.cos()).abs()), 1.0).ceil() as isize;
            let mut taps = Vec::new();
            for dy in -ry..=ry {
                for dx in -rx..=rx {
                    let (x, y) = (dx as f64, dy as f64);
                    let xp = x * th.cos() + y * th.sin();
                    let yp = -x * th.sin() + y * th.cos();
                    let g = (-(xp * xp + gamma * gamma * yp * yp) / (2.0 * sigma * sigma)).exp() * (2.0 * PI * xp / lambda).cos();
                    taps.push((dx, dy, g));
                }
            }
            let mean = taps.iter().map(|t| t.2).sum::<f64>() / taps.len() as f64;
            let l1: f64 = taps.iter().map(|t| (t.2 - mean).abs()).sum();
            let taps: Vec<(isize, isize, f64)> = taps.into_iter().map(|(x, y, g)| (x, y, (g - mean) / l1)).collect();
            let mut mags = Vec::new();
            for y in 0..gray.height() as isize {
                for x in 0..gray.width() as isize {
                    let r: f64 = taps.iter().map(|&(dx, dy, k)| k * px(gray, x + dx, y + dy, 0)).sum();
                    mags.push(r.abs());
                }
            }
            let m = mags.iter().sum::<f64>() / n;
            let var = mags.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
            out.push(m);
            out.push(var.sqrt());
        }
    }
    out
}

fn random_image(rng: &mut ChaCha8Rng, ch: usize) -> ImageU8 {
    let w = rng.random_range(16..=32);
    let h = rng.random_range(16..=32);
    let (ex, ey) = (rng.random_range(0..w), rng.random_range(0..h));
    let base: Vec<f64> = (0..ch).map(|_| rng.random_range(30.0..200.0)).collect();
    let (sx, sy) = (rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
    let noise = rng.random_range(5.0..60.0);
    ImageU8::from_fn(w, h, ch, |x, y, c| {
        let step = if x >= ex && y >= ey { 50.0 } else { 0.0 };
        let v = base[c] + sx * x as f64 + sy * y as f64 + step + rng.random_range(-noise..noise);
        v.round().clamp(0.0, 255.0) as u8
    })
    .unwrap()
}

fn max_abs_diff(a: &[u8], b: &[u8]) -> u8 {
    a.iter().zip(b).map(|(x, y)| x.abs_diff(*y)).max().unwrap_or(0)
}

fn max_rel_err(got: &[f64], want: &[f64]) -> f64 {
    got.iter().zip(want).map(|(g, w)| if *w == 0.0 { g.abs() } else { (g - w).abs() / w.abs() }).fold(0.0, f64::max)
}

// ---------------------------------------------------------------------------
// Criteria
// ---------------------------------------------------------------------------

fn kernel_oracles() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_601);
    let n = 20;
    let (mut bil, mut nlm, mut clahe_l, mut clahe_rgb) = (0u8, 0u8, 0.0f64, 0u8);
    let (mut hog_err, mut gabor_err) = (0.0f64, 0.0f64);
    let hand = |w: usize, h: usize| HandcraftedConfig { hog_input: (w, h), gabor_input: None, ..Default::default() };
    for i in 0..n {
        let ch = if i % 2 == 0 { 3 } else { 1 };
        let img = random_image(&mut rng, ch);
        bil = bil.max(max_abs_diff(bilateral_filter(&img, 9, 75.0, 75.0).unwrap().data(), &ref_bilateral(&img, 9, 75.0, 75.0)));
        nlm = nlm.max(max_abs_diff(nlm_denoise(&img, 10.0, 10.0, 7, 21).unwrap().data(), &ref_nlm(&img, 10.0, 7, 21)));

        let rgb = random_image(&mut rng, 3);
        let lab = rgb_to_lab(&rgb).unwrap();
        let levels: Vec<usize> =
            lab.data().chunks(3).map(|p| (f64::from(p[0]) * 2.55).round().clamp(0.0, 255.0) as usize).collect();
        let want = ref_clahe_levels(&levels, rgb.width(), rgb.height(), 2.0, 8);
        let got = clahe_lab(&lab, 2.0, (8, 8)).unwrap();
        for (g, w) in got.data().chunks(3).zip(&want) {
            clahe_l = clahe_l.max((f64::from(g[0]) * 2.55 - w).abs());
        }
        let mut ref_lab = lab.data().to_vec();
        for (p, w) in ref_lab.chunks_mut(3).zip(&want) {
            p[0] = (w / 2.55) as f32;
        }
        let ref_rgb = lab_to_rgb(&ImageF32::new_lab(rgb.width(), rgb.height(), ref_lab).unwrap()).unwrap();
        clahe_rgb = clahe_rgb.max(max_abs_diff(clahe_luminance(&rgb, 2.0, (8, 8)).unwrap().data(), ref_rgb.data()));

        let gray = to_gray_or_identity(&img);
        let cfg = hand(16, 16);
        let lbp = lbp_histogram::<f64>(&gray, &cfg).unwrap();
        ensure(lbp.values() == ref_lbp(&gray).as_slice(), || format!("LBP mismatch on image {i}"))?;
        let (cw, chh) = (gray.width() / 8 * 8, gray.height() / 8 * 8);
        let cropped = ImageU8::from_fn(cw, chh, 1, |x, y, _| gray.get(x, y, 0)).unwrap();
        let hog = hog_descriptor::<f64>(&cropped, &hand(cw, chh)).unwrap();
        let want_hog = ref_hog(&cropped);
        ensure(hog.dim() == want_hog.len(), || format!("HOG length {} vs {}", hog.dim(), want_hog.len()))?;
        hog_err = hog_err.max(max_rel_err(hog.values(), &want_hog));
        let gab = gabor_features::<f64>(&gray, &cfg).unwrap();
        gabor_err = gabor_err.max(max_rel_err(gab.values(), &ref_gabor(&gray)));
    }
    let secs = start.elapsed().as_secs_f64();
    let detail = format!(
        "{n} images; max |diff| bilateral {bil}, NLM {nlm}, CLAHE L {clahe_l:.3}, CLAHE RGB {clahe_rgb}; LBP exact; \
         max rel err HOG {hog_err:.1e}, Gabor {gabor_err:.1e}; {secs:.1}s"
    );
    ensure(bil <= 1 && nlm <= 1 && clahe_l <= 1.0 && clahe_rgb <= 1, || detail.clone())?;
    ensure(hog_err <= 1e-5 && gabor_err <= 1e-5, || detail.clone())?;
    ensure(secs < 60.0, || detail.clone())?;
    Ok(detail)
}

fn analytic_fixpoints() -> Outcome {
    let mut checks = 0;
    for (ch, v) in [(1usize, 0u8), (3, 93), (3, 255), (1, 180)] {
        let img = ImageU8::filled(24, 20, ch, v).unwrap();
        ensure(bilateral_filter(&img, 9, 75.0, 75.0).unwrap() == img, || format!("bilateral moved constant {v}"))?;
        ensure(nlm_denoise(&img, 10.0, 10.0, 7, 21).unwrap() == img, || format!("NLM moved constant {v}"))?;
        let rgb = ImageU8::filled(24, 20, 3, v).unwrap();
        ensure(clahe_luminance(&rgb, 2.0, (8, 8)).unwrap().is_constant(), || format!("CLAHE broke constant {v}"))?;
        let g = gamma_correct(&img, 1.5).unwrap();
        ensure(g.is_constant() && g.data()[0] == gamma_lut(1.5).unwrap()[v as usize], || format!("gamma on constant {v}"))?;
        let cfg = PreprocessConfig { target_size: (24, 20), ..Default::default() };
        ensure(preprocess_pipeline(&img, &cfg).unwrap().is_constant(), || format!("pipeline broke constant {v}"))?;
        checks += 5;
    }
    let lut = gamma_lut(1.5).unwrap();
    ensure(lut[0] == 0 && lut[255] == 255 && lut[128] == 161, || format!("gamma LUT {} {} {}", lut[0], lut[128], lut[255]))?;

    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let cfg = HandcraftedConfig::default();
    for _ in 0..20 {
        let (w, h) = (rng.random_range(3..40), rng.random_range(3..40));
        let img = ImageU8::from_fn(w, h, 1, |_, _, _| rng.random_range(0..128)).unwrap();
        let base = lbp_histogram::<f64>(&img, &cfg).unwrap();
        let sum: f64 = base.values().iter().sum();
        ensure((sum - 1.0).abs() < 1e-12, || format!("LBP histogram sums to {sum}"))?;
        let mut table: Vec<u8> = (0..=255u8).collect();
        // random strictly increasing map of 0..128 into 0..=255
        let mut picks: Vec<u8> = {
            let mut all: Vec<u8> = (0..=255).collect();
            for i in (1..all.len()).rev() {
                all.swap(i, rng.random_range(0..=i));
            }
            all.truncate(128);
            all
        };
        picks.sort_unstable();
        table[..128].copy_from_slice(&picks);
        for map in [table.clone(), (0..=255u16).map(|v| (2 * v + 1).min(255) as u8).collect()] {
            let remapped = ImageU8::from_fn(w, h, 1, |x, y, _| map[img.get(x, y, 0) as usize]).unwrap();
            ensure(lbp_histogram::<f64>(&remapped, &cfg).unwrap() == base, || "LBP changed under monotone remap".into())?;
        }
        checks += 3;
    }

    let photo = ImageU8::from_fn(640, 480, 3, |x, y, c| ((x * 3 + y * 5 + c * 40) % 256) as u8).unwrap();
    let blocks = extract_handcrafted::<f32>(&photo, &[BlockKind::Hog, BlockKind::Gabor], &cfg).unwrap();
    ensure(blocks[0].dim() == 8100, || format!("HOG dim {}", blocks[0].dim()))?;
    ensure(blocks[1].dim() == 32, || format!("Gabor dim {}", blocks[1].dim()))?;
    ensure(cfg.dim(BlockKind::Hog) == Some(8100) && cfg.dim(BlockKind::Gabor) == Some(32), || "config dims".into())?;
    Ok(format!("{checks} invariance checks; gamma LUT 0/161/255; HOG dim 8100; Gabor dim 32"))
}

fn blobs(n_per: usize, classes: &[ClassLabel], spread: f64, seed: u64) -> (Vec<f64>, Vec<ClassLabel>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (i, &l) in classes.iter().enumerate() {
        let a = 2.0 * PI * i as f64 / classes.len() as f64;
        for _ in 0..n_per {
            x.push(spread * a.cos() + rng.random_range(-1.0..1.0));
            x.push(spread * a.sin() + rng.random_range(-1.0..1.0));
            y.push(l);
        }
    }
    (x, y)
}

fn classifier_correctness() -> Outcome {
    let svm_p = SvmParams { c: 100.0, ..Default::default() };
    let (bx, by) = blobs(30, &ClassLabel::ALL, 8.0, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut xx, mut xy) = (Vec::new(), Vec::new());
    for _ in 0..200 {
        let (a, b) = (rng.random_range(-1.0..1.0f64), rng.random_range(-1.0..1.0f64));
        if a.abs() < 0.1 || b.abs() < 0.1 {
            continue;
        }
        xx.extend([a, b]);
        xy.push(if (a > 0.0) == (b > 0.0) { ClassLabel::Clean } else { ClassLabel::PhysicalDamage });
    }
    let mut worst_gap = 0.0f64;
    for (name, x, y, gamma) in [("blobs", &bx, &by, None), ("XOR", &xx, &xy, Some(2.0))] {
        let m = svm_train(x, 2, y, &SvmParams { gamma, ..svm_p.clone() }).unwrap();
        let correct = x.chunks(2).zip(y.iter()).filter(|(r, t)| m.predict(r).label == **t).count();
        ensure(correct == y.len(), || format!("SVM {name}: {correct}/{} on training set", y.len()))?;
        let gap = m.pairs.iter().map(|p| p.kkt_gap).fold(0.0, f64::max);
        ensure(gap < 1e-3, || format!("SVM {name}: KKT gap {gap:e}"))?;
        worst_gap = worst_gap.max(gap);
    }

    let (gx, gy) = blobs(40, &ClassLabel::ALL, 3.0, 3);
    let mut rises = 0;
    for growth in [Growth::Levelwise, Growth::Leafwise] {
        let m = gbdt_train(&gx, 2, &gy, &GbdtParams { rounds: 200, ..Default::default() }, growth).unwrap();
        ensure(m.loss_history.len() == 201, || "loss history length".into())?;
        rises += m.loss_history.windows(2).filter(|w| w[1] > w[0]).count();
    }
    ensure(rises == 0, || format!("GBDT log-loss rose in {rises} rounds"))?;

    let features = FeatureMatrix::new(
        pvdefect::fusion::Signature::new(vec![(BlockKind::Deep, 2)]).unwrap(),
        (0..by.len()).map(|i| format!("s{i}")).collect(),
        bx.clone(),
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let probes: Vec<[f64; 2]> = (0..200).map(|_| [rng.random_range(-12.0..12.0), rng.random_range(-12.0..12.0)]).collect();
    let params = TrainParams { gbdt: GbdtParams { rounds: 30, ..Default::default() }, ..Default::default() };
    for kind in ClassifierKind::ALL {
        let m = TrainedModel::fit(kind, &features, &by, &params, true).unwrap();
        let path = dir.path().join(format!("{kind}.pvml"));
        save_model(&m, &path).unwrap();
        let back = load_model::<f64>(&path).unwrap();
        for p in &probes {
            let (a, b) = (m.predict(p).unwrap(), back.predict(p).unwrap());
            ensure(a.label == b.label && a.score.to_bits() == b.score.to_bits(), || {
                format!("{kind}: prediction changed after reload")
            })?;
            ensure(a.scores.iter().zip(&b.scores).all(|(u, v)| u.to_bits() == v.to_bits()), || {
                format!("{kind}: scores changed")
            })?;
        }
    }
    let features32 = features.cast::<f32>();
    for kind in ClassifierKind::ALL {
        let m = TrainedModel::fit(kind, &features32, &by, &params, true).unwrap();
        let back = decode_model::<f32>(&encode_model(&m).unwrap()).unwrap();
        for p in &probes {
            let p = [p[0] as f32, p[1] as f32];
            let (a, b) = (m.predict(&p).unwrap(), back.predict(&p).unwrap());
            ensure(a.label == b.label && a.score.to_bits() == b.score.to_bits(), || format!("{kind} f32: prediction changed"))?;
        }
    }
    Ok(format!(
        "SVM 100% on blobs and XOR (max KKT gap {worst_gap:.1e}); GBDT loss non-increasing over 200 rounds (both growth modes); \
         reload bit-identical for 3 kinds x 2 widths"
    ))
}

/// Per-class counts from the expanded sample list, no matrix arithmetic.
fn naive_metrics(pairs: &[(usize, usize)], k: usize) -> [f64; 4] {
    let correct = pairs.iter().filter(|(t, p)| t == p).count();
    let (mut ps, mut rs, mut fs, mut active) = (0.0, 0.0, 0.0, 0.0);
    for c in 0..k {
        let tp = pairs.iter().filter(|&&(t, p)| t == c && p == c).count() as f64;
        let fp = pairs.iter().filter(|&&(t, p)| t != c && p == c).count() as f64;
        let fneg = pairs.iter().filter(|&&(t, p)| t == c && p != c).count() as f64;
        if tp + fp + fneg == 0.0 {
            continue;
        }
        let prec = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
        let rec = if tp + fneg > 0.0 { tp / (tp + fneg) } else { 0.0 };
        let f1 = if prec + rec > 0.0 { 2.0 * prec * rec / (prec + rec) } else { 0.0 };
        ps += prec;
        rs += rec;
        fs += f1;
        active += 1.0;
    }
    [correct as f64 / pairs.len() as f64, ps / active, rs / active, fs / active]
}

fn metrics_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4242);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let k = rng.random_range(2..=6);
        let counts: Vec<u64> = (0..k * k).map(|_| if rng.random_bool(0.3) { 0 } else { rng.random_range(0..20) }).collect();
        let mut counts = counts;
        counts[0] += 1;
        let cm = ConfusionMatrix::from_counts(k, counts.clone()).unwrap();
        let pairs: Vec<(usize, usize)> =
            (0..k * k).flat_map(|i| std::iter::repeat_n((i / k, i % k), counts[i] as usize)).collect();
        let m = compute_metrics(&cm, Averaging::Macro).unwrap();
        let want = naive_metrics(&pairs, k);
        for (g, w) in [m.accuracy, m.precision, m.recall, m.f1].iter().zip(want) {
            worst = worst.max((g - w).abs());
        }
    }
    ensure(worst <= 1e-12, || format!("max deviation {worst:e}"))?;
    let cm = ConfusionMatrix::from_counts(2, vec![4, 1, 1, 4]).unwrap();
    let m = compute_metrics(&cm, Averaging::Macro).unwrap();
    let fixture = [m.accuracy, m.precision, m.recall, m.f1];
    ensure(fixture.iter().all(|v| (v - 0.8).abs() < 1e-12), || format!("binary fixture {fixture:?}"))?;
    Ok(format!("100 random matrices, max deviation {worst:.1e}; binary fixture 0.8/0.8/0.8/0.8"))
}

struct E2e {
    dataset: LabeledDataset,
    features: FeatureMatrix<f64>,
}

fn e2e_features(corpus: &[(String, ClassLabel, ImageU8)], seed: u64) -> E2e {
    let pcfg = PreprocessConfig { target_size: (64, 64), ..Default::default() };
    let hcfg = HandcraftedConfig { hog_input: (32, 32), gabor_input: Some((64, 64)), ..Default::default() };
    let bank = GaborBank::new(&hcfg).unwrap();
    let which = [BlockKind::Lbp, BlockKind::Hog, BlockKind::Gabor];
    let mut vectors = Vec::new();
    let mut entries = Vec::new();
    for (id, label, img) in corpus {
        let clean = preprocess_pipeline(img, &pcfg).unwrap();
        let blocks = extract_with_bank::<f64>(&clean, &which, &hcfg, Some(&bank)).unwrap();
        vectors.push(fuse_blocks(id.clone(), &blocks).unwrap());
        entries.push(DatasetEntry::new(id.clone(), format!("{id}.png"), *label));
    }
    let hand = FeatureMatrix::from_vectors(vectors).unwrap();
    let emb: EmbeddingSet<f64> = synthetic_embeddings(corpus.iter().map(|(id, l, _)| (id.as_str(), *l)), 64, seed, 6.0).unwrap();
    let features = emb.to_matrix(hand.ids()).unwrap().join(&hand).unwrap();
    E2e { dataset: LabeledDataset::new(entries).unwrap(), features }
}

fn end_to_end() -> Outcome {
    let seed = 11;
    let start = Instant::now();
    let corpus = pvdefect::synth::synthetic_corpus(100, 64, seed).unwrap();
    let run = e2e_features(&corpus, seed);
    let extract_secs = start.elapsed().as_secs_f64();
    let cfg = GridConfig { seed, ..Default::default() };
    let rows = run_experiment_grid(&cfg, &run.dataset, &run.features).unwrap();
    let csv = render_report(&rows, ReportFormat::Csv, Averaging::Macro).unwrap();
    let secs = start.elapsed().as_secs_f64();

    ensure(run.features.len() == 600, || format!("{} samples", run.features.len()))?;
    ensure(rows.len() == 42, || format!("{} rows", rows.len()))?;
    let failed: Vec<&MetricsRow> = rows.iter().filter(|r| r.failed.is_some()).collect();
    ensure(failed.is_empty(), || format!("{} failed rows", failed.len()))?;
    let target =
        rows.iter().find(|r| r.feature_combo.to_string() == "DEEP+GABOR" && r.classifier == ClassifierKind::Svm).unwrap();
    let gabor = rows.iter().find(|r| r.feature_combo.to_string() == "GABOR" && r.classifier == ClassifierKind::Svm).unwrap();
    ensure(target.accuracy >= 95.0, || format!("DEEP+GABOR SVM accuracy {:.2}", target.accuracy))?;
    ensure(secs < 300.0, || format!("run took {secs:.0}s"))?;

    // determinism: re-extract a sample of images and rerun the grid
    let again = e2e_features(&corpus[..60], seed);
    let ids: Vec<String> = again.features.ids().to_vec();
    let original = run.features.subset(&ids).unwrap();
    ensure(original.data().iter().zip(again.features.data()).all(|(a, b)| a.to_bits() == b.to_bits()), || {
        "re-extracted features differ".into()
    })?;
    let rerun = run_experiment_grid(&GridConfig { jobs: 2, ..cfg }, &run.dataset, &run.features).unwrap();
    ensure(render_report(&rerun, ReportFormat::Csv, Averaging::Macro).unwrap() == csv, || "grid rerun differs".into())?;
    Ok(format!(
        "600 samples, 42 rows, deterministic; DEEP+GABOR SVM {:.2}% (GABOR SVM {:.2}%); extraction {extract_secs:.0}s, \
         extraction + grid {secs:.0}s",
        target.accuracy, gabor.accuracy
    ))
}

fn augmentation() -> Outcome {
    let counts = [
        (ClassLabel::Clean, 289),
        (ClassLabel::SnowCovered, 262),
        (ClassLabel::Dusty, 275),
        (ClassLabel::ElectricalFault, 225),
        (ClassLabel::PhysicalDamage, 225),
        (ClassLabel::BirdDroppings, 298),
    ];
    let entries: Vec<DatasetEntry> = counts
        .iter()
        .flat_map(|&(l, n)| (0..n).map(move |i| DatasetEntry::new(format!("{}_{i:03}", l.name()), format!("{i}.png"), l)))
        .collect();
    let ds = LabeledDataset::new(entries).unwrap();
    ensure(ds.len() == 1574, || format!("{} source entries", ds.len()))?;
    let dir = tempfile::tempdir().unwrap();
    let plan = augment_dataset(&ds, &AugmentConfig { seed: 5, ..Default::default() }, dir.path()).unwrap();
    let aug = &plan.dataset;
    ensure(aug.len() == 6296, || format!("{} augmented entries", aug.len()))?;
    let before = ds.class_counts();
    let after = aug.class_counts();
    for (l, n) in &before {
        let m = after[l];
        ensure(m == 4 * n, || format!("{l}: {n} -> {m}"))?;
        let (p0, p1) = (*n as f64 / 1574.0, m as f64 / 6296.0);
        ensure((p0 - p1).abs() < 1e-12, || format!("{l} proportion changed"))?;
    }
    let split = stratified_split(aug, 0.2, 5).unwrap();
    let by_id: BTreeMap<&str, Split> = split.entries().iter().map(|e| (e.id.as_str(), e.split)).collect();
    let leaks = split.entries().iter().filter(|e| e.parent.as_deref().is_some_and(|p| by_id[p] != e.split)).count();
    ensure(leaks == 0, || format!("{leaks} children split away from their parent"))?;
    let test = split.split_entries(Split::Test).count();
    Ok(format!("1574 -> 6296, per-class x4, proportions preserved; 0 leaks across {test} test entries"))
}

/// Runs against the public dataset when `PVDEFECT_DATA_DIR` (class directories)
/// and `PVDEFECT_PVEM` (embeddings keyed by manifest id) are both set.
fn real_data() -> Option<Outcome> {
    let dir = PathBuf::from(std::env::var_os("PVDEFECT_DATA_DIR")?);
    let pvem = PathBuf::from(std::env::var_os("PVDEFECT_PVEM")?);
    Some(real_data_run(&dir, &pvem))
}

fn real_data_run(dir: &Path, pvem: &Path) -> Outcome {
    let mut entries = Vec::new();
    let mut classes: Vec<_> = std::fs::read_dir(dir).map_err(|e| e.to_string())?.filter_map(Result::ok).collect();
    classes.sort_by_key(|e| e.file_name());
    for class in classes {
        let Some(label) = ClassLabel::from_dir_name(&class.file_name().to_string_lossy()) else { continue };
        let mut files: Vec<_> = std::fs::read_dir(class.path()).map_err(|e| e.to_string())?.filter_map(Result::ok).collect();
        files.sort_by_key(|e| e.file_name());
        for f in files {
            let stem = f.path().file_stem().unwrap_or_default().to_string_lossy().into_owned();
            entries.push(DatasetEntry::new(format!("{}/{stem}", label.name()), f.path(), label));
        }
    }
    let ds = LabeledDataset::new(entries).map_err(|e| e.to_string())?;
    let emb = EmbeddingSet::<f64>::load(pvem).map_err(|e| e.to_string())?;
    let pcfg = PreprocessConfig::default();
    let hcfg = HandcraftedConfig::default();
    let bank = GaborBank::new(&hcfg).map_err(|e| e.to_string())?;
    let mut vectors = Vec::new();
    for e in ds.entries() {
        let img = load_image(&e.path).map_err(|err| format!("{}: {err}", e.path.display()))?;
        let clean = preprocess_pipeline(&img, &pcfg).map_err(|err| err.to_string())?;
        let blocks = extract_with_bank::<f64>(&clean, &[BlockKind::Gabor], &hcfg, Some(&bank)).map_err(|err| err.to_string())?;
        vectors.push(fuse_blocks(e.id.clone(), &blocks).map_err(|err| err.to_string())?);
    }
    let gabor = FeatureMatrix::from_vectors(vectors).map_err(|e| e.to_string())?;
    let features = emb.to_matrix(gabor.ids()).map_err(|e| e.to_string())?.join(&gabor).map_err(|e| e.to_string())?;
    let cfg = GridConfig {
        combos: vec!["DEEP+GABOR".parse().unwrap(), "GABOR".parse().unwrap()],
        classifiers: vec![ClassifierKind::Svm],
        ..Default::default()
    };
    let rows = run_experiment_grid(&cfg, &ds, &features).map_err(|e| e.to_string())?;
    let (hybrid, gabor) = (rows[0].accuracy, rows[1].accuracy);
    let detail = format!("DEEP+GABOR SVM {hybrid:.2}%, GABOR SVM {gabor:.2}%");
    ensure(hybrid >= 90.0 && hybrid - gabor >= 5.0, || detail.clone())?;
    Ok(detail)
}

fn main() {
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 6] = [
        ("kernel oracle suite", kernel_oracles),
        ("analytic fixpoints", analytic_fixpoints),
        ("classifier correctness", classifier_correctness),
        ("metrics oracle", metrics_oracle),
        ("end-to-end synthetic run", end_to_end),
        ("augmentation expansion", augmentation),
    ];
    let mut failures = 0;
    for (name, f) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default())
        });
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failures += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    match real_data() {
        None => println!("SKIP real-data run: PVDEFECT_DATA_DIR and PVDEFECT_PVEM not set"),
        Some(Ok(detail)) => println!("PASS real-data run: {detail}"),
        Some(Err(detail)) => {
            failures += 1;
            println!("FAIL real-data run: {detail}");
        }
    }
    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
}
