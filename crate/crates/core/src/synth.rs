//! Seeded stand-in panel images, one texture family per class.
//!
//! Used by tests and demos in place of the real photographs. Every family has
//! its own dominant spatial frequency and orientation, so the handcrafted
//! descriptors can tell them apart, plus per-sample jitter and pixel noise.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::StandardNormal;

use crate::eval::{DatasetEntry, LabeledDataset, Provenance};
use crate::imagecore::{save_png, ImageError, ImageU8};
use crate::label::ClassLabel;
use crate::rng::keyed_rng;

const SALT: u64 = 0x7E87_0BE5;

struct Spot {
    x: f64,
    y: f64,
    r: f64,
}

/// RGB texture for one sample, fully determined by `(seed, id, label, size)`.
pub fn synthetic_texture(label: ClassLabel, id: &str, size: usize, seed: u64) -> Result<ImageU8, ImageError> {
    let mut rng = keyed_rng(seed, id, SALT);
    let s = size as f64;
    let (px, py) = (rng.random_range(0.0..2.0 * PI), rng.random_range(0.0..2.0 * PI));
    let gain = rng.random_range(0.8..1.2);
    let tilt = rng.random_range(-0.15..0.15);
    let spots: Vec<Spot> = match label {
        ClassLabel::ElectricalFault => (0..rng.random_range(1..=2))
            .map(|_| Spot {
                x: rng.random_range(0.2..0.8) * s,
                y: rng.random_range(0.2..0.8) * s,
                r: rng.random_range(0.12..0.2) * s,
            })
            .collect(),
        ClassLabel::BirdDroppings => (0..rng.random_range(4..=7))
            .map(|_| Spot {
                x: rng.random_range(0.0..1.0) * s,
                y: rng.random_range(0.0..1.0) * s,
                r: rng.random_range(0.04..0.08) * s,
            })
            .collect(),
        _ => Vec::new(),
    };
    let noise_sd = match label {
        ClassLabel::Dusty => 28.0,
        ClassLabel::SnowCovered => 4.0,
        _ => 8.0,
    };

    let mut base = vec![0.0f64; size * size];
    let mut tint = vec![[0.0f64; 3]; size * size];
    for y in 0..size {
        for x in 0..size {
            let (fx, fy) = (x as f64, y as f64);
            let (v, rgb): (f64, [f64; 3]) = match label {
                ClassLabel::Clean => {
                    let gx = (2.0 * PI * fx / 16.0 + px).cos();
                    let gy = (2.0 * PI * fy / 16.0 + py).cos();
                    (70.0 + 45.0 * gain * gx.max(gy).powi(8), [0.55, 0.7, 1.2])
                }
                ClassLabel::SnowCovered => {
                    let w = (2.0 * PI * (fx + tilt * fy) / 48.0 + px).sin() * (2.0 * PI * fy / 40.0 + py).cos();
                    (215.0 + 20.0 * gain * w, [1.0, 1.0, 1.03])
                }
                ClassLabel::Dusty => (135.0 + 15.0 * gain * (2.0 * PI * fy / 32.0 + py).sin(), [1.15, 1.0, 0.75]),
                ClassLabel::ElectricalFault => {
                    let stripes = (2.0 * PI * (fy + tilt * fx) / 8.0 + py).cos();
                    let burn: f64 =
                        spots.iter().map(|sp| (-((fx - sp.x).powi(2) + (fy - sp.y).powi(2)) / (2.0 * sp.r * sp.r)).exp()).sum();
                    (80.0 + 35.0 * gain * stripes - 55.0 * burn.min(1.0), [0.8, 0.75, 1.1])
                }
                ClassLabel::PhysicalDamage => {
                    let d = (2.0 * PI * (fx + fy) / (8.0 * 2f64.sqrt()) + px).cos();
                    let e = (2.0 * PI * (fx - fy) / 23.0 + py).cos();
                    (75.0 + 60.0 * gain * d.max(0.0).powi(6) + 10.0 * e, [0.6, 0.7, 1.15])
                }
                ClassLabel::BirdDroppings => {
                    let hit = spots.iter().any(|sp| (fx - sp.x).powi(2) + (fy - sp.y).powi(2) <= sp.r * sp.r);
                    (if hit { 235.0 } else { 65.0 + 10.0 * (2.0 * PI * fx / 24.0 + px).sin() }, [0.6, 0.7, 1.2])
                }
            };
            base[y * size + x] = v;
            tint[y * size + x] = rgb;
        }
    }
    let mut data = Vec::with_capacity(size * size * 3);
    for (v, rgb) in base.iter().zip(&tint) {
        let n: f64 = rng.sample::<f64, _>(StandardNormal) * noise_sd;
        for t in rgb {
            data.push((v * t + n).round().clamp(0.0, 255.0) as u8);
        }
    }
    ImageU8::new(size, size, 3, data)
}

/// `n_per_class` samples per class, ids `<class>_<index>`, in class order.
pub fn synthetic_corpus(n_per_class: usize, size: usize, seed: u64) -> Result<Vec<(String, ClassLabel, ImageU8)>, ImageError> {
    let mut out = Vec::with_capacity(n_per_class * ClassLabel::COUNT);
    for label in ClassLabel::ALL {
        for i in 0..n_per_class {
            let id = format!("{}_{i:04}", label.name());
            let img = synthetic_texture(label, &id, size, seed)?;
            out.push((id, label, img));
        }
    }
    Ok(out)
}

/// Writes a corpus as `dir/<class>/<id>.png` and returns the matching dataset.
pub fn write_synthetic_corpus(dir: &Path, n_per_class: usize, size: usize, seed: u64) -> Result<LabeledDataset, ImageError> {
    let mut entries = Vec::new();
    for (id, label, img) in synthetic_corpus(n_per_class, size, seed)? {
        let class_dir = dir.join(label.name());
        std::fs::create_dir_all(&class_dir)?;
        let path: PathBuf = class_dir.join(format!("{id}.png"));
        save_png(&img, &path)?;
        entries.push(DatasetEntry::new(id, path, label));
    }
    let ds = LabeledDataset::new(entries).expect("synthetic ids are unique");
    Ok(ds.with_provenance(Provenance { source: "synthetic".into(), seed: Some(seed) }))
}
