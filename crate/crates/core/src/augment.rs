//! Seeded geometric augmentation: quarter-turn rotation, mirroring, translation.
//!
//! Each source sample yields itself plus one rotated, one flipped and one
//! translated variant. Variant parameters come from a generator keyed by the
//! run seed and the sample id, so the plan is identical under any iteration
//! order.

use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::{DatasetEntry, DatasetError, LabeledDataset, Provenance};
use crate::imagecore::{reflect_index, ImageU8};
use crate::rng::keyed_rng;

#[derive(Debug, Error)]
pub enum AugmentError {
    #[error("quarter turns must be 1, 2 or 3, got {0}")]
    InvalidTurns(u8),
    #[error("shift ({dx}, {dy}) does not fit a {width}x{height} image")]
    ShiftTooLarge { dx: isize, dy: isize, width: usize, height: usize },
    #[error("cannot augment an empty dataset")]
    EmptyDataset,
    #[error("invalid augmentation config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlipAxis {
    /// Mirror left-right.
    Horizontal,
    /// Mirror top-bottom.
    Vertical,
}

/// How pixels uncovered by a translation are filled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FillPolicy {
    /// Mirror the image across its border (`cba|abc`).
    Reflect,
    /// Repeat the nearest border pixel.
    Replicate,
    Constant(u8),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentConfig {
    pub seed: u64,
    /// Degrees; each must be 90, 180 or 270.
    pub rotation_angles: Vec<u32>,
    pub flip_modes: Vec<FlipAxis>,
    pub max_translate_frac: f64,
    pub translate_fill: FillPolicy,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            rotation_angles: vec![90, 180, 270],
            flip_modes: vec![FlipAxis::Horizontal, FlipAxis::Vertical],
            max_translate_frac: 0.10,
            translate_fill: FillPolicy::Reflect,
        }
    }
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<(), AugmentError> {
        if self.rotation_angles.is_empty() || self.flip_modes.is_empty() {
            return Err(AugmentError::InvalidConfig("rotation and flip sets must be non-empty".into()));
        }
        if let Some(a) = self.rotation_angles.iter().find(|a| ![90, 180, 270].contains(*a)) {
            return Err(AugmentError::InvalidConfig(format!("rotation angle {a} is not a quarter turn")));
        }
        if !(self.max_translate_frac > 0.0 && self.max_translate_frac <= 0.25) {
            return Err(AugmentError::InvalidConfig(format!(
                "max_translate_frac must be in (0, 0.25], got {}",
                self.max_translate_frac
            )));
        }
        Ok(())
    }
}

/// Counter-clockwise rotation by `quarter_turns × 90°`.
pub fn rotate90(img: &ImageU8, quarter_turns: u8) -> Result<ImageU8, AugmentError> {
    let (w, h, ch) = (img.width(), img.height(), img.channels());
    let out = match quarter_turns {
        // output pixel (x, y) reads source (w-1-y, x)
        1 => ImageU8::from_fn(h, w, ch, |x, y, c| img.get(w - 1 - y, x, c)),
        2 => ImageU8::from_fn(w, h, ch, |x, y, c| img.get(w - 1 - x, h - 1 - y, c)),
        // output pixel (x, y) reads source (y, h-1-x)
        3 => ImageU8::from_fn(h, w, ch, |x, y, c| img.get(y, h - 1 - x, c)),
        t => return Err(AugmentError::InvalidTurns(t)),
    };
    Ok(out.expect("rotation preserves geometry"))
}

pub fn flip(img: &ImageU8, axis: FlipAxis) -> ImageU8 {
    let (w, h, ch) = (img.width(), img.height(), img.channels());
    let out = match axis {
        FlipAxis::Horizontal => ImageU8::from_fn(w, h, ch, |x, y, c| img.get(w - 1 - x, y, c)),
        FlipAxis::Vertical => ImageU8::from_fn(w, h, ch, |x, y, c| img.get(x, h - 1 - y, c)),
    };
    out.expect("flip preserves geometry")
}

/// Shifts content by `(dx, dy)`; output pixel `(x, y)` shows source `(x-dx, y-dy)`.
pub fn translate(img: &ImageU8, dx: isize, dy: isize, fill: FillPolicy) -> Result<ImageU8, AugmentError> {
    let (w, h, ch) = (img.width(), img.height(), img.channels());
    if dx.unsigned_abs() >= w || dy.unsigned_abs() >= h {
        return Err(AugmentError::ShiftTooLarge { dx, dy, width: w, height: h });
    }
    let out = ImageU8::from_fn(w, h, ch, |x, y, c| {
        let sx = x as isize - dx;
        let sy = y as isize - dy;
        let inside = sx >= 0 && sy >= 0 && (sx as usize) < w && (sy as usize) < h;
        if inside {
            return img.get(sx as usize, sy as usize, c);
        }
        match fill {
            FillPolicy::Reflect => img.get(reflect_index(sx, w), reflect_index(sy, h), c),
            FillPolicy::Replicate => img.get(sx.clamp(0, w as isize - 1) as usize, sy.clamp(0, h as isize - 1) as usize, c),
            FillPolicy::Constant(v) => v,
        }
    });
    Ok(out.expect("translation preserves geometry"))
}

/// A single augmentation applied to a source image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transform {
    Rotate {
        quarter_turns: u8,
    },
    Flip {
        axis: FlipAxis,
    },
    /// Shift as a fraction of width/height; resolved to whole pixels per image.
    Translate {
        fx: f64,
        fy: f64,
        fill: FillPolicy,
    },
}

impl Transform {
    pub fn tag(&self) -> &'static str {
        match self {
            Transform::Rotate { .. } => "rot",
            Transform::Flip { .. } => "flip",
            Transform::Translate { .. } => "shift",
        }
    }

    /// Pixel shift for an image of the given size.
    pub fn pixel_shift(fx: f64, fy: f64, width: usize, height: usize) -> (isize, isize) {
        let resolve = |f: f64, n: usize| {
            let limit = n as isize - 1;
            ((f * n as f64).round() as isize).clamp(-limit, limit)
        };
        (resolve(fx, width), resolve(fy, height))
    }

    pub fn apply(&self, img: &ImageU8) -> Result<ImageU8, AugmentError> {
        match *self {
            Transform::Rotate { quarter_turns } => rotate90(img, quarter_turns),
            Transform::Flip { axis } => Ok(flip(img, axis)),
            Transform::Translate { fx, fy, fill } => {
                let (dx, dy) = Self::pixel_shift(fx, fy, img.width(), img.height());
                translate(img, dx, dy, fill)
            }
        }
    }
}

/// One image to synthesise: read `source`, apply `transform`, write to the entry path.
#[derive(Debug, Clone, PartialEq)]
pub struct Variant {
    pub id: String,
    pub parent_id: String,
    pub source: PathBuf,
    pub target: PathBuf,
    pub transform: Transform,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentPlan {
    pub dataset: LabeledDataset,
    pub variants: Vec<Variant>,
}

/// The three transforms drawn for sample `id`.
pub fn draw_transforms(id: &str, cfg: &AugmentConfig) -> [Transform; 3] {
    let mut rng = keyed_rng(cfg.seed, id, 0xA0C4);
    let angle = cfg.rotation_angles[rng.random_range(0..cfg.rotation_angles.len())];
    let axis = cfg.flip_modes[rng.random_range(0..cfg.flip_modes.len())];
    let m = cfg.max_translate_frac;
    let fx = rng.random_range(-m..=m);
    let fy = rng.random_range(-m..=m);
    [
        Transform::Rotate { quarter_turns: (angle / 90) as u8 },
        Transform::Flip { axis },
        Transform::Translate { fx, fy, fill: cfg.translate_fill },
    ]
}

/// File-name-safe form of a sample id: anything outside `[A-Za-z0-9-_.@]` becomes `_`.
pub fn file_stem_for(id: &str) -> String {
    id.chars().map(|c| if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.' | '@') { c } else { '_' }).collect()
}

/// Plans the fourfold expansion of `ds`. Variant images are written under `out_dir`.
///
/// Variant ids are `<parent>@rot`, `<parent>@flip` and `<parent>@shift`; labels
/// and split tags are inherited and `parent` records the lineage.
pub fn augment_dataset(ds: &LabeledDataset, cfg: &AugmentConfig, out_dir: &Path) -> Result<AugmentPlan, AugmentError> {
    cfg.validate()?;
    if ds.is_empty() {
        return Err(AugmentError::EmptyDataset);
    }
    let mut entries = Vec::with_capacity(ds.len() * 4);
    let mut variants = Vec::with_capacity(ds.len() * 3);
    for e in ds.entries() {
        entries.push(e.clone());
        for t in draw_transforms(&e.id, cfg) {
            let id = format!("{}@{}", e.id, t.tag());
            let target = out_dir.join(format!("{}.png", file_stem_for(&id)));
            entries.push(DatasetEntry {
                id: id.clone(),
                path: target.clone(),
                label: e.label,
                split: e.split,
                parent: Some(e.id.clone()),
            });
            variants.push(Variant { id, parent_id: e.id.clone(), source: e.path.clone(), target, transform: t });
        }
    }
    let dataset =
        LabeledDataset::new(entries)?.with_provenance(Provenance { source: ds.provenance.source.clone(), seed: Some(cfg.seed) });
    Ok(AugmentPlan { dataset, variants })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::label::ClassLabel;
    use proptest::prelude::{any, prop_assert_eq, proptest};

    fn random_image(w: usize, h: usize, ch: usize, seed: u64) -> ImageU8 {
        let mut rng = keyed_rng(seed, "img", 0);
        ImageU8::from_fn(w, h, ch, |_, _, _| rng.random()).unwrap()
    }

    fn histogram(img: &ImageU8) -> Vec<usize> {
        let mut h = vec![0; 256 * img.channels()];
        for (i, &v) in img.data().iter().enumerate() {
            h[(i % img.channels()) * 256 + usize::from(v)] += 1;
        }
        h
    }

    #[test]
    fn quarter_turn_of_a_row_is_counter_clockwise() {
        let img = ImageU8::new(2, 1, 1, vec![10, 20]).unwrap();
        let r = rotate90(&img, 1).unwrap();
        assert_eq!((r.width(), r.height()), (1, 2));
        // the right end moves to the top
        assert_eq!(r.data(), &[20, 10]);
        assert_eq!(rotate90(&img, 3).unwrap().data(), &[10, 20]);
    }

    #[test]
    fn invalid_turns() {
        let img = ImageU8::filled(2, 2, 1, 0).unwrap();
        assert!(matches!(rotate90(&img, 0), Err(AugmentError::InvalidTurns(0))));
        assert!(matches!(rotate90(&img, 4), Err(AugmentError::InvalidTurns(4))));
    }

    #[test]
    fn horizontal_flip_of_a_row() {
        let img = ImageU8::new(3, 1, 1, vec![1, 2, 3]).unwrap();
        assert_eq!(flip(&img, FlipAxis::Horizontal).data(), &[3, 2, 1]);
        assert_eq!(flip(&img, FlipAxis::Vertical).data(), &[1, 2, 3]);
    }

    #[test]
    fn translate_reflect_rule() {
        let img = ImageU8::new(3, 1, 1, vec![1, 2, 3]).unwrap();
        assert_eq!(translate(&img, 1, 0, FillPolicy::Reflect).unwrap().data(), &[1, 1, 2]);
        assert_eq!(translate(&img, -2, 0, FillPolicy::Reflect).unwrap().data(), &[3, 3, 2]);
        assert_eq!(translate(&img, 1, 0, FillPolicy::Constant(9)).unwrap().data(), &[9, 1, 2]);
        assert_eq!(translate(&img, -1, 0, FillPolicy::Replicate).unwrap().data(), &[2, 3, 3]);
        assert_eq!(translate(&img, 0, 0, FillPolicy::Reflect).unwrap(), img);
        assert!(matches!(translate(&img, 3, 0, FillPolicy::Reflect), Err(AugmentError::ShiftTooLarge { .. })));
    }

    #[test]
    fn pixel_shift_stays_inside_image() {
        assert_eq!(Transform::pixel_shift(0.1, -0.1, 640, 480), (64, -48));
        assert_eq!(Transform::pixel_shift(0.25, 0.25, 2, 1), (1, 0));
    }

    #[test]
    fn one_image_becomes_four() {
        let ds = LabeledDataset::new(vec![DatasetEntry::new("a/1", "in/a1.png", ClassLabel::Dusty)]).unwrap();
        let plan = augment_dataset(&ds, &AugmentConfig::default(), Path::new("out")).unwrap();
        let ids: Vec<&str> = plan.dataset.entries().iter().map(|e| e.id.as_str()).collect();
        assert_eq!(ids, vec!["a/1", "a/1@rot", "a/1@flip", "a/1@shift"]);
        assert!(plan.dataset.entries().iter().all(|e| e.label == ClassLabel::Dusty));
        assert_eq!(plan.variants.len(), 3);
        assert_eq!(plan.variants[0].target, Path::new("out/a_1@rot.png"));
        assert_eq!(plan.variants[0].source, Path::new("in/a1.png"));
    }

    #[test]
    fn plan_depends_only_on_seed() {
        let ds = LabeledDataset::new(
            (0..10).map(|i| DatasetEntry::new(format!("s{i}"), format!("{i}.png"), ClassLabel::Clean)).collect(),
        )
        .unwrap();
        let cfg = AugmentConfig { seed: 5, ..Default::default() };
        let a = augment_dataset(&ds, &cfg, Path::new("o")).unwrap();
        let b = augment_dataset(&ds, &cfg, Path::new("o")).unwrap();
        assert_eq!(a, b);
        let c = augment_dataset(&ds, &AugmentConfig { seed: 6, ..cfg }, Path::new("o")).unwrap();
        let shifts = |p: &AugmentPlan| -> Vec<Transform> {
            p.variants.iter().filter(|v| v.transform.tag() == "shift").map(|v| v.transform).collect()
        };
        assert_ne!(shifts(&a), shifts(&c));
    }

    #[test]
    fn config_validation() {
        assert!(AugmentConfig { rotation_angles: vec![45], ..Default::default() }.validate().is_err());
        assert!(AugmentConfig { flip_modes: vec![], ..Default::default() }.validate().is_err());
        assert!(AugmentConfig { max_translate_frac: 0.3, ..Default::default() }.validate().is_err());
        assert!(AugmentConfig { max_translate_frac: 0.0, ..Default::default() }.validate().is_err());
        let empty = LabeledDataset::default();
        assert!(matches!(augment_dataset(&empty, &AugmentConfig::default(), Path::new("o")), Err(AugmentError::EmptyDataset)));
    }

    proptest! {
        #[test]
        fn four_quarter_turns_are_identity(w in 1usize..7, h in 1usize..7, seed in any::<u64>()) {
            let img = random_image(w, h, 3, seed);
            let mut r = img.clone();
            for _ in 0..4 {
                r = rotate90(&r, 1).unwrap();
            }
            prop_assert_eq!(r, img);
        }

        #[test]
        fn half_turn_is_double_flip(w in 1usize..7, h in 1usize..7, seed in any::<u64>()) {
            let img = random_image(w, h, 1, seed);
            let both = flip(&flip(&img, FlipAxis::Vertical), FlipAxis::Horizontal);
            prop_assert_eq!(rotate90(&img, 2).unwrap(), both);
        }

        #[test]
        fn flips_are_involutions_and_permutations(w in 1usize..7, h in 1usize..7, seed in any::<u64>()) {
            let img = random_image(w, h, 3, seed);
            for axis in [FlipAxis::Horizontal, FlipAxis::Vertical] {
                let f = flip(&img, axis);
                prop_assert_eq!(histogram(&f), histogram(&img));
                prop_assert_eq!(flip(&f, axis), img.clone());
            }
            for t in 1..=3 {
                prop_assert_eq!(histogram(&rotate90(&img, t).unwrap()), histogram(&img));
            }
        }

        #[test]
        fn constant_images_survive_any_shift(w in 2usize..9, h in 2usize..9, v in any::<u8>(), sx in -1.0f64..1.0, sy in -1.0f64..1.0) {
            let img = ImageU8::filled(w, h, 3, v).unwrap();
            let dx = (sx * (w - 1) as f64) as isize;
            let dy = (sy * (h - 1) as f64) as isize;
            for fill in [FillPolicy::Reflect, FillPolicy::Replicate] {
                prop_assert_eq!(translate(&img, dx, dy, fill).unwrap(), img.clone());
            }
        }
    }
}
