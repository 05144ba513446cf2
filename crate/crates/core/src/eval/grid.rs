use std::path::PathBuf;

use log::{debug, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::dataset::{DatasetError, LabeledDataset, Split};
use super::metrics::{compute_metrics, Averaging, ConfusionMatrix};
use super::split::stratified_split;
use crate::classifiers::{ClassifierError, ClassifierKind, TrainParams, TrainedModel};
use crate::fusion::{BlockKind, FeatureCombo, FeatureMatrix, FusionError};
use crate::label::ClassLabel;
use crate::scalar::Real;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("no features for block {0}")]
    MissingBlockFeatures(BlockKind),
    #[error("no features for sample {0:?}")]
    MissingSampleFeatures(String),
    #[error("grid has no cells")]
    EmptyGrid,
    #[error("{split} split is empty")]
    EmptySplit { split: &'static str },
    #[error("invalid grid config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error(transparent)]
    Fusion(#[from] FusionError),
    #[error("thread pool: {0}")]
    Pool(String),
}

/// One cell of the grid. Metrics are percentages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub feature_combo: FeatureCombo,
    pub classifier: ClassifierKind,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confusion: Option<ConfusionMatrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failed: Option<String>,
}

impl MetricsRow {
    pub fn from_confusion(
        feature_combo: FeatureCombo,
        classifier: ClassifierKind,
        cm: ConfusionMatrix,
        averaging: Averaging,
    ) -> Result<Self, super::metrics::MetricsError> {
        let m = compute_metrics(&cm, averaging)?;
        Ok(Self {
            feature_combo,
            classifier,
            accuracy: 100.0 * m.accuracy,
            precision: 100.0 * m.precision,
            recall: 100.0 * m.recall,
            f1: 100.0 * m.f1,
            confusion: Some(cm),
            failed: None,
        })
    }

    pub fn failed(feature_combo: FeatureCombo, classifier: ClassifierKind, reason: String) -> Self {
        Self {
            feature_combo,
            classifier,
            accuracy: 0.0,
            precision: 0.0,
            recall: 0.0,
            f1: 0.0,
            confusion: None,
            failed: Some(reason),
        }
    }
}

/// The fourteen feature combinations in report order.
pub fn default_combos() -> Vec<FeatureCombo> {
    use BlockKind::{Deep as D, Gabor as G, Hog as H, Lbp as L};
    [
        vec![L],
        vec![G],
        vec![H],
        vec![L, H],
        vec![H, G],
        vec![L, G],
        vec![L, H, G],
        vec![D],
        vec![D, L],
        vec![D, G],
        vec![D, H],
        vec![D, L, H],
        vec![D, G, H],
        vec![D, L, H, G],
    ]
    .into_iter()
    .map(|b| FeatureCombo::new(b).expect("static combo"))
    .collect()
}

fn default_classifiers() -> Vec<ClassifierKind> {
    ClassifierKind::ALL.to_vec()
}

fn default_test_frac() -> f64 {
    0.2
}

fn default_true() -> bool {
    true
}

fn default_jobs() -> usize {
    1
}

/// Artifact locations, used by the command-line front end.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridPaths {
    pub manifest: Option<PathBuf>,
    pub features: Vec<PathBuf>,
    pub embeddings: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "default_combos")]
    pub combos: Vec<FeatureCombo>,
    #[serde(default = "default_classifiers")]
    pub classifiers: Vec<ClassifierKind>,
    #[serde(default)]
    pub params: TrainParams,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_test_frac")]
    pub test_frac: f64,
    #[serde(default = "default_true")]
    pub standardize: bool,
    #[serde(default = "default_jobs")]
    pub jobs: usize,
    #[serde(default)]
    pub averaging: Averaging,
    #[serde(default)]
    pub paths: GridPaths,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            combos: default_combos(),
            classifiers: default_classifiers(),
            params: TrainParams::default(),
            seed: 0,
            test_frac: default_test_frac(),
            standardize: true,
            jobs: 1,
            averaging: Averaging::Macro,
            paths: GridPaths::default(),
        }
    }
}

impl GridConfig {
    pub fn validate(&self) -> Result<(), GridError> {
        if self.combos.is_empty() || self.classifiers.is_empty() {
            return Err(GridError::EmptyGrid);
        }
        if !(0.0..1.0).contains(&self.test_frac) || self.test_frac == 0.0 {
            return Err(GridError::InvalidConfig(format!("test_frac {} not in (0, 1)", self.test_frac)));
        }
        if self.jobs == 0 {
            return Err(GridError::InvalidConfig("jobs must be at least 1".into()));
        }
        self.params.validate()?;
        Ok(())
    }

    /// Cells in report order: combos outer, classifiers inner.
    pub fn cells(&self) -> Vec<(FeatureCombo, ClassifierKind)> {
        self.combos.iter().flat_map(|c| self.classifiers.iter().map(move |&k| (c.clone(), k))).collect()
    }
}

struct SplitData<T> {
    train: FeatureMatrix<T>,
    train_y: Vec<ClassLabel>,
    test: FeatureMatrix<T>,
    test_y: Vec<ClassLabel>,
}

fn prepare<T: Real>(cfg: &GridConfig, ds: &LabeledDataset, features: &FeatureMatrix<T>) -> Result<SplitData<T>, GridError> {
    for combo in &cfg.combos {
        for &b in combo.blocks() {
            if !features.signature().contains(b) {
                return Err(GridError::MissingBlockFeatures(b));
            }
        }
    }
    let split;
    let ds = if ds.entries().iter().any(|e| e.split == Split::Unassigned) {
        split = stratified_split(ds, cfg.test_frac, cfg.seed)?;
        &split
    } else {
        ds
    };
    let index = features.index_of();
    let (mut train_ids, mut train_y, mut test_ids, mut test_y) = (vec![], vec![], vec![], vec![]);
    for e in ds.entries() {
        if !index.contains_key(e.id.as_str()) {
            return Err(GridError::MissingSampleFeatures(e.id.clone()));
        }
        let (ids, ys) = if e.split == Split::Test { (&mut test_ids, &mut test_y) } else { (&mut train_ids, &mut train_y) };
        ids.push(e.id.clone());
        ys.push(e.label);
    }
    if train_ids.is_empty() {
        return Err(GridError::EmptySplit { split: "train" });
    }
    if test_ids.is_empty() {
        return Err(GridError::EmptySplit { split: "test" });
    }
    Ok(SplitData { train: features.subset(&train_ids)?, train_y, test: features.subset(&test_ids)?, test_y })
}

fn run_cell<T: Real>(
    cfg: &GridConfig,
    data: &SplitData<T>,
    combo: &FeatureCombo,
    kind: ClassifierKind,
) -> Result<ConfusionMatrix, GridError> {
    let blocks = combo.canonical();
    let train = data.train.select(&blocks)?;
    let test = data.test.select(&blocks)?;
    let model = TrainedModel::fit(kind, &train, &data.train_y, &cfg.params, cfg.standardize)?;
    let pred: Vec<ClassLabel> = model.predict_matrix(&test)?.into_iter().map(|p| p.label).collect();
    Ok(ConfusionMatrix::from_labels(&data.test_y, &pred).expect("labels are in range"))
}

/// Trains and scores every (combo, classifier) cell.
///
/// `features` must hold every block referenced by the config for every sample
/// of `ds`. The dataset is split with [`stratified_split`] unless all entries
/// already carry a split. A cell whose training fails yields a row marked
/// failed; the remaining cells still run. Rows come back in [`GridConfig::cells`]
/// order regardless of `jobs`.
pub fn run_experiment_grid<T: Real>(
    cfg: &GridConfig,
    ds: &LabeledDataset,
    features: &FeatureMatrix<T>,
) -> Result<Vec<MetricsRow>, GridError> {
    cfg.validate()?;
    let data = prepare(cfg, ds, features)?;
    debug!("grid: {} train, {} test samples", data.train_y.len(), data.test_y.len());
    let cells = cfg.cells();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.jobs).build().map_err(|e| GridError::Pool(e.to_string()))?;
    let rows = pool.install(|| {
        cells
            .par_iter()
            .map(|(combo, kind)| {
                let row = run_cell(cfg, &data, combo, *kind).map_err(|e| e.to_string()).and_then(|cm| {
                    MetricsRow::from_confusion(combo.clone(), *kind, cm, cfg.averaging).map_err(|e| e.to_string())
                });
                match row {
                    Ok(r) => {
                        debug!("{combo} {kind}: accuracy {:.2}", r.accuracy);
                        r
                    }
                    Err(reason) => {
                        warn!("{combo} {kind} failed: {reason}");
                        MetricsRow::failed(combo.clone(), *kind, reason)
                    }
                }
            })
            .collect()
    });
    Ok(rows)
}
