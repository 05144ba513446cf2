//! Dataset splits, classification metrics and the experiment grid.

mod dataset;
mod grid;
mod metrics;
mod report;
mod split;

pub use dataset::{DatasetEntry, DatasetError, LabeledDataset, Provenance, Split};
pub use grid::{default_combos, run_experiment_grid, GridConfig, GridError, GridPaths, MetricsRow};
pub use metrics::{compute_metrics, Averaging, ConfusionMatrix, Metrics, MetricsError, UndefinedTerm};
pub use report::{parse_json_report, render_report, ReportError, ReportFormat};
pub use split::stratified_split;
