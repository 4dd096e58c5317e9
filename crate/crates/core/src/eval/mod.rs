//! Metrics, dense-grid prediction and a reference interpolation baseline.

pub mod baseline;
pub mod grid;
pub mod metrics;

pub use baseline::idw_baseline;
pub use grid::{compare_tables, predict_grid, predict_points, tabulate, FieldTable, GridSpec};
pub use metrics::{mate, mate_db, rms_error_db, spearman, MetricsReport};
