//! Data loading, experiment configuration, sweeps and metric output.

mod config;
mod data;
mod experiment;
mod metrics;
mod sweep;

pub use config::{DataSource, ExperimentConfig, LabelChoice};
pub use data::{
    binarize_labels, load_idx, load_mnist_dir, randomize_labels, seeded_subset, standardize,
    synthetic_gaussians, synthetic_gaussians_sized, DIGIT_CLASSES, TEST_IMAGES, TEST_LABELS,
    TRAIN_IMAGES, TRAIN_LABELS,
};
pub use experiment::{
    network_for, prepare_data, run_epsilon, run_experiment, run_on_data, ExperimentOutcome,
    RunRecord, LARGE_RUN_THRESHOLD, METRICS_FILE, REPORT_FILE,
};
pub use metrics::{
    format_float, write_json, CsvSink, MetricsRow, CSV_SCHEMA_VERSION, METRICS_HEADER,
};
pub use sweep::{run_sweep, GridPoint, SweepGrid, SWEEP_HEADER, THREADS_ENV};
