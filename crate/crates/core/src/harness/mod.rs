//! Datasets, episode execution, metrics, sweeps and reports.

mod dataset;
mod micro;
mod report;
mod run;
mod sweep;

pub use dataset::{
    load_dataset, save_dataset, synth_dataset, tiered_samples, DatasetBundle, DatasetSpec, Sample,
    EXERCISE_CONCEPT_FILE, INTERACTIONS_FILE, MIN_RECORDS, PREREQUISITE_FILE,
};
pub use micro::rigged_world;
pub use report::{
    metrics_lines, read_metrics_csv, relative_curves, write_report, MetricsLine, ReportConfig,
    CURVES_CSV, METRICS_CSV, METRICS_JSON,
};
pub use run::{
    episode_seed, evaluate, run_all, run_episode, EpisodeLog, MetricsReport, Summary, TurnRecord,
};
pub use sweep::{partition_by_tier, sweep, SweepKind, SweepRow, LEARNRATE_GRID, PATIENCE_GRID};
