//! Experiment harness: metrics, random search, synthetic load data and
//! end-to-end experiment runs with artifact output.

pub mod experiment;
pub mod load;
pub mod metrics;
pub mod search;

pub use metrics::{metrics, normalize_columns, spearman, MetricsRow, VIOLATION_TOL};
pub use search::{
    evaluate, fit_model, random_search, BestModel, EvalConstraint, Family, FittedModel, ModelTemplate, Regularizer,
    SearchOutcome, TrialRecord, THREADS_ENV,
};
pub use load::{sliding_window_forecast, sliding_windows, synthetic_load, LoadSpec, SlidingResult, WindowResult, HOURS_PER_WEEK, LOAD_FEATURES};
pub use experiment::{
    run_experiment, timing_csv, timing_curve, Context, Corruption, DataSource, ExperimentConfig, GridCell, MetricsReport,
    ModelReport, NormalizedRow, SplitSizes, StabilityGrid, Timing, TimingPoint,
};
