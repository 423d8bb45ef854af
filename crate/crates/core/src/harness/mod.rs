//! Reproducible experiments emitting CSV tables and JSON reports.

pub mod overlay;
pub mod report;
pub mod spec;
pub mod studies;
pub mod sweep;
pub mod synthetic;
pub mod verify;

pub use overlay::{bound_overlay, overlay_run, OverlayCondition, OverlayResult, OVERLAY_HEADER};
pub use report::{Report, SuiteResult};
pub use spec::{
    default_rank, load_matrix, AlphaGrid, ExperimentSpec, FactorChoice, Instance, MatrixSource,
    PcgSpec,
};
pub use studies::{
    error_order_study, estimator_instance, estimator_study, EstimatorRow, ErrorOrderResult,
    DEFAULT_ERROR_EPS, ERROR_ORDER_HEADER, ESTIMATOR_HEADER,
};
pub use sweep::{sweep_alpha, sweep_instance, SweepResult, SweepSummary, SWEEP_HEADER};
pub use synthetic::{SpectrumSpec, SyntheticMatrix, SyntheticSpec};
pub use verify::{verify_theorems, VerifyResults};
