//! Online false discovery rate control.
//!
//! * [`distributions`]: generalized-Gaussian null kernels (survival, quantile,
//!   sampling) and the alternative P-value CDF.
//! * [`schedules`]: normalized significance budgets `λ_i`.
//! * [`engines`]: LORD and LOND streaming rules and the Benjamini–Hochberg
//!   baseline.
//! * [`metrics`]: FDP/FNP, pooling with standard errors, CSV output.
//! * [`simulation`]: sparse-mixture datasets and experiment grids.

pub mod distributions;
pub mod engines;
pub mod error;
pub mod metrics;
pub mod schedules;
pub mod simulation;

pub use distributions::{AltPValueCdf, GGKernel};
pub use engines::{
    bh_decisions, bh_reject, run_procedure, run_stream, Decision, LondState, LordState, OnlineEngine, Procedure,
};
pub use error::{Error, Result};
pub use metrics::{fdp, fnp, pool, Counts, Estimate, MetricsRecord, PooledRecord, TruthLabels};
pub use schedules::{LambdaSchedule, ScheduleKind};
pub use simulation::{
    make_mixture, run_cell, run_grid, ExperimentConfig, Horizons, MixtureConfig, MixtureDataset, QRule,
};
