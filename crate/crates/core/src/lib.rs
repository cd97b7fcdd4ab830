//! hinderfit: growth-curve analysis with hindering-series models.
//!
//! The library covers the full path from raw (t, Q) records to a selected
//! growth model and its forecasts:
//!
//! * [`kernel`]: the dimensionless profile h(x) shared by all decelerated
//!   families, its solver, closed forms and asymptotics.
//! * [`stats`]: Mann-Kendall trend gates, nested-model F-tests and the
//!   special functions behind them.
//! * [`fit`]: relative-residual model fitting, minimal-model selection and
//!   the statistically gated term ladder.
//! * [`forecast`]: forecasts, stability diagnostics, accelerated-growth
//!   references and a fixed-step integrator for cross-validation.
//! * [`dataset`] and [`report`]: CSV ingestion, seeded synthetic data and
//!   byte-stable JSON/CSV emission.
//!
//! The commonly used types are re-exported at the crate root.

pub mod dataset;
pub mod fit;
pub mod forecast;
pub mod kernel;
pub mod report;
pub mod stats;

pub use dataset::{Dataset, DatasetError, SynthConfig};
pub use fit::{
    FitError, FitResult, GateResult, GrowthModel, LadderConfig, LadderReport, MinimalSelection,
};
pub use forecast::{AccelQuadratic, Forecast, ForecastError};
pub use kernel::{
    AsymptoticSide, GrowthFamily, HinderingWeights, KernelError, SolverSettings, MAX_ORDER,
};
pub use report::{ReportDocument, ReportError};
pub use stats::{
    FTestResult, GoodnessOfFit, StatsError, TimeSeries, TrendDirection, TrendResult,
};
