//! Nonparametric tests for constant intraday volatility in high-frequency
//! log-prices, with a path simulator, a seeded Monte Carlo harness and a
//! tick-data pipeline.
//!
//! The three test variants share one assembly: spot-variance estimates on
//! disjoint blocks are compared with an integrated-variance estimate of the
//! same kind (plain, jump-truncated or pre-averaged) and the standardized
//! sum of squared deviations is referred to a one-sided normal critical
//! value.

// NaN-rejecting guards are written as `!(x > 0.0)` on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimators;
pub mod hettest;
pub mod mc;
pub mod normal;
pub mod pipeline;
pub mod rng;
pub mod sim;

pub use error::{Error, Result};
pub use estimators::{DerivedWindows, TuningParams, WeightFunction};
pub use hettest::{SpotAnalysis, TestOutcome, TestVariant};
pub use mc::{ExperimentSpec, McReport, Overlay};
pub use pipeline::{CleanSeries, DailyReport, Span, TickRecord};
pub use sim::{BaseModel, HestonParams, ModelSpec, SamplePath, SimGrid};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
