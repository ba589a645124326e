//! Cohort-based difference-in-differences estimation for staggered policy
//! adoption on group-level longitudinal data.
//!
//! The pipeline: parse cumulative-count and policy-date files
//! ([`ingest`]), build outcome panels on a chosen scale and time axis
//! ([`transform`]), group treated units into adoption cohorts ([`panel`]),
//! estimate per-cohort event studies and their cohort-weighted aggregate
//! ([`estimate`]), attach leave-one-unit-out standard errors
//! ([`jackknife`]), and screen the pre-treatment placebos ([`diagnostics`]).
//! A synthetic data-generating process with known potential outcomes
//! ([`sim`]) backs the validation suites.
//!
//! Everything numeric is generic over [`scalar::Float`]; the crate root
//! exports `f64` aliases for the common case.

pub mod diagnostics;
pub mod error;
pub mod estimate;
pub mod ingest;
pub mod jackknife;
pub mod panel;
pub mod scalar;
pub mod sim;
pub mod transform;

pub use error::{Error, Result};
pub use panel::{
    build_cohorts, Cohort, CohortSet, ComparisonPolicy, TimeMode, TreatmentSchedule, UnitId,
};
pub use scalar::Float;

/// Outcome panel over `f64`.
pub type Panel = panel::PanelDataset<f64>;
/// Outcome panel over `f32`.
pub type Panel32 = panel::PanelDataset<f32>;
/// Single observation over `f64`.
pub type Obs = panel::Observation<f64>;
/// 2x2 contrast over `f64`.
pub type Table = estimate::TwoByTwo<f64>;
/// Aggregated event-study estimate over `f64`.
pub type Estimate = estimate::EventStudyEstimate<f64>;
/// Per-cohort event study over `f64`.
pub type CohortStudy = estimate::CohortEventStudy<f64>;
/// Simulated panel over `f64`.
pub type Sim = sim::SimPanel<f64>;
