//! Monte Carlo model of a delayed-choice quantum eraser with a multimode
//! quantum memory on the idler arm.
//!
//! - [`planner`] derives pump rate, memory geometry and pair budgets from an
//!   [`ExperimentConfig`] and checks timing order and the single-photon regime.
//! - [`simkernel`] generates seeded per-unit pair records and routes signals
//!   through the final coupler under either hypothesis.
//! - [`analytics`] provides closed-form moments, regime classification,
//!   sample-size planning and aggregation.
//! - [`harness`] ties these into reproducible campaigns and text reports.

pub mod analytics;
pub mod harness;
pub mod planner;
pub mod rng;
pub mod simkernel;

pub use analytics::{
    aggregate_units, analytic_moments, classify_regime, power_analysis, AggregateStats, AnalyticsError,
    ExecutionMode, Moments, Regime, RegimeVerdict,
};
pub use harness::{
    emit_report, load_config, run_campaign, simulate_units, CampaignReport, CampaignSpec, HarnessError,
    ReportFormat,
};
pub use planner::{
    check_single_photon_regime, derive_plan, validate_ordering, DerivedPlan, ExperimentConfig, OccupancyPolicy,
    PlanError, ValidationReport, Violation,
};
pub use simkernel::{
    assign_bins, generate_pairs, route_detection, simulate_unit, DelayedChoice, HypothesisModel, PairEvent,
    SimError, UnitResult, UnitTrace,
};
