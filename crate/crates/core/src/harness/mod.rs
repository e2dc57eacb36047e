//! Reproducible campaigns: config ingestion, unit fan-out, aggregation,
//! classification and report emission.

mod config_file;
mod report;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::analytics::{
    aggregate_units, analytic_moments, classify_regime, model_means, AggregateStats, AnalyticsError,
    ExecutionMode, Moments, RegimeVerdict, DEFAULT_ALPHA,
};
use crate::planner::{derive_plan, DerivedPlan, ExperimentConfig, PlanError};
use crate::rng::unit_seed;
use crate::simkernel::{
    simulate_trace, simulate_unit, DelayedChoice, HypothesisModel, SimError, UnitResult,
    TRACE_CSV_HEADER,
};

pub use config_file::{load_config, write_config};
pub use report::{emit_report, machine_record, render_plan, render_report, render_verdict, ReportFormat};

pub const DEFAULT_UNITS: u64 = 1000;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error(transparent)]
    InvalidConfig(#[from] PlanError),
    #[error("invalid campaign: {0}")]
    InvalidSpec(String),
    #[error("validation failed: {}", .0.plan.violations().map(|v| v.name()).collect::<Vec<_>>().join(", "))]
    ValidationFailed(Box<CampaignReport>),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Analytics(#[from] AnalyticsError),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignSpec {
    pub config: ExperimentConfig,
    pub model: HypothesisModel,
    pub choice: DelayedChoice,
    pub units: u64,
    /// Unit `i` uses seed [`unit_seed`]`(master_seed, i)`.
    pub master_seed: u64,
    pub mode: ExecutionMode,
    pub alpha: f64,
    /// Report destination; the CLI writes to stdout when unset.
    pub output_path: Option<PathBuf>,
    /// CSV dump of every unit's pair events.
    pub trace_path: Option<PathBuf>,
}

impl CampaignSpec {
    pub fn new(config: ExperimentConfig, model: HypothesisModel, choice: DelayedChoice) -> Self {
        CampaignSpec {
            config,
            model,
            choice,
            units: DEFAULT_UNITS,
            master_seed: 0,
            mode: ExecutionMode::Parallel,
            alpha: DEFAULT_ALPHA,
            output_path: None,
            trace_path: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignOutcome {
    pub moments_causal: Moments,
    pub moments_ic: Moments,
    /// The generating model's own prediction.
    pub moments_generating: Moments,
    pub results: Vec<UnitResult>,
    pub stats: AggregateStats,
    pub verdict: RegimeVerdict,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignReport {
    pub spec: CampaignSpec,
    pub plan: DerivedPlan,
    /// `None` when validation blocked the simulation.
    pub outcome: Option<CampaignOutcome>,
    /// Wall-clock time; not part of any serialization.
    pub elapsed: Duration,
}

/// Simulates `units` units with seeds derived from `master_seed`, in unit
/// order regardless of `mode`.
pub fn simulate_units(
    plan: &DerivedPlan,
    config: &ExperimentConfig,
    model: HypothesisModel,
    choice: DelayedChoice,
    master_seed: u64,
    units: u64,
    mode: ExecutionMode,
) -> Result<Vec<UnitResult>, SimError> {
    let one = |i: u64| simulate_unit(plan, config, unit_seed(master_seed, i), model, choice);
    match mode {
        ExecutionMode::Parallel => parallel_map(units, one),
        ExecutionMode::Sequential => (0..units).map(one).collect(),
    }
}

#[cfg(feature = "parallel")]
fn parallel_map<F>(units: u64, f: F) -> Result<Vec<UnitResult>, SimError>
where
    F: Fn(u64) -> Result<UnitResult, SimError> + Sync + Send,
{
    use rayon::prelude::*;
    (0..units).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn parallel_map<F>(units: u64, f: F) -> Result<Vec<UnitResult>, SimError>
where
    F: Fn(u64) -> Result<UnitResult, SimError>,
{
    (0..units).map(f).collect()
}

fn dump_traces(spec: &CampaignSpec, plan: &DerivedPlan, path: &PathBuf) -> Result<(), HarnessError> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "{TRACE_CSV_HEADER}")?;
    for i in 0..spec.units {
        let trace = simulate_trace(plan, &spec.config, unit_seed(spec.master_seed, i))?;
        trace.write_csv(i, &mut out)?;
    }
    out.flush()?;
    Ok(())
}

/// Plans, validates, simulates, aggregates and classifies one campaign.
///
/// A plan failing any check yields [`HarnessError::ValidationFailed`] carrying
/// the statistics-free report.
pub fn run_campaign(spec: &CampaignSpec) -> Result<CampaignReport, HarnessError> {
    let start = Instant::now();
    if spec.units == 0 {
        return Err(HarnessError::InvalidSpec("units must be >= 1".into()));
    }
    if !(spec.alpha > 0.0 && spec.alpha < 0.5) {
        return Err(AnalyticsError::InvalidSignificance(spec.alpha).into());
    }
    let plan = derive_plan(&spec.config)?;
    if !plan.is_valid() {
        return Err(HarnessError::ValidationFailed(Box::new(CampaignReport {
            spec: spec.clone(),
            plan,
            outcome: None,
            elapsed: start.elapsed(),
        })));
    }
    model_means(&plan, &spec.config)?;

    let results = simulate_units(
        &plan,
        &spec.config,
        spec.model,
        spec.choice,
        spec.master_seed,
        spec.units,
        spec.mode,
    )?;
    if let Some(path) = &spec.trace_path {
        dump_traces(spec, &plan, path)?;
    }
    let stats = aggregate_units(&results, spec.mode)?;
    let verdict = classify_regime(stats.total_monitored, stats.units, &plan, &spec.config, spec.alpha)?;
    let config = &spec.config;
    let outcome = CampaignOutcome {
        moments_causal: analytic_moments(&plan, config, HypothesisModel::CausalityPreserving, spec.choice),
        moments_ic: analytic_moments(&plan, config, HypothesisModel::InformationalCoherence, DelayedChoice::Erase),
        moments_generating: analytic_moments(&plan, config, spec.model, spec.choice),
        results,
        stats,
        verdict,
    };
    log::debug!("campaign of {} units finished", spec.units);
    Ok(CampaignReport {
        spec: spec.clone(),
        plan,
        outcome: Some(outcome),
        elapsed: start.elapsed(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics::Regime;

    fn spec(model: HypothesisModel, choice: DelayedChoice, units: u64) -> CampaignSpec {
        CampaignSpec {
            units,
            master_seed: 42,
            ..CampaignSpec::new(ExperimentConfig::default(), model, choice)
        }
    }

    #[test]
    fn causal_campaign_mean() {
        let r = run_campaign(&spec(HypothesisModel::CausalityPreserving, DelayedChoice::Erase, 1000)).unwrap();
        let out = r.outcome.unwrap();
        assert!((out.stats.mean - 250.0).abs() < 2.0, "{}", out.stats.mean);
        assert_ne!(out.verdict.regime, Regime::ChoiceDependence);
    }

    #[test]
    fn ic_erase_campaign_is_choice_dependent() {
        let r = run_campaign(&spec(HypothesisModel::InformationalCoherence, DelayedChoice::Erase, 1000)).unwrap();
        let v = r.outcome.unwrap().verdict;
        assert_eq!(v.regime, Regime::ChoiceDependence);
        assert!(v.z_causal > 100.0, "{}", v.z_causal);
    }

    #[test]
    fn ic_preserve_never_choice_dependent() {
        let r = run_campaign(&spec(HypothesisModel::InformationalCoherence, DelayedChoice::Preserve, 1000)).unwrap();
        let regime = r.outcome.unwrap().verdict.regime;
        assert!(matches!(regime, Regime::CausalIndependence | Regime::Inconclusive));
    }

    #[test]
    fn verdict_follows_from_stats_and_plan() {
        let r = run_campaign(&spec(HypothesisModel::InformationalCoherence, DelayedChoice::Erase, 50)).unwrap();
        let out = r.outcome.as_ref().unwrap();
        let again = classify_regime(out.stats.total_monitored, out.stats.units, &r.plan, &r.spec.config, r.spec.alpha)
            .unwrap();
        assert_eq!(again, out.verdict);
    }

    #[test]
    fn failed_ordering_is_gated() {
        let mut s = spec(HypothesisModel::CausalityPreserving, DelayedChoice::Erase, 10);
        s.config.t_choice = 430e-6;
        match run_campaign(&s) {
            Err(HarnessError::ValidationFailed(report)) => assert!(report.outcome.is_none()),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_specs() {
        let mut s = spec(HypothesisModel::CausalityPreserving, DelayedChoice::Erase, 0);
        assert!(matches!(run_campaign(&s), Err(HarnessError::InvalidSpec(_))));
        s.units = 1;
        s.config.fidelity = 0.0;
        assert!(matches!(
            run_campaign(&s),
            Err(HarnessError::Analytics(AnalyticsError::DegeneratePredictions(_)))
        ));
    }

    #[test]
    fn modes_agree() {
        let mut s = spec(HypothesisModel::InformationalCoherence, DelayedChoice::Erase, 64);
        let par = run_campaign(&s).unwrap().outcome.unwrap();
        s.mode = ExecutionMode::Sequential;
        let seq = run_campaign(&s).unwrap().outcome.unwrap();
        assert_eq!(par, seq);
    }

    #[test]
    fn trace_dump_written() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("traces.csv");
        let mut s = spec(HypothesisModel::CausalityPreserving, DelayedChoice::Erase, 3);
        s.trace_path = Some(path.clone());
        run_campaign(&s).unwrap();
        let text = std::fs::read_to_string(path).unwrap();
        assert_eq!(text.lines().next().unwrap(), TRACE_CSV_HEADER);
        assert!(text.lines().count() > 3000);
        assert!(text.lines().last().unwrap().starts_with("2,"));
    }
}
