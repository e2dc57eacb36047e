//! Closed-form detection moments, regime classification, sample-size
//! planning and campaign aggregation.
//!
//! Both hypotheses predict Poisson-distributed monitored counts per unit:
//! `mu0 * p_s / 2` when the choice has no effect on recorded signals, and
//! `mu0 * p_s * (1 + p_i * F) / 2` when erasure makes the capable subset
//! interfere. Observed totals are scored against each prediction separately.

pub mod goodness;
pub mod tails;

use std::fmt;

use thiserror::Error;

use crate::planner::{DerivedPlan, ExperimentConfig, OccupancyPolicy, REL_TOL};
use crate::simkernel::{DelayedChoice, HypothesisModel, UnitResult};

use self::tails::{continuity_z, exact_tail_z, normal_quantile, poisson_cdf, poisson_sf, two_sided_critical};

/// Expected count above which scores use the normal approximation.
pub const NORMAL_SWITCHOVER: f64 = 100.0;
pub const DEFAULT_ALPHA: f64 = 0.003;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticsError {
    #[error("model predictions coincide (p_i * F = {0}); the hypotheses cannot be discriminated")]
    DegeneratePredictions(f64),
    #[error("significance must lie in (0, 0.5), got {0}")]
    InvalidSignificance(f64),
    #[error("units must be >= 1")]
    NoUnits,
    #[error("campaign has no unit results")]
    EmptyCampaign,
    #[error("unit results disagree on {0}")]
    MixedProvenance(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub mean: f64,
    pub sigma: f64,
    pub model: HypothesisModel,
    pub choice: DelayedChoice,
}

fn erasure_applies(model: HypothesisModel, choice: DelayedChoice) -> bool {
    model == HypothesisModel::InformationalCoherence && choice == DelayedChoice::Erase
}

/// Per-unit Poisson mean and standard deviation of the monitored count.
pub fn analytic_moments(
    plan: &DerivedPlan,
    config: &ExperimentConfig,
    model: HypothesisModel,
    choice: DelayedChoice,
) -> Moments {
    let signal = plan.mu0 * config.p_s;
    let mean = if erasure_applies(model, choice) {
        signal * (1.0 + config.p_i * config.fidelity) / 2.0
    } else {
        signal / 2.0
    };
    Moments {
        mean,
        sigma: mean.sqrt(),
        model,
        choice,
    }
}

/// Mean stored idlers per memory bin.
pub fn bin_load(plan: &DerivedPlan, config: &ExperimentConfig) -> f64 {
    plan.mu0 * config.p_i / plan.mode_count as f64
}

/// Expected fraction of bins holding two or more idlers,
/// `1 - (1 + lambda) e^-lambda` for bin load `lambda`.
pub fn double_occupancy_fraction(plan: &DerivedPlan, config: &ExperimentConfig) -> f64 {
    let lambda = bin_load(plan, config);
    1.0 - (1.0 + lambda) * (-lambda).exp()
}

/// Moments including capability lost to shared bins under the discard policy.
///
/// A stored idler is alone in its bin with probability `e^-lambda`, so the
/// capable fraction `p_i F` shrinks by that factor. Diagnostic only; the
/// classifier scores against [`analytic_moments`].
pub fn occupancy_adjusted_moments(
    plan: &DerivedPlan,
    config: &ExperimentConfig,
    model: HypothesisModel,
    choice: DelayedChoice,
) -> Moments {
    let mut m = analytic_moments(plan, config, model, choice);
    if erasure_applies(model, choice) && config.double_occupancy == OccupancyPolicy::Discard {
        let alone = (-bin_load(plan, config)).exp();
        m.mean = plan.mu0 * config.p_s * (1.0 + config.p_i * config.fidelity * alone) / 2.0;
        m.sigma = m.mean.sqrt();
    }
    m
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    /// Consistent with causal independence only.
    CausalIndependence,
    /// Outside both predictions.
    NeitherModel,
    /// Consistent with dependence on the delayed choice only.
    ChoiceDependence,
    /// Consistent with both; more units are needed.
    Inconclusive,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::CausalIndependence => "causal_independence",
            Regime::NeitherModel => "neither_model",
            Regime::ChoiceDependence => "choice_dependence",
            Regime::Inconclusive => "inconclusive",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Regime::CausalIndependence => {
                "(i) the delayed choice leaves no detectable trace on the marginal signal statistics"
            }
            Regime::NeitherModel => {
                "(ii) the statistics fall outside the intervals of both reference models"
            }
            Regime::ChoiceDependence => {
                "(iii) the marginal signal statistics depend on the delayed erasure"
            }
            Regime::Inconclusive => "the statistics are consistent with both models at this sample size",
        }
    }

    fn from_scores(z_causal: f64, z_ic: f64, critical: f64) -> Regime {
        match (z_causal.abs() <= critical, z_ic.abs() <= critical) {
            (true, false) => Regime::CausalIndependence,
            (false, true) => Regime::ChoiceDependence,
            (false, false) => Regime::NeitherModel,
            (true, true) => Regime::Inconclusive,
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeVerdict {
    pub regime: Regime,
    pub z_causal: f64,
    pub z_ic: f64,
    pub alpha: f64,
    pub critical: f64,
    pub units: u64,
    pub observed_total: u64,
    pub expected_causal: f64,
    pub expected_ic: f64,
    /// `log L(ic) - log L(causal)`, reported for diagnostics.
    pub log_likelihood_ratio: f64,
}

fn check_alpha(alpha: f64) -> Result<(), AnalyticsError> {
    if alpha > 0.0 && alpha < 0.5 {
        Ok(())
    } else {
        Err(AnalyticsError::InvalidSignificance(alpha))
    }
}

/// Per-unit means under causal and under IC+Erase, rejecting coincident ones.
pub fn model_means(plan: &DerivedPlan, config: &ExperimentConfig) -> Result<(f64, f64), AnalyticsError> {
    let causal = analytic_moments(plan, config, HypothesisModel::CausalityPreserving, DelayedChoice::Erase).mean;
    let ic = analytic_moments(plan, config, HypothesisModel::InformationalCoherence, DelayedChoice::Erase).mean;
    if (ic - causal).abs() <= REL_TOL * causal.abs() {
        return Err(AnalyticsError::DegeneratePredictions(config.p_i * config.fidelity));
    }
    Ok((causal, ic))
}

fn score(observed: u64, expected: f64) -> f64 {
    if expected > NORMAL_SWITCHOVER {
        continuity_z(observed, expected)
    } else {
        exact_tail_z(observed, expected)
    }
}

/// Scores `observed_total` over `units` units against both predictions.
pub fn classify_regime(
    observed_total: u64,
    units: u64,
    plan: &DerivedPlan,
    config: &ExperimentConfig,
    alpha: f64,
) -> Result<RegimeVerdict, AnalyticsError> {
    if units == 0 {
        return Err(AnalyticsError::NoUnits);
    }
    check_alpha(alpha)?;
    let (causal, ic) = model_means(plan, config)?;
    let expected_causal = causal * units as f64;
    let expected_ic = ic * units as f64;
    let z_causal = score(observed_total, expected_causal);
    let z_ic = score(observed_total, expected_ic);
    let critical = two_sided_critical(alpha);
    let x = observed_total as f64;
    Ok(RegimeVerdict {
        regime: Regime::from_scores(z_causal, z_ic, critical),
        z_causal,
        z_ic,
        alpha,
        critical,
        units,
        observed_total,
        expected_causal,
        expected_ic,
        log_likelihood_ratio: x * (expected_ic / expected_causal).ln() - (expected_ic - expected_causal),
    })
}

/// Smallest threshold `c` with `P(X >= c) <= err` under Poisson(`lambda`).
fn upper_threshold(lambda: f64, err: f64) -> u64 {
    let z = -normal_quantile(err);
    let mut c = (lambda + z * lambda.sqrt()).ceil().max(0.0) as u64;
    while c > 0 && poisson_sf(c - 1, lambda) <= err {
        c -= 1;
    }
    while poisson_sf(c, lambda) > err {
        c += 1;
    }
    c
}

/// Error rates of the best one-sided threshold test at `units` units.
///
/// Returns `(threshold, type_i, type_ii)` where the test rejects the causal
/// prediction when the total reaches `threshold`.
pub fn threshold_test(causal: f64, ic: f64, units: u64, err: f64) -> (u64, f64, f64) {
    let lambda0 = causal * units as f64;
    let lambda1 = ic * units as f64;
    let c = upper_threshold(lambda0, err);
    let type_i = poisson_sf(c, lambda0);
    let type_ii = if c == 0 { 0.0 } else { poisson_cdf(c - 1, lambda1) };
    (c, type_i, type_ii)
}

/// Units needed so a threshold test separates the two predictions with both
/// error probabilities at most `max(alpha, beta)`.
///
/// The normal approximation seeds the search; exact Poisson tails decide.
pub fn power_analysis(
    plan: &DerivedPlan,
    config: &ExperimentConfig,
    alpha: f64,
    beta: f64,
) -> Result<u64, AnalyticsError> {
    check_alpha(alpha)?;
    check_alpha(beta)?;
    let (causal, ic) = model_means(plan, config)?;
    let (lo, hi) = if causal < ic { (causal, ic) } else { (ic, causal) };
    let err = alpha.max(beta);
    let z = -normal_quantile(err);
    let gap = hi - lo;
    let estimate = ((z * (lo.sqrt() + hi.sqrt())) / gap).powi(2).ceil().max(1.0) as u64;

    let feasible = |m: u64| {
        let (_, type_i, type_ii) = threshold_test(lo, hi, m, err);
        type_i <= err && type_ii <= err
    };
    let mut m = estimate;
    while !feasible(m) {
        m = m.saturating_add((m / 8).max(1));
    }
    while m > 1 && feasible(m - 1) {
        m -= 1;
    }
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExecutionMode {
    Parallel,
    Sequential,
}

impl ExecutionMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ExecutionMode::Parallel => "parallel",
            ExecutionMode::Sequential => "sequential",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateStats {
    pub model: HypothesisModel,
    pub choice: DelayedChoice,
    pub units: u64,
    pub total_monitored: u64,
    pub total_signal: u64,
    pub total_capable: u64,
    /// `(seed, monitored_count)`, ordered by seed.
    pub per_unit: Vec<(u64, u64)>,
    pub mean: f64,
    /// Unbiased sample variance; zero for a single unit.
    pub variance: f64,
}

impl AggregateStats {
    pub fn standard_error(&self) -> f64 {
        (self.variance / self.units as f64).sqrt()
    }
}

/// Totals and empirical moments of a campaign.
///
/// `mode` records how the units were executed and has no effect on the
/// result; the output is also independent of the order of `results`.
pub fn aggregate_units(
    results: &[UnitResult],
    _mode: ExecutionMode,
) -> Result<AggregateStats, AnalyticsError> {
    let first = results.first().ok_or(AnalyticsError::EmptyCampaign)?;
    for r in results {
        if r.model != first.model {
            return Err(AnalyticsError::MixedProvenance("model"));
        }
        if r.choice != first.choice {
            return Err(AnalyticsError::MixedProvenance("choice"));
        }
        if r.config_id != first.config_id {
            return Err(AnalyticsError::MixedProvenance("config"));
        }
    }
    let n = results.len() as u64;
    let mut total_monitored = 0u64;
    let mut total_signal = 0u64;
    let mut total_capable = 0u64;
    let mut sum_sq: u128 = 0;
    for r in results {
        total_monitored += r.monitored_count;
        total_signal += r.total_signal_count;
        total_capable += r.capable_count;
        sum_sq += u128::from(r.monitored_count) * u128::from(r.monitored_count);
    }
    let mut per_unit: Vec<(u64, u64)> = results.iter().map(|r| (r.seed, r.monitored_count)).collect();
    per_unit.sort_unstable();

    // integer sums keep the moments exactly order-independent
    let mean = total_monitored as f64 / n as f64;
    let variance = if n > 1 {
        let s = u128::from(total_monitored);
        let num = u128::from(n) * sum_sq - s * s;
        num as f64 / (n as f64 * (n - 1) as f64)
    } else {
        0.0
    };
    Ok(AggregateStats {
        model: first.model,
        choice: first.choice,
        units: n,
        total_monitored,
        total_signal,
        total_capable,
        per_unit,
        mean,
        variance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planner::derive_plan;

    const C: HypothesisModel = HypothesisModel::CausalityPreserving;
    const IC: HypothesisModel = HypothesisModel::InformationalCoherence;

    fn defaults() -> (ExperimentConfig, DerivedPlan) {
        let c = ExperimentConfig::default();
        let p = derive_plan(&c).unwrap();
        (c, p)
    }

    #[test]
    fn moments_at_defaults() {
        let (c, p) = defaults();
        let causal = analytic_moments(&p, &c, C, DelayedChoice::Erase);
        assert!((causal.mean - 250.0).abs() < 1e-9);
        assert!((causal.sigma - 15.811).abs() < 1e-3);
        let ic = analytic_moments(&p, &c, IC, DelayedChoice::Erase);
        assert!((ic.mean - 325.0).abs() < 1e-9);
        assert!((ic.sigma - 18.028).abs() < 1e-3);
        // 150 capable photons at 1, 350 at 1/2
        assert!((ic.mean - (p.n_entangled + (500.0 - p.n_entangled) / 2.0)).abs() < 1e-9);
        let kept = analytic_moments(&p, &c, IC, DelayedChoice::Preserve);
        assert_eq!(kept.mean, causal.mean);
        assert_eq!(kept.sigma, causal.sigma);
    }

    #[test]
    fn occupancy_diagnostics() {
        let (mut c, p) = defaults();
        assert!((bin_load(&p, &c) - 1.0 / 3.0).abs() < 1e-12);
        assert!((double_occupancy_fraction(&p, &c) - 0.044_625).abs() < 1e-5);
        let ignore = occupancy_adjusted_moments(&p, &c, IC, DelayedChoice::Erase);
        assert!((ignore.mean - 325.0).abs() < 1e-9);
        c.double_occupancy = OccupancyPolicy::Discard;
        let discard = occupancy_adjusted_moments(&p, &c, IC, DelayedChoice::Erase);
        assert!((discard.mean - (250.0 + 75.0 * (-1.0f64 / 3.0).exp())).abs() < 1e-9);
    }

    #[test]
    fn classify_examples() {
        let (c, p) = defaults();
        let v = classify_regime(250, 1, &p, &c, 0.003).unwrap();
        assert_eq!(v.regime, Regime::CausalIndependence);
        assert_eq!(v.z_causal, 0.0);
        assert!((v.z_ic + 4.16).abs() < 0.05, "{}", v.z_ic);

        let v = classify_regime(325, 1, &p, &c, 0.003).unwrap();
        assert_eq!(v.regime, Regime::ChoiceDependence);
        assert_eq!(v.z_ic, 0.0);
        assert!((v.z_causal - 4.74).abs() < 0.05, "{}", v.z_causal);

        let v = classify_regime(150, 1, &p, &c, 0.003).unwrap();
        assert_eq!(v.regime, Regime::NeitherModel);
        assert!((v.z_causal + 6.3).abs() < 0.05);
        assert!((v.z_ic + 9.7).abs() < 0.05);

        let v = classify_regime(287, 1, &p, &c, 0.003).unwrap();
        assert_eq!(v.regime, Regime::Inconclusive);
    }

    #[test]
    fn classify_small_counts_use_exact_tails() {
        let c = ExperimentConfig {
            n_signal: 6,
            ..Default::default()
        };
        let p = derive_plan(&c).unwrap();
        // causal 3.0, ic 3.9 per unit
        let v = classify_regime(3, 1, &p, &c, 0.003).unwrap();
        assert_eq!(v.z_causal, 0.0);
        assert_eq!(v.regime, Regime::Inconclusive);
        let v = classify_regime(30, 1, &p, &c, 0.003).unwrap();
        assert_eq!(v.regime, Regime::NeitherModel);
    }

    #[test]
    fn classify_errors() {
        let (mut c, p) = defaults();
        assert_eq!(classify_regime(1, 0, &p, &c, 0.003), Err(AnalyticsError::NoUnits));
        assert!(matches!(
            classify_regime(1, 1, &p, &c, 0.7),
            Err(AnalyticsError::InvalidSignificance(_))
        ));
        c.fidelity = 0.0;
        assert!(matches!(
            classify_regime(250, 1, &p, &c, 0.003),
            Err(AnalyticsError::DegeneratePredictions(_))
        ));
        assert!(matches!(
            power_analysis(&p, &c, 0.003, 0.003),
            Err(AnalyticsError::DegeneratePredictions(_))
        ));
    }

    #[test]
    fn likelihood_ratio_sign() {
        let (c, p) = defaults();
        assert!(classify_regime(250, 1, &p, &c, 0.003).unwrap().log_likelihood_ratio < 0.0);
        assert!(classify_regime(325, 1, &p, &c, 0.003).unwrap().log_likelihood_ratio > 0.0);
    }

    fn result(seed: u64, monitored: u64) -> UnitResult {
        UnitResult {
            monitored_count: monitored,
            total_signal_count: 2 * monitored,
            capable_count: 0,
            model: C,
            choice: DelayedChoice::Erase,
            seed,
            config_id: 7,
        }
    }

    #[test]
    fn aggregate_basics() {
        let rs: Vec<UnitResult> = (0..10).map(|i| result(i, 240 + i)).collect();
        let par = aggregate_units(&rs, ExecutionMode::Parallel).unwrap();
        let seq = aggregate_units(&rs, ExecutionMode::Sequential).unwrap();
        assert_eq!(par, seq);
        assert_eq!(par.total_monitored, (240..250).sum::<u64>());
        assert!((par.mean - 244.5).abs() < 1e-12);
        assert!((par.variance - 55.0 / 6.0).abs() < 1e-12);

        let one = aggregate_units(&rs[..1], ExecutionMode::Sequential).unwrap();
        assert_eq!(one.variance, 0.0);
        assert_eq!(
            aggregate_units(&[], ExecutionMode::Parallel),
            Err(AnalyticsError::EmptyCampaign)
        );
    }

    #[test]
    fn aggregate_rejects_mixed_results() {
        let mut rs: Vec<UnitResult> = (0..3).map(|i| result(i, 1)).collect();
        rs[1].choice = DelayedChoice::Preserve;
        assert_eq!(
            aggregate_units(&rs, ExecutionMode::Parallel),
            Err(AnalyticsError::MixedProvenance("choice"))
        );
        rs[1].choice = DelayedChoice::Erase;
        rs[2].config_id = 8;
        assert_eq!(
            aggregate_units(&rs, ExecutionMode::Parallel),
            Err(AnalyticsError::MixedProvenance("config"))
        );
        rs[2].config_id = 7;
        rs[0].model = IC;
        assert_eq!(
            aggregate_units(&rs, ExecutionMode::Parallel),
            Err(AnalyticsError::MixedProvenance("model"))
        );
    }
}
