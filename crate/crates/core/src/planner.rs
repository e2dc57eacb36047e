//! Experiment planning: derived quantities and pre-simulation checks.
//!
//! A raw [`ExperimentConfig`] is turned into a [`DerivedPlan`] holding the
//! pump rate, memory geometry and expected pair counts for one operational
//! unit, together with the timing-order and single-photon-regime checks that
//! must pass before any unit is simulated.

use std::fmt;

use thiserror::Error;

/// Relative tolerance used for floating-point identities throughout the crate.
pub const REL_TOL: f64 = 1e-12;

/// Shortest bin width current multimode memories resolve, in seconds.
pub const MEMORY_BIN_FLOOR: f64 = 10e-9;
/// Mode capacity above which a memory is considered beyond near-term reach.
pub const MEMORY_MODE_CAPACITY: u64 = 10_000;
/// Storage time above which a memory is considered beyond near-term reach.
pub const MEMORY_STORAGE_REACH: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("invalid config: `{field}` {reason}")]
    InvalidConfig { field: &'static str, reason: String },
}

/// What happens to stored idlers that share a memory bin with another idler.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OccupancyPolicy {
    /// Idlers in a bin with two or more occupants lose interference capability.
    Discard,
    /// Shared bins are counted but capability is left untouched.
    #[default]
    Ignore,
}

impl OccupancyPolicy {
    pub fn as_str(self) -> &'static str {
        match self {
            OccupancyPolicy::Discard => "discard",
            OccupancyPolicy::Ignore => "ignore",
        }
    }
}

impl std::str::FromStr for OccupancyPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "discard" => Ok(OccupancyPolicy::Discard),
            "ignore" => Ok(OccupancyPolicy::Ignore),
            other => Err(format!("expected `discard` or `ignore`, got `{other}`")),
        }
    }
}

/// Free parameters of the protocol. All times are in seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Signal acquisition window.
    pub t_phys: f64,
    /// Observation safety margin, `t_observe = (1 + epsilon) * t_phys`.
    pub epsilon: f64,
    /// Start of the collective idler operation.
    pub t_choice: f64,
    /// Guaranteed memory storage time.
    pub t_delay: f64,
    /// Target collected signal photons per unit.
    pub n_signal: u64,
    pub p_s: f64,
    pub p_i: f64,
    /// Per-pulse pair generation probability (mean pairs per pulse).
    pub p_pair: f64,
    /// Probability a stored idler keeps enough entanglement for erasure.
    /// An assumption, not a measured quantity.
    pub fidelity: f64,
    pub modes_per_photon: u64,
    /// Signal coherence time. Placeholder default, supply a real value.
    pub coherence_time: f64,
    pub readout_time: f64,
    /// Required ratio of mean signal spacing to coherence time.
    pub coherence_factor: f64,
    /// Upper bound on `p_pair^2`.
    pub multi_pair_threshold: f64,
    pub double_occupancy: OccupancyPolicy,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            t_phys: 400e-6,
            epsilon: 0.1,
            t_choice: 450e-6,
            t_delay: 500e-6,
            n_signal: 500,
            p_s: 0.3,
            p_i: 0.3,
            p_pair: 0.01,
            fidelity: 1.0,
            modes_per_photon: 3,
            coherence_time: 1e-12,
            readout_time: 10e-6,
            coherence_factor: 100.0,
            multi_pair_threshold: 1e-3,
            double_occupancy: OccupancyPolicy::Ignore,
        }
    }
}

fn invalid(field: &'static str, reason: impl Into<String>) -> PlanError {
    PlanError::InvalidConfig {
        field,
        reason: reason.into(),
    }
}

fn check_probability(field: &'static str, v: f64) -> Result<(), PlanError> {
    if v.is_finite() && v > 0.0 && v <= 1.0 {
        Ok(())
    } else {
        Err(invalid(field, format!("must be a probability in (0, 1], got {v}")))
    }
}

fn check_positive(field: &'static str, v: f64) -> Result<(), PlanError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(field, format!("must be finite and > 0, got {v}")))
    }
}

impl ExperimentConfig {
    /// Checks every field invariant, naming the first offending field.
    pub fn validate(&self) -> Result<(), PlanError> {
        check_positive("t_phys", self.t_phys)?;
        check_positive("epsilon", self.epsilon)?;
        check_positive("t_choice", self.t_choice)?;
        check_positive("t_delay", self.t_delay)?;
        check_positive("coherence_time", self.coherence_time)?;
        check_positive("readout_time", self.readout_time)?;
        check_positive("coherence_factor", self.coherence_factor)?;
        check_positive("multi_pair_threshold", self.multi_pair_threshold)?;
        check_probability("p_s", self.p_s)?;
        check_probability("p_i", self.p_i)?;
        check_probability("p_pair", self.p_pair)?;
        // F = 0 is allowed: it is the degenerate no-entanglement case.
        if !(self.fidelity.is_finite() && (0.0..=1.0).contains(&self.fidelity)) {
            return Err(invalid(
                "fidelity",
                format!("must be in [0, 1], got {}", self.fidelity),
            ));
        }
        if self.n_signal == 0 {
            return Err(invalid("n_signal", "must be >= 1"));
        }
        if self.modes_per_photon == 0 {
            return Err(invalid("modes_per_photon", "must be >= 1"));
        }
        if self.n_signal.checked_mul(self.modes_per_photon).is_none() {
            return Err(invalid("modes_per_photon", "mode count overflows"));
        }
        if self.t_phys >= self.t_delay {
            return Err(invalid(
                "t_delay",
                format!(
                    "must exceed t_phys ({} s) for any valid ordering, got {}",
                    self.t_phys, self.t_delay
                ),
            ));
        }
        Ok(())
    }

    /// Stable 64-bit fingerprint of every field, used to tag unit results.
    pub fn fingerprint(&self) -> u64 {
        // FNV-1a over the bit patterns; stable across platforms and runs.
        let words = [
            self.t_phys.to_bits(),
            self.epsilon.to_bits(),
            self.t_choice.to_bits(),
            self.t_delay.to_bits(),
            self.n_signal,
            self.p_s.to_bits(),
            self.p_i.to_bits(),
            self.p_pair.to_bits(),
            self.fidelity.to_bits(),
            self.modes_per_photon,
            self.coherence_time.to_bits(),
            self.readout_time.to_bits(),
            self.coherence_factor.to_bits(),
            self.multi_pair_threshold.to_bits(),
            self.double_occupancy as u64,
        ];
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for w in words {
            for b in w.to_le_bytes() {
                h ^= u64::from(b);
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        }
        h
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckKind {
    Ordering,
    SinglePhotonRegime,
}

impl CheckKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CheckKind::Ordering => "ordering",
            CheckKind::SinglePhotonRegime => "single_photon_regime",
        }
    }
}

/// A failed precondition, with the values that caused it.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// `t_observe >= t_choice`: the choice is not delayed.
    WheelersConditionViolated { t_observe: f64, t_choice: f64 },
    /// `t_choice >= t_delay`: idlers have already left the memory.
    ChoiceAfterMemoryExpiry { t_choice: f64, t_delay: f64 },
    /// Mean signal spacing is not far enough above the coherence time.
    CoherenceOverlap { spacing: f64, required: f64 },
    /// `p_pair^2` exceeds the multi-pair threshold.
    MultiPairRegime { p_pair_sq: f64, threshold: f64 },
}

impl Violation {
    pub fn name(&self) -> &'static str {
        match self {
            Violation::WheelersConditionViolated { .. } => "WheelersConditionViolated",
            Violation::ChoiceAfterMemoryExpiry { .. } => "ChoiceAfterMemoryExpiry",
            Violation::CoherenceOverlap { .. } => "CoherenceOverlap",
            Violation::MultiPairRegime { .. } => "MultiPairRegime",
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::WheelersConditionViolated { t_observe, t_choice } => write!(
                f,
                "WheelersConditionViolated: t_observe {t_observe:e} s >= t_choice {t_choice:e} s"
            ),
            Violation::ChoiceAfterMemoryExpiry { t_choice, t_delay } => write!(
                f,
                "ChoiceAfterMemoryExpiry: t_choice {t_choice:e} s >= t_delay {t_delay:e} s"
            ),
            Violation::CoherenceOverlap { spacing, required } => write!(
                f,
                "CoherenceOverlap: mean signal spacing {spacing:e} s < required {required:e} s"
            ),
            Violation::MultiPairRegime {
                p_pair_sq,
                threshold,
            } => write!(
                f,
                "MultiPairRegime: p_pair^2 = {p_pair_sq:e} > threshold {threshold:e}"
            ),
        }
    }
}

/// Outcome of one named check. Passing means no violations.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub check: CheckKind,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Non-fatal notes about memory requirements outside current hardware reach.
#[derive(Debug, Clone, PartialEq)]
pub enum HardwareWarning {
    BinBelowMemoryFloor { dt_bin: f64 },
    ModeCountAboveCapacity { mode_count: u64 },
    StorageBeyondReach { t_delay: f64 },
}

impl fmt::Display for HardwareWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HardwareWarning::BinBelowMemoryFloor { dt_bin } => {
                write!(f, "dt_bin {dt_bin:e} s is below the ~10 ns memory bin floor")
            }
            HardwareWarning::ModeCountAboveCapacity { mode_count } => {
                write!(f, "mode_count {mode_count} exceeds 1e4 temporal modes")
            }
            HardwareWarning::StorageBeyondReach { t_delay } => {
                write!(f, "t_delay {t_delay:e} s exceeds 1e3 us of storage")
            }
        }
    }
}

/// Quantities derived from an [`ExperimentConfig`] for one operational unit.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivedPlan {
    pub t_observe: f64,
    /// Pump repetition rate, Hz.
    pub f_pump: f64,
    /// Mean generated pairs per unit.
    pub mu0: f64,
    pub mode_count: u64,
    pub dt_bin: f64,
    /// Mean jointly collected pairs per unit.
    pub n_entangled: f64,
    pub t_end: f64,
    pub validation: Vec<ValidationReport>,
    pub warnings: Vec<HardwareWarning>,
}

impl DerivedPlan {
    pub fn is_valid(&self) -> bool {
        self.validation.iter().all(ValidationReport::passed)
    }

    pub fn ordering_passed(&self) -> bool {
        self.validation
            .iter()
            .filter(|r| r.check == CheckKind::Ordering)
            .all(ValidationReport::passed)
    }

    pub fn violations(&self) -> impl Iterator<Item = &Violation> {
        self.validation.iter().flat_map(|r| r.violations.iter())
    }

    /// Number of pump pulses in one acquisition window.
    ///
    /// `f_pump * t_phys` is rounded when it is an integer up to float noise,
    /// otherwise the partial last pulse is kept.
    pub fn pulse_count(&self, config: &ExperimentConfig) -> u64 {
        let x = self.f_pump * config.t_phys;
        let r = x.round();
        if (x - r).abs() <= 1e-9 * x.max(1.0) {
            r as u64
        } else {
            x.ceil() as u64
        }
    }
}

/// Derives the per-unit plan and runs both precondition checks.
pub fn derive_plan(config: &ExperimentConfig) -> Result<DerivedPlan, PlanError> {
    config.validate()?;

    let t_observe = (1.0 + config.epsilon) * config.t_phys;
    let n_signal = config.n_signal as f64;
    let f_pump = n_signal / (config.t_phys * config.p_s * config.p_pair);
    let mu0 = n_signal / config.p_s;
    let mode_count = config.modes_per_photon * config.n_signal;
    let dt_bin = config.t_phys / mode_count as f64;

    let mut plan = DerivedPlan {
        t_observe,
        f_pump,
        mu0,
        mode_count,
        dt_bin,
        n_entangled: mu0 * config.p_s * config.p_i,
        t_end: config.t_delay + config.readout_time,
        validation: Vec::new(),
        warnings: Vec::new(),
    };

    let ordering = validate_ordering(&plan, config);
    let regime = check_single_photon_regime(&plan, config);
    plan.validation = vec![ordering, regime];

    if dt_bin < MEMORY_BIN_FLOOR {
        plan.warnings
            .push(HardwareWarning::BinBelowMemoryFloor { dt_bin });
    }
    if mode_count > MEMORY_MODE_CAPACITY {
        plan.warnings
            .push(HardwareWarning::ModeCountAboveCapacity { mode_count });
    }
    if config.t_delay > MEMORY_STORAGE_REACH {
        plan.warnings.push(HardwareWarning::StorageBeyondReach {
            t_delay: config.t_delay,
        });
    }
    Ok(plan)
}

/// Strict ordering `t_observe < t_choice < t_delay`.
pub fn validate_ordering(plan: &DerivedPlan, config: &ExperimentConfig) -> ValidationReport {
    let mut violations = Vec::new();
    if plan.t_observe >= config.t_choice {
        violations.push(Violation::WheelersConditionViolated {
            t_observe: plan.t_observe,
            t_choice: config.t_choice,
        });
    }
    if config.t_choice >= config.t_delay {
        violations.push(Violation::ChoiceAfterMemoryExpiry {
            t_choice: config.t_choice,
            t_delay: config.t_delay,
        });
    }
    ValidationReport {
        check: CheckKind::Ordering,
        violations,
    }
}

/// Mean time between collected signal photons.
pub fn mean_signal_spacing(plan: &DerivedPlan, config: &ExperimentConfig) -> f64 {
    1.0 / (plan.f_pump * config.p_pair * config.p_s)
}

/// Signals must be well separated in time and multi-pair emission rare.
pub fn check_single_photon_regime(
    plan: &DerivedPlan,
    config: &ExperimentConfig,
) -> ValidationReport {
    let mut violations = Vec::new();
    let spacing = mean_signal_spacing(plan, config);
    let required = config.coherence_factor * config.coherence_time;
    if spacing < required {
        violations.push(Violation::CoherenceOverlap { spacing, required });
    }
    let p_pair_sq = config.p_pair * config.p_pair;
    if p_pair_sq > config.multi_pair_threshold {
        violations.push(Violation::MultiPairRegime {
            p_pair_sq,
            threshold: config.multi_pair_threshold,
        });
    }
    ValidationReport {
        check: CheckKind::SinglePhotonRegime,
        violations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel_eq(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * a.abs().max(b.abs())
    }

    #[test]
    fn paper_defaults() {
        let plan = derive_plan(&ExperimentConfig::default()).unwrap();
        assert!(rel_eq(plan.f_pump, 4.17e8, 0.01));
        assert!(rel_eq(plan.dt_bin, 266.7e-9, 1e-3));
        assert_eq!(plan.mode_count, 1500);
        assert!(rel_eq(plan.mu0, 1666.667, 1e-6));
        assert!(rel_eq(plan.n_entangled, 150.0, 1e-9));
        assert!(rel_eq(plan.t_observe, 440e-6, REL_TOL));
        assert!(rel_eq(plan.t_end, 510e-6, REL_TOL));
        assert!(plan.is_valid());
        assert!(plan.warnings.is_empty());
    }

    #[test]
    fn unit_efficiencies() {
        let config = ExperimentConfig {
            t_phys: 1.0,
            t_choice: 1.5,
            t_delay: 2.0,
            n_signal: 1,
            p_s: 1.0,
            p_i: 1.0,
            p_pair: 1.0,
            multi_pair_threshold: 1.0,
            ..ExperimentConfig::default()
        };
        let plan = derive_plan(&config).unwrap();
        assert_eq!(plan.f_pump, 1.0);
        assert!(rel_eq(plan.dt_bin, 1.0 / 3.0, REL_TOL));
        assert_eq!(plan.mode_count, 3);
        assert_eq!(plan.mu0, 1.0);
        assert_eq!(plan.n_entangled, 1.0);
    }

    #[test]
    fn doubled_signal_target() {
        // 400 us / 3000 bins and 1000 / (400 us * 0.3 * 0.01).
        let config = ExperimentConfig {
            n_signal: 1000,
            ..ExperimentConfig::default()
        };
        let plan = derive_plan(&config).unwrap();
        assert!(rel_eq(plan.dt_bin, 133.333_333e-9, 1e-6));
        assert!(rel_eq(plan.f_pump, 8.333_333e8, 1e-6));
        assert_eq!(plan.mode_count, 3000);
    }

    fn ordering_for(t_choice: f64) -> ValidationReport {
        let config = ExperimentConfig {
            t_choice,
            ..ExperimentConfig::default()
        };
        derive_plan(&config).unwrap().validation[0].clone()
    }

    #[test]
    fn ordering_examples() {
        assert!(ordering_for(450e-6).passed());
        let early = ordering_for(430e-6);
        assert_eq!(early.violations.len(), 1);
        assert_eq!(early.violations[0].name(), "WheelersConditionViolated");
        let late = ordering_for(510e-6);
        assert_eq!(late.violations.len(), 1);
        assert_eq!(late.violations[0].name(), "ChoiceAfterMemoryExpiry");
        // strict inequalities: equality fails
        let config = ExperimentConfig::default();
        let mut plan = derive_plan(&config).unwrap();
        plan.t_observe = config.t_choice;
        assert!(!validate_ordering(&plan, &config).passed());
        assert!(!ordering_for(500e-6).passed());
    }

    #[test]
    fn single_photon_regime_examples() {
        let config = ExperimentConfig::default();
        let plan = derive_plan(&config).unwrap();
        assert!(rel_eq(mean_signal_spacing(&plan, &config), 0.8e-6, 1e-9));
        assert!(plan.validation[1].passed());

        let slow = ExperimentConfig {
            coherence_time: 1e-6,
            ..ExperimentConfig::default()
        };
        let r = &derive_plan(&slow).unwrap().validation[1];
        assert_eq!(r.violations.len(), 1);
        assert_eq!(r.violations[0].name(), "CoherenceOverlap");

        let bright = ExperimentConfig {
            p_pair: 0.1,
            ..ExperimentConfig::default()
        };
        let r = &derive_plan(&bright).unwrap().validation[1];
        assert_eq!(r.violations.len(), 1);
        assert_eq!(r.violations[0].name(), "MultiPairRegime");
    }

    #[test]
    fn invalid_fields_are_named() {
        let cases: Vec<(ExperimentConfig, &str)> = vec![
            (
                ExperimentConfig {
                    p_s: 1.5,
                    ..Default::default()
                },
                "p_s",
            ),
            (
                ExperimentConfig {
                    p_pair: 0.0,
                    ..Default::default()
                },
                "p_pair",
            ),
            (
                ExperimentConfig {
                    epsilon: 0.0,
                    ..Default::default()
                },
                "epsilon",
            ),
            (
                ExperimentConfig {
                    n_signal: 0,
                    ..Default::default()
                },
                "n_signal",
            ),
            (
                ExperimentConfig {
                    t_delay: 300e-6,
                    ..Default::default()
                },
                "t_delay",
            ),
            (
                ExperimentConfig {
                    fidelity: -0.1,
                    ..Default::default()
                },
                "fidelity",
            ),
        ];
        for (config, field) in cases {
            match derive_plan(&config) {
                Err(PlanError::InvalidConfig { field: f, .. }) => assert_eq!(f, field),
                other => panic!("expected InvalidConfig for {field}, got {other:?}"),
            }
        }
        let zero_f = ExperimentConfig {
            fidelity: 0.0,
            ..Default::default()
        };
        assert!(derive_plan(&zero_f).is_ok());
    }

    #[test]
    fn hardware_warnings() {
        let config = ExperimentConfig {
            n_signal: 20_000,
            t_delay: 2e-3,
            t_choice: 1e-3,
            ..Default::default()
        };
        let plan = derive_plan(&config).unwrap();
        let names: Vec<String> = plan.warnings.iter().map(|w| format!("{w:?}")).collect();
        assert_eq!(plan.warnings.len(), 3, "{names:?}");
        assert!(plan.is_valid());
    }

    #[test]
    fn pulse_count_rounds_float_noise() {
        let config = ExperimentConfig {
            n_signal: 6,
            ..Default::default()
        };
        let plan = derive_plan(&config).unwrap();
        assert_eq!(plan.pulse_count(&config), 2000);
        let plan = derive_plan(&ExperimentConfig::default()).unwrap();
        assert_eq!(plan.pulse_count(&ExperimentConfig::default()), 166_667);
    }
}
