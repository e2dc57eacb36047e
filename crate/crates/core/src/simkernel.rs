//! Stochastic record of one operational unit.
//!
//! Generation follows the thinning chain: pairs from the pump pulses, signal
//! and idler collection, fidelity survival of the stored idler, then memory
//! bin assignment. [`route_detection`] sends every collected signal through
//! the final coupler under one hypothesis model and one delayed choice.
//!
//! Per-pulse pair counts are iid Poisson(`p_pair`). They are sampled as a
//! Poisson total over all pulses followed by a uniform allocation of each pair
//! to a pulse, which has the same joint law and costs O(pairs) rather than
//! O(pulses).

use std::collections::BTreeMap;
use std::fmt;
use std::io::{self, Write};

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use thiserror::Error;

use crate::planner::{DerivedPlan, ExperimentConfig, OccupancyPolicy};
use crate::rng::{stream_rng, GENERATION_STREAM, ROUTING_STREAM};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("plan failed the ordering check; refusing to simulate")]
    OrderingNotValidated,
    #[error("trace has no memory bins assigned")]
    BinsNotAssigned,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HypothesisModel {
    /// The delayed choice has no effect on recorded signals.
    CausalityPreserving,
    /// Erasure makes the capable subset interfere at the coupler.
    InformationalCoherence,
}

impl HypothesisModel {
    pub fn as_str(self) -> &'static str {
        match self {
            HypothesisModel::CausalityPreserving => "causal",
            HypothesisModel::InformationalCoherence => "ic",
        }
    }
}

impl fmt::Display for HypothesisModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DelayedChoice {
    Erase,
    Preserve,
}

impl DelayedChoice {
    pub fn as_str(self) -> &'static str {
        match self {
            DelayedChoice::Erase => "erase",
            DelayedChoice::Preserve => "preserve",
        }
    }
}

impl fmt::Display for DelayedChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One generated signal-idler pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PairEvent {
    pub pulse_index: u64,
    /// Emission time, `pulse_index / f_pump`.
    pub time: f64,
    pub signal_collected: bool,
    pub idler_collected: bool,
    /// Only ever true when `idler_collected` is.
    pub fidelity_pass: bool,
    /// Memory bin of the stored idler, set by [`assign_bins`].
    pub bin_index: Option<u64>,
    /// The generating pulse produced two or more pairs.
    pub multi_pair: bool,
}

impl PairEvent {
    /// Signal and idler both collected and the stored idler still entangled.
    pub fn interference_capable(&self) -> bool {
        self.signal_collected && self.idler_collected && self.fidelity_pass
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TraceCounters {
    pub generated_pairs: u64,
    pub signal_collected: u64,
    pub idler_stored: u64,
    pub interference_capable: u64,
    pub double_occupied_bins: u64,
    pub multi_pair_pulses: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnitTrace {
    pub seed: u64,
    /// Fingerprint of the generating config.
    pub config_id: u64,
    pub pulses: u64,
    /// Sorted by pulse index.
    pub events: Vec<PairEvent>,
    pub occupancy: BTreeMap<u64, u32>,
    pub counters: TraceCounters,
    pub bins_assigned: bool,
}

impl UnitTrace {
    /// Counters recomputed from the event list and occupancy map.
    pub fn recount(&self) -> TraceCounters {
        let mut c = TraceCounters {
            generated_pairs: self.events.len() as u64,
            double_occupied_bins: self.occupancy.values().filter(|&&n| n >= 2).count() as u64,
            ..TraceCounters::default()
        };
        for e in &self.events {
            c.signal_collected += u64::from(e.signal_collected);
            c.idler_stored += u64::from(e.idler_collected);
            c.interference_capable += u64::from(e.interference_capable());
        }
        let mut prev = None;
        let mut run = 0u32;
        for e in &self.events {
            if prev == Some(e.pulse_index) {
                run += 1;
                if run == 2 {
                    c.multi_pair_pulses += 1;
                }
            } else {
                prev = Some(e.pulse_index);
                run = 1;
            }
        }
        c
    }

    /// Writes one CSV record per event, prefixed by `unit`.
    ///
    /// Columns: unit, pulse_index, time, signal_collected, idler_collected,
    /// fidelity_pass, multi_pair, bin_index (empty when unassigned).
    pub fn write_csv<W: Write>(&self, unit: u64, out: &mut W) -> io::Result<()> {
        for e in &self.events {
            let bin = e.bin_index.map(|b| b.to_string()).unwrap_or_default();
            writeln!(
                out,
                "{unit},{},{:e},{},{},{},{},{bin}",
                e.pulse_index,
                e.time,
                u8::from(e.signal_collected),
                u8::from(e.idler_collected),
                u8::from(e.fidelity_pass),
                u8::from(e.multi_pair),
            )?;
        }
        Ok(())
    }
}

pub const TRACE_CSV_HEADER: &str =
    "unit,pulse_index,time,signal_collected,idler_collected,fidelity_pass,multi_pair,bin_index";

/// Marginal detection outcome of one unit at the monitored port.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UnitResult {
    pub monitored_count: u64,
    pub total_signal_count: u64,
    pub capable_count: u64,
    pub model: HypothesisModel,
    pub choice: DelayedChoice,
    pub seed: u64,
    pub config_id: u64,
}

/// Draws the pairs of one unit with collection and fidelity flags.
pub fn generate_pairs(
    plan: &DerivedPlan,
    config: &ExperimentConfig,
    seed: u64,
) -> Result<UnitTrace, SimError> {
    if !plan.ordering_passed() {
        return Err(SimError::OrderingNotValidated);
    }
    let mut rng = stream_rng(seed, GENERATION_STREAM);
    let pulses = plan.pulse_count(config);
    let mean = pulses as f64 * config.p_pair;

    let total = if mean > 0.0 && pulses > 0 {
        // mean is finite and positive here, so construction cannot fail
        let law = Poisson::new(mean).expect("positive finite Poisson mean");
        law.sample(&mut rng) as u64
    } else {
        0
    };

    let mut pulse_ids: Vec<u64> = (0..total).map(|_| rng.random_range(0..pulses)).collect();
    pulse_ids.sort_unstable();

    let mut events = Vec::with_capacity(pulse_ids.len());
    let mut counters = TraceCounters {
        generated_pairs: total,
        ..TraceCounters::default()
    };
    for (k, &pulse_index) in pulse_ids.iter().enumerate() {
        let signal_collected = rng.random::<f64>() < config.p_s;
        let idler_collected = rng.random::<f64>() < config.p_i;
        let fidelity_draw = rng.random::<f64>() < config.fidelity;
        let fidelity_pass = idler_collected && fidelity_draw;

        let same_prev = k > 0 && pulse_ids[k - 1] == pulse_index;
        let same_next = pulse_ids.get(k + 1) == Some(&pulse_index);
        if same_prev && !(k > 1 && pulse_ids[k - 2] == pulse_index) {
            counters.multi_pair_pulses += 1;
        }

        let event = PairEvent {
            pulse_index,
            time: pulse_index as f64 / plan.f_pump,
            signal_collected,
            idler_collected,
            fidelity_pass,
            bin_index: None,
            multi_pair: same_prev || same_next,
        };
        counters.signal_collected += u64::from(signal_collected);
        counters.idler_stored += u64::from(idler_collected);
        counters.interference_capable += u64::from(event.interference_capable());
        events.push(event);
    }

    Ok(UnitTrace {
        seed,
        config_id: config.fingerprint(),
        pulses,
        events,
        occupancy: BTreeMap::new(),
        counters,
        bins_assigned: false,
    })
}

/// Places every stored idler in its memory bin and applies `policy` to bins
/// holding two or more idlers.
pub fn assign_bins(mut trace: UnitTrace, plan: &DerivedPlan, policy: OccupancyPolicy) -> UnitTrace {
    let last_bin = plan.mode_count.saturating_sub(1);
    let mut occupancy: BTreeMap<u64, u32> = BTreeMap::new();
    for e in trace.events.iter_mut() {
        e.bin_index = None;
        if e.idler_collected {
            let bin = ((e.time / plan.dt_bin).floor() as u64).min(last_bin);
            e.bin_index = Some(bin);
            *occupancy.entry(bin).or_insert(0) += 1;
        }
    }
    if policy == OccupancyPolicy::Discard {
        for e in trace.events.iter_mut() {
            if let Some(bin) = e.bin_index {
                if occupancy[&bin] >= 2 {
                    e.fidelity_pass = false;
                }
            }
        }
    }
    trace.occupancy = occupancy;
    trace.counters = trace.recount();
    trace.bins_assigned = true;
    trace
}

/// Routes each collected signal through the final coupler.
///
/// One uniform draw is consumed per signal trial whatever its outcome, so
/// causal and IC+Preserve runs on the same seed are bit-identical.
pub fn route_detection(
    trace: &UnitTrace,
    model: HypothesisModel,
    choice: DelayedChoice,
    seed: u64,
) -> Result<UnitResult, SimError> {
    if !trace.bins_assigned {
        return Err(SimError::BinsNotAssigned);
    }
    let erase_active =
        model == HypothesisModel::InformationalCoherence && choice == DelayedChoice::Erase;
    let mut rng = stream_rng(seed, ROUTING_STREAM);
    let mut monitored = 0u64;
    let mut signals = 0u64;
    let mut capable = 0u64;
    for e in trace.events.iter().filter(|e| e.signal_collected) {
        signals += 1;
        let half: bool = rng.random::<f64>() < 0.5;
        let is_capable = e.interference_capable();
        capable += u64::from(is_capable);
        let hit = if erase_active && is_capable { true } else { half };
        monitored += u64::from(hit);
    }
    Ok(UnitResult {
        monitored_count: monitored,
        total_signal_count: signals,
        capable_count: capable,
        model,
        choice,
        seed,
        config_id: trace.config_id,
    })
}

/// Full trace of one unit with bins assigned under the config's policy.
pub fn simulate_trace(
    plan: &DerivedPlan,
    config: &ExperimentConfig,
    seed: u64,
) -> Result<UnitTrace, SimError> {
    let trace = generate_pairs(plan, config, seed)?;
    Ok(assign_bins(trace, plan, config.double_occupancy))
}

/// Generates, bins and routes one unit.
pub fn simulate_unit(
    plan: &DerivedPlan,
    config: &ExperimentConfig,
    seed: u64,
    model: HypothesisModel,
    choice: DelayedChoice,
) -> Result<UnitResult, SimError> {
    let trace = simulate_trace(plan, config, seed)?;
    route_detection(&trace, model, choice, seed)
}
