//! Text serializations of plans, verdicts and campaign reports.
//!
//! Human output is an aligned `key = value` narrative. Machine output is a
//! single space-separated record of eight `key=value` fields:
//! `model choice units seed observed_total z_causal z_ic regime`.
//! Fields that do not apply are written as `-`. Both are byte-stable for
//! identical inputs.

use std::fmt::Write as _;
use std::io::{self, Write};

use crate::analytics::RegimeVerdict;
use crate::planner::{DerivedPlan, ExperimentConfig};
use crate::simkernel::{DelayedChoice, HypothesisModel};

use super::CampaignReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Human,
    Machine,
}

const ASSUMPTION_NOTE: &str = "fidelity and coherence_time are assumed inputs, not measurements";

fn kv(out: &mut String, key: &str, value: impl std::fmt::Display) {
    let _ = writeln!(out, "{key:<24} = {value}");
}

fn section(out: &mut String, title: &str) {
    let _ = writeln!(out, "[{title}]");
}

fn plan_body(out: &mut String, plan: &DerivedPlan, config: &ExperimentConfig) {
    section(out, "plan");
    kv(out, "t_observe", plan.t_observe);
    kv(out, "f_pump", plan.f_pump);
    kv(out, "mu0", plan.mu0);
    kv(out, "mode_count", plan.mode_count);
    kv(out, "dt_bin", plan.dt_bin);
    kv(out, "n_entangled", plan.n_entangled);
    kv(out, "t_end", plan.t_end);
    kv(out, "t_choice", config.t_choice);
    kv(out, "t_delay", config.t_delay);
    kv(out, "fidelity", config.fidelity);
    kv(out, "double_occupancy", config.double_occupancy.as_str());
    section(out, "validation");
    for report in &plan.validation {
        let status = if report.passed() { "pass" } else { "fail" };
        kv(out, report.check.as_str(), status);
        for v in &report.violations {
            kv(out, "violation", v);
        }
    }
    for w in &plan.warnings {
        kv(out, "warning", w);
    }
    kv(out, "note", ASSUMPTION_NOTE);
}

fn validation_banner(out: &mut String, plan: &DerivedPlan) {
    let names: Vec<&str> = plan.violations().map(|v| v.name()).collect();
    let _ = writeln!(out, "VALIDATION FAILED: {}", names.join(", "));
}

/// Key-value report of a derived plan and its checks.
pub fn render_plan(plan: &DerivedPlan, config: &ExperimentConfig) -> String {
    let mut out = String::new();
    if !plan.is_valid() {
        validation_banner(&mut out, plan);
    }
    plan_body(&mut out, plan, config);
    out
}

fn verdict_body(out: &mut String, v: &RegimeVerdict) {
    section(out, "verdict");
    kv(out, "observed_total", v.observed_total);
    kv(out, "units", v.units);
    kv(out, "expected_causal", v.expected_causal);
    kv(out, "expected_ic", v.expected_ic);
    kv(out, "z_causal", format!("{:.6}", v.z_causal));
    kv(out, "z_ic", format!("{:.6}", v.z_ic));
    kv(out, "alpha", v.alpha);
    kv(out, "critical_z", format!("{:.6}", v.critical));
    kv(out, "log_likelihood_ratio", format!("{:.6}", v.log_likelihood_ratio));
    kv(out, "regime", v.regime);
    kv(out, "interpretation", v.regime.description());
}

/// One machine record. `None` fields render as `-`.
pub fn machine_record(
    model: Option<HypothesisModel>,
    choice: Option<DelayedChoice>,
    units: u64,
    seed: Option<u64>,
    verdict: Option<&RegimeVerdict>,
) -> String {
    let dash = || "-".to_string();
    let (observed, zc, zi, regime) = match verdict {
        Some(v) => (
            v.observed_total.to_string(),
            format!("{:.6}", v.z_causal),
            format!("{:.6}", v.z_ic),
            v.regime.as_str().to_string(),
        ),
        None => (dash(), dash(), dash(), "gated".to_string()),
    };
    format!(
        "model={} choice={} units={} seed={} observed_total={} z_causal={} z_ic={} regime={}",
        model.map(|m| m.as_str().to_string()).unwrap_or_else(dash),
        choice.map(|c| c.as_str().to_string()).unwrap_or_else(dash),
        units,
        seed.map(|s| s.to_string()).unwrap_or_else(dash),
        observed,
        zc,
        zi,
        regime,
    )
}

/// Report for externally supplied totals.
pub fn render_verdict(v: &RegimeVerdict, format: ReportFormat) -> String {
    match format {
        ReportFormat::Machine => machine_record(None, None, v.units, None, Some(v)) + "\n",
        ReportFormat::Human => {
            let mut out = String::new();
            verdict_body(&mut out, v);
            out
        }
    }
}

pub fn render_report(report: &CampaignReport, format: ReportFormat) -> String {
    let spec = &report.spec;
    let verdict = report.outcome.as_ref().map(|o| &o.verdict);
    match format {
        ReportFormat::Machine => {
            machine_record(Some(spec.model), Some(spec.choice), spec.units, Some(spec.master_seed), verdict) + "\n"
        }
        ReportFormat::Human => {
            let mut out = String::new();
            if !report.plan.is_valid() {
                validation_banner(&mut out, &report.plan);
            }
            section(&mut out, "campaign");
            kv(&mut out, "model", spec.model);
            kv(&mut out, "choice", spec.choice);
            kv(&mut out, "units", spec.units);
            kv(&mut out, "master_seed", spec.master_seed);
            kv(&mut out, "mode", spec.mode.as_str());
            kv(&mut out, "alpha", spec.alpha);
            plan_body(&mut out, &report.plan, &spec.config);
            if let Some(o) = &report.outcome {
                section(&mut out, "statistics");
                kv(&mut out, "predicted_mean_causal", o.moments_causal.mean);
                kv(&mut out, "predicted_sigma_causal", o.moments_causal.sigma);
                kv(&mut out, "predicted_mean_ic_erase", o.moments_ic.mean);
                kv(&mut out, "predicted_sigma_ic_erase", o.moments_ic.sigma);
                kv(&mut out, "predicted_mean_generating", o.moments_generating.mean);
                kv(&mut out, "total_monitored", o.stats.total_monitored);
                kv(&mut out, "total_signal", o.stats.total_signal);
                kv(&mut out, "total_capable", o.stats.total_capable);
                kv(&mut out, "mean_monitored", format!("{:.6}", o.stats.mean));
                kv(&mut out, "variance_monitored", format!("{:.6}", o.stats.variance));
                kv(&mut out, "standard_error", format!("{:.6}", o.stats.standard_error()));
                verdict_body(&mut out, &o.verdict);
            }
            out
        }
    }
}

pub fn emit_report<W: Write>(report: &CampaignReport, format: ReportFormat, sink: &mut W) -> io::Result<()> {
    sink.write_all(render_report(report, format).as_bytes())?;
    sink.flush()
}
