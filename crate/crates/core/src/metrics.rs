//! Consumption, performance, peak, overhead and TCO accounting.
//!
//! Internally everything accrues in exact integer node·milliseconds of
//! scaled time; conversion to original-time node·hours happens once, on
//! output, so speedup 1 and speedup 1000 runs report identical numbers.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Deserialize;
use thiserror::Error;

use crate::elasticity::{AdjustmentRecord, Regime, SETUP_COST_PER_NODE_S};
use crate::runtime::EnvId;
use crate::trace::WorkloadKind;

const MS_PER_HOUR: f64 = 3_600_000.0;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("negative accrual interval {0} h")]
    NegativeInterval(f64),
    #[error("unknown environment {0}")]
    UnknownEnv(EnvId),
    #[error("baseline '{baseline}' has no provider '{provider}'")]
    MissingBaseline { baseline: String, provider: String },
    #[error("depreciation months must be positive")]
    ZeroDepreciation,
    #[error("TCO input {0} is negative")]
    NegativeInput(&'static str),
}

/// Tracks the maximum of a piecewise-constant function whose value can
/// change several times at one timestamp; only the value a timestamp
/// settles on counts.
#[derive(Debug, Clone, Default)]
struct PeakTracker {
    at: u64,
    current: u64,
    peak: u64,
}

impl PeakTracker {
    fn set(&mut self, time: u64, value: u64) {
        if time != self.at {
            self.peak = self.peak.max(self.current);
            self.at = time;
        }
        self.current = value;
    }

    fn peak(&self) -> u64 {
        self.peak.max(self.current)
    }
}

#[derive(Debug, Clone, Default)]
struct EnvAccount {
    billed_node_ms: u128,
    extra_node_hours: f64,
    holding: u64,
    peak: PeakTracker,
    adjustments: u64,
    adjusted_nodes: u64,
}

/// Per-environment node·time accrual, peak tracking and adjustment
/// overhead for one scenario run.
#[derive(Debug, Clone)]
pub struct ConsumptionLedger {
    speedup: f64,
    envs: Vec<EnvAccount>,
    total: PeakTracker,
    total_holding: u64,
}

impl ConsumptionLedger {
    /// `speedup` converts scaled milliseconds back to original time.
    pub fn new(envs: usize, speedup: f64) -> Self {
        ConsumptionLedger {
            speedup,
            envs: vec![EnvAccount::default(); envs],
            total: PeakTracker::default(),
            total_holding: 0,
        }
    }

    fn env(&mut self, env: EnvId) -> Result<&mut EnvAccount, MetricsError> {
        self.envs.get_mut(env.0).ok_or(MetricsError::UnknownEnv(env))
    }

    fn to_hours(&self, scaled_ms: u128) -> f64 {
        scaled_ms as f64 * self.speedup / MS_PER_HOUR
    }

    /// Adds `nodes × interval` node·hours of original time.
    pub fn accrue_usage(&mut self, env: EnvId, nodes: u32, interval_h: f64) -> Result<(), MetricsError> {
        if interval_h < 0.0 || interval_h.is_nan() {
            return Err(MetricsError::NegativeInterval(interval_h));
        }
        self.env(env)?.extra_node_hours += nodes as f64 * interval_h;
        Ok(())
    }

    /// Adds exact billed node·milliseconds of scaled time.
    pub fn accrue_node_ms(&mut self, env: EnvId, node_ms: u128) -> Result<(), MetricsError> {
        self.env(env)?.billed_node_ms += node_ms;
        Ok(())
    }

    /// Applies a holding change at scaled `time` to the peak samplers.
    pub fn change_holding(&mut self, env: EnvId, time: u64, delta: i64) -> Result<(), MetricsError> {
        let acct = self.env(env)?;
        acct.holding = acct.holding.checked_add_signed(delta).expect("holding underflow");
        let h = acct.holding;
        acct.peak.set(time, h);
        self.total_holding = self.total_holding.checked_add_signed(delta).expect("holding underflow");
        self.total.set(time, self.total_holding);
        Ok(())
    }

    /// Counts one adjustment and its |delta| × setup-cost overhead.
    pub fn record_adjustment(&mut self, record: &AdjustmentRecord) -> Result<(), MetricsError> {
        let acct = self.env(record.env)?;
        acct.adjustments += 1;
        acct.adjusted_nodes += record.delta.unsigned_abs();
        Ok(())
    }

    pub fn rc_node_hours(&self, env: EnvId) -> f64 {
        let a = &self.envs[env.0];
        self.to_hours(a.billed_node_ms) + a.extra_node_hours
    }

    pub fn trc_node_hours(&self) -> f64 {
        (0..self.envs.len()).map(|i| self.rc_node_hours(EnvId(i))).sum()
    }

    pub fn peak_nodes(&self, env: EnvId) -> u64 {
        self.envs[env.0].peak.peak()
    }

    pub fn total_peak_nodes(&self) -> u64 {
        self.total.peak()
    }

    pub fn holding(&self, env: EnvId) -> u64 {
        self.envs[env.0].holding
    }

    pub fn adjustments(&self, env: EnvId) -> u64 {
        self.envs[env.0].adjustments
    }

    pub fn overhead_node_hours(&self, env: EnvId) -> f64 {
        overhead_hours(self.envs[env.0].adjusted_nodes)
    }

    pub fn total_adjustments(&self) -> u64 {
        self.envs.iter().map(|a| a.adjustments).sum()
    }

    pub fn total_overhead_node_hours(&self) -> f64 {
        overhead_hours(self.envs.iter().map(|a| a.adjusted_nodes).sum())
    }
}

fn overhead_hours(nodes: u64) -> f64 {
    nodes as f64 * SETUP_COST_PER_NODE_S / 3600.0
}

/// What an environment contributes to the report besides its ledger.
#[derive(Debug, Clone, PartialEq)]
pub struct ProviderOutcome {
    pub env: EnvId,
    pub name: String,
    pub kind: WorkloadKind,
    pub regime: Regime,
    /// Completions with completion time inside the window.
    pub completed: u64,
    pub unfinished: u64,
}

/// RC per provider of a named reference configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Baselines {
    pub name: String,
    pub rc: BTreeMap<String, f64>,
}

impl Baselines {
    pub fn from_report(name: impl Into<String>, report: &MetricsReport) -> Self {
        Baselines {
            name: name.into(),
            rc: report.providers.iter().map(|p| (p.name.clone(), p.rc_node_hours)).collect(),
        }
    }

    pub fn trc(&self) -> f64 {
        self.rc.values().sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProviderReport {
    pub name: String,
    pub kind: WorkloadKind,
    pub regime: Regime,
    pub completed_jobs: u64,
    pub unfinished_jobs: u64,
    /// Completed MTC tasks per original second of the window; 0 for HTC.
    pub tasks_per_second: f64,
    pub rc_node_hours: f64,
    pub saved_percent: Option<f64>,
    pub peak_nodes: u64,
    pub adjustments: u64,
    pub overhead_node_hours: f64,
}

impl ProviderReport {
    /// The provider's performance metric.
    pub fn performance(&self) -> f64 {
        match self.kind {
            WorkloadKind::Htc => self.completed_jobs as f64,
            WorkloadKind::Mtc => self.tasks_per_second,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub scenario: String,
    pub window_hours: f64,
    pub providers: Vec<ProviderReport>,
    pub baseline: Option<String>,
    pub trc_node_hours: f64,
    pub trc_saved_percent: Option<f64>,
    pub peak_nodes: u64,
    pub adjustments: u64,
    pub overhead_node_hours: f64,
}

impl MetricsReport {
    pub fn provider(&self, name: &str) -> Option<&ProviderReport> {
        self.providers.iter().find(|p| p.name == name)
    }
}

fn saved(baseline: f64, rc: f64) -> f64 {
    if baseline == 0.0 {
        0.0
    } else {
        (baseline - rc) / baseline * 100.0
    }
}

/// Assembles the report at the horizon. `window_h` is the metrics window
/// in original hours.
pub fn finalize_report(
    scenario: &str,
    ledger: &ConsumptionLedger,
    outcomes: &[ProviderOutcome],
    window_h: f64,
    baselines: Option<&Baselines>,
) -> Result<MetricsReport, MetricsError> {
    let window_s = window_h * 3600.0;
    let mut providers = Vec::with_capacity(outcomes.len());
    for o in outcomes {
        let rc = ledger.rc_node_hours(o.env);
        let saved_percent = match baselines {
            Some(b) => {
                let base = b.rc.get(&o.name).ok_or_else(|| MetricsError::MissingBaseline {
                    baseline: b.name.clone(),
                    provider: o.name.clone(),
                })?;
                Some(saved(*base, rc))
            }
            None => None,
        };
        let tasks_per_second = match o.kind {
            WorkloadKind::Mtc if window_s > 0.0 => o.completed as f64 / window_s,
            _ => 0.0,
        };
        providers.push(ProviderReport {
            name: o.name.clone(),
            kind: o.kind,
            regime: o.regime,
            completed_jobs: o.completed,
            unfinished_jobs: o.unfinished,
            tasks_per_second,
            rc_node_hours: rc,
            saved_percent,
            peak_nodes: ledger.peak_nodes(o.env),
            adjustments: ledger.adjustments(o.env),
            overhead_node_hours: ledger.overhead_node_hours(o.env),
        });
    }
    let trc: f64 = providers.iter().map(|p| p.rc_node_hours).sum();
    Ok(MetricsReport {
        scenario: scenario.to_string(),
        window_hours: window_h,
        baseline: baselines.map(|b| b.name.clone()),
        trc_saved_percent: baselines.map(|b| saved(b.trc(), trc)),
        trc_node_hours: trc,
        peak_nodes: ledger.total_peak_nodes(),
        adjustments: ledger.total_adjustments(),
        overhead_node_hours: ledger.total_overhead_node_hours(),
        providers,
    })
}

pub const CSV_HEADER: &str = "scenario,provider,kind,regime,completed_jobs,unfinished_jobs,tasks_per_second,rc_node_hours,saved_percent,baseline,peak_nodes,adjustments,overhead_node_hours";

fn opt_pct(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.2}")).unwrap_or_default()
}

/// One row per provider plus a `TOTAL` row, fixed decimal formatting.
pub fn report_csv_rows(report: &MetricsReport, out: &mut String) {
    let base = report.baseline.as_deref().unwrap_or("");
    for p in &report.providers {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{:.4},{:.3},{},{},{},{},{:.3}",
            report.scenario,
            p.name,
            p.kind,
            p.regime,
            p.completed_jobs,
            p.unfinished_jobs,
            p.tasks_per_second,
            p.rc_node_hours,
            opt_pct(p.saved_percent),
            base,
            p.peak_nodes,
            p.adjustments,
            p.overhead_node_hours
        );
    }
    let completed: u64 = report.providers.iter().map(|p| p.completed_jobs).sum();
    let unfinished: u64 = report.providers.iter().map(|p| p.unfinished_jobs).sum();
    let tps: f64 = report.providers.iter().map(|p| p.tasks_per_second).sum();
    let _ = writeln!(
        out,
        "{},TOTAL,,,{},{},{:.4},{:.3},{},{},{},{},{:.3}",
        report.scenario,
        completed,
        unfinished,
        tps,
        report.trc_node_hours,
        opt_pct(report.trc_saved_percent),
        base,
        report.peak_nodes,
        report.adjustments,
        report.overhead_node_hours
    );
}

pub fn reports_to_csv(reports: &[MetricsReport]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in reports {
        report_csv_rows(r, &mut out);
    }
    out
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DedicatedCost {
    pub capex: f64,
    pub depreciation_months: f64,
    /// Total over the depreciation period.
    pub maintenance: f64,
    pub energy_space_per_month: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeasedCost {
    pub instances: f64,
    pub hours: f64,
    pub price_per_instance_hour: f64,
    pub inbound_gb: f64,
    pub price_per_gb: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TcoInputs {
    pub dedicated: DedicatedCost,
    pub leased: LeasedCost,
}

impl TcoInputs {
    /// Reads `[dedicated]` and `[leased]` tables.
    pub fn from_toml(text: &str) -> Result<TcoInputs, toml::de::Error> {
        toml::from_str(text)
    }
}

fn non_negative(pairs: &[(&'static str, f64)]) -> Result<(), MetricsError> {
    for &(name, v) in pairs {
        if v < 0.0 || v.is_nan() {
            return Err(MetricsError::NegativeInput(name));
        }
    }
    Ok(())
}

/// Monthly cost of owning the cluster: amortized capex and maintenance
/// plus energy and space.
pub fn tco_dedicated(inputs: &TcoInputs) -> Result<f64, MetricsError> {
    let d = &inputs.dedicated;
    non_negative(&[
        ("capex", d.capex),
        ("maintenance", d.maintenance),
        ("energy_space_per_month", d.energy_space_per_month),
    ])?;
    if d.depreciation_months <= 0.0 || d.depreciation_months.is_nan() {
        return Err(MetricsError::ZeroDepreciation);
    }
    Ok(d.capex / d.depreciation_months + d.maintenance / d.depreciation_months + d.energy_space_per_month)
}

/// Monthly cost of leasing: instance hours plus inbound transfer.
pub fn tco_leased(inputs: &TcoInputs) -> Result<f64, MetricsError> {
    let l = &inputs.leased;
    non_negative(&[
        ("instances", l.instances),
        ("hours", l.hours),
        ("price_per_instance_hour", l.price_per_instance_hour),
        ("inbound_gb", l.inbound_gb),
        ("price_per_gb", l.price_per_gb),
    ])?;
    Ok(l.instances * l.hours * l.price_per_instance_hour + l.inbound_gb * l.price_per_gb)
}
