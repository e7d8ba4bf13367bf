//! Scenario files, regime comparisons, parameter sweeps and the
//! equivalence/dominance checks.
//!
//! A scenario is a TOML document:
//!
//! ```toml
//! name = "baseline"
//! window = 1209600          # metrics window, original seconds
//! speedup = 1000
//! regime = "dynamic"        # dedicated | fixed-lease | per-job | dynamic
//! baseline = "dedicated"    # regime whose RC the saved% is measured against
//!
//! [[provider]]
//! name = "NASA"
//! kind = "htc"
//! trace = "../data/nasa.swf"   # relative to the scenario file
//! start = 0                    # window offset into the trace, seconds
//! capacity = 128               # size under dedicated / fixed-lease
//! cycle = 60                   # scheduling = checking cycle S, seconds
//! initial = 40                 # B
//! threshold = 1.5              # R, `inf` allowed
//! lease_unit = 3600            # C, seconds
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::Deserialize;
use thiserror::Error;

use crate::driver::{self, scaled_ms, ProviderSetup, RunConfig, RunError, RunOptions, RunOutcome};
use crate::elasticity::{ElasticityPolicy, Regime};
use crate::metrics::{reports_to_csv, Baselines, MetricsError, MetricsReport, ProviderReport};
use crate::runtime::JobKey;
use crate::sim::SimTime;
use crate::trace::{
    extract_window, parse_dax, parse_swf_with, parse_workflow, plan_repetition, rescale_time, SwfOptions,
    TraceError, WorkloadKind, WorkloadTrace,
};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },
    #[error("{path}: {source}")]
    Trace { path: PathBuf, source: TraceError },
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error(transparent)]
    Run(#[from] RunError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ScenarioError + '_ {
    move |source| ScenarioError::Io { path: path.to_path_buf(), source }
}

const DEFAULT_WINDOW_S: f64 = 14.0 * 86400.0;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    name: Option<String>,
    window: Option<f64>,
    speedup: Option<f64>,
    regime: Option<String>,
    baseline: Option<String>,
    #[serde(default)]
    provider: Vec<ProviderFile>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProviderFile {
    name: String,
    kind: String,
    trace: PathBuf,
    start: Option<f64>,
    procs_per_node: Option<u32>,
    capacity: Option<u32>,
    cycle: u64,
    initial: Option<u32>,
    threshold: Option<f64>,
    lease_unit: Option<u64>,
    regime: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProviderSpec {
    pub name: String,
    pub kind: WorkloadKind,
    pub trace: PathBuf,
    pub start_s: f64,
    pub procs_per_node: u32,
    /// Size under the dedicated and fixed-lease regimes.
    pub capacity: u32,
    /// Dynamic-regime parameters; `check_cycle_s` is also the scheduling
    /// cycle under every regime.
    pub dynamic: ElasticityPolicy,
    /// Overrides the scenario-wide regime for this provider.
    pub regime: Option<Regime>,
}

impl ProviderSpec {
    pub fn policy(&self, regime: Regime) -> ElasticityPolicy {
        let d = &self.dynamic;
        match regime {
            Regime::Dynamic => *d,
            Regime::PerJob => ElasticityPolicy { check_cycle_s: d.check_cycle_s, ..ElasticityPolicy::per_job(d.lease_unit_s) },
            r => ElasticityPolicy { lease_unit_s: d.lease_unit_s, ..ElasticityPolicy::fixed(r, self.capacity, d.check_cycle_s) },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub window_s: f64,
    pub speedup: f64,
    pub regime: Regime,
    pub baseline: Option<Regime>,
    pub providers: Vec<ProviderSpec>,
}

fn parse_kind(s: &str) -> Result<WorkloadKind, ScenarioError> {
    match s.to_ascii_lowercase().as_str() {
        "htc" => Ok(WorkloadKind::Htc),
        "mtc" => Ok(WorkloadKind::Mtc),
        other => Err(ScenarioError::Invalid(format!("unknown workload kind '{other}'"))),
    }
}

fn parse_regime(s: &str) -> Result<Regime, ScenarioError> {
    s.parse::<Regime>().map_err(|e| ScenarioError::Invalid(e.to_string()))
}

/// Parses scenario text; relative trace paths resolve against `base`.
pub fn parse_scenario(text: &str, base: &Path, origin: &Path) -> Result<Scenario, ScenarioError> {
    let file: ScenarioFile =
        toml::from_str(text).map_err(|e| ScenarioError::Format { path: origin.to_path_buf(), msg: e.to_string() })?;
    let window_s = file.window.unwrap_or(DEFAULT_WINDOW_S);
    if !(window_s.is_finite() && window_s > 0.0) {
        return Err(ScenarioError::Invalid(format!("window must be positive, got {window_s}")));
    }
    let speedup = file.speedup.unwrap_or(1000.0);
    if !(speedup.is_finite() && speedup > 0.0) {
        return Err(ScenarioError::Invalid(format!("speedup must be positive, got {speedup}")));
    }
    if file.provider.is_empty() {
        return Err(ScenarioError::Invalid("at least one [[provider]] is required".into()));
    }
    let mut providers = Vec::with_capacity(file.provider.len());
    for p in file.provider {
        if providers.iter().any(|q: &ProviderSpec| q.name == p.name) {
            return Err(ScenarioError::Invalid(format!("duplicate provider name '{}'", p.name)));
        }
        let dynamic = ElasticityPolicy::dynamic(
            p.initial.unwrap_or(0),
            p.threshold.unwrap_or(f64::INFINITY),
            p.cycle,
            p.lease_unit.unwrap_or(3600),
        );
        dynamic
            .validate()
            .map_err(|e| ScenarioError::Invalid(format!("provider '{}': {e}", p.name)))?;
        let trace = if p.trace.is_absolute() { p.trace } else { base.join(p.trace) };
        if !trace.is_file() {
            return Err(ScenarioError::Invalid(format!(
                "provider '{}': workload file {} not found",
                p.name,
                trace.display()
            )));
        }
        let procs_per_node = p.procs_per_node.unwrap_or(1);
        if procs_per_node == 0 {
            return Err(ScenarioError::Invalid(format!("provider '{}': procs_per_node must be positive", p.name)));
        }
        providers.push(ProviderSpec {
            kind: parse_kind(&p.kind)?,
            trace,
            start_s: p.start.unwrap_or(0.0).max(0.0),
            procs_per_node,
            capacity: p.capacity.unwrap_or(dynamic.initial),
            dynamic,
            regime: p.regime.as_deref().map(parse_regime).transpose()?,
            name: p.name,
        });
    }
    Ok(Scenario {
        name: file.name.unwrap_or_else(|| {
            origin.file_stem().map_or("scenario".into(), |s| s.to_string_lossy().into_owned())
        }),
        window_s,
        speedup,
        regime: file.regime.as_deref().map(parse_regime).transpose()?.unwrap_or(Regime::Dynamic),
        baseline: file.baseline.as_deref().map(parse_regime).transpose()?,
        providers,
    })
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_scenario(&text, base, path)
}

impl Scenario {
    pub fn with_regime(&self, regime: Regime) -> Scenario {
        let mut s = self.clone();
        s.regime = regime;
        for p in &mut s.providers {
            p.regime = None;
        }
        s
    }

    pub fn provider(&self, name: &str) -> Option<&ProviderSpec> {
        self.providers.iter().find(|p| p.name == name)
    }

    pub fn regime_of(&self, p: &ProviderSpec) -> Regime {
        p.regime.unwrap_or(self.regime)
    }
}

/// Workloads of a scenario in original time, ready to be rescaled.
#[derive(Debug, Clone)]
pub struct Workloads {
    pub traces: BTreeMap<String, Arc<WorkloadTrace>>,
}

fn read_workload(p: &ProviderSpec, window_ms: u64) -> Result<WorkloadTrace, ScenarioError> {
    let path = &p.trace;
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let terr = |source| ScenarioError::Trace { path: path.clone(), source };
    match p.kind {
        WorkloadKind::Htc => {
            let import = parse_swf_with(&text, SwfOptions { procs_per_node: p.procs_per_node }).map_err(terr)?;
            let start_ms = (p.start_s * 1000.0).round() as u64;
            extract_window(&import.trace, start_ms, window_ms).map_err(terr)
        }
        WorkloadKind::Mtc => {
            let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
            let wf = if ext.eq_ignore_ascii_case("dax") || ext.eq_ignore_ascii_case("xml") {
                parse_dax(&text)
            } else {
                parse_workflow(&text)
            }
            .map_err(terr)?;
            plan_repetition(&wf, window_ms).map_err(terr)
        }
    }
}

pub fn load_workloads(scenario: &Scenario) -> Result<Workloads, ScenarioError> {
    let window_ms = (scenario.window_s * 1000.0).round() as u64;
    let mut traces = BTreeMap::new();
    for p in &scenario.providers {
        traces.insert(p.name.clone(), Arc::new(read_workload(p, window_ms)?));
    }
    Ok(Workloads { traces })
}

/// Builds the engine input for `scenario` with each provider's policy
/// chosen by `policy_of`.
pub fn run_config(
    scenario: &Scenario,
    workloads: &Workloads,
    options: RunOptions,
    mut policy_of: impl FnMut(&ProviderSpec) -> ElasticityPolicy,
) -> Result<RunConfig, ScenarioError> {
    let mut providers = Vec::with_capacity(scenario.providers.len());
    for p in &scenario.providers {
        let original = workloads
            .traces
            .get(&p.name)
            .ok_or_else(|| ScenarioError::Invalid(format!("no workload loaded for '{}'", p.name)))?;
        let trace = if scenario.speedup == 1.0 {
            Arc::clone(original)
        } else {
            Arc::new(rescale_time(original, scenario.speedup).map_err(|source| ScenarioError::Trace {
                path: p.trace.clone(),
                source,
            })?)
        };
        providers.push(ProviderSetup { name: p.name.clone(), trace, policy: policy_of(p) });
    }
    Ok(RunConfig {
        name: scenario.name.clone(),
        window_s: scenario.window_s,
        speedup: scenario.speedup,
        providers,
        options,
    })
}

/// Runs every provider under its configured regime.
pub fn simulate(scenario: &Scenario, workloads: &Workloads, options: RunOptions) -> Result<RunOutcome, ScenarioError> {
    let cfg = run_config(scenario, workloads, options, |p| p.policy(scenario.regime_of(p)))?;
    Ok(driver::run(cfg)?)
}

/// Runs the scenario's baseline regime (if any) to obtain per-provider
/// reference RC.
pub fn baseline_of(scenario: &Scenario, workloads: &Workloads) -> Result<Option<Baselines>, ScenarioError> {
    let Some(regime) = scenario.baseline else { return Ok(None) };
    let base = scenario.with_regime(regime);
    let out = simulate(&base, workloads, RunOptions::default())?;
    Ok(Some(Baselines::from_report(regime.name(), &out.report(None)?)))
}

pub fn run_scenario(scenario: &Scenario) -> Result<MetricsReport, ScenarioError> {
    let workloads = load_workloads(scenario)?;
    run_scenario_with(scenario, &workloads)
}

pub fn run_scenario_with(scenario: &Scenario, workloads: &Workloads) -> Result<MetricsReport, ScenarioError> {
    let baselines = baseline_of(scenario, workloads)?;
    let out = simulate(scenario, workloads, RunOptions::default())?;
    Ok(out.report(baselines.as_ref())?)
}

/// Runs the scenario once per regime, all compared against its baseline.
pub fn run_regimes(scenario: &Scenario, workloads: &Workloads, regimes: &[Regime]) -> Result<Vec<MetricsReport>, ScenarioError> {
    let baselines = baseline_of(scenario, workloads)?;
    regimes
        .par_iter()
        .map(|&r| {
            let mut s = scenario.with_regime(r);
            s.name = format!("{}:{}", scenario.name, r.name());
            let out = simulate(&s, workloads, RunOptions::default())?;
            Ok(out.report(baselines.as_ref())?)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Sweeps

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// Swept provider; every provider when absent.
    pub provider: Option<String>,
    pub initial: Vec<u32>,
    pub threshold: Vec<f64>,
    #[serde(default)]
    pub cycle: Vec<u64>,
    #[serde(default)]
    pub lease_unit: Vec<u64>,
}

impl SweepSpec {
    /// The B and R grids of the standard B/R parameter study; S and C
    /// stay at the provider's configured values.
    pub fn default_for(provider: &ProviderSpec) -> SweepSpec {
        let threshold = match provider.kind {
            WorkloadKind::Htc => vec![1.0, 1.2, 1.5, 2.0, 4.0, 100.0],
            WorkloadKind::Mtc => vec![1.0, 2.0, 4.0, 8.0, 16.0, 100.0],
        };
        SweepSpec {
            provider: Some(provider.name.clone()),
            initial: vec![0, 20, 40, 60, 80, 100, provider.capacity],
            threshold,
            cycle: Vec::new(),
            lease_unit: Vec::new(),
        }
    }

    pub fn parse(text: &str) -> Result<SweepSpec, ScenarioError> {
        let spec: SweepSpec =
            toml::from_str(text).map_err(|e| ScenarioError::Format { path: "<grid>".into(), msg: e.to_string() })?;
        if spec.initial.is_empty() || spec.threshold.is_empty() {
            return Err(ScenarioError::Invalid("sweep grids for initial and threshold must be non-empty".into()));
        }
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<SweepSpec, ScenarioError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        SweepSpec::parse(&text).map_err(|e| match e {
            ScenarioError::Format { msg, .. } => ScenarioError::Format { path: path.to_path_buf(), msg },
            other => other,
        })
    }

    /// Grid points in B, R, S, C nesting order. Empty S/C axes take the
    /// base policy's value.
    pub fn points(&self, base: &ElasticityPolicy) -> Vec<ElasticityPolicy> {
        let cycles = if self.cycle.is_empty() { vec![base.check_cycle_s] } else { self.cycle.clone() };
        let units = if self.lease_unit.is_empty() { vec![base.lease_unit_s] } else { self.lease_unit.clone() };
        let mut out = Vec::new();
        for &b in &self.initial {
            for &r in &self.threshold {
                for &s in &cycles {
                    for &c in &units {
                        out.push(ElasticityPolicy::dynamic(b, r, s, c));
                    }
                }
            }
        }
        out
    }
}

pub fn fmt_threshold(r: f64) -> String {
    if r.is_infinite() {
        "inf".into()
    } else {
        format!("{r}")
    }
}

/// `B40_R1.5_S60_C3600`-style grid point label.
pub fn point_label(p: &ElasticityPolicy) -> String {
    format!("B{}_R{}_S{}_C{}", p.initial, fmt_threshold(p.threshold), p.check_cycle_s, p.lease_unit_s)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub provider: String,
    pub policy: ElasticityPolicy,
    pub report: ProviderReport,
}

/// Runs each swept provider alone under every grid point, in parallel,
/// collecting rows in grid order.
pub fn run_sweep(scenario: &Scenario, workloads: &Workloads, spec: &SweepSpec) -> Result<Vec<SweepRow>, ScenarioError> {
    let targets: Vec<&ProviderSpec> = match &spec.provider {
        Some(name) => vec![scenario
            .provider(name)
            .ok_or_else(|| ScenarioError::Invalid(format!("sweep provider '{name}' not in scenario")))?],
        None => scenario.providers.iter().collect(),
    };
    let baselines = baseline_of(scenario, workloads)?;
    let mut jobs = Vec::new();
    for p in targets {
        for policy in spec.points(&p.dynamic) {
            policy
                .validate()
                .map_err(|e| ScenarioError::Invalid(format!("grid point {}: {e}", point_label(&policy))))?;
            jobs.push((p, policy));
        }
    }
    jobs.par_iter()
        .map(|&(p, policy)| {
            let mut single = scenario.clone();
            single.providers = vec![p.clone()];
            single.name = point_label(&policy);
            let cfg = run_config(&single, workloads, RunOptions::default(), |_| policy)?;
            let out = driver::run(cfg)?;
            let base = baselines.as_ref().map(|b| Baselines {
                name: b.name.clone(),
                rc: b.rc.iter().filter(|(k, _)| **k == p.name).map(|(k, v)| (k.clone(), *v)).collect(),
            });
            let report = out.report(base.as_ref())?;
            Ok(SweepRow { provider: p.name.clone(), policy, report: report.providers[0].clone() })
        })
        .collect()
}

pub const SWEEP_HEADER: &str = "provider,initial,threshold,cycle,lease_unit,completed_jobs,tasks_per_second,rc_node_hours,saved_percent,peak_nodes,adjustments,overhead_node_hours";

pub fn sweep_to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for r in rows {
        let p = &r.report;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{:.4},{:.3},{},{},{},{:.3}",
            r.provider,
            r.policy.initial,
            fmt_threshold(r.policy.threshold),
            r.policy.check_cycle_s,
            r.policy.lease_unit_s,
            p.completed_jobs,
            p.tasks_per_second,
            p.rc_node_hours,
            p.saved_percent.map(|x| format!("{x:.2}")).unwrap_or_default(),
            p.peak_nodes,
            p.adjustments,
            p.overhead_node_hours
        );
    }
    out
}

// ---------------------------------------------------------------------------
// Equivalence and dominance checks

/// Typical and maximal accumulated queue demand of an MTC workload.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MtcEmpiricals {
    pub ra: u32,
    pub rm: u32,
}

impl MtcEmpiricals {
    pub fn new(ra: u32, rm: u32) -> Result<Self, ScenarioError> {
        if ra == 0 || rm < ra {
            return Err(ScenarioError::Invalid(format!("need RM >= RA > 0, got RA={ra} RM={rm}")));
        }
        Ok(MtcEmpiricals { ra, rm })
    }

    /// B×R < RA (the first burst triggers a grant) and RA×R > RM (the
    /// largest burst does not).
    pub fn satisfies(&self, initial: u32, threshold: f64) -> bool {
        (initial as f64) * threshold < self.ra as f64 && (self.ra as f64) * threshold > self.rm as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Conf1Check {
    pub provider: String,
    pub lr: u32,
    pub rc_dynamic: f64,
    pub rc_static: f64,
    pub pm_dynamic: f64,
    pub pm_static: f64,
    pub jobs_compared: usize,
    /// First difference found, if any.
    pub divergence: Option<String>,
}

impl Conf1Check {
    pub fn passed(&self) -> bool {
        self.divergence.is_none()
    }
}

fn completions(out: &RunOutcome) -> Vec<(JobKey, SimTime)> {
    out.envs[0].completion_times()
}

/// Runs `trace` (original time) under dynamic(B = LR, R = inf) and under a
/// dedicated cluster of LR nodes and compares RC, the performance metric
/// and every completion time.
pub fn check_conf1_equivalence(
    name: &str,
    trace: &Arc<WorkloadTrace>,
    lr: u32,
    cycle_s: u64,
    lease_unit_s: u64,
    window_s: f64,
    speedup: f64,
) -> Result<Conf1Check, ScenarioError> {
    let scaled = if speedup == 1.0 {
        Arc::clone(trace)
    } else {
        Arc::new(rescale_time(trace, speedup).map_err(|source| ScenarioError::Trace { path: name.into(), source })?)
    };
    let options = RunOptions { keep_jobs: true, ..Default::default() };
    let run = |policy: ElasticityPolicy| {
        driver::run(RunConfig {
            name: name.to_string(),
            window_s,
            speedup,
            providers: vec![ProviderSetup { name: name.to_string(), trace: Arc::clone(&scaled), policy }],
            options,
        })
    };
    let dynamic = run(ElasticityPolicy::dynamic(lr, f64::INFINITY, cycle_s, lease_unit_s))?;
    let fixed = run(ElasticityPolicy::fixed(Regime::Dedicated, lr, cycle_s))?;
    let rd = dynamic.report(None)?;
    let rs = fixed.report(None)?;
    let (pd, ps) = (&rd.providers[0], &rs.providers[0]);
    let cd = completions(&dynamic);
    let cs = completions(&fixed);
    let mut divergence = None;
    if pd.rc_node_hours != ps.rc_node_hours {
        divergence = Some(format!("RC {} vs {}", pd.rc_node_hours, ps.rc_node_hours));
    } else if pd.performance() != ps.performance() {
        divergence = Some(format!("PM {} vs {}", pd.performance(), ps.performance()));
    } else if cd.len() != cs.len() {
        divergence = Some(format!("{} vs {} completed jobs", cd.len(), cs.len()));
    } else if let Some((a, b)) = cd.iter().zip(&cs).find(|(a, b)| a != b) {
        divergence = Some(format!("job {} completes at {} vs job {} at {}", a.0, a.1, b.0, b.1));
    }
    Ok(Conf1Check {
        provider: name.to_string(),
        lr,
        rc_dynamic: pd.rc_node_hours,
        rc_static: ps.rc_node_hours,
        pm_dynamic: pd.performance(),
        pm_static: ps.performance(),
        jobs_compared: cd.len(),
        divergence,
    })
}

/// CONF1 for every provider of a scenario with LR = its capacity.
pub fn check_conf1_scenario(scenario: &Scenario, workloads: &Workloads) -> Result<Vec<Conf1Check>, ScenarioError> {
    scenario
        .providers
        .par_iter()
        .map(|p| {
            check_conf1_equivalence(
                &p.name,
                &workloads.traces[&p.name],
                p.capacity,
                p.dynamic.check_cycle_s,
                p.dynamic.lease_unit_s,
                scenario.window_s,
                scenario.speedup,
            )
        })
        .collect()
}

/// One candidate configuration set: a dynamic policy per provider.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub label: String,
    pub policies: BTreeMap<String, ElasticityPolicy>,
}

impl Candidate {
    /// B = capacity, R = inf for every provider.
    pub fn conf1(scenario: &Scenario) -> Candidate {
        Candidate {
            label: "CONF1".into(),
            policies: scenario
                .providers
                .iter()
                .map(|p| {
                    let d = p.dynamic;
                    (p.name.clone(), ElasticityPolicy::dynamic(p.capacity, f64::INFINITY, d.check_cycle_s, d.lease_unit_s))
                })
                .collect(),
        }
    }

    /// The scenario's own dynamic configuration.
    pub fn configured(scenario: &Scenario) -> Candidate {
        Candidate {
            label: "configured".into(),
            policies: scenario.providers.iter().map(|p| (p.name.clone(), p.dynamic)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateResult {
    pub label: String,
    pub trc: f64,
    /// Every provider's PM is at least its static PM.
    pub performance_ok: bool,
    pub dominates: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DominanceCheck {
    pub static_trc: f64,
    pub candidates: Vec<CandidateResult>,
}

impl DominanceCheck {
    pub fn witness(&self) -> Option<&CandidateResult> {
        self.candidates.iter().find(|c| c.dominates)
    }

    pub fn passed(&self) -> bool {
        self.witness().is_some()
    }
}

/// Looks for a candidate with TRC ≤ static TRC and every provider's PM ≥
/// its static PM on the consolidated scenario.
pub fn check_dominance(
    scenario: &Scenario,
    workloads: &Workloads,
    candidates: &[Candidate],
) -> Result<DominanceCheck, ScenarioError> {
    let fixed = simulate(&scenario.with_regime(Regime::Dedicated), workloads, RunOptions::default())?.report(None)?;
    let results: Result<Vec<CandidateResult>, ScenarioError> = candidates
        .par_iter()
        .map(|c| {
            let cfg = run_config(scenario, workloads, RunOptions::default(), |p| {
                c.policies.get(&p.name).copied().unwrap_or(p.dynamic)
            })?;
            let r = driver::run(cfg)?.report(None)?;
            let performance_ok = r
                .providers
                .iter()
                .zip(&fixed.providers)
                .all(|(d, s)| d.performance() >= s.performance());
            Ok(CandidateResult {
                label: c.label.clone(),
                trc: r.trc_node_hours,
                performance_ok,
                dominates: performance_ok && r.trc_node_hours <= fixed.trc_node_hours,
            })
        })
        .collect();
    Ok(DominanceCheck { static_trc: fixed.trc_node_hours, candidates: results? })
}

// ---------------------------------------------------------------------------
// Output

/// Writes `report.csv`; returns its path.
pub fn write_reports(reports: &[MetricsReport], dir: impl AsRef<Path>) -> Result<PathBuf, ScenarioError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let path = dir.join("report.csv");
    fs::write(&path, reports_to_csv(reports)).map_err(io_err(&path))?;
    Ok(path)
}

/// Writes `sweep.csv`; returns its path.
pub fn write_sweep(rows: &[SweepRow], dir: impl AsRef<Path>) -> Result<PathBuf, ScenarioError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let path = dir.join("sweep.csv");
    fs::write(&path, sweep_to_csv(rows)).map_err(io_err(&path))?;
    Ok(path)
}

/// Scaled-time horizon of a scenario, for callers building runs by hand.
pub fn horizon_ms(scenario: &Scenario) -> u64 {
    scaled_ms(scenario.window_s, scenario.speedup)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
        let p = dir.join(name);
        fs::write(&p, body).unwrap();
        p
    }

    const SWF: &str = "1 0 -1 100 2 -1 -1 2 -1 -1 1 -1 -1 -1 -1 -1 -1 -1\n2 50 -1 300 4 -1 -1 4 -1 -1 1 -1 -1 -1 -1 -1 -1 -1\n";

    fn minimal(dir: &Path, extra: &str) -> PathBuf {
        write(dir, "t.swf", SWF);
        write(
            dir,
            "s.toml",
            &format!(
                "window = 3600\nregime = \"dedicated\"\n{extra}\n[[provider]]\nname = \"a\"\nkind = \"htc\"\ntrace = \"t.swf\"\ncapacity = 4\ncycle = 60\n"
            ),
        )
    }

    #[test]
    fn minimal_static_scenario_loads_and_runs() {
        let dir = tempfile::tempdir().unwrap();
        let s = load_scenario(minimal(dir.path(), "")).unwrap();
        assert_eq!(s.providers.len(), 1);
        assert_eq!(s.regime, Regime::Dedicated);
        let r = run_scenario(&s).unwrap();
        assert_eq!(r.providers[0].rc_node_hours, 4.0);
        assert_eq!(r.providers[0].completed_jobs, 2);
    }

    #[test]
    fn scenario_validation() {
        let dir = tempfile::tempdir().unwrap();
        let bad_key = minimal(dir.path(), "colour = 3");
        assert!(matches!(load_scenario(bad_key), Err(ScenarioError::Format { .. })));
        write(dir.path(), "t.swf", SWF);
        let r_half = write(
            dir.path(),
            "r.toml",
            "[[provider]]\nname = \"a\"\nkind = \"htc\"\ntrace = \"t.swf\"\ncycle = 60\nthreshold = 0.5\n",
        );
        assert!(matches!(load_scenario(r_half), Err(ScenarioError::Invalid(m)) if m.contains(">= 1")));
        let missing = write(
            dir.path(),
            "m.toml",
            "[[provider]]\nname = \"a\"\nkind = \"htc\"\ntrace = \"nope.swf\"\ncycle = 60\n",
        );
        assert!(matches!(load_scenario(missing), Err(ScenarioError::Invalid(m)) if m.contains("not found")));
        let dup = write(
            dir.path(),
            "d.toml",
            "[[provider]]\nname = \"a\"\nkind = \"htc\"\ntrace = \"t.swf\"\ncycle = 60\n[[provider]]\nname = \"a\"\nkind = \"htc\"\ntrace = \"t.swf\"\ncycle = 60\n",
        );
        assert!(load_scenario(dup).is_err());
        let inf = write(
            dir.path(),
            "i.toml",
            "[[provider]]\nname = \"a\"\nkind = \"htc\"\ntrace = \"t.swf\"\ncycle = 60\nthreshold = inf\n",
        );
        assert!(load_scenario(inf).unwrap().providers[0].dynamic.threshold.is_infinite());
    }

    #[test]
    fn empirical_formulas() {
        let m = MtcEmpiricals::new(166, 662).unwrap();
        assert!(m.satisfies(20, 8.0));
        assert!(m.satisfies(20, 4.0));
        assert!(!m.satisfies(20, 3.0));
        assert!(!m.satisfies(40, 8.0));
        assert!(MtcEmpiricals::new(700, 662).is_err());
        assert!(MtcEmpiricals::new(0, 1).is_err());
    }

    #[test]
    fn sweep_points_and_labels() {
        let spec = SweepSpec::parse("initial = [0, 20]\nthreshold = [1.5, inf]\nlease_unit = [60, 3600]\n").unwrap();
        let pts = spec.points(&ElasticityPolicy::dynamic(40, 1.5, 60, 3600));
        assert_eq!(pts.len(), 8);
        assert_eq!(point_label(&pts[0]), "B0_R1.5_S60_C60");
        assert_eq!(point_label(&pts[7]), "B20_Rinf_S60_C3600");
        assert!(SweepSpec::parse("initial = []\nthreshold = [1]\n").is_err());
    }

    #[test]
    fn empty_report_list_is_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_reports(&[], dir.path()).unwrap();
        assert_eq!(fs::read_to_string(p).unwrap(), format!("{}\n", crate::metrics::CSV_HEADER));
    }
}
