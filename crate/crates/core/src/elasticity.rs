//! Resource holdings, provisioning regimes and the provider-side provision
//! service.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::runtime::EnvId;
use crate::sim::SimTime;

/// Cost in seconds of assigning or reclaiming one node.
pub const SETUP_COST_PER_NODE_S: f64 = 15.743;

#[derive(Debug, Error, PartialEq)]
pub enum ElasticityError {
    #[error("invalid policy: {0}")]
    InvalidPolicy(String),
    #[error("environment {env} cannot give back initial resources while running")]
    InitialReclaim { env: EnvId },
    #[error("environment {env} holds {held} reclaimable nodes, asked to reclaim {asked}")]
    OverReclaim { env: EnvId, held: u32, asked: u32 },
    #[error("provisioning request must be positive")]
    EmptyRequest,
}

/// How a provider obtains nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Regime {
    /// Provider-owned fixed cluster; nothing is provisioned.
    Dedicated,
    /// Fixed-size lease for the whole window.
    FixedLease,
    /// Every job leases exactly its nodes on submission.
    PerJob,
    /// Initial resources plus threshold-driven dynamic leases.
    Dynamic,
}

impl Regime {
    pub const ALL: [Regime; 4] = [Regime::Dedicated, Regime::FixedLease, Regime::PerJob, Regime::Dynamic];

    pub fn is_static(self) -> bool {
        matches!(self, Regime::Dedicated | Regime::FixedLease)
    }

    pub fn name(self) -> &'static str {
        match self {
            Regime::Dedicated => "dedicated",
            Regime::FixedLease => "fixed-lease",
            Regime::PerJob => "per-job",
            Regime::Dynamic => "dynamic",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Regime {
    type Err = ElasticityError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dedicated" | "static" => Ok(Regime::Dedicated),
            "fixed-lease" | "fixed_lease" => Ok(Regime::FixedLease),
            "per-job" | "per_job" => Ok(Regime::PerJob),
            "dynamic" => Ok(Regime::Dynamic),
            other => Err(ElasticityError::InvalidPolicy(format!("unknown regime `{other}`"))),
        }
    }
}

/// The B/R/S/C tuple plus regime. Times are original-time seconds.
///
/// For static regimes `initial` is the cluster or lease size and the
/// other parameters only matter through `check_cycle_s`, which doubles as
/// the scheduling cycle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElasticityPolicy {
    pub regime: Regime,
    /// B: initial resources in nodes.
    pub initial: u32,
    /// R: threshold ratio of obtaining dynamic resources; may be infinite.
    pub threshold: f64,
    /// S: checking resource cycle (also the scheduling cycle).
    pub check_cycle_s: u64,
    /// C: time unit of leasing resources.
    pub lease_unit_s: u64,
}

impl ElasticityPolicy {
    pub fn dynamic(initial: u32, threshold: f64, check_cycle_s: u64, lease_unit_s: u64) -> Self {
        ElasticityPolicy { regime: Regime::Dynamic, initial, threshold, check_cycle_s, lease_unit_s }
    }

    pub fn fixed(regime: Regime, capacity: u32, cycle_s: u64) -> Self {
        ElasticityPolicy { regime, initial: capacity, threshold: f64::INFINITY, check_cycle_s: cycle_s, lease_unit_s: 3600 }
    }

    pub fn per_job(lease_unit_s: u64) -> Self {
        ElasticityPolicy { regime: Regime::PerJob, initial: 0, threshold: f64::INFINITY, check_cycle_s: 1, lease_unit_s }
    }

    pub fn validate(&self) -> Result<(), ElasticityError> {
        let bad = |m: String| Err(ElasticityError::InvalidPolicy(m));
        if self.threshold.is_nan() || self.threshold < 1.0 {
            return bad(format!("threshold ratio R must be >= 1 or inf, got {}", self.threshold));
        }
        if self.check_cycle_s == 0 {
            return bad("checking cycle S must be positive".into());
        }
        if self.lease_unit_s == 0 {
            return bad("lease unit C must be positive".into());
        }
        Ok(())
    }
}

impl fmt::Display for ElasticityPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.regime {
            Regime::Dynamic => write!(
                f,
                "[{}C/{}B/{}R/{}S]",
                self.lease_unit_s / 60,
                self.initial,
                self.threshold,
                self.check_cycle_s
            ),
            Regime::PerJob => write!(f, "per-job [{}C]", self.lease_unit_s / 60),
            r => write!(f, "{r} [{} nodes]", self.initial),
        }
    }
}

/// Queued demand ÷ owned nodes. 0 for an empty queue, +inf when nothing is
/// owned but work is waiting.
pub fn ratio_of_obtaining<I: IntoIterator<Item = u32>>(queue: I, owned_total: u32) -> f64 {
    let demand: u64 = queue.into_iter().map(u64::from).sum();
    if demand == 0 {
        0.0
    } else if owned_total == 0 {
        f64::INFINITY
    } else {
        demand as f64 / owned_total as f64
    }
}

/// Dynamic-regime check run every S: returns DR when the ratio exceeds R or
/// the biggest queued job does not fit in what is owned.
pub fn evaluate_demand<I>(queue: I, owned_total: u32, policy: &ElasticityPolicy) -> Option<u32>
where
    I: IntoIterator<Item = u32>,
{
    let mut demand = 0u64;
    let mut biggest = 0u32;
    for n in queue {
        demand += u64::from(n);
        biggest = biggest.max(n);
    }
    if demand == 0 {
        return None;
    }
    let ratio = if owned_total == 0 { f64::INFINITY } else { demand as f64 / owned_total as f64 };
    let biggest_exceeds = biggest > owned_total;
    if !(ratio > policy.threshold || biggest_exceeds) {
        return None;
    }
    let dr = demand.saturating_sub(u64::from(owned_total));
    (dr > 0).then(|| u32::try_from(dr).unwrap_or(u32::MAX))
}

/// One dynamic grant with its own release timer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DynamicLease {
    pub id: u64,
    pub size: u32,
    pub granted_at: SimTime,
    /// Nodes of this grant still to be released (the grant's remaining DR).
    pub outstanding: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReleaseOutcome {
    pub released: u32,
    pub deregistered: bool,
}

impl DynamicLease {
    pub fn new(id: u64, size: u32, granted_at: SimTime) -> Self {
        DynamicLease { id, size, granted_at, outstanding: size }
    }

    pub fn is_active(&self) -> bool {
        self.outstanding > 0
    }

    /// Lease-timer step: release up to `outstanding` of the idle nodes.
    pub fn release_tick(&mut self, idle_dynamic: u32) -> ReleaseOutcome {
        if self.outstanding == 0 {
            return ReleaseOutcome { released: 0, deregistered: true };
        }
        let released = idle_dynamic.min(self.outstanding);
        self.outstanding -= released;
        self.size = self.size.saturating_sub(released);
        ReleaseOutcome { released, deregistered: self.outstanding == 0 }
    }
}

/// Nodes an environment holds: initial (fixed until destroy), dynamic
/// leases and per-job leases.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ResourceHolding {
    pub initial: u32,
    pub leases: Vec<DynamicLease>,
    pub per_job: u32,
}

impl ResourceHolding {
    pub fn dynamic_total(&self) -> u32 {
        self.leases.iter().map(|l| l.size).sum()
    }

    pub fn total(&self) -> u32 {
        self.initial + self.dynamic_total() + self.per_job
    }

    /// Idle nodes attributable to `lease_id` when `idle_dynamic` dynamic
    /// nodes are idle, filling older grants first.
    pub fn idle_for(&self, lease_id: u64, idle_dynamic: u32) -> u32 {
        let mut remaining = idle_dynamic;
        for l in &self.leases {
            let give = remaining.min(l.size);
            if l.id == lease_id {
                return give;
            }
            remaining -= give;
        }
        0
    }
}

/// Node-milliseconds billed for holding `nodes` for `held_ms`, rounded up
/// to whole lease units (at least one unit).
pub fn billed_node_ms(nodes: u32, held_ms: u64, unit_ms: u64) -> u128 {
    let units = held_ms.div_ceil(unit_ms).max(1);
    u128::from(nodes) * u128::from(units) * u128::from(unit_ms)
}

/// A per-job lease covering exactly one job: its node count and billed
/// node-milliseconds (`nodes * ceil(run / C) * C`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PerJobLease {
    pub nodes: u32,
    pub billed_node_ms: u128,
}

pub fn per_job_lease(nodes: u32, run_ms: u64, unit_ms: u64) -> PerJobLease {
    PerJobLease { nodes, billed_node_ms: billed_node_ms(nodes, run_ms, unit_ms) }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AdjustCause {
    Initial,
    DynamicGrant,
    Release,
    Destroy,
    PerJob,
}

impl AdjustCause {
    pub fn name(self) -> &'static str {
        match self {
            AdjustCause::Initial => "initial",
            AdjustCause::DynamicGrant => "dynamic-grant",
            AdjustCause::Release => "release",
            AdjustCause::Destroy => "destroy",
            AdjustCause::PerJob => "per-job",
        }
    }
}

impl fmt::Display for AdjustCause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AdjustmentRecord {
    pub time: SimTime,
    pub env: EnvId,
    /// Positive when assigned, negative when reclaimed; never zero.
    pub delta: i64,
    pub cause: AdjustCause,
}

impl fmt::Display for AdjustmentRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {} {}", self.time, self.env, self.delta, self.cause)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct Granted {
    initial: u32,
    reclaimable: u32,
}

/// Unbounded-pool provision service. Every grant is immediate and full.
#[derive(Debug, Clone, Default)]
pub struct ProvisionService {
    granted_total: u64,
    per_env: Vec<Granted>,
    log: Vec<AdjustmentRecord>,
    keep_log: bool,
    adjustments: u64,
    adjusted_nodes: u64,
}

impl ProvisionService {
    pub fn new(keep_log: bool) -> Self {
        ProvisionService { keep_log, ..Default::default() }
    }

    pub fn granted_total(&self) -> u64 {
        self.granted_total
    }

    pub fn granted_to(&self, env: EnvId) -> u32 {
        self.per_env.get(env.0).map_or(0, |g| g.initial + g.reclaimable)
    }

    pub fn log(&self) -> &[AdjustmentRecord] {
        &self.log
    }

    pub fn adjustments(&self) -> u64 {
        self.adjustments
    }

    /// Σ |delta| over all records.
    pub fn adjusted_nodes(&self) -> u64 {
        self.adjusted_nodes
    }

    fn slot(&mut self, env: EnvId) -> &mut Granted {
        if self.per_env.len() <= env.0 {
            self.per_env.resize(env.0 + 1, Granted::default());
        }
        &mut self.per_env[env.0]
    }

    fn record(&mut self, time: SimTime, env: EnvId, delta: i64, cause: AdjustCause) -> AdjustmentRecord {
        let rec = AdjustmentRecord { time, env, delta, cause };
        self.adjustments += 1;
        self.adjusted_nodes += delta.unsigned_abs();
        if self.keep_log {
            self.log.push(rec);
        }
        rec
    }

    pub fn provision(
        &mut self,
        time: SimTime,
        env: EnvId,
        n: u32,
        cause: AdjustCause,
    ) -> Result<AdjustmentRecord, ElasticityError> {
        if n == 0 {
            return Err(ElasticityError::EmptyRequest);
        }
        let slot = self.slot(env);
        match cause {
            AdjustCause::Initial => slot.initial += n,
            _ => slot.reclaimable += n,
        }
        self.granted_total += u64::from(n);
        Ok(self.record(time, env, i64::from(n), cause))
    }

    /// Takes nodes back. `Release`/`PerJob` may only touch non-initial
    /// holdings; `Destroy` may take everything.
    pub fn reclaim(
        &mut self,
        time: SimTime,
        env: EnvId,
        n: u32,
        cause: AdjustCause,
    ) -> Result<AdjustmentRecord, ElasticityError> {
        if n == 0 {
            return Err(ElasticityError::EmptyRequest);
        }
        let slot = self.slot(env);
        match cause {
            AdjustCause::Initial => return Err(ElasticityError::InitialReclaim { env }),
            AdjustCause::Destroy => {
                let held = slot.initial + slot.reclaimable;
                if n > held {
                    return Err(ElasticityError::OverReclaim { env, held, asked: n });
                }
                let from_dynamic = n.min(slot.reclaimable);
                slot.reclaimable -= from_dynamic;
                slot.initial -= n - from_dynamic;
            }
            _ => {
                if n > slot.reclaimable {
                    if slot.initial > 0 {
                        return Err(ElasticityError::InitialReclaim { env });
                    }
                    return Err(ElasticityError::OverReclaim { env, held: slot.reclaimable, asked: n });
                }
                slot.reclaimable -= n;
            }
        }
        self.granted_total -= u64::from(n);
        Ok(self.record(time, env, -i64::from(n), cause))
    }
}
