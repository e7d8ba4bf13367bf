//! Runs a set of service providers against one resource provider on the
//! event engine and collects their ledgers.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::elasticity::{
    billed_node_ms, evaluate_demand, AdjustCause, AdjustmentRecord, DynamicLease, ElasticityError,
    ElasticityPolicy, ProvisionService, Regime,
};
use crate::metrics::{finalize_report, Baselines, ConsumptionLedger, MetricsError, MetricsReport, ProviderOutcome};
use crate::runtime::{EnvId, JobKey, JobOutput, RuntimeEnvironment, RuntimeError, Started};
use crate::sim::{Engine, Event, EventKind, Handler, SimError, SimTime};
use crate::trace::{Repetition, WorkloadTrace};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Runtime(#[from] RuntimeError),
    #[error(transparent)]
    Elasticity(#[from] ElasticityError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("invariant violated at {time}: {msg}")]
    Invariant { time: SimTime, msg: String },
    #[error("invalid run setup: {0}")]
    Setup(String),
}

/// Converts an original-time duration in seconds to scaled milliseconds.
pub fn scaled_ms(seconds: f64, speedup: f64) -> u64 {
    (seconds * 1000.0 / speedup).round() as u64
}

/// Converts a scaled-millisecond instant back to original seconds.
pub fn original_s(t: SimTime, speedup: f64) -> f64 {
    t.ms() as f64 * speedup / 1000.0
}

/// One service provider: a workload already rescaled by the run's speedup,
/// its policy and its scheduling period.
#[derive(Debug, Clone)]
pub struct ProviderSetup {
    pub name: String,
    pub trace: Arc<WorkloadTrace>,
    pub policy: ElasticityPolicy,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Keep per-task records of finished workflow instances.
    pub keep_jobs: bool,
    pub keep_adjustment_log: bool,
    pub event_log: bool,
    /// Check conservation and capacity after every event and keep lease bills.
    pub audit: bool,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub name: String,
    /// Metrics window in original seconds.
    pub window_s: f64,
    pub speedup: f64,
    pub providers: Vec<ProviderSetup>,
    pub options: RunOptions,
}

/// A closed billing interval for leased nodes (dynamic or per-job).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LeaseBill {
    pub env: EnvId,
    pub nodes: u32,
    pub held_ms: u64,
    pub unit_ms: u64,
    pub billed_node_ms: u128,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SimEvent {
    EnvCreate(EnvId),
    JobComplete(EnvId, JobKey),
    SchedulerTick(EnvId),
    LeaseTimer(EnvId, u64),
    JobSubmit(EnvId, u32),
    WorkflowSubmit(EnvId),
    EnvDestroy(EnvId),
}

impl EventKind for SimEvent {
    fn class(&self) -> u8 {
        match self {
            SimEvent::EnvCreate(_) => 0,
            SimEvent::JobComplete(..) => 1,
            SimEvent::SchedulerTick(_) => 2,
            SimEvent::LeaseTimer(..) => 3,
            SimEvent::JobSubmit(..) | SimEvent::WorkflowSubmit(_) => 4,
            SimEvent::EnvDestroy(_) => 5,
        }
    }
}

impl fmt::Display for SimEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimEvent::EnvCreate(e) => write!(f, "create env={e}"),
            SimEvent::JobComplete(e, k) => write!(f, "complete env={e} job={k}"),
            SimEvent::SchedulerTick(e) => write!(f, "tick env={e}"),
            SimEvent::LeaseTimer(e, l) => write!(f, "lease-timer env={e} lease={l}"),
            SimEvent::JobSubmit(e, j) => write!(f, "submit env={e} job={j}"),
            SimEvent::WorkflowSubmit(e) => write!(f, "submit-workflow env={e}"),
            SimEvent::EnvDestroy(e) => write!(f, "destroy env={e}"),
        }
    }
}

struct World {
    envs: Vec<RuntimeEnvironment>,
    unit_ms: Vec<u64>,
    service: ProvisionService,
    ledger: ConsumptionLedger,
    horizon: SimTime,
    next_lease: u64,
    audit: bool,
    bills: Vec<LeaseBill>,
    outcomes: Vec<ProviderOutcome>,
    fault: Option<RunError>,
}

impl World {
    fn counts_adjustments(&self, e: EnvId) -> bool {
        self.envs[e.0].regime() != Regime::Dedicated
    }

    fn adjust(&mut self, t: SimTime, e: EnvId, n: u32, grant: bool, cause: AdjustCause) -> Result<(), RunError> {
        let rec: AdjustmentRecord = if grant {
            self.service.provision(t, e, n, cause)?
        } else {
            self.service.reclaim(t, e, n, cause)?
        };
        self.ledger.change_holding(e, t.ms(), rec.delta)?;
        if self.counts_adjustments(e) {
            self.ledger.record_adjustment(&rec)?;
        }
        Ok(())
    }

    fn bill(&mut self, e: EnvId, nodes: u32, held_ms: u64) -> Result<(), RunError> {
        let unit_ms = self.unit_ms[e.0];
        let billed = billed_node_ms(nodes, held_ms, unit_ms);
        self.ledger.accrue_node_ms(e, billed)?;
        if self.audit {
            self.bills.push(LeaseBill { env: e, nodes, held_ms, unit_ms, billed_node_ms: billed });
        }
        Ok(())
    }

    fn launch(&mut self, engine: &mut Engine<SimEvent>, e: EnvId, started: Vec<Started>) -> Result<(), RunError> {
        for s in started {
            engine.schedule(s.completion, SimEvent::JobComplete(e, s.key))?;
        }
        Ok(())
    }

    /// Per-job regime: lease exactly what the queued work needs and start it.
    fn admit_per_job(&mut self, engine: &mut Engine<SimEvent>, e: EnvId, t: SimTime) -> Result<(), RunError> {
        let demand: u32 = self.envs[e.0].queued_demands().sum();
        if demand == 0 {
            return Ok(());
        }
        self.adjust(t, e, demand, true, AdjustCause::PerJob)?;
        self.envs[e.0].holding.per_job += demand;
        let started = self.envs[e.0].tick_scheduler(t)?;
        self.launch(engine, e, started)
    }

    fn on_create(&mut self, engine: &mut Engine<SimEvent>, e: EnvId, t: SimTime) -> Result<(), RunError> {
        let env = &mut self.envs[e.0];
        env.create()?;
        let regime = env.regime();
        let initial = if regime == Regime::PerJob { 0 } else { env.policy.initial };
        if initial > 0 {
            self.adjust(t, e, initial, true, AdjustCause::Initial)?;
            self.envs[e.0].holding.initial = initial;
            let span = self.horizon.ms() - t.ms();
            self.ledger.accrue_node_ms(e, u128::from(initial) * u128::from(span))?;
        }
        if regime != Regime::PerJob {
            engine.schedule(t, SimEvent::SchedulerTick(e))?;
        }
        let trace = Arc::clone(self.envs[e.0].trace_arc());
        match trace.batch() {
            Some(jobs) => {
                for (i, j) in jobs.iter().enumerate() {
                    let at = SimTime(j.submit_ms);
                    if at <= self.horizon {
                        engine.schedule(at.max(t), SimEvent::JobSubmit(e, i as u32))?;
                    }
                }
            }
            None => {
                if !trace.is_empty() {
                    engine.schedule(t, SimEvent::WorkflowSubmit(e))?;
                }
            }
        }
        Ok(())
    }

    fn on_tick(&mut self, engine: &mut Engine<SimEvent>, e: EnvId, t: SimTime) -> Result<(), RunError> {
        let env = &self.envs[e.0];
        if env.regime() == Regime::Dynamic {
            if let Some(dr) = evaluate_demand(env.queued_demands(), env.holding.total(), &env.policy) {
                self.adjust(t, e, dr, true, AdjustCause::DynamicGrant)?;
                let id = self.next_lease;
                self.next_lease += 1;
                self.envs[e.0].holding.leases.push(DynamicLease::new(id, dr, t));
                engine.schedule(t.after(self.unit_ms[e.0]), SimEvent::LeaseTimer(e, id))?;
            }
        }
        let started = self.envs[e.0].tick_scheduler(t)?;
        self.launch(engine, e, started)?;
        let next = t.after(self.envs[e.0].cycle_ms);
        if next <= self.horizon {
            engine.schedule(next, SimEvent::SchedulerTick(e))?;
        }
        Ok(())
    }

    fn on_lease_timer(&mut self, engine: &mut Engine<SimEvent>, e: EnvId, id: u64, t: SimTime) -> Result<(), RunError> {
        let env = &self.envs[e.0];
        let h = &env.holding;
        let idle_dynamic = (h.total() - env.busy()).min(h.dynamic_total());
        let give = h.idle_for(id, idle_dynamic);
        let pos = h
            .leases
            .iter()
            .position(|l| l.id == id)
            .ok_or_else(|| RunError::Invariant { time: t, msg: format!("timer for unknown lease {id}") })?;
        let granted_at = h.leases[pos].granted_at;
        let out = self.envs[e.0].holding.leases[pos].release_tick(give);
        if out.released > 0 {
            self.adjust(t, e, out.released, false, AdjustCause::Release)?;
            self.bill(e, out.released, t.ms() - granted_at.ms())?;
        }
        if out.deregistered {
            self.envs[e.0].holding.leases.remove(pos);
        } else {
            engine.schedule(t.after(self.unit_ms[e.0]), SimEvent::LeaseTimer(e, id))?;
        }
        Ok(())
    }

    fn on_complete(&mut self, engine: &mut Engine<SimEvent>, e: EnvId, key: JobKey, t: SimTime) -> Result<(), RunError> {
        let per_job = self.envs[e.0].regime() == Regime::PerJob;
        let run_ms = self.envs[e.0].run_ms_of(key);
        let c = self.envs[e.0].complete_job(key, t, true)?;
        if per_job {
            self.envs[e.0].holding.per_job -= c.nodes;
            self.adjust(t, e, c.nodes, false, AdjustCause::PerJob)?;
            self.bill(e, c.nodes, run_ms)?;
            if !c.newly_ready.is_empty() {
                self.admit_per_job(engine, e, t)?;
            }
        }
        if c.instance_done {
            if let Repetition::BackToBack { horizon_ms } = self.envs[e.0].trace().repetition {
                if t.ms() < horizon_ms.min(self.horizon.ms()) {
                    engine.schedule(t, SimEvent::WorkflowSubmit(e))?;
                }
            }
        }
        Ok(())
    }

    fn on_destroy(&mut self, e: EnvId, t: SimTime) -> Result<(), RunError> {
        let leases = std::mem::take(&mut self.envs[e.0].holding.leases);
        for l in leases {
            if l.size > 0 {
                self.bill(e, l.size, t.ms() - l.granted_at.ms())?;
            }
        }
        if self.envs[e.0].regime() == Regime::PerJob {
            for (_, nodes, start) in self.envs[e.0].running_jobs() {
                self.bill(e, nodes, t.ms() - start.ms())?;
            }
        }
        let held = self.service.granted_to(e);
        if held > 0 {
            self.adjust(t, e, held, false, AdjustCause::Destroy)?;
        }
        let env = &mut self.envs[e.0];
        env.holding = Default::default();
        let summary = env.destroy()?;
        self.outcomes[e.0].completed = summary.completed;
        self.outcomes[e.0].unfinished = summary.unfinished;
        Ok(())
    }

    fn check(&self, t: SimTime) -> Result<(), RunError> {
        let mut sum = 0u64;
        for env in &self.envs {
            let held = env.holding.total();
            let granted = self.service.granted_to(env.id);
            if held != granted {
                return Err(RunError::Invariant {
                    time: t,
                    msg: format!("env {} holds {held} but was granted {granted}", env.id),
                });
            }
            if env.busy() > held {
                return Err(RunError::Invariant { time: t, msg: format!("env {} runs {} on {held}", env.id, env.busy()) });
            }
            if self.ledger.holding(env.id) != u64::from(held) {
                return Err(RunError::Invariant { time: t, msg: format!("env {} ledger holding drifted", env.id) });
            }
            sum += u64::from(granted);
        }
        if sum != self.service.granted_total() {
            return Err(RunError::Invariant { time: t, msg: "granted total differs from holdings".into() });
        }
        Ok(())
    }

    fn dispatch(&mut self, engine: &mut Engine<SimEvent>, ev: Event<SimEvent>) -> Result<(), RunError> {
        let t = ev.time;
        match ev.kind {
            SimEvent::EnvCreate(e) => self.on_create(engine, e, t)?,
            SimEvent::JobComplete(e, k) => self.on_complete(engine, e, k, t)?,
            SimEvent::SchedulerTick(e) => self.on_tick(engine, e, t)?,
            SimEvent::LeaseTimer(e, id) => self.on_lease_timer(engine, e, id, t)?,
            SimEvent::JobSubmit(e, i) => {
                self.envs[e.0].submit_job(i as usize, t)?;
                if self.envs[e.0].regime() == Regime::PerJob {
                    self.admit_per_job(engine, e, t)?;
                }
            }
            SimEvent::WorkflowSubmit(e) => {
                self.envs[e.0].submit_instance(t, true)?;
                if self.envs[e.0].regime() == Regime::PerJob {
                    self.admit_per_job(engine, e, t)?;
                }
            }
            SimEvent::EnvDestroy(e) => self.on_destroy(e, t)?,
        }
        if self.audit {
            self.check(t)?;
        }
        Ok(())
    }
}

impl Handler<SimEvent> for World {
    fn handle(&mut self, engine: &mut Engine<SimEvent>, event: Event<SimEvent>) -> Result<(), SimError> {
        let time = event.time;
        self.dispatch(engine, event).map_err(|err| {
            let msg = err.to_string();
            self.fault = Some(err);
            SimError::Handler { time, msg }
        })
    }
}

/// Everything a finished run leaves behind.
#[derive(Debug)]
pub struct RunOutcome {
    pub name: String,
    pub window_h: f64,
    pub speedup: f64,
    pub ledger: ConsumptionLedger,
    pub outcomes: Vec<ProviderOutcome>,
    pub envs: Vec<RuntimeEnvironment>,
    pub adjustment_log: Vec<AdjustmentRecord>,
    pub event_log: Option<Vec<String>>,
    pub lease_bills: Vec<LeaseBill>,
    /// Nodes still granted after every environment was destroyed.
    pub granted_after: u64,
    pub events: u64,
}

impl RunOutcome {
    pub fn report(&self, baselines: Option<&Baselines>) -> Result<MetricsReport, MetricsError> {
        finalize_report(&self.name, &self.ledger, &self.outcomes, self.window_h, baselines)
    }

    pub fn env(&self, name: &str) -> Option<&RuntimeEnvironment> {
        self.envs.iter().find(|e| e.name == name)
    }

    /// Per-job audit lines `job_id submit start complete nodes state`, times
    /// in original seconds.
    pub fn job_lines(&self, env: &RuntimeEnvironment) -> String {
        let fmt_t = |t: Option<SimTime>| t.map_or("-".to_string(), |t| format!("{:.3}", original_s(t, self.speedup)));
        let mut out = String::new();
        for JobOutput { job_id, submit, start, completion, nodes, status } in env.job_outputs() {
            out.push_str(&format!(
                "{job_id} {} {} {} {nodes} {}\n",
                fmt_t(Some(submit)),
                fmt_t(start),
                fmt_t(completion),
                status.name()
            ));
        }
        out
    }
}

/// Builds the engine and environments, runs to the horizon and destroys
/// every environment there.
pub fn run(config: RunConfig) -> Result<RunOutcome, RunError> {
    if !(config.speedup.is_finite() && config.speedup > 0.0) {
        return Err(RunError::Setup(format!("speedup must be positive, got {}", config.speedup)));
    }
    if !(config.window_s.is_finite() && config.window_s > 0.0) {
        return Err(RunError::Setup(format!("window must be positive, got {}", config.window_s)));
    }
    let horizon = SimTime(scaled_ms(config.window_s, config.speedup));
    let n = config.providers.len();
    let mut envs = Vec::with_capacity(n);
    let mut unit_ms = Vec::with_capacity(n);
    let mut outcomes = Vec::with_capacity(n);
    for (i, p) in config.providers.into_iter().enumerate() {
        p.policy.validate()?;
        let cycle = scaled_ms(p.policy.check_cycle_s as f64, config.speedup).max(1);
        unit_ms.push(scaled_ms(p.policy.lease_unit_s as f64, config.speedup).max(1));
        outcomes.push(ProviderOutcome {
            env: EnvId(i),
            name: p.name.clone(),
            kind: p.trace.kind(),
            regime: p.policy.regime,
            completed: 0,
            unfinished: 0,
        });
        let mut env = RuntimeEnvironment::new(EnvId(i), p.name, p.trace, p.policy, cycle);
        if !config.options.keep_jobs {
            env = env.discard_finished_instances();
        }
        envs.push(env);
    }
    let mut engine = Engine::new();
    if config.options.event_log {
        engine = engine.with_event_log();
    }
    for i in 0..n {
        engine.schedule(SimTime::ZERO, SimEvent::EnvCreate(EnvId(i)))?;
        engine.schedule(horizon, SimEvent::EnvDestroy(EnvId(i)))?;
    }
    let mut world = World {
        envs,
        unit_ms,
        service: ProvisionService::new(config.options.keep_adjustment_log),
        ledger: ConsumptionLedger::new(n, config.speedup),
        horizon,
        next_lease: 0,
        audit: config.options.audit,
        bills: Vec::new(),
        outcomes,
        fault: None,
    };
    if let Err(e) = engine.run(horizon, &mut world) {
        return Err(world.fault.take().unwrap_or(RunError::Sim(e)));
    }
    Ok(RunOutcome {
        name: config.name,
        window_h: config.window_s / 3600.0,
        speedup: config.speedup,
        granted_after: world.service.granted_total(),
        adjustment_log: world.service.log().to_vec(),
        events: engine.dispatched(),
        event_log: engine.take_event_log(),
        ledger: world.ledger,
        outcomes: world.outcomes,
        envs: world.envs,
        lease_bills: world.bills,
    })
}
