//! Thin runtime environments: lifecycle, queues, first-fit (HTC) and
//! FCFS-with-dependencies (MTC) scheduling, non-preemptive execution.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::elasticity::{ElasticityPolicy, Regime, ResourceHolding};
use crate::sim::SimTime;
use crate::trace::{dependents_of, instance_task_id, Jobs, WorkloadKind, WorkloadTrace};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EnvId(pub usize);

impl fmt::Display for EnvId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LifecycleState {
    Inexistent,
    Planning,
    Created,
    Running,
    Destroyed,
}

impl LifecycleState {
    fn next(self) -> Option<LifecycleState> {
        use LifecycleState::*;
        match self {
            Inexistent => Some(Planning),
            Planning => Some(Created),
            Created => Some(Running),
            Running => Some(Destroyed),
            Destroyed => None,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum RuntimeError {
    #[error("environment {env}: cannot go from {from:?} to {to:?}")]
    Lifecycle { env: EnvId, from: LifecycleState, to: LifecycleState },
    #[error("environment {env} is {state:?}, not running")]
    NotRunning { env: EnvId, state: LifecycleState },
    #[error("environment {env}: unknown job {key}")]
    UnknownJob { env: EnvId, key: JobKey },
    #[error("environment {env}: job {key} needs {nodes} nodes, {free} free")]
    Capacity { env: EnvId, key: JobKey, nodes: u32, free: u32 },
    #[error("environment {env}: {kind} operation on a {actual} environment")]
    WrongKind { env: EnvId, kind: WorkloadKind, actual: WorkloadKind },
    #[error("environment {env}: job {key} submitted twice")]
    DuplicateSubmit { env: EnvId, key: JobKey },
}

/// Identifies a job: HTC jobs use instance 0 and their trace index; MTC
/// tasks use the workflow instance and the task index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct JobKey {
    pub instance: u32,
    pub index: u32,
}

impl JobKey {
    pub fn htc(index: usize) -> Self {
        JobKey { instance: 0, index: index as u32 }
    }
}

impl fmt::Display for JobKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.index, self.instance)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum JobStatus {
    /// MTC task waiting on dependencies.
    Held,
    Queued,
    Running,
    Completed,
    UnfinishedAtHorizon,
}

impl JobStatus {
    pub fn name(self) -> &'static str {
        match self {
            JobStatus::Held => "held",
            JobStatus::Queued => "queued",
            JobStatus::Running => "running",
            JobStatus::Completed => "completed",
            JobStatus::UnfinishedAtHorizon => "unfinished",
        }
    }
}

const NONE: u64 = u64::MAX;

/// Per-job timestamps in scaled milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct JobState {
    pub status: JobStatus,
    pub submit: u64,
    start: u64,
    completion: u64,
}

impl JobState {
    fn new(submit: u64, status: JobStatus) -> Self {
        JobState { status, submit, start: NONE, completion: NONE }
    }

    pub fn start(&self) -> Option<SimTime> {
        (self.start != NONE).then_some(SimTime(self.start))
    }

    pub fn completion(&self) -> Option<SimTime> {
        (self.completion != NONE).then_some(SimTime(self.completion))
    }
}

/// Audit record for one job: `job_id submit start complete nodes state`.
#[derive(Debug, Clone, PartialEq)]
pub struct JobOutput {
    pub job_id: String,
    pub submit: SimTime,
    pub start: Option<SimTime>,
    pub completion: Option<SimTime>,
    pub nodes: u32,
    pub status: JobStatus,
}

#[derive(Debug, Clone)]
struct Instance {
    submit: u64,
    deps_left: Vec<u32>,
    states: Vec<JobState>,
    remaining: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Started {
    pub key: JobKey,
    pub nodes: u32,
    pub completion: SimTime,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Completion {
    pub nodes: u32,
    /// MTC tasks whose last dependency just finished, in task order.
    pub newly_ready: Vec<JobKey>,
    /// Set when this completion finished its workflow instance.
    pub instance_done: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DestroySummary {
    pub completed: u64,
    pub unfinished: u64,
}

/// A service provider's runtime environment over one (scaled) workload.
#[derive(Debug)]
pub struct RuntimeEnvironment {
    pub id: EnvId,
    pub name: String,
    pub policy: ElasticityPolicy,
    /// Scheduling period in scaled milliseconds.
    pub cycle_ms: u64,
    pub holding: ResourceHolding,
    state: LifecycleState,
    history: Vec<LifecycleState>,
    trace: Arc<WorkloadTrace>,
    dependents: Vec<Vec<usize>>,
    queue: VecDeque<JobKey>,
    running: BTreeMap<JobKey, (u32, SimTime)>,
    busy: u32,
    htc: Vec<JobState>,
    instances: Vec<Instance>,
    keep_jobs: bool,
    completed: u64,
}

impl RuntimeEnvironment {
    pub fn new(id: EnvId, name: impl Into<String>, trace: Arc<WorkloadTrace>, policy: ElasticityPolicy, cycle_ms: u64) -> Self {
        let dependents = trace.workflow().map(dependents_of).unwrap_or_default();
        let htc = trace
            .batch()
            .map(|jobs| jobs.iter().map(|j| JobState::new(j.submit_ms, JobStatus::Held)).collect())
            .unwrap_or_default();
        RuntimeEnvironment {
            id,
            name: name.into(),
            policy,
            cycle_ms: cycle_ms.max(1),
            holding: ResourceHolding::default(),
            state: LifecycleState::Inexistent,
            history: vec![LifecycleState::Inexistent],
            trace,
            dependents,
            queue: VecDeque::new(),
            running: BTreeMap::new(),
            busy: 0,
            htc,
            instances: Vec::new(),
            keep_jobs: true,
            completed: 0,
        }
    }

    /// Drops per-task records of finished workflow instances to bound memory.
    pub fn discard_finished_instances(mut self) -> Self {
        self.keep_jobs = false;
        self
    }

    pub fn kind(&self) -> WorkloadKind {
        self.trace.kind()
    }

    pub fn trace(&self) -> &WorkloadTrace {
        &self.trace
    }

    pub fn trace_arc(&self) -> &Arc<WorkloadTrace> {
        &self.trace
    }

    pub fn state(&self) -> LifecycleState {
        self.state
    }

    pub fn history(&self) -> &[LifecycleState] {
        &self.history
    }

    pub fn busy(&self) -> u32 {
        self.busy
    }

    pub fn free(&self) -> u32 {
        self.holding.total().saturating_sub(self.busy)
    }

    pub fn completed(&self) -> u64 {
        self.completed
    }

    pub fn queue_len(&self) -> usize {
        self.queue.len()
    }

    pub fn running_len(&self) -> usize {
        self.running.len()
    }

    /// Running jobs with their node counts and start times, in key order.
    pub fn running_jobs(&self) -> Vec<(JobKey, u32, SimTime)> {
        self.running
            .iter()
            .map(|(&k, &(nodes, _))| (k, nodes, self.job_state(k).and_then(|s| s.start()).unwrap_or_default()))
            .collect()
    }

    pub fn instances_submitted(&self) -> usize {
        self.instances.len()
    }

    pub fn queued_keys(&self) -> impl Iterator<Item = JobKey> + '_ {
        self.queue.iter().copied()
    }

    /// Node demands of queued jobs in queue order.
    pub fn queued_demands(&self) -> impl Iterator<Item = u32> + '_ {
        self.queue.iter().map(move |&k| self.nodes_of(k))
    }

    pub fn nodes_of(&self, key: JobKey) -> u32 {
        match &self.trace.jobs {
            Jobs::Batch(j) => j[key.index as usize].nodes,
            Jobs::Workflow(t) => t[key.index as usize].nodes,
        }
    }

    pub fn run_ms_of(&self, key: JobKey) -> u64 {
        match &self.trace.jobs {
            Jobs::Batch(j) => j[key.index as usize].run_ms,
            Jobs::Workflow(t) => t[key.index as usize].run_ms,
        }
    }

    pub fn job_state(&self, key: JobKey) -> Option<&JobState> {
        match self.kind() {
            WorkloadKind::Htc => self.htc.get(key.index as usize).filter(|_| key.instance == 0),
            WorkloadKind::Mtc => self.instances.get(key.instance as usize)?.states.get(key.index as usize),
        }
    }

    fn job_state_mut(&mut self, key: JobKey) -> Result<&mut JobState, RuntimeError> {
        let env = self.id;
        let slot = match self.trace.kind() {
            WorkloadKind::Htc if key.instance == 0 => self.htc.get_mut(key.index as usize),
            WorkloadKind::Htc => None,
            WorkloadKind::Mtc => self
                .instances
                .get_mut(key.instance as usize)
                .and_then(|i| i.states.get_mut(key.index as usize)),
        };
        slot.ok_or(RuntimeError::UnknownJob { env, key })
    }

    fn transition(&mut self, to: LifecycleState) -> Result<(), RuntimeError> {
        if self.state.next() != Some(to) {
            return Err(RuntimeError::Lifecycle { env: self.id, from: self.state, to });
        }
        self.state = to;
        self.history.push(to);
        Ok(())
    }

    fn ensure_running(&self) -> Result<(), RuntimeError> {
        if self.state != LifecycleState::Running {
            return Err(RuntimeError::NotRunning { env: self.id, state: self.state });
        }
        Ok(())
    }

    /// inexistent → planning → created → running. Initial resources are
    /// attached by the caller through the provision service.
    pub fn create(&mut self) -> Result<(), RuntimeError> {
        self.transition(LifecycleState::Planning)?;
        self.transition(LifecycleState::Created)?;
        self.transition(LifecycleState::Running)
    }

    /// Accepts HTC job `index` into the pending queue (arrival order).
    pub fn submit_job(&mut self, index: usize, now: SimTime) -> Result<JobKey, RuntimeError> {
        self.ensure_running()?;
        self.expect_kind(WorkloadKind::Htc)?;
        let key = JobKey::htc(index);
        let st = self.job_state_mut(key)?;
        if st.status != JobStatus::Held {
            return Err(RuntimeError::DuplicateSubmit { env: self.id, key });
        }
        st.status = JobStatus::Queued;
        st.submit = now.ms();
        self.queue.push_back(key);
        Ok(key)
    }

    /// Instantiates the workflow; returns the initially ready tasks, which
    /// are also appended to the ready queue unless `enqueue` is false.
    pub fn submit_instance(&mut self, now: SimTime, enqueue: bool) -> Result<Vec<JobKey>, RuntimeError> {
        self.ensure_running()?;
        self.expect_kind(WorkloadKind::Mtc)?;
        let tasks = self.trace.workflow().expect("mtc");
        let instance = self.instances.len() as u32;
        let deps_left: Vec<u32> = tasks.iter().map(|t| t.deps.len() as u32).collect();
        let mut states: Vec<JobState> = vec![JobState::new(now.ms(), JobStatus::Held); tasks.len()];
        let mut ready = Vec::new();
        for (i, left) in deps_left.iter().enumerate() {
            if *left == 0 {
                states[i].status = JobStatus::Queued;
                ready.push(JobKey { instance, index: i as u32 });
            }
        }
        self.instances.push(Instance { submit: now.ms(), deps_left, states, remaining: tasks.len() as u32 });
        if enqueue {
            self.queue.extend(ready.iter().copied());
        }
        Ok(ready)
    }

    fn expect_kind(&self, kind: WorkloadKind) -> Result<(), RuntimeError> {
        let actual = self.kind();
        if actual != kind {
            return Err(RuntimeError::WrongKind { env: self.id, kind, actual });
        }
        Ok(())
    }

    /// Starts `key` now if it fits in the free nodes.
    pub fn start(&mut self, key: JobKey, now: SimTime) -> Result<Started, RuntimeError> {
        self.ensure_running()?;
        let nodes = self.nodes_of(key);
        let free = self.free();
        if nodes > free {
            return Err(RuntimeError::Capacity { env: self.id, key, nodes, free });
        }
        let completion = now.after(self.run_ms_of(key));
        let st = self.job_state_mut(key)?;
        if !matches!(st.status, JobStatus::Queued) {
            return Err(RuntimeError::DuplicateSubmit { env: self.id, key });
        }
        st.status = JobStatus::Running;
        st.start = now.ms();
        self.busy += nodes;
        self.running.insert(key, (nodes, completion));
        Ok(Started { key, nodes, completion })
    }

    /// First fit: scan the queue in arrival order and start every job that
    /// fits the remaining free nodes. One pass reaches the rescan fixpoint,
    /// since a job skipped with more free nodes cannot fit later.
    pub fn tick_scheduler_htc(&mut self, now: SimTime) -> Result<Vec<Started>, RuntimeError> {
        self.expect_kind(WorkloadKind::Htc)?;
        self.ensure_running()?;
        let mut started = Vec::new();
        let mut free = self.free();
        let mut kept = VecDeque::with_capacity(self.queue.len());
        let queue = std::mem::take(&mut self.queue);
        for key in queue {
            let nodes = self.nodes_of(key);
            if free > 0 && nodes <= free {
                started.push(self.start(key, now)?);
                free -= nodes;
            } else {
                kept.push_back(key);
            }
        }
        self.queue = kept;
        Ok(started)
    }

    /// Strict FCFS over the ready queue: stop at the first task that does
    /// not fit.
    pub fn tick_scheduler_mtc(&mut self, now: SimTime) -> Result<Vec<Started>, RuntimeError> {
        self.expect_kind(WorkloadKind::Mtc)?;
        self.ensure_running()?;
        let mut started = Vec::new();
        while let Some(&key) = self.queue.front() {
            if self.nodes_of(key) > self.free() {
                break;
            }
            self.queue.pop_front();
            started.push(self.start(key, now)?);
        }
        Ok(started)
    }

    pub fn tick_scheduler(&mut self, now: SimTime) -> Result<Vec<Started>, RuntimeError> {
        match self.kind() {
            WorkloadKind::Htc => self.tick_scheduler_htc(now),
            WorkloadKind::Mtc => self.tick_scheduler_mtc(now),
        }
    }

    /// Marks `key` done at `now` and frees its nodes. For MTC, dependents
    /// whose dependencies are now all complete become ready; they are
    /// queued unless `enqueue` is false.
    pub fn complete_job(&mut self, key: JobKey, now: SimTime, enqueue: bool) -> Result<Completion, RuntimeError> {
        let env = self.id;
        let (nodes, due) = self.running.remove(&key).ok_or(RuntimeError::UnknownJob { env, key })?;
        debug_assert_eq!(due, now);
        self.busy -= nodes;
        self.completed += 1;
        let st = self.job_state_mut(key)?;
        st.status = JobStatus::Completed;
        st.completion = now.ms();
        let mut out = Completion { nodes, ..Default::default() };
        if self.kind() == WorkloadKind::Mtc {
            let inst = &mut self.instances[key.instance as usize];
            for &d in &self.dependents[key.index as usize] {
                inst.deps_left[d] -= 1;
                if inst.deps_left[d] == 0 {
                    inst.states[d].status = JobStatus::Queued;
                    out.newly_ready.push(JobKey { instance: key.instance, index: d as u32 });
                }
            }
            inst.remaining -= 1;
            if inst.remaining == 0 {
                out.instance_done = true;
                if !self.keep_jobs {
                    inst.states = Vec::new();
                    inst.deps_left = Vec::new();
                }
            }
            if enqueue {
                self.queue.extend(out.newly_ready.iter().copied());
            }
        }
        Ok(out)
    }

    /// Enters `destroyed`; anything not completed is reported unfinished.
    pub fn destroy(&mut self) -> Result<DestroySummary, RuntimeError> {
        self.transition(LifecycleState::Destroyed)?;
        let mut unfinished = 0;
        for st in self.htc.iter_mut().chain(self.instances.iter_mut().flat_map(|i| i.states.iter_mut())) {
            if matches!(st.status, JobStatus::Queued | JobStatus::Running | JobStatus::Held) {
                st.status = JobStatus::UnfinishedAtHorizon;
                unfinished += 1;
            }
        }
        // HTC jobs never submitted (submission after the horizon) stay Held
        // in spirit but are counted unfinished too.
        self.queue.clear();
        self.running.clear();
        self.busy = 0;
        Ok(DestroySummary { completed: self.completed, unfinished })
    }

    /// Completion times of all completed jobs in key order.
    pub fn completion_times(&self) -> Vec<(JobKey, SimTime)> {
        self.job_outputs_keys()
            .filter_map(|(k, st)| st.completion().map(|c| (k, c)))
            .collect()
    }

    fn job_outputs_keys(&self) -> impl Iterator<Item = (JobKey, &JobState)> + '_ {
        let htc = self.htc.iter().enumerate().map(|(i, s)| (JobKey::htc(i), s));
        let mtc = self.instances.iter().enumerate().flat_map(|(inst, i)| {
            i.states.iter().enumerate().map(move |(t, s)| (JobKey { instance: inst as u32, index: t as u32 }, s))
        });
        htc.chain(mtc)
    }

    /// Per-job audit records (scaled times).
    pub fn job_outputs(&self) -> Vec<JobOutput> {
        self.job_outputs_keys()
            .map(|(k, st)| JobOutput {
                job_id: match &self.trace.jobs {
                    Jobs::Batch(j) => j[k.index as usize].job_id.to_string(),
                    Jobs::Workflow(t) => instance_task_id(&t[k.index as usize].task_id, k.instance),
                },
                submit: SimTime(st.submit),
                start: st.start(),
                completion: st.completion(),
                nodes: self.nodes_of(k),
                status: st.status,
            })
            .collect()
    }

    pub fn instance_submit(&self, instance: u32) -> Option<SimTime> {
        self.instances.get(instance as usize).map(|i| SimTime(i.submit))
    }

    pub fn is_static(&self) -> bool {
        self.policy.regime.is_static()
    }

    pub fn regime(&self) -> Regime {
        self.policy.regime
    }
}
