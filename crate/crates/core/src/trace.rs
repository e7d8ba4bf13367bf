//! Workload traces: SWF batch logs (HTC) and workflow task graphs (MTC).
//!
//! All times inside a [`WorkloadTrace`] are integer milliseconds. Freshly
//! parsed traces are in original time; [`rescale_time`] divides them by a
//! speedup factor and records the cumulative factor in
//! [`WorkloadTrace::speedup`] so reports can convert back.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use thiserror::Error;

/// Milliseconds per second.
pub const MS_PER_S: u64 = 1000;

#[derive(Debug, Error, PartialEq)]
pub enum TraceError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("dependency cycle through task `{0}`")]
    Cycle(String),
    #[error("task `{task}` depends on unknown task `{dep}`")]
    DanglingDep { task: String, dep: String },
    #[error("duplicate task id `{0}`")]
    DuplicateTask(String),
    #[error("operation requires a {expected} trace")]
    WrongKind { expected: WorkloadKind },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("dax: {0}")]
    Dax(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum WorkloadKind {
    Htc,
    Mtc,
}

impl fmt::Display for WorkloadKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WorkloadKind::Htc => f.write_str("HTC"),
            WorkloadKind::Mtc => f.write_str("MTC"),
        }
    }
}

/// One batch job of an HTC trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct JobRecord {
    pub job_id: u64,
    pub submit_ms: u64,
    pub run_ms: u64,
    pub nodes: u32,
}

/// One task of a workflow. `deps` are indices into the owning task list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorkflowTask {
    pub task_id: String,
    pub task_type: String,
    pub run_ms: u64,
    pub nodes: u32,
    pub deps: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Repetition {
    None,
    /// Resubmit the workflow as soon as the previous instance finishes, for
    /// as long as the submission time is before `horizon_ms`.
    BackToBack { horizon_ms: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Jobs {
    Batch(Vec<JobRecord>),
    Workflow(Vec<WorkflowTask>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkloadTrace {
    pub jobs: Jobs,
    /// Metrics window D(w) in milliseconds.
    pub duration_ms: u64,
    pub max_demand: u32,
    pub repetition: Repetition,
    /// Cumulative divisor applied by [`rescale_time`]; 1.0 for original time.
    pub speedup: f64,
}

impl WorkloadTrace {
    pub fn htc(jobs: Vec<JobRecord>, duration_ms: u64) -> Self {
        let max_demand = jobs.iter().map(|j| j.nodes).max().unwrap_or(0);
        WorkloadTrace {
            jobs: Jobs::Batch(jobs),
            duration_ms,
            max_demand,
            repetition: Repetition::None,
            speedup: 1.0,
        }
    }

    pub fn mtc(tasks: Vec<WorkflowTask>) -> Self {
        let max_demand = tasks.iter().map(|t| t.nodes).max().unwrap_or(0);
        WorkloadTrace {
            jobs: Jobs::Workflow(tasks),
            duration_ms: 0,
            max_demand,
            repetition: Repetition::None,
            speedup: 1.0,
        }
    }

    pub fn kind(&self) -> WorkloadKind {
        match self.jobs {
            Jobs::Batch(_) => WorkloadKind::Htc,
            Jobs::Workflow(_) => WorkloadKind::Mtc,
        }
    }

    pub fn len(&self) -> usize {
        match &self.jobs {
            Jobs::Batch(j) => j.len(),
            Jobs::Workflow(t) => t.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn batch(&self) -> Option<&[JobRecord]> {
        match &self.jobs {
            Jobs::Batch(j) => Some(j),
            Jobs::Workflow(_) => None,
        }
    }

    pub fn workflow(&self) -> Option<&[WorkflowTask]> {
        match &self.jobs {
            Jobs::Workflow(t) => Some(t),
            Jobs::Batch(_) => None,
        }
    }

    /// Mean run time in seconds of the (unscaled) trace.
    pub fn mean_run_s(&self) -> f64 {
        let (sum, n) = match &self.jobs {
            Jobs::Batch(j) => (j.iter().map(|j| j.run_ms).sum::<u64>(), j.len()),
            Jobs::Workflow(t) => (t.iter().map(|t| t.run_ms).sum::<u64>(), t.len()),
        };
        if n == 0 {
            return 0.0;
        }
        sum as f64 * self.speedup / MS_PER_S as f64 / n as f64
    }
}

// ---------------------------------------------------------------------------
// SWF

/// Options for mapping SWF processor counts onto simulated 1-CPU nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SwfOptions {
    /// Processors per simulated node; node count is `ceil(procs / procs_per_node)`.
    pub procs_per_node: u32,
}

impl Default for SwfOptions {
    fn default() -> Self {
        SwfOptions { procs_per_node: 1 }
    }
}

/// Header fields of interest from `;`-comment lines.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SwfHeader {
    pub unix_start_time: Option<i64>,
    pub max_procs: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwfImport {
    pub trace: WorkloadTrace,
    pub header: SwfHeader,
    /// Records dropped for non-positive run time or processor count.
    pub skipped: usize,
}

const SWF_FIELDS: usize = 18;

pub fn parse_swf(text: &str) -> Result<SwfImport, TraceError> {
    parse_swf_with(text, SwfOptions::default())
}

pub fn parse_swf_with(text: &str, opts: SwfOptions) -> Result<SwfImport, TraceError> {
    if opts.procs_per_node == 0 {
        return Err(TraceError::InvalidArgument("procs_per_node must be positive".into()));
    }
    let mut header = SwfHeader::default();
    let mut jobs = Vec::new();
    let mut skipped = 0;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix(';') {
            parse_header_line(comment, &mut header);
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() < SWF_FIELDS {
            return Err(TraceError::Parse {
                line: line_no,
                msg: format!("expected {SWF_FIELDS} fields, found {}", fields.len()),
            });
        }
        let mut values = [0f64; SWF_FIELDS];
        for (i, f) in fields.iter().take(SWF_FIELDS).enumerate() {
            values[i] = f.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
                TraceError::Parse { line: line_no, msg: format!("field {} is not a number: `{f}`", i + 1) }
            })?;
        }
        let job_id = values[0];
        let submit = values[1];
        let run = values[3];
        let procs = if values[7] == -1.0 { values[4] } else { values[7] };
        if run <= 0.0 || procs <= 0.0 || submit < 0.0 || job_id < 0.0 {
            skipped += 1;
            continue;
        }
        let nodes = (procs.ceil() as u64).div_ceil(opts.procs_per_node as u64);
        jobs.push(JobRecord {
            job_id: job_id as u64,
            submit_ms: secs_to_ms(submit),
            run_ms: secs_to_ms(run).max(1),
            nodes: u32::try_from(nodes).map_err(|_| TraceError::Parse {
                line: line_no,
                msg: "processor count overflows".into(),
            })?,
        });
    }
    jobs.sort_by_key(|j| j.submit_ms);
    let duration_ms = jobs.last().map_or(0, |j| j.submit_ms);
    Ok(SwfImport { trace: WorkloadTrace::htc(jobs, duration_ms), header, skipped })
}

fn parse_header_line(comment: &str, header: &mut SwfHeader) {
    let Some((key, value)) = comment.split_once(':') else { return };
    let value = value.trim();
    match key.trim() {
        "UnixStartTime" => header.unix_start_time = value.parse().ok(),
        "MaxProcs" => header.max_procs = value.parse().ok(),
        _ => {}
    }
}

fn secs_to_ms(s: f64) -> u64 {
    (s * MS_PER_S as f64).round() as u64
}

fn fmt_secs(ms: u64) -> String {
    if ms.is_multiple_of(MS_PER_S) {
        (ms / MS_PER_S).to_string()
    } else {
        format!("{}.{:03}", ms / MS_PER_S, ms % MS_PER_S)
    }
}

/// Writes an HTC trace as 18-field SWF records.
pub fn to_swf(trace: &WorkloadTrace) -> Result<String, TraceError> {
    let jobs = trace.batch().ok_or(TraceError::WrongKind { expected: WorkloadKind::Htc })?;
    let mut out = String::new();
    for j in jobs {
        let (s, r) = (fmt_secs(j.submit_ms), fmt_secs(j.run_ms));
        let n = j.nodes;
        out.push_str(&format!(
            "{} {s} -1 {r} {n} -1 -1 {n} -1 -1 1 -1 -1 -1 -1 -1 -1 -1\n",
            j.job_id
        ));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Workflow format

/// Parses the line-oriented workflow format:
///
/// ```text
/// # task_id  task_type  run_time_seconds  deps  [nodes]
/// p1  mProjectPP  13  -
/// d1  mDiffFit    11  p1,p2
/// ```
///
/// `deps` is a comma-separated list of task ids or `-`. The optional fifth
/// column gives the node count (default 1). `#` starts a comment.
pub fn parse_workflow(text: &str) -> Result<WorkloadTrace, TraceError> {
    let mut raw: Vec<(String, String, u64, Vec<String>, u32)> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if !(4..=5).contains(&fields.len()) {
            return Err(TraceError::Parse {
                line: line_no,
                msg: format!("expected 4 or 5 fields, found {}", fields.len()),
            });
        }
        let run: f64 = fields[2]
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite() && *v > 0.0)
            .ok_or_else(|| TraceError::Parse {
                line: line_no,
                msg: format!("run time must be a positive number: `{}`", fields[2]),
            })?;
        let deps = if fields[3] == "-" {
            Vec::new()
        } else {
            fields[3].split(',').filter(|d| !d.is_empty()).map(str::to_owned).collect()
        };
        let nodes = match fields.get(4) {
            None => 1,
            Some(n) => n.parse().ok().filter(|n| *n > 0).ok_or_else(|| TraceError::Parse {
                line: line_no,
                msg: format!("node count must be a positive integer: `{n}`"),
            })?,
        };
        raw.push((fields[0].to_owned(), fields[1].to_owned(), secs_to_ms(run).max(1), deps, nodes));
    }
    build_workflow(raw)
}

type RawTask = (String, String, u64, Vec<String>, u32);

fn build_workflow(raw: Vec<RawTask>) -> Result<WorkloadTrace, TraceError> {
    let mut index = HashMap::with_capacity(raw.len());
    for (i, t) in raw.iter().enumerate() {
        if index.insert(t.0.clone(), i).is_some() {
            return Err(TraceError::DuplicateTask(t.0.clone()));
        }
    }
    let mut tasks = Vec::with_capacity(raw.len());
    for (id, ty, run_ms, dep_ids, nodes) in raw {
        let mut deps = Vec::with_capacity(dep_ids.len());
        for d in &dep_ids {
            let &j = index
                .get(d)
                .ok_or_else(|| TraceError::DanglingDep { task: id.clone(), dep: d.clone() })?;
            if !deps.contains(&j) {
                deps.push(j);
            }
        }
        tasks.push(WorkflowTask { task_id: id, task_type: ty, run_ms, nodes, deps });
    }
    if let Some(member) = find_cycle(&tasks) {
        return Err(TraceError::Cycle(tasks[member].task_id.clone()));
    }
    Ok(WorkloadTrace::mtc(tasks))
}

/// Writes an MTC trace in the workflow format.
pub fn to_workflow(trace: &WorkloadTrace) -> Result<String, TraceError> {
    let tasks = trace.workflow().ok_or(TraceError::WrongKind { expected: WorkloadKind::Mtc })?;
    let mut out = String::new();
    for t in tasks {
        let deps = if t.deps.is_empty() {
            "-".to_owned()
        } else {
            t.deps.iter().map(|&d| tasks[d].task_id.as_str()).collect::<Vec<_>>().join(",")
        };
        out.push_str(&format!("{} {} {} {}", t.task_id, t.task_type, fmt_secs(t.run_ms), deps));
        if t.nodes != 1 {
            out.push_str(&format!(" {}", t.nodes));
        }
        out.push('\n');
    }
    Ok(out)
}

/// Converts Pegasus workflow-generator DAX output.
///
/// Mapping: `<job id=.. name=.. runtime=..>` becomes a task with
/// `task_id = id`, `task_type = name`, `run_time = runtime` seconds, one node;
/// each `<child ref=C><parent ref=P/></child>` adds `P` to the deps of `C`.
/// File uses, arguments and namespaces are ignored.
pub fn parse_dax(xml: &str) -> Result<WorkloadTrace, TraceError> {
    let doc = roxmltree::Document::parse(xml).map_err(|e| TraceError::Dax(e.to_string()))?;
    let mut raw: Vec<RawTask> = Vec::new();
    let mut pos: BTreeMap<String, usize> = BTreeMap::new();
    for job in doc.descendants().filter(|n| n.has_tag_name("job")) {
        let id = job.attribute("id").ok_or_else(|| TraceError::Dax("job without id".into()))?;
        let name = job.attribute("name").unwrap_or("task");
        let runtime: f64 = job
            .attribute("runtime")
            .and_then(|r| r.parse().ok())
            .filter(|r: &f64| r.is_finite() && *r > 0.0)
            .ok_or_else(|| TraceError::Dax(format!("job `{id}` lacks a positive runtime")))?;
        pos.insert(id.to_owned(), raw.len());
        raw.push((id.to_owned(), name.to_owned(), secs_to_ms(runtime).max(1), Vec::new(), 1));
    }
    for child in doc.descendants().filter(|n| n.has_tag_name("child")) {
        let cid = child.attribute("ref").ok_or_else(|| TraceError::Dax("child without ref".into()))?;
        let &ci = pos.get(cid).ok_or_else(|| TraceError::Dax(format!("child `{cid}` is not a job")))?;
        for parent in child.children().filter(|n| n.has_tag_name("parent")) {
            let pid = parent.attribute("ref").ok_or_else(|| TraceError::Dax("parent without ref".into()))?;
            raw[ci].3.push(pid.to_owned());
        }
    }
    build_workflow(raw)
}

/// Kahn peeling; returns a task that lies on a cycle, if any.
fn find_cycle(tasks: &[WorkflowTask]) -> Option<usize> {
    let n = tasks.len();
    let mut indeg: Vec<usize> = tasks.iter().map(|t| t.deps.len()).collect();
    let dependents = dependents_of(tasks);
    let mut stack: Vec<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
    let mut peeled = 0;
    while let Some(i) = stack.pop() {
        peeled += 1;
        for &d in &dependents[i] {
            indeg[d] -= 1;
            if indeg[d] == 0 {
                stack.push(d);
            }
        }
    }
    if peeled == n {
        return None;
    }
    // Every unpeeled task has an unpeeled dep; walking deps must revisit a node.
    let mut cur = (0..n).find(|&i| indeg[i] > 0)?;
    let mut seen = vec![false; n];
    while !seen[cur] {
        seen[cur] = true;
        cur = *tasks[cur].deps.iter().find(|&&d| indeg[d] > 0)?;
    }
    Some(cur)
}

/// Reverse adjacency: for each task, the tasks that list it as a dependency,
/// in ascending index order.
pub fn dependents_of(tasks: &[WorkflowTask]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new(); tasks.len()];
    for (i, t) in tasks.iter().enumerate() {
        for &d in &t.deps {
            if d < out.len() {
                out[d].push(i);
            }
        }
    }
    out
}

/// A topological order of the workflow, or `None` when it has a cycle.
pub fn topological_order(tasks: &[WorkflowTask]) -> Option<Vec<usize>> {
    let mut indeg: Vec<usize> = tasks.iter().map(|t| t.deps.len()).collect();
    let dependents = dependents_of(tasks);
    let mut queue: std::collections::VecDeque<usize> =
        (0..tasks.len()).filter(|&i| indeg[i] == 0).collect();
    let mut order = Vec::with_capacity(tasks.len());
    while let Some(i) = queue.pop_front() {
        order.push(i);
        for &d in &dependents[i] {
            indeg[d] -= 1;
            if indeg[d] == 0 {
                queue.push_back(d);
            }
        }
    }
    (order.len() == tasks.len()).then_some(order)
}

/// Completion time of one workflow instance started at 0 with unlimited
/// nodes and no scheduling delay (the critical-path length).
pub fn critical_path_ms(tasks: &[WorkflowTask]) -> Option<u64> {
    let order = topological_order(tasks)?;
    let mut finish = vec![0u64; tasks.len()];
    for i in order {
        let ready = tasks[i].deps.iter().map(|&d| finish[d]).max().unwrap_or(0);
        finish[i] = ready + tasks[i].run_ms;
    }
    Some(finish.into_iter().max().unwrap_or(0))
}

// ---------------------------------------------------------------------------
// Transformations

/// Keeps jobs with `start <= submit < start + length`, rebased to 0.
pub fn extract_window(trace: &WorkloadTrace, start_ms: u64, length_ms: u64) -> Result<WorkloadTrace, TraceError> {
    if length_ms == 0 {
        return Err(TraceError::InvalidArgument("window length must be positive".into()));
    }
    let jobs = trace.batch().ok_or(TraceError::WrongKind { expected: WorkloadKind::Htc })?;
    let end = start_ms.saturating_add(length_ms);
    let kept = jobs
        .iter()
        .filter(|j| j.submit_ms >= start_ms && j.submit_ms < end)
        .map(|j| JobRecord { submit_ms: j.submit_ms - start_ms, ..*j })
        .collect();
    let mut out = WorkloadTrace::htc(kept, length_ms);
    out.speedup = trace.speedup;
    Ok(out)
}

/// Divides all times by `factor`, rounding to whole milliseconds; run times
/// never drop below 1 ms.
pub fn rescale_time(trace: &WorkloadTrace, factor: f64) -> Result<WorkloadTrace, TraceError> {
    if !(factor.is_finite() && factor > 0.0) {
        return Err(TraceError::InvalidArgument(format!("speedup factor must be positive, got {factor}")));
    }
    let scale = |ms: u64| (ms as f64 / factor).round() as u64;
    let jobs = match &trace.jobs {
        Jobs::Batch(jobs) => Jobs::Batch(
            jobs.iter()
                .map(|j| JobRecord { submit_ms: scale(j.submit_ms), run_ms: scale(j.run_ms).max(1), ..*j })
                .collect(),
        ),
        Jobs::Workflow(tasks) => Jobs::Workflow(
            tasks.iter().map(|t| WorkflowTask { run_ms: scale(t.run_ms).max(1), ..t.clone() }).collect(),
        ),
    };
    let repetition = match trace.repetition {
        Repetition::None => Repetition::None,
        Repetition::BackToBack { horizon_ms } => Repetition::BackToBack { horizon_ms: scale(horizon_ms) },
    };
    Ok(WorkloadTrace {
        jobs,
        duration_ms: scale(trace.duration_ms),
        max_demand: trace.max_demand,
        repetition,
        speedup: trace.speedup * factor,
    })
}

/// Marks an MTC trace for back-to-back resubmission until `horizon_ms`.
pub fn plan_repetition(trace: &WorkloadTrace, horizon_ms: u64) -> Result<WorkloadTrace, TraceError> {
    if trace.kind() != WorkloadKind::Mtc {
        return Err(TraceError::WrongKind { expected: WorkloadKind::Mtc });
    }
    if horizon_ms == 0 {
        return Err(TraceError::InvalidArgument("repetition horizon must be positive".into()));
    }
    let mut out = trace.clone();
    out.repetition = Repetition::BackToBack { horizon_ms };
    out.duration_ms = horizon_ms;
    Ok(out)
}

/// Id of task `task_id` in workflow instance `instance`.
pub fn instance_task_id(task_id: &str, instance: u32) -> String {
    format!("{task_id}#{instance}")
}

// ---------------------------------------------------------------------------
// Validation

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Diagnostic {
    OutOfOrder { index: usize, job_id: u64 },
    NonPositiveRunTime { id: String },
    ZeroNodes { id: String },
    DuplicateId { id: String },
    DanglingDep { task: String, dep: usize },
    Cycle { task: String },
    DurationBeforeLastSubmit { duration_ms: u64, last_submit_ms: u64 },
    MaxDemandMismatch { recorded: u32, actual: u32 },
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::OutOfOrder { index, job_id } => {
                write!(f, "job {job_id} (record {index}) submitted before its predecessor")
            }
            Diagnostic::NonPositiveRunTime { id } => write!(f, "{id}: run time must be positive"),
            Diagnostic::ZeroNodes { id } => write!(f, "{id}: node count must be positive"),
            Diagnostic::DuplicateId { id } => write!(f, "duplicate id {id}"),
            Diagnostic::DanglingDep { task, dep } => write!(f, "{task}: dependency index {dep} out of range"),
            Diagnostic::Cycle { task } => write!(f, "dependency cycle through {task}"),
            Diagnostic::DurationBeforeLastSubmit { duration_ms, last_submit_ms } => {
                write!(f, "duration {duration_ms} ms ends before last submission at {last_submit_ms} ms")
            }
            Diagnostic::MaxDemandMismatch { recorded, actual } => {
                write!(f, "max_demand is {recorded} but largest job requests {actual}")
            }
        }
    }
}

/// Lists every invariant violation; an empty list means the trace is valid.
pub fn validate_trace(trace: &WorkloadTrace) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let actual_max = match &trace.jobs {
        Jobs::Batch(jobs) => {
            let mut ids = std::collections::HashSet::new();
            for (i, j) in jobs.iter().enumerate() {
                if i > 0 && j.submit_ms < jobs[i - 1].submit_ms {
                    out.push(Diagnostic::OutOfOrder { index: i, job_id: j.job_id });
                }
                if j.run_ms == 0 {
                    out.push(Diagnostic::NonPositiveRunTime { id: j.job_id.to_string() });
                }
                if j.nodes == 0 {
                    out.push(Diagnostic::ZeroNodes { id: j.job_id.to_string() });
                }
                if !ids.insert(j.job_id) {
                    out.push(Diagnostic::DuplicateId { id: j.job_id.to_string() });
                }
            }
            if let Some(last) = jobs.iter().map(|j| j.submit_ms).max() {
                if trace.duration_ms < last {
                    out.push(Diagnostic::DurationBeforeLastSubmit {
                        duration_ms: trace.duration_ms,
                        last_submit_ms: last,
                    });
                }
            }
            jobs.iter().map(|j| j.nodes).max().unwrap_or(0)
        }
        Jobs::Workflow(tasks) => {
            let mut ids = std::collections::HashSet::new();
            let mut dangling = false;
            for t in tasks {
                if t.run_ms == 0 {
                    out.push(Diagnostic::NonPositiveRunTime { id: t.task_id.clone() });
                }
                if t.nodes == 0 {
                    out.push(Diagnostic::ZeroNodes { id: t.task_id.clone() });
                }
                if !ids.insert(t.task_id.as_str()) {
                    out.push(Diagnostic::DuplicateId { id: t.task_id.clone() });
                }
                for &d in &t.deps {
                    if d >= tasks.len() {
                        dangling = true;
                        out.push(Diagnostic::DanglingDep { task: t.task_id.clone(), dep: d });
                    }
                }
            }
            if !dangling {
                if let Some(i) = find_cycle(tasks) {
                    out.push(Diagnostic::Cycle { task: tasks[i].task_id.clone() });
                }
            }
            tasks.iter().map(|t| t.nodes).max().unwrap_or(0)
        }
    };
    if actual_max != trace.max_demand {
        out.push(Diagnostic::MaxDemandMismatch { recorded: trace.max_demand, actual: actual_max });
    }
    out
}
