#![allow(dead_code)]

use std::collections::{BTreeMap, VecDeque};
use std::path::PathBuf;
use std::sync::Arc;

use esim_core::elasticity::{ElasticityPolicy, Regime};
use esim_core::scenarios::{ProviderSpec, Scenario, Workloads};
use esim_core::trace::{dependents_of, plan_repetition, JobRecord, Jobs, Repetition, WorkflowTask, WorkloadKind, WorkloadTrace};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random batch workload over `window_s` seconds, whole-second times.
pub fn batch(seed: u64, jobs: usize, window_s: u64, max_nodes: u32) -> WorkloadTrace {
    let mut r = rng(seed);
    let mut submits: Vec<u64> = (0..jobs).map(|_| r.gen_range(0..window_s)).collect();
    submits.sort_unstable();
    let records = submits
        .into_iter()
        .enumerate()
        .map(|(i, s)| JobRecord {
            job_id: i as u64 + 1,
            submit_ms: s * 1000,
            run_ms: r.gen_range(1..=window_s / 4).max(1) * 1000,
            nodes: r.gen_range(1..=max_nodes),
        })
        .collect();
    WorkloadTrace::htc(records, window_s * 1000)
}

/// Random layered DAG; every task depends on up to three earlier tasks.
pub fn dag(seed: u64, tasks: usize, max_nodes: u32, max_run_s: u64) -> Vec<WorkflowTask> {
    let mut r = rng(seed);
    (0..tasks)
        .map(|i| {
            let mut deps: Vec<usize> = if i == 0 {
                Vec::new()
            } else {
                (0..r.gen_range(0..=3usize.min(i))).map(|_| r.gen_range(0..i)).collect()
            };
            deps.sort_unstable();
            deps.dedup();
            WorkflowTask {
                task_id: format!("t{i}"),
                task_type: format!("k{}", i % 3),
                run_ms: r.gen_range(1..=max_run_s) * 1000,
                nodes: r.gen_range(1..=max_nodes),
                deps,
            }
        })
        .collect()
}

pub fn workflow(seed: u64, tasks: usize, max_nodes: u32, window_s: u64) -> WorkloadTrace {
    let wf = WorkloadTrace::mtc(dag(seed, tasks, max_nodes, 30));
    plan_repetition(&wf, window_s * 1000).expect("repetition plan")
}

pub fn provider(name: &str, kind: WorkloadKind, capacity: u32, policy: ElasticityPolicy) -> ProviderSpec {
    ProviderSpec {
        name: name.into(),
        kind,
        trace: PathBuf::from(format!("{name}.mem")),
        start_s: 0.0,
        procs_per_node: 1,
        capacity,
        dynamic: policy,
        regime: None,
    }
}

/// In-memory scenario with two batch providers and one workflow provider.
pub fn mixed(seed: u64, window_s: u64, speedup: f64) -> (Scenario, Workloads) {
    let a = batch(seed, 40, window_s, 12);
    let b = batch(seed ^ 0x5eed, 30, window_s, 20);
    let w = workflow(seed.wrapping_add(7), 25, 4, window_s);
    let providers = vec![
        provider("A", WorkloadKind::Htc, 16, ElasticityPolicy::dynamic(4, 1.5, 60, 600)),
        provider("B", WorkloadKind::Htc, 24, ElasticityPolicy::dynamic(6, 1.2, 30, 900)),
        provider("W", WorkloadKind::Mtc, 8, ElasticityPolicy::dynamic(2, 2.0, 1, 600)),
    ];
    let traces: BTreeMap<String, Arc<WorkloadTrace>> =
        [("A", a), ("B", b), ("W", w)].into_iter().map(|(n, t)| (n.to_string(), Arc::new(t))).collect();
    let scenario = Scenario {
        name: format!("mixed{seed}"),
        window_s: window_s as f64,
        speedup,
        regime: Regime::Dynamic,
        baseline: Some(Regime::Dedicated),
        providers,
    };
    (scenario, Workloads { traces })
}

pub fn within(actual: f64, expected: f64, rel: f64) -> bool {
    (actual - expected).abs() <= rel * expected.abs()
}

/// Independent tick-driven executor for a fixed cluster of `capacity`
/// nodes. Returns completion times keyed by (instance, index).
pub fn reference(trace: &WorkloadTrace, capacity: u32, cycle_ms: u64, horizon: u64) -> BTreeMap<(u32, u32), u64> {
    struct Run {
        end: u64,
        seq: u64,
        key: (u32, u32),
        nodes: u32,
    }
    let mut done = BTreeMap::new();
    let mut queue: VecDeque<(u32, u32)> = VecDeque::new();
    let mut running: Vec<Run> = Vec::new();
    let mut free = capacity;
    let mut seq = 0u64;
    let nodes_of = |k: (u32, u32)| match &trace.jobs {
        Jobs::Batch(j) => j[k.1 as usize].nodes,
        Jobs::Workflow(t) => t[k.1 as usize].nodes,
    };
    let run_of = |k: (u32, u32)| match &trace.jobs {
        Jobs::Batch(j) => j[k.1 as usize].run_ms,
        Jobs::Workflow(t) => t[k.1 as usize].run_ms,
    };

    // Pending submissions: (time, what). For batch, one per job; for a
    // workflow, instance arrivals are discovered as instances finish.
    let mut arrivals: VecDeque<(u64, Option<u32>)> = match &trace.jobs {
        Jobs::Batch(j) => {
            j.iter().enumerate().filter(|(_, r)| r.submit_ms <= horizon).map(|(i, r)| (r.submit_ms, Some(i as u32))).collect()
        }
        Jobs::Workflow(t) if !t.is_empty() => VecDeque::from([(0, None)]),
        Jobs::Workflow(_) => VecDeque::new(),
    };
    let (dependents, mut left, mut remaining, mut instance) = match &trace.jobs {
        Jobs::Workflow(t) => (dependents_of(t), Vec::new(), 0usize, 0u32),
        Jobs::Batch(_) => (Vec::new(), Vec::new(), 0, 0),
    };
    let repeat_until = match trace.repetition {
        Repetition::BackToBack { horizon_ms } => horizon_ms.min(horizon),
        Repetition::None => 0,
    };

    let mut drain = |limit_complete: u64,
                     limit_submit: Option<u64>,
                     queue: &mut VecDeque<(u32, u32)>,
                     running: &mut Vec<Run>,
                     free: &mut u32,
                     arrivals: &mut VecDeque<(u64, Option<u32>)>| loop {
        let next_c = running.iter().filter(|r| r.end <= limit_complete).min_by_key(|r| (r.end, r.seq)).map(|r| (r.end, r.seq));
        let next_s = arrivals.front().map(|a| a.0).filter(|&s| limit_submit.is_some_and(|l| s < l));
        match (next_c, next_s) {
            (Some((c, sq)), s) if s.is_none_or(|s| c <= s) => {
                let pos = running.iter().position(|r| r.seq == sq).unwrap();
                let r = running.swap_remove(pos);
                *free += r.nodes;
                done.insert(r.key, c);
                if let Jobs::Workflow(_) = &trace.jobs {
                    for &d in &dependents[r.key.1 as usize] {
                        left[d] -= 1;
                        if left[d] == 0 {
                            queue.push_back((r.key.0, d as u32));
                        }
                    }
                    remaining -= 1;
                    if remaining == 0 && c < repeat_until {
                        arrivals.push_back((c, None));
                    }
                }
            }
            (_, Some(_)) => {
                let (_, what) = arrivals.pop_front().unwrap();
                match what {
                    Some(i) => queue.push_back((0, i)),
                    None => {
                        let Jobs::Workflow(tasks) = &trace.jobs else { unreachable!() };
                        left = tasks.iter().map(|t| t.deps.len()).collect();
                        remaining = tasks.len();
                        for (i, t) in tasks.iter().enumerate() {
                            if t.deps.is_empty() {
                                queue.push_back((instance, i as u32));
                            }
                        }
                        instance += 1;
                    }
                }
            }
            _ => break,
        }
    };

    let mut t = 0u64;
    while t <= horizon {
        drain(t, Some(t), &mut queue, &mut running, &mut free, &mut arrivals);
        match &trace.jobs {
            Jobs::Batch(_) => {
                let mut kept = VecDeque::new();
                for k in queue.drain(..) {
                    let n = nodes_of(k);
                    if n <= free {
                        free -= n;
                        running.push(Run { end: t + run_of(k), seq, key: k, nodes: n });
                        seq += 1;
                    } else {
                        kept.push_back(k);
                    }
                }
                queue = kept;
            }
            Jobs::Workflow(_) => {
                while let Some(&k) = queue.front() {
                    let n = nodes_of(k);
                    if n > free {
                        break;
                    }
                    queue.pop_front();
                    free -= n;
                    running.push(Run { end: t + run_of(k), seq, key: k, nodes: n });
                    seq += 1;
                }
            }
        }
        t += cycle_ms;
    }
    drain(horizon, None, &mut queue, &mut running, &mut free, &mut arrivals);
    done
}
