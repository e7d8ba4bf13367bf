//! Acceptance suite over the shipped baseline scenario. Prints one
//! PASS/FAIL line per criterion and exits nonzero if any fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use esim_core::driver::{run, ProviderSetup, RunConfig, RunOptions};
use esim_core::elasticity::{evaluate_demand, ElasticityPolicy, Regime};
use esim_core::metrics::{reports_to_csv, tco_dedicated, tco_leased, MetricsReport, ProviderReport, TcoInputs};
use esim_core::scenarios::{
    check_conf1_equivalence, check_conf1_scenario, check_dominance, load_scenario, load_workloads, run_config,
    run_regimes, Candidate, Scenario, Workloads,
};
use rand::Rng;

const ROOT: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../..");

struct Criterion {
    id: u32,
    title: &'static str,
    notes: Vec<String>,
    ok: bool,
}

impl Criterion {
    fn new(id: u32, title: &'static str) -> Self {
        Criterion { id, title, notes: Vec::new(), ok: true }
    }

    fn check(&mut self, pass: bool, note: String) {
        self.notes.push(format!("{}{note}", if pass { "" } else { "MISS " }));
        self.ok &= pass;
    }

    /// `actual` within `rel` of `expected`.
    fn near(&mut self, what: &str, actual: f64, expected: f64, rel: f64) {
        let pass = common::within(actual, expected, rel);
        self.check(pass, format!("{what} {actual:.3} vs {expected} (±{:.0}%)", rel * 100.0));
    }

    /// `actual` within `abs` of `expected`.
    fn near_abs(&mut self, what: &str, actual: f64, expected: f64, abs: f64) {
        let pass = (actual - expected).abs() <= abs;
        self.check(pass, format!("{what} {actual:.3} vs {expected} (±{abs})"));
    }

    fn print(&self) {
        println!("{} criterion {:>2}: {}", if self.ok { "PASS" } else { "FAIL" }, self.id, self.title);
        for n in &self.notes {
            println!("      {n}");
        }
    }
}

struct Baseline {
    scenario: Scenario,
    workloads: Workloads,
    dedicated: MetricsReport,
    fixed: MetricsReport,
    per_job: MetricsReport,
    dynamic: MetricsReport,
}

fn prov<'a>(r: &'a MetricsReport, name: &str) -> &'a ProviderReport {
    r.provider(name).unwrap_or_else(|| panic!("no provider {name}"))
}

fn load() -> Baseline {
    let scenario = load_scenario(format!("{ROOT}/scenarios/baseline.toml")).expect("baseline scenario");
    let workloads = load_workloads(&scenario).expect("baseline workloads");
    let t = Instant::now();
    let mut reports = run_regimes(&scenario, &workloads, &Regime::ALL).expect("baseline run");
    eprintln!("baseline, all regimes: {:.1}s", t.elapsed().as_secs_f64());
    let find = |reports: &mut Vec<MetricsReport>, r: Regime| {
        let i = reports.iter().position(|x| x.providers[0].regime == r).expect("regime report");
        reports.remove(i)
    };
    Baseline {
        dedicated: find(&mut reports, Regime::Dedicated),
        fixed: find(&mut reports, Regime::FixedLease),
        per_job: find(&mut reports, Regime::PerJob),
        dynamic: find(&mut reports, Regime::Dynamic),
        scenario,
        workloads,
    }
}

fn static_baselines(b: &Baseline) -> Criterion {
    let mut c = Criterion::new(1, "static baselines exact");
    for (name, expected) in [("NASA", 43008.0), ("BLUE", 48384.0), ("Montage", 55776.0)] {
        let d = prov(&b.dedicated, name).rc_node_hours;
        let f = prov(&b.fixed, name).rc_node_hours;
        c.check(d == expected && f == expected, format!("{name} dedicated {d} fixed-lease {f} vs {expected}"));
    }
    c
}

fn saved_check(c: &mut Criterion, r: &MetricsReport, name: &str, rc: f64, saved: f64) {
    let p = prov(r, name);
    c.near(&format!("{name} RC"), p.rc_node_hours, rc, 0.10);
    c.near_abs(&format!("{name} saved%"), p.saved_percent.unwrap_or(f64::NAN), saved, 3.0);
}

fn dynamic_regime(b: &Baseline) -> Criterion {
    let mut c = Criterion::new(2, "dynamic regime RC and savings");
    saved_check(&mut c, &b.dynamic, "NASA", 29373.0, 31.7);
    saved_check(&mut c, &b.dynamic, "BLUE", 30100.0, 37.8);
    saved_check(&mut c, &b.dynamic, "Montage", 18108.0, 67.5);
    c
}

fn per_job_regime(b: &Baseline) -> Criterion {
    let mut c = Criterion::new(3, "per-job regime RC and throughput");
    let nasa = prov(&b.per_job, "NASA");
    c.near("NASA RC", nasa.rc_node_hours, 52943.0, 0.10);
    c.near_abs("NASA saved%", nasa.saved_percent.unwrap_or(f64::NAN), -23.1, 10.0);
    c.near("BLUE RC", prov(&b.per_job, "BLUE").rc_node_hours, 35838.0, 0.10);
    c.near("Montage RC", prov(&b.per_job, "Montage").rc_node_hours, 66200.0, 0.10);
    let tp = prov(&b.per_job, "Montage").tasks_per_second;
    let tp_static = prov(&b.dedicated, "Montage").tasks_per_second;
    c.near("Montage tasks/s", tp, 2.68, 0.10);
    c.check(tp > tp_static, format!("Montage per-job {tp:.4} > dedicated {tp_static:.4} tasks/s"));
    c
}

fn totals(b: &Baseline) -> Criterion {
    let mut c = Criterion::new(4, "provider totals and peaks");
    let trc = b.dynamic.trc_node_hours;
    c.near("dynamic TRC", trc, 77581.0, 0.10);
    let vs_static = (b.dedicated.trc_node_hours - trc) / b.dedicated.trc_node_hours * 100.0;
    let vs_per_job = (b.per_job.trc_node_hours - trc) / b.per_job.trc_node_hours * 100.0;
    c.near_abs("saved vs static %", vs_static, 47.3, 5.0);
    c.near_abs("saved vs per-job %", vs_per_job, 44.7, 5.0);
    let peak = b.dynamic.peak_nodes as f64;
    c.near("dynamic peak", peak, 705.0, 0.15);
    c.near_abs("peak dynamic/per-job", peak / b.per_job.peak_nodes as f64, 0.45, 0.15);
    c.near_abs("peak dynamic/static", peak / b.dedicated.peak_nodes as f64, 1.61, 0.15);
    c
}

fn completed(b: &Baseline) -> Criterion {
    let mut c = Criterion::new(5, "completed jobs");
    let nasa = prov(&b.dedicated, "NASA").completed_jobs;
    c.check(nasa.abs_diff(2603) <= 1, format!("NASA static {nasa} vs 2603 (±1)"));
    let blue = prov(&b.dedicated, "BLUE").completed_jobs;
    c.check((2649..=2657).contains(&blue), format!("BLUE static {blue} in [2649, 2657]"));
    for name in ["NASA", "BLUE", "Montage"] {
        let (p, d, s) = (
            prov(&b.per_job, name).completed_jobs,
            prov(&b.dynamic, name).completed_jobs,
            prov(&b.dedicated, name).completed_jobs,
        );
        c.check(p >= d && d >= s, format!("{name} per-job {p} >= dynamic {d} >= static {s}"));
    }
    c
}

fn conf1(b: &Baseline) -> Criterion {
    let mut c = Criterion::new(6, "CONF1 equivalence, exact");
    for check in check_conf1_scenario(&b.scenario, &b.workloads).expect("conf1 run") {
        c.check(
            check.passed(),
            format!(
                "{} LR={} RC {} = {} PM {} = {} over {} jobs{}",
                check.provider,
                check.lr,
                check.rc_dynamic,
                check.rc_static,
                check.pm_dynamic,
                check.pm_static,
                check.jobs_compared,
                check.divergence.as_deref().map(|d| format!(": {d}")).unwrap_or_default()
            ),
        );
    }
    let mut failures = Vec::new();
    for seed in 0..50u64 {
        let window = 2 * 86400;
        let trace = if seed % 3 == 2 {
            common::workflow(seed, 40, 4, window)
        } else {
            common::batch(seed, 80, window, 24)
        };
        let lr = trace.max_demand + (seed % 7) as u32;
        let check = check_conf1_equivalence("synthetic", &Arc::new(trace), lr, 60, 3600, window as f64, 1000.0)
            .expect("synthetic conf1");
        if !check.passed() {
            failures.push(format!("seed {seed}: {}", check.divergence.unwrap()));
        }
    }
    c.check(failures.is_empty(), format!("50 synthetic workloads, {} divergent {failures:?}", failures.len()));
    c
}

fn swept_candidates(scenario: &Scenario) -> Vec<Candidate> {
    let mut out = vec![Candidate::configured(scenario)];
    for (fb, label_b) in [(0.25, "B1/4"), (1.0 / 3.0, "B1/3"), (0.5, "B1/2"), (0.75, "B3/4")] {
        for r in [1.5, 2.0, 4.0, 8.0] {
            let policies = scenario
                .providers
                .iter()
                .map(|p| {
                    let d = p.dynamic;
                    let b = ((p.capacity as f64) * fb).round() as u32;
                    (p.name.clone(), ElasticityPolicy::dynamic(b, r, d.check_cycle_s, d.lease_unit_s))
                })
                .collect();
            out.push(Candidate { label: format!("{label_b}_R{r}"), policies });
        }
    }
    out
}

fn dominance(b: &Baseline) -> Criterion {
    let mut c = Criterion::new(7, "swept configuration with TRC(dynamic) <= TRC(static)");
    let check = check_dominance(&b.scenario, &b.workloads, &swept_candidates(&b.scenario)).expect("dominance");
    let n = check.candidates.iter().filter(|x| x.dominates).count();
    match check.witness() {
        Some(w) => c.check(
            true,
            format!(
                "witness {}: TRC {:.0} <= static {:.0}, performance kept ({n}/{} candidates dominate)",
                w.label,
                w.trc,
                check.static_trc,
                check.candidates.len()
            ),
        ),
        None => c.check(false, format!("no candidate of {} dominates static TRC {:.0}", check.candidates.len(), check.static_trc)),
    }
    c
}

fn overhead(b: &Baseline) -> Criterion {
    let mut c = Criterion::new(8, "management overhead");
    c.near("dynamic overhead node-h", b.dynamic.overhead_node_hours, 120.6, 0.20);
    let (s, f, d, p) = (b.dedicated.adjustments, b.fixed.adjustments, b.dynamic.adjustments, b.per_job.adjustments);
    c.check(s < f && f < d && d < p, format!("adjustments static {s} < fixed-lease {f} < dynamic {d} < per-job {p}"));
    c
}

fn tco() -> Criterion {
    let mut c = Criterion::new(9, "TCO exact");
    let text = std::fs::read_to_string(format!("{ROOT}/scenarios/tco.toml")).expect("tco inputs");
    let inputs = TcoInputs::from_toml(&text).expect("tco toml");
    let d = tco_dedicated(&inputs).unwrap();
    let l = tco_leased(&inputs).unwrap();
    c.check(d == 3162.5, format!("dedicated {d} = 3162.5"));
    c.check(l == 2260.0, format!("leased {l} = 2260"));
    c.near_abs("leased/dedicated", l / d, 0.715, 0.001);
    c
}

fn properties(b: &Baseline) -> Criterion {
    let mut c = Criterion::new(10, "property suites");

    // Conservation and billing on the baseline under audit.
    for regime in [Regime::Dynamic, Regime::PerJob] {
        let s = b.scenario.with_regime(regime);
        let options = RunOptions { audit: true, ..Default::default() };
        let cfg = run_config(&s, &b.workloads, options, |p| p.policy(regime)).unwrap();
        match run(cfg) {
            Ok(out) => {
                let bad = out
                    .lease_bills
                    .iter()
                    .filter(|x| x.billed_node_ms % (u128::from(x.nodes) * u128::from(x.unit_ms)) != 0)
                    .count();
                c.check(
                    out.granted_after == 0 && bad == 0,
                    format!(
                        "{regime}: conserved over {} events, {} lease bills all whole units of C",
                        out.events,
                        out.lease_bills.len()
                    ),
                );
            }
            Err(e) => c.check(false, format!("{regime}: {e}")),
        }
    }

    // DR against a brute-force recomputation.
    let mut r = common::rng(0xd1);
    let mut wrong = 0;
    for _ in 0..20_000 {
        let queue: Vec<u32> = (0..r.gen_range(0..30)).map(|_| r.gen_range(1..200)).collect();
        let owned = r.gen_range(0..500u32);
        let (p, q) = (r.gen_range(1..50u64), r.gen_range(1..8u64));
        let policy = ElasticityPolicy::dynamic(0, p as f64 / q as f64, 60, 3600);
        let demand: u64 = queue.iter().map(|&n| n as u64).sum();
        let fire = demand > 0 && (owned == 0 || demand * q > p * owned as u64 || queue.iter().any(|&n| n > owned));
        let expected = (fire && demand > owned as u64).then(|| (demand - owned as u64) as u32);
        if evaluate_demand(queue.iter().copied(), owned, &policy) != expected {
            wrong += 1;
        }
    }
    c.check(wrong == 0, format!("DR exact on 20000 random queues ({wrong} mismatches)"));

    // FCFS and first fit against the reference executor.
    let mut diverged = 0;
    for seed in 0..40u64 {
        let window = 4 * 3600;
        let trace = if seed % 2 == 0 { common::workflow(seed, 35, 3, window) } else { common::batch(seed, 60, window, 16) };
        let cap = 3 + (seed % 9) as u32;
        let cycle = 1 + seed % 90;
        let out = run(RunConfig {
            name: "ref".into(),
            window_s: window as f64,
            speedup: 1.0,
            providers: vec![ProviderSetup {
                name: "ref".into(),
                trace: Arc::new(trace.clone()),
                policy: ElasticityPolicy::fixed(Regime::Dedicated, cap, cycle),
            }],
            options: RunOptions { keep_jobs: true, ..Default::default() },
        })
        .unwrap();
        let got: std::collections::BTreeMap<_, _> =
            out.envs[0].completion_times().into_iter().map(|(k, t)| ((k.instance, k.index), t.ms())).collect();
        if got != common::reference(&trace, cap, cycle * 1000, window * 1000) {
            diverged += 1;
        }
    }
    c.check(diverged == 0, format!("40 random DAG/batch runs match the reference executor ({diverged} diverged)"));

    // Byte-identical reports across repeated runs and speedups.
    let again = reports_to_csv(&run_regimes(&b.scenario, &b.workloads, &[Regime::Dynamic]).unwrap());
    c.check(again == reports_to_csv(std::slice::from_ref(&b.dynamic)), "baseline report identical on rerun".into());
    let mut same = 0;
    for seed in 0..5u64 {
        let (fast, w) = common::mixed(seed, 86400, 1000.0);
        let slow = Scenario { speedup: 1.0, ..fast.clone() };
        let a = reports_to_csv(&run_regimes(&fast, &w, &Regime::ALL).unwrap());
        let z = reports_to_csv(&run_regimes(&slow, &w, &Regime::ALL).unwrap());
        same += usize::from(a == z);
    }
    c.check(same == 5, format!("{same}/5 synthetic scenarios identical at speedup 1 and 1000"));
    c
}

fn main() -> ExitCode {
    let start = Instant::now();
    let b = load();
    let criteria = [
        static_baselines(&b),
        dynamic_regime(&b),
        per_job_regime(&b),
        totals(&b),
        completed(&b),
        conf1(&b),
        dominance(&b),
        overhead(&b),
        tco(),
        properties(&b),
    ];
    for c in &criteria {
        c.print();
    }
    let passed = criteria.iter().filter(|c| c.ok).count();
    println!("acceptance: {passed}/{} criteria pass ({:.1}s)", criteria.len(), start.elapsed().as_secs_f64());
    if passed == criteria.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
