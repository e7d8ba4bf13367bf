use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use esim_core::driver::RunOptions;
use esim_core::elasticity::Regime;
use esim_core::metrics::{reports_to_csv, tco_dedicated, tco_leased, TcoInputs};
use esim_core::scenarios::{
    check_conf1_scenario, check_dominance, load_scenario, load_workloads, run_regimes, run_scenario_with,
    run_sweep, simulate, sweep_to_csv, write_reports, write_sweep, Candidate, SweepSpec,
};
use esim_core::trace::{parse_dax, parse_swf_with, parse_workflow, validate_trace, SwfOptions};

#[derive(Parser)]
#[command(name = "esim", version, about = "Consolidated HTC/MTC workload simulator on an elastic cloud")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and print its report as CSV.
    Run {
        scenario: PathBuf,
        /// Also write report.csv (and logs, with --logs) here.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the scenario's regime.
        #[arg(long)]
        regime: Option<Regime>,
        /// Run every regime and report them together.
        #[arg(long, conflicts_with = "regime")]
        all_regimes: bool,
        /// Write the adjustment log and per-job records to --out.
        #[arg(long, requires = "out")]
        logs: bool,
    },
    /// Run a parameter grid over the dynamic regime.
    Sweep {
        scenario: PathBuf,
        /// TOML grid: provider, initial, threshold, cycle, lease_unit.
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Equivalence and dominance checks; exits nonzero on failure.
    Check {
        which: CheckKind,
        scenario: PathBuf,
    },
    /// Monthly total cost of ownership, dedicated versus leased.
    Tco { inputs: PathBuf },
    /// Report invariant violations in a trace file.
    Validate {
        trace: PathBuf,
        /// Processors per simulated node for SWF input.
        #[arg(long, default_value_t = 1)]
        procs_per_node: u32,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum CheckKind {
    Conf1,
    Dominance,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run { scenario, out, regime, all_regimes, logs } => cmd_run(&scenario, out, regime, all_regimes, logs),
        Command::Sweep { scenario, grid, out } => cmd_sweep(&scenario, &grid, out),
        Command::Check { which, scenario } => cmd_check(which, &scenario),
        Command::Tco { inputs } => cmd_tco(&inputs),
        Command::Validate { trace, procs_per_node } => cmd_validate(&trace, procs_per_node),
    }
}

fn cmd_run(path: &Path, out: Option<PathBuf>, regime: Option<Regime>, all: bool, logs: bool) -> Result<bool> {
    let mut scenario = load_scenario(path)?;
    if let Some(r) = regime {
        scenario = scenario.with_regime(r);
    }
    let workloads = load_workloads(&scenario)?;
    let reports = if all {
        run_regimes(&scenario, &workloads, &Regime::ALL)?
    } else {
        vec![run_scenario_with(&scenario, &workloads)?]
    };
    print!("{}", reports_to_csv(&reports));
    if let Some(dir) = out {
        write_reports(&reports, &dir)?;
        if logs {
            let options = RunOptions { keep_jobs: true, keep_adjustment_log: true, ..Default::default() };
            let outcome = simulate(&scenario, &workloads, options)?;
            let adj: String = outcome.adjustment_log.iter().map(|r| format!("{r}\n")).collect();
            fs::write(dir.join("adjustments.log"), adj)?;
            for env in &outcome.envs {
                fs::write(dir.join(format!("jobs_{}.log", env.name)), outcome.job_lines(env))?;
            }
        }
    }
    Ok(true)
}

fn cmd_sweep(path: &Path, grid: &Path, out: Option<PathBuf>) -> Result<bool> {
    let scenario = load_scenario(path)?;
    let spec = SweepSpec::load(grid)?;
    let workloads = load_workloads(&scenario)?;
    let rows = run_sweep(&scenario, &workloads, &spec)?;
    print!("{}", sweep_to_csv(&rows));
    if let Some(dir) = out {
        write_sweep(&rows, dir)?;
    }
    Ok(true)
}

fn cmd_check(which: CheckKind, path: &Path) -> Result<bool> {
    let scenario = load_scenario(path)?;
    let workloads = load_workloads(&scenario)?;
    match which {
        CheckKind::Conf1 => {
            println!("provider,lr,rc_dynamic,rc_static,pm_dynamic,pm_static,jobs_compared,result,divergence");
            let checks = check_conf1_scenario(&scenario, &workloads)?;
            for c in &checks {
                println!(
                    "{},{},{:.3},{:.3},{},{},{},{},{}",
                    c.provider,
                    c.lr,
                    c.rc_dynamic,
                    c.rc_static,
                    c.pm_dynamic,
                    c.pm_static,
                    c.jobs_compared,
                    if c.passed() { "pass" } else { "fail" },
                    c.divergence.as_deref().unwrap_or("")
                );
            }
            Ok(checks.iter().all(|c| c.passed()))
        }
        CheckKind::Dominance => {
            let candidates = [Candidate::conf1(&scenario), Candidate::configured(&scenario)];
            let check = check_dominance(&scenario, &workloads, &candidates)?;
            println!("candidate,trc,static_trc,performance_ok,dominates");
            for c in &check.candidates {
                println!("{},{:.3},{:.3},{},{}", c.label, c.trc, check.static_trc, c.performance_ok, c.dominates);
            }
            Ok(check.passed())
        }
    }
}

fn cmd_tco(path: &Path) -> Result<bool> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let inputs = TcoInputs::from_toml(&text).with_context(|| format!("parsing {}", path.display()))?;
    let dedicated = tco_dedicated(&inputs)?;
    let leased = tco_leased(&inputs)?;
    let ratio = if dedicated > 0.0 { format!("{:.4}", leased / dedicated) } else { String::new() };
    println!("tco_dedicated,tco_leased,leased_over_dedicated");
    println!("{dedicated:.2},{leased:.2},{ratio}");
    Ok(true)
}

fn cmd_validate(path: &Path, procs_per_node: u32) -> Result<bool> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase();
    let (trace, skipped) = match ext.as_str() {
        "swf" => {
            let import = parse_swf_with(&text, SwfOptions { procs_per_node })?;
            (import.trace, import.skipped)
        }
        "dax" | "xml" => (parse_dax(&text)?, 0),
        "wf" | "txt" => (parse_workflow(&text)?, 0),
        other => bail!("unknown trace extension '{other}' (expected .swf, .wf, .dax or .xml)"),
    };
    let diagnostics = validate_trace(&trace);
    println!("kind,jobs,skipped,max_demand,mean_run_s,diagnostics");
    println!(
        "{},{},{},{},{:.3},{}",
        trace.kind(),
        trace.len(),
        skipped,
        trace.max_demand,
        trace.mean_run_s(),
        diagnostics.len()
    );
    for d in &diagnostics {
        eprintln!("{d}");
    }
    Ok(diagnostics.is_empty())
}
