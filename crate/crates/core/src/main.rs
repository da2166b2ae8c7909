use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use bilat_sim::config::SimConfig;
use bilat_sim::experiments::{self, ScenarioResult, ScenarioSpec};
use bilat_sim::io::{self, format_f64};
use bilat_sim::metrics::{self, SensitivityEntry, SweepOutcome, SWEEP_PARAMETERS};

const THREADS_ENV: &str = "BILAT_SIM_THREADS";

#[derive(Parser)]
#[command(name = "bilat-sim", version, about = "Bilateral OTC bond market-maker simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the replications of one config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        replications: Option<u32>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Also write every step event to trace.jsonl.
        #[arg(long)]
        trace: bool,
    },
    /// Run built-in scenarios and check them against their targets.
    Suite {
        /// Comma-separated scenario names; all scenarios when omitted.
        #[arg(long, value_delimiter = ',')]
        only: Option<Vec<String>>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Perturb parameters up and down and score each run against the baseline.
    Sensitivity {
        #[arg(long)]
        config: PathBuf,
        /// Relative perturbation in percent.
        #[arg(long)]
        perturb: f64,
        #[arg(long, value_delimiter = ',', required = true)]
        params: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the hypothesis checks for a finished suite directory.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
    },
}

enum Failure {
    Usage(String),
    Runtime(String),
    TargetsMissed,
}

impl Failure {
    fn usage(e: impl Display) -> Self {
        Failure::Usage(e.to_string())
    }

    fn runtime(e: impl Display) -> Self {
        Failure::Runtime(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(1);
    }
    let outcome = match cli.command {
        Command::Run { config, seed, replications, out, trace } => run(&config, seed, replications, &out, trace),
        Command::Suite { only, out } => suite(only.as_deref(), &out),
        Command::Sensitivity { config, perturb, params, out } => sensitivity(&config, perturb, &params, &out),
        Command::Report { input } => report(&input),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::TargetsMissed) => ExitCode::from(3),
    }
}

fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var(THREADS_ENV) else { return Ok(()) };
    let n: usize = raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| format!("{THREADS_ENV} must be a positive integer, got `{raw}`"))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}

fn load_config(path: &Path) -> Result<SimConfig, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    io::parse_config(&text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn print_result(result: &ScenarioResult) {
    let s = &result.stats;
    let collapse = match s.median_collapse_step {
        Some(step) => format!("median collapse step {step}"),
        None => "median replication never collapsed".into(),
    };
    println!(
        "{}: {} replications, trade fraction mean {:.4} median {:.4} min {:.4} max {:.4}, collapse share {:.2}, {collapse}",
        result.spec_name,
        s.replications,
        s.mean_trade_fraction,
        s.median_trade_fraction,
        s.min_trade_fraction,
        s.max_trade_fraction,
        s.collapse_share,
    );
    for f in &result.failed {
        println!("  replication {} failed: {}", f.replication_index, f.error);
    }
    for c in &result.checks {
        let observed = c.observed.map_or_else(|| "n/a".to_string(), |o| format!("{o:.4}"));
        println!("  [{}] {} (observed {observed})", if c.passed { "PASS" } else { "FAIL" }, c.label);
    }
}

fn run(config: &Path, seed: Option<u64>, replications: Option<u32>, out: &Path, trace: bool) -> Result<(), Failure> {
    let mut cfg = load_config(config)?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    if let Some(k) = replications {
        cfg.replications = k;
        cfg.validate().map_err(Failure::usage)?;
    }
    let name = config.file_stem().map_or_else(|| "run".to_string(), |s| s.to_string_lossy().into_owned());
    let spec = ScenarioSpec { name, config: cfg, description: String::new(), targets: Vec::new() };
    let (result, traces) = if trace {
        experiments::run_scenario_traced(&spec)
    } else {
        (experiments::run_scenario(&spec), Vec::new())
    };
    io::emit_results(&result, out, trace.then_some(traces.as_slice())).map_err(Failure::runtime)?;
    print_result(&result);
    Ok(())
}

fn suite(only: Option<&[String]>, out: &Path) -> Result<(), Failure> {
    let all = experiments::builtin_scenarios();
    let selected: Vec<ScenarioSpec> = match only {
        None => all,
        Some(names) => {
            let mut picked = Vec::new();
            for name in names {
                let spec = all.iter().find(|s| &s.name == name).ok_or_else(|| {
                    let known: Vec<_> = all.iter().map(|s| s.name.as_str()).collect();
                    Failure::usage(format!("unknown scenario `{name}` (known: {})", known.join(", ")))
                })?;
                picked.push(spec.clone());
            }
            picked
        }
    };

    let mut stats = BTreeMap::new();
    let mut all_pass = true;
    for spec in &selected {
        let result = experiments::run_scenario(spec);
        io::emit_results(&result, &out.join(&spec.name), None).map_err(Failure::runtime)?;
        print_result(&result);
        all_pass &= result.all_targets_pass() && result.failed.is_empty();
        stats.insert(result.spec_name.clone(), result.stats);
    }
    if let Ok(report) = experiments::hypothesis_report(&stats) {
        io::write_json(&out.join("report.json"), &report).map_err(Failure::runtime)?;
        print_report(&report);
    }
    if all_pass { Ok(()) } else { Err(Failure::TargetsMissed) }
}

fn print_report(report: &experiments::HypothesisReport) {
    println!("hypothesis checks:");
    for c in &report.checks {
        println!("  [{}] {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    println!("  high-variance flag: {}", report.high_variance);
}

#[derive(Serialize)]
struct SensitivityDoc<'a> {
    perturbation: f64,
    parameters: &'a [String],
    mean_outcome_similarity: Option<f64>,
    entries: &'a [SensitivityEntry],
    config: &'a SimConfig,
}

fn sensitivity(config: &Path, perturb_pct: f64, params: &[String], out: &Path) -> Result<(), Failure> {
    let cfg = load_config(config)?;
    if !(perturb_pct.is_finite() && perturb_pct >= 0.0) {
        return Err(Failure::usage(format!("--perturb must be a non-negative percentage, got {perturb_pct}")));
    }
    for p in params {
        if !SWEEP_PARAMETERS.contains(&p.as_str()) {
            return Err(Failure::usage(format!("unknown parameter `{p}` (known: {})", SWEEP_PARAMETERS.join(", "))));
        }
    }
    let names: Vec<&str> = params.iter().map(String::as_str).collect();
    let entries = metrics::sensitivity_sweep(&cfg, perturb_pct / 100.0, &names).map_err(Failure::runtime)?;
    let mean = metrics::mean_outcome_distance(&entries);

    std::fs::create_dir_all(out).map_err(|e| Failure::runtime(format!("{}: {e}", out.display())))?;
    let doc = SensitivityDoc { perturbation: perturb_pct / 100.0, parameters: params, mean_outcome_similarity: mean, entries: &entries, config: &cfg };
    io::write_json(&out.join("sensitivity.json"), &doc).map_err(Failure::runtime)?;

    for e in &entries {
        match &e.outcome {
            SweepOutcome::Scored { report, mean_trade_fraction } => println!(
                "{} {:?}: outcome similarity {}, mean trade fraction {}, population stability {}",
                e.parameter,
                e.direction,
                format_f64(report.outcome_similarity),
                format_f64(*mean_trade_fraction),
                format_f64(report.population_stability),
            ),
            SweepOutcome::Skipped { warning } => println!("{} {:?}: warning: {warning}", e.parameter, e.direction),
        }
    }
    if let Some(m) = mean {
        println!("mean outcome similarity {}", format_f64(m));
    }
    Ok(())
}

fn report(input: &Path) -> Result<(), Failure> {
    if !input.is_dir() {
        return Err(Failure::usage(format!("{} is not a directory", input.display())));
    }
    let stats = io::load_suite(input).map_err(Failure::runtime)?;
    let report = experiments::hypothesis_report(&stats).map_err(Failure::runtime)?;
    for (name, s) in &stats {
        println!(
            "{name}: mean {:.4} median {:.4} min {:.4} max {:.4} collapse share {:.2}",
            s.mean_trade_fraction, s.median_trade_fraction, s.min_trade_fraction, s.max_trade_fraction, s.collapse_share
        );
    }
    print_report(&report);
    Ok(())
}
