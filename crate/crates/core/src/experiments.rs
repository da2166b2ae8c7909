//! Named scenarios, replication batches, and cross-scenario comparisons.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Interval, Neighborhood, SimConfig};
use crate::engine::{self, StepEvent};
use crate::metrics::{trade_fraction, RunSummary, INTERBANK_SHARE};

/// A quantitative expectation on a scenario's aggregate statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Target {
    /// `|mean trade fraction − value| ≤ tolerance`.
    MeanTradeFraction { value: f64, tolerance: f64 },
    /// `mean trade fraction < bound`.
    MeanTradeFractionBelow { bound: f64 },
    /// `|median trade fraction − value| ≤ tolerance`.
    MedianTradeFraction { value: f64, tolerance: f64 },
    /// `min trade fraction ≤ bound`.
    MinTradeFractionAtMost { bound: f64 },
    /// `max trade fraction ≥ bound`.
    MaxTradeFractionAtLeast { bound: f64 },
    /// Median collapse step no later than `step`.
    MedianCollapseAtMost { step: u32 },
}

impl Target {
    pub fn label(&self) -> String {
        match *self {
            Target::MeanTradeFraction { value, tolerance } => format!("mean trade fraction {value} ± {tolerance}"),
            Target::MeanTradeFractionBelow { bound } => format!("mean trade fraction < {bound}"),
            Target::MedianTradeFraction { value, tolerance } => format!("median trade fraction {value} ± {tolerance}"),
            Target::MinTradeFractionAtMost { bound } => format!("min trade fraction ≤ {bound}"),
            Target::MaxTradeFractionAtLeast { bound } => format!("max trade fraction ≥ {bound}"),
            Target::MedianCollapseAtMost { step } => format!("median collapse step ≤ {step}"),
        }
    }

    /// Observed value and whether the target holds.
    pub fn evaluate(&self, stats: &ScenarioStats) -> (Option<f64>, bool) {
        match *self {
            Target::MeanTradeFraction { value, tolerance } => {
                let v = stats.mean_trade_fraction;
                (Some(v), (v - value).abs() <= tolerance)
            }
            Target::MeanTradeFractionBelow { bound } => {
                let v = stats.mean_trade_fraction;
                (Some(v), v < bound)
            }
            Target::MedianTradeFraction { value, tolerance } => {
                let v = stats.median_trade_fraction;
                (Some(v), (v - value).abs() <= tolerance)
            }
            Target::MinTradeFractionAtMost { bound } => (Some(stats.min_trade_fraction), stats.min_trade_fraction <= bound),
            Target::MaxTradeFractionAtLeast { bound } => (Some(stats.max_trade_fraction), stats.max_trade_fraction >= bound),
            Target::MedianCollapseAtMost { step } => {
                let v = stats.median_collapse_step;
                (v, v.is_some_and(|v| v <= f64::from(step)))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub name: String,
    pub config: SimConfig,
    pub description: String,
    pub targets: Vec<Target>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetCheck {
    pub target: Target,
    pub label: String,
    pub observed: Option<f64>,
    pub passed: bool,
}

/// Aggregates over the completed replications of one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioStats {
    pub replications: u32,
    pub failed_replications: u32,
    pub mean_trade_fraction: f64,
    pub median_trade_fraction: f64,
    pub min_trade_fraction: f64,
    pub max_trade_fraction: f64,
    /// Trading actions over all actions, pooled across replications.
    pub pooled_trade_fraction: f64,
    pub total_actions: u64,
    pub trading_actions: u64,
    /// Pooled share of actions with a partner in vision.
    pub contact_fraction: f64,
    pub mean_final_population: f64,
    /// Share of replications that collapsed.
    pub collapse_share: f64,
    /// `None` when the median replication never collapsed.
    pub median_collapse_step: Option<f64>,
    pub mean_steps_executed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedReplication {
    pub replication_index: u32,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub spec_name: String,
    pub config: SimConfig,
    pub replication_summaries: Vec<RunSummary>,
    pub failed: Vec<FailedReplication>,
    pub stats: ScenarioStats,
    pub checks: Vec<TargetCheck>,
}

impl ScenarioResult {
    pub fn all_targets_pass(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn median_sorted(v: &[f64]) -> f64 {
    let n = v.len();
    match n {
        0 => 0.0,
        _ if n % 2 == 1 => v[n / 2],
        _ => (v[n / 2 - 1] + v[n / 2]) / 2.0,
    }
}

/// Sum in ascending order so the result does not depend on input order.
fn sorted_sum(sorted: &[f64]) -> f64 {
    sorted.iter().sum()
}

/// Computes scenario aggregates. Depends only on the multiset of summaries.
pub fn aggregate(summaries: &[RunSummary], failed: u32) -> ScenarioStats {
    let n = summaries.len();
    let mut fractions: Vec<f64> = summaries.iter().map(|s| s.trade_fraction).collect();
    fractions.sort_by(f64::total_cmp);
    let total_actions: u64 = summaries.iter().map(|s| s.total_actions).sum();
    let trading_actions: u64 = summaries.iter().map(|s| s.trading_actions).sum();
    let contact_actions: u64 = summaries.iter().map(|s| s.contact_actions).sum();
    let final_pop: u64 = summaries.iter().map(|s| u64::from(s.final_population)).sum();
    let steps: u64 = summaries.iter().map(|s| u64::from(s.steps_executed)).sum();
    let collapsed = summaries.iter().filter(|s| s.collapse_step.is_some()).count();

    // Runs that never collapse sort after every collapse step.
    let mut collapse: Vec<Option<u32>> = summaries.iter().map(|s| s.collapse_step).collect();
    collapse.sort_by_key(|c| c.unwrap_or(u32::MAX));
    let median_collapse_step = match n {
        0 => None,
        _ if n % 2 == 1 => collapse[n / 2].map(f64::from),
        _ => match (collapse[n / 2 - 1], collapse[n / 2]) {
            (Some(a), Some(b)) => Some((f64::from(a) + f64::from(b)) / 2.0),
            _ => None,
        },
    };

    let denom = n.max(1) as f64;
    ScenarioStats {
        replications: n as u32,
        failed_replications: failed,
        mean_trade_fraction: sorted_sum(&fractions) / denom,
        median_trade_fraction: median_sorted(&fractions),
        min_trade_fraction: fractions.first().copied().unwrap_or(0.0),
        max_trade_fraction: fractions.last().copied().unwrap_or(0.0),
        pooled_trade_fraction: trade_fraction(trading_actions, total_actions),
        total_actions,
        trading_actions,
        contact_fraction: trade_fraction(contact_actions, total_actions),
        mean_final_population: final_pop as f64 / denom,
        collapse_share: collapsed as f64 / denom,
        median_collapse_step,
        mean_steps_executed: steps as f64 / denom,
    }
}

/// Executes every replication of `spec` (in parallel) and evaluates its targets.
pub fn run_scenario(spec: &ScenarioSpec) -> ScenarioResult {
    execute(spec, false).0
}

/// Like [`run_scenario`], also returning each replication's step events
/// ordered by replication index.
pub fn run_scenario_traced(spec: &ScenarioSpec) -> (ScenarioResult, Vec<(u32, Vec<StepEvent>)>) {
    execute(spec, true)
}

fn execute(spec: &ScenarioSpec, trace: bool) -> (ScenarioResult, Vec<(u32, Vec<StepEvent>)>) {
    let config = &spec.config;
    let outcomes: Vec<_> = (0..config.replications)
        .into_par_iter()
        .map(|rep| {
            let run = if trace {
                engine::run_traced(config, rep).map(|(s, events)| (s, Some(events)))
            } else {
                engine::run(config, rep).map(|s| (s, None))
            };
            run.map(|(s, events)| (s.without_trade_log(), events)).map_err(|e| (rep, e))
        })
        .collect();

    let mut summaries = Vec::with_capacity(outcomes.len());
    let mut traces = Vec::new();
    let mut failed = Vec::new();
    for o in outcomes {
        match o {
            Ok((s, events)) => {
                if let Some(events) = events {
                    traces.push((s.replication_index, events));
                }
                summaries.push(s);
            }
            Err((replication_index, e)) => failed.push(FailedReplication { replication_index, error: e.to_string() }),
        }
    }
    let stats = aggregate(&summaries, failed.len() as u32);
    let checks = spec
        .targets
        .iter()
        .map(|t| {
            let (observed, passed) = t.evaluate(&stats);
            TargetCheck { target: *t, label: t.label(), observed, passed }
        })
        .collect();
    let result =
        ScenarioResult { spec_name: spec.name.clone(), config: config.clone(), replication_summaries: summaries, failed, stats, checks };
    (result, traces)
}

/// Runs an ad-hoc configuration with no targets.
pub fn run_config(name: &str, config: &SimConfig) -> ScenarioResult {
    run_scenario(&ScenarioSpec { name: name.to_string(), config: config.clone(), description: String::new(), targets: Vec::new() })
}

pub const H1_HOMOG: &str = "H1-HOMOG";
pub const H1_A: &str = "H1-A";
pub const H1_B: &str = "H1-B";
pub const H1_C: &str = "H1-C";
pub const H1_D: &str = "H1-D";
pub const H1_E: &str = "H1-E";
pub const H2_A: &str = "H2-A";
pub const H2_B: &str = "H2-B";
pub const H4_GOLDILOCKS: &str = "H4-GOLDILOCKS";

/// Seed shared by the built-in suite.
pub const SUITE_SEED: u64 = 20230530;

/// Traits every agent shares in the homogeneous scenario.
pub const HOMOG_VISION: u32 = 1;
pub const HOMOG_METABOLISM: u32 = 32;
pub const HOMOG_ENDOWMENT: u32 = 50;

/// Metabolism range for the full-vision scenario.
pub const GOLDILOCKS_METABOLISM: Interval = Interval::new(1, 5);
/// Regrowth for the unlimited-resource scenario.
pub const REGROWTH_EDGE_CASE_RATE: f64 = 0.1;

fn scenario(n_agents: u32, vision: Interval, metabolism: Interval) -> SimConfig {
    SimConfig {
        n_agents,
        vision_range: vision,
        metabolism_range_bonds: metabolism,
        metabolism_range_cash: metabolism,
        seed: SUITE_SEED,
        ..SimConfig::default()
    }
}

/// The hypothesis scenarios, in reporting order.
pub fn builtin_scenarios() -> Vec<ScenarioSpec> {
    let spec = |name: &str, config: SimConfig, description: &str, targets: Vec<Target>| ScenarioSpec {
        name: name.to_string(),
        config,
        description: description.to_string(),
        targets,
    };
    let mean = |value, tolerance| Target::MeanTradeFraction { value, tolerance };
    let homog = SimConfig {
        endowment_range_bonds: Interval::point(HOMOG_ENDOWMENT),
        endowment_range_cash: Interval::point(HOMOG_ENDOWMENT),
        ..scenario(4, Interval::point(HOMOG_VISION), Interval::point(HOMOG_METABOLISM))
    };
    vec![
        spec(
            H1_HOMOG,
            homog,
            "4 identical agents; every trait interval is a single value",
            vec![Target::MedianCollapseAtMost { step: 25 }],
        ),
        spec(
            H1_A,
            scenario(4, Interval::new(1, 5), Interval::new(1, 5)),
            "4 agents, vision 1-5, metabolism 1-5",
            vec![Target::MeanTradeFractionBelow { bound: 0.02 }],
        ),
        spec(H1_B, scenario(4, Interval::new(1, 20), Interval::new(1, 20)), "4 agents, vision 1-20, metabolism 1-20", vec![mean(0.034, 0.02)]),
        spec(H1_C, scenario(4, Interval::new(1, 20), Interval::new(1, 5)), "4 agents, vision 1-20, metabolism 1-5", vec![mean(0.092, 0.03)]),
        spec(H1_D, scenario(16, Interval::new(1, 5), Interval::new(1, 5)), "16 agents, vision 1-5, metabolism 1-5", vec![mean(0.064, 0.02)]),
        spec(H1_E, scenario(100, Interval::new(1, 20), Interval::new(1, 20)), "100 agents, vision 1-20, metabolism 1-20", vec![mean(0.382, 0.05)]),
        spec(H2_A, scenario(4, Interval::new(1, 10), Interval::new(1, 1)), "4 agents, vision 1-10, metabolism 1", vec![mean(0.0997, 0.03)]),
        spec(
            H2_B,
            SimConfig { regrowth_rate: REGROWTH_EDGE_CASE_RATE, ..scenario(4, Interval::new(1, 20), Interval::new(1, 1)) },
            "4 agents, vision 1-20, metabolism 1, regrowing landscape",
            vec![mean(0.387, 0.06)],
        ),
        spec(
            H4_GOLDILOCKS,
            SimConfig {
                neighborhood: Neighborhood::Moore,
                replications: 100,
                ..scenario(4, Interval::point(50), GOLDILOCKS_METABOLISM)
            },
            "4 agents with full vision of the 50x50 landscape",
            vec![
                mean(0.291, 0.05),
                Target::MedianTradeFraction { value: 0.237, tolerance: 0.05 },
                Target::MinTradeFractionAtMost { bound: 0.10 },
                Target::MaxTradeFractionAtLeast { bound: 0.80 },
                mean(INTERBANK_SHARE, 0.06),
            ],
        ),
    ]
}

pub fn builtin_scenario(name: &str) -> Option<ScenarioSpec> {
    builtin_scenarios().into_iter().find(|s| s.name == name)
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("incomplete suite: missing scenario `{0}`")]
pub struct IncompleteReport(pub String);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisCheck {
    pub name: String,
    pub detail: String,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub checks: Vec<HypothesisCheck>,
    /// Set when the full-vision scenario's trade fractions span at least 0.5.
    pub high_variance: bool,
}

impl HypothesisReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Orderings and thresholds the hypotheses predict, evaluated over the
/// aggregates of a completed suite keyed by scenario name.
pub fn hypothesis_report(results: &BTreeMap<String, ScenarioStats>) -> Result<HypothesisReport, IncompleteReport> {
    let get = |name: &str| results.get(name).ok_or_else(|| IncompleteReport(name.to_string()));
    let [homog, a, b, e, h2a, h2b, h4] = [H1_HOMOG, H1_A, H1_B, H1_E, H2_A, H2_B, H4_GOLDILOCKS].map(get);
    let (homog, a, b, e, h2a, h2b, h4) = (homog?, a?, b?, e?, h2a?, h2b?, h4?);

    let less = |name: &str, lo_name: &str, lo: &ScenarioStats, hi_name: &str, hi: &ScenarioStats| HypothesisCheck {
        name: name.to_string(),
        detail: format!(
            "{lo_name} {:.4} < {hi_name} {:.4}",
            lo.mean_trade_fraction, hi.mean_trade_fraction
        ),
        passed: lo.mean_trade_fraction < hi.mean_trade_fraction,
    };
    let gap = (h4.mean_trade_fraction - INTERBANK_SHARE).abs();
    let checks = vec![
        less("diversity raises trading (A < B)", H1_A, a, H1_B, b),
        less("population raises trading (B < E)", H1_B, b, H1_E, e),
        less("low metabolism raises trading", H1_A, a, H2_A, h2a),
        less("regrowth raises trading", H2_A, h2a, H2_B, h2b),
        HypothesisCheck {
            name: "full vision matches interbank share".into(),
            detail: format!("|{:.4} - {INTERBANK_SHARE}| = {gap:.4} <= 0.06", h4.mean_trade_fraction),
            passed: gap <= 0.06,
        },
        HypothesisCheck {
            name: "homogeneous population collapses early".into(),
            detail: match homog.median_collapse_step {
                Some(s) => format!("median collapse step {s} <= 25"),
                None => "median replication never collapsed".into(),
            },
            passed: homog.median_collapse_step.is_some_and(|s| s <= 25.0),
        },
    ];
    Ok(HypothesisReport { checks, high_variance: h4.max_trade_fraction - h4.min_trade_fraction >= 0.5 })
}
