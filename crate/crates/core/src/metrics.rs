//! Run accounting, collapse detection, and stability scoring.

use serde::{Deserialize, Serialize};

use crate::engine::{StepReport, COLLAPSE_THRESHOLD};
use crate::experiments::{run_config, ScenarioResult};
use crate::config::{Interval, SimConfig};
use crate::trading::TradeRecord;

/// Share of interbank trading in reported secondary-market turnover.
pub const INTERBANK_SHARE: f64 = 0.28;

/// Metrics for one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub replication_index: u32,
    pub seed: u64,
    /// Agent activations.
    pub total_actions: u64,
    /// Activations in which at least one unit trade executed.
    pub trading_actions: u64,
    /// Activations with at least one partner in vision.
    pub contact_actions: u64,
    pub trade_fraction: f64,
    pub collapse_step: Option<u32>,
    pub steps_executed: u32,
    pub final_population: u32,
    /// Entry `k` is the population after `k` steps; entry 0 is the initial population.
    pub population_trajectory: Vec<u32>,
    pub unit_trades: u64,
    pub trade_log: Vec<TradeRecord>,
}

impl RunSummary {
    /// Drops the per-trade log, keeping only its length in `unit_trades`.
    pub fn without_trade_log(mut self) -> Self {
        self.trade_log = Vec::new();
        self
    }
}

/// Folds step reports into a [`RunSummary`].
#[derive(Debug)]
pub(crate) struct SummaryBuilder {
    summary: RunSummary,
}

impl SummaryBuilder {
    pub(crate) fn new(replication_index: u32, seed: u64, initial_population: u32) -> Self {
        Self {
            summary: RunSummary {
                replication_index,
                seed,
                total_actions: 0,
                trading_actions: 0,
                contact_actions: 0,
                trade_fraction: 0.0,
                collapse_step: None,
                steps_executed: 0,
                final_population: initial_population,
                population_trajectory: vec![initial_population],
                unit_trades: 0,
                trade_log: Vec::new(),
            },
        }
    }

    pub(crate) fn record(&mut self, report: &StepReport) {
        let s = &mut self.summary;
        s.steps_executed += 1;
        s.total_actions += report.events.len() as u64;
        for e in &report.events {
            if !e.trades.is_empty() {
                s.trading_actions += 1;
            }
            if e.partners > 0 {
                s.contact_actions += 1;
            }
            s.unit_trades += e.trades.len() as u64;
            s.trade_log.extend(e.trades.iter().cloned());
        }
        s.final_population = report.population;
        s.population_trajectory.push(report.population);
    }

    pub(crate) fn finish(mut self) -> RunSummary {
        let s = &mut self.summary;
        s.trade_fraction = trade_fraction(s.trading_actions, s.total_actions);
        s.collapse_step = detect_collapse(&s.population_trajectory);
        self.summary
    }
}

/// `trading / total`, or 0 when nothing happened.
pub fn trade_fraction(trading_actions: u64, total_actions: u64) -> f64 {
    if total_actions == 0 {
        0.0
    } else {
        trading_actions as f64 / total_actions as f64
    }
}

/// First index at which the population drops below two.
pub fn detect_collapse(population_trajectory: &[u32]) -> Option<u32> {
    population_trajectory.iter().position(|&p| p < COLLAPSE_THRESHOLD).map(|i| i as u32)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityCriteria {
    pub interbank_share: f64,
    pub max_outcome_distance: f64,
    pub max_interbank_gap: f64,
    pub min_population_stability: f64,
}

impl Default for StabilityCriteria {
    fn default() -> Self {
        Self {
            interbank_share: INTERBANK_SHARE,
            max_outcome_distance: 0.10,
            max_interbank_gap: 0.06,
            min_population_stability: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StabilityVerdict {
    pub similar_outcomes: bool,
    pub matches_interbank_share: bool,
    pub stable_population: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    /// `|Δ mean trade fraction| + mean |Δ final population| / n_agents`.
    pub outcome_similarity: f64,
    /// `|baseline mean trade fraction − interbank share|`.
    pub interbank_alignment: f64,
    /// Share of baseline replications that never collapsed.
    pub population_stability: f64,
    pub verdict: StabilityVerdict,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("scenario `{0}` has no completed replications")]
    EmptyReplications(String),
    #[error("unknown sweep parameter `{0}`")]
    UnknownParameter(String),
    #[error("perturbation must be finite and non-negative (got {0})")]
    BadPerturbation(f64),
    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),
}

pub fn stability_score(baseline: &ScenarioResult, perturbed: &ScenarioResult) -> Result<StabilityReport, MetricsError> {
    stability_score_with(baseline, perturbed, &StabilityCriteria::default())
}

pub fn stability_score_with(
    baseline: &ScenarioResult,
    perturbed: &ScenarioResult,
    criteria: &StabilityCriteria,
) -> Result<StabilityReport, MetricsError> {
    for r in [baseline, perturbed] {
        if r.replication_summaries.is_empty() {
            return Err(MetricsError::EmptyReplications(r.spec_name.clone()));
        }
    }
    let n_agents = f64::from(baseline.config.n_agents.max(1));
    let pop_distance = paired_population_distance(baseline, perturbed) / n_agents;
    let outcome_similarity = (baseline.stats.mean_trade_fraction - perturbed.stats.mean_trade_fraction).abs() + pop_distance;
    let interbank_alignment = (baseline.stats.mean_trade_fraction - criteria.interbank_share).abs();
    let population_stability = 1.0 - baseline.stats.collapse_share;
    Ok(StabilityReport {
        outcome_similarity,
        interbank_alignment,
        population_stability,
        verdict: StabilityVerdict {
            similar_outcomes: outcome_similarity <= criteria.max_outcome_distance,
            matches_interbank_share: interbank_alignment <= criteria.max_interbank_gap,
            stable_population: population_stability >= criteria.min_population_stability,
        },
    })
}

/// Mean `|final_population|` difference over replications present in both.
fn paired_population_distance(a: &ScenarioResult, b: &ScenarioResult) -> f64 {
    let mut pa: Vec<_> = a.replication_summaries.iter().map(|s| (s.replication_index, s.final_population)).collect();
    let mut pb: Vec<_> = b.replication_summaries.iter().map(|s| (s.replication_index, s.final_population)).collect();
    pa.sort_unstable();
    pb.sort_unstable();
    let (mut i, mut j, mut n, mut sum) = (0, 0, 0u64, 0u64);
    while i < pa.len() && j < pb.len() {
        match pa[i].0.cmp(&pb[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                sum += u64::from(pa[i].1.abs_diff(pb[j].1));
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    if n == 0 {
        (a.stats.mean_final_population - b.stats.mean_final_population).abs()
    } else {
        sum as f64 / n as f64
    }
}

/// Parameters a sensitivity sweep can perturb. `metabolism` moves both
/// metabolism ranges together.
pub const SWEEP_PARAMETERS: &[&str] = &[
    "vision_range",
    "metabolism",
    "metabolism_range_bonds",
    "metabolism_range_cash",
    "endowment_range_bonds",
    "endowment_range_cash",
    "cell_capacity_range_bonds",
    "cell_capacity_range_cash",
    "n_agents",
    "regrowth_rate",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Up,
    Down,
}

impl Direction {
    fn factor(self, perturbation: f64) -> f64 {
        match self {
            Direction::Up => 1.0 + perturbation,
            Direction::Down => 1.0 - perturbation,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SweepOutcome {
    Scored { report: StabilityReport, mean_trade_fraction: f64 },
    Skipped { warning: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityEntry {
    pub parameter: String,
    pub direction: Direction,
    pub outcome: SweepOutcome,
}

fn scale(v: u32, factor: f64) -> u32 {
    (f64::from(v) * factor).round().max(0.0) as u32
}

/// Scales both ends of an interval, clamping the lower end at `floor` and
/// the upper end at `ceil`.
pub fn perturb_interval(iv: Interval, factor: f64, floor: u32, ceil: u32) -> Interval {
    Interval::new(scale(iv.lo, factor).max(floor), scale(iv.hi, factor).max(floor).min(ceil))
}

/// Returns the perturbed config, or a warning when the perturbation cannot
/// produce a valid one.
pub fn perturb_config(config: &SimConfig, parameter: &str, factor: f64) -> Result<Result<SimConfig, String>, MetricsError> {
    let mut c = config.clone();
    let max_dim = config.max_dimension();
    match parameter {
        "vision_range" => c.vision_range = perturb_interval(c.vision_range, factor, 1, max_dim),
        "metabolism" => {
            c.metabolism_range_bonds = perturb_interval(c.metabolism_range_bonds, factor, 1, u32::MAX);
            c.metabolism_range_cash = perturb_interval(c.metabolism_range_cash, factor, 1, u32::MAX);
        }
        "metabolism_range_bonds" => c.metabolism_range_bonds = perturb_interval(c.metabolism_range_bonds, factor, 1, u32::MAX),
        "metabolism_range_cash" => c.metabolism_range_cash = perturb_interval(c.metabolism_range_cash, factor, 1, u32::MAX),
        "endowment_range_bonds" => c.endowment_range_bonds = perturb_interval(c.endowment_range_bonds, factor, 1, u32::MAX),
        "endowment_range_cash" => c.endowment_range_cash = perturb_interval(c.endowment_range_cash, factor, 1, u32::MAX),
        "cell_capacity_range_bonds" => {
            c.cell_capacity_range_bonds = perturb_interval(c.cell_capacity_range_bonds, factor, 0, u32::MAX)
        }
        "cell_capacity_range_cash" => {
            c.cell_capacity_range_cash = perturb_interval(c.cell_capacity_range_cash, factor, 0, u32::MAX)
        }
        "n_agents" => {
            let cells = u32::try_from(config.cell_count()).unwrap_or(u32::MAX);
            c.n_agents = scale(c.n_agents, factor).clamp(1, cells);
        }
        "regrowth_rate" => c.regrowth_rate = (c.regrowth_rate * factor).max(0.0),
        other => return Err(MetricsError::UnknownParameter(other.to_string())),
    }
    Ok(c.validate().map(|()| c).map_err(|e| format!("{parameter} perturbation skipped: {e}")))
}

/// Perturbs each parameter up and down by `perturbation` (relative), runs the
/// perturbed scenarios, and scores each against the unperturbed baseline.
pub fn sensitivity_sweep(
    config: &SimConfig,
    perturbation: f64,
    parameters: &[&str],
) -> Result<Vec<SensitivityEntry>, MetricsError> {
    if !(perturbation.is_finite() && perturbation >= 0.0) {
        return Err(MetricsError::BadPerturbation(perturbation));
    }
    for p in parameters {
        if !SWEEP_PARAMETERS.contains(p) {
            return Err(MetricsError::UnknownParameter((*p).to_string()));
        }
    }
    config.validate()?;
    let baseline = run_config("baseline", config);
    let mut out = Vec::with_capacity(parameters.len() * 2);
    for &parameter in parameters {
        for direction in [Direction::Up, Direction::Down] {
            let outcome = match perturb_config(config, parameter, direction.factor(perturbation))? {
                Err(warning) => SweepOutcome::Skipped { warning },
                Ok(perturbed_cfg) => {
                    let perturbed = run_config(parameter, &perturbed_cfg);
                    SweepOutcome::Scored {
                        report: stability_score(&baseline, &perturbed)?,
                        mean_trade_fraction: perturbed.stats.mean_trade_fraction,
                    }
                }
            };
            out.push(SensitivityEntry { parameter: parameter.to_string(), direction, outcome });
        }
    }
    Ok(out)
}

/// Mean outcome distance over every scored entry of a sweep.
pub fn mean_outcome_distance(entries: &[SensitivityEntry]) -> Option<f64> {
    let scored: Vec<f64> = entries
        .iter()
        .filter_map(|e| match &e.outcome {
            SweepOutcome::Scored { report, .. } => Some(report.outcome_similarity),
            SweepOutcome::Skipped { .. } => None,
        })
        .collect();
    (!scored.is_empty()).then(|| scored.iter().sum::<f64>() / scored.len() as f64)
}
