//! Config documents in, result files out.
//!
//! Every floating-point number written by this module carries exactly 17
//! significant digits, so output files are byte-stable across platforms and
//! parse back to the identical `f64`.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::ser::{CompactFormatter, Formatter, PrettyFormatter};
use serde_json::Value;

use crate::config::{ConfigError, SimConfig};
use crate::engine::StepEvent;
use crate::experiments::{builtin_scenario, ScenarioResult, ScenarioStats, TargetCheck};

/// Key naming a built-in scenario whose config the rest of a document overrides.
pub const SCENARIO_KEY: &str = "scenario";

pub const SUMMARY_FILE: &str = "summary.csv";
pub const AGGREGATE_FILE: &str = "aggregate.json";
pub const TRACE_FILE: &str = "trace.jsonl";

pub const SUMMARY_HEADER: [&str; 7] = [
    "replication_index",
    "seed",
    "total_actions",
    "trading_actions",
    "trade_fraction",
    "collapse_step",
    "final_population",
];

#[derive(Debug, thiserror::Error)]
pub enum ParseError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("config document must be a JSON object")]
    NotAnObject,
    #[error("unknown keys: {}", .0.join(", "))]
    UnknownKeys(Vec<String>),
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
    #[error("`{field}`: {message}")]
    Type { field: String, message: String },
    #[error(transparent)]
    Invalid(#[from] ConfigError),
}

/// Parses a JSON config document. Missing keys take their defaults (or the
/// named scenario's values); unknown keys are rejected.
pub fn parse_config(text: &str) -> Result<SimConfig, ParseError> {
    let doc: Value = serde_json::from_str(text).map_err(|e| ParseError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let Value::Object(doc) = doc else {
        return Err(ParseError::NotAnObject);
    };

    let unknown: Vec<String> =
        doc.keys().filter(|k| *k != SCENARIO_KEY && !SimConfig::FIELDS.contains(&k.as_str())).cloned().collect();
    if !unknown.is_empty() {
        return Err(ParseError::UnknownKeys(unknown));
    }
    let base = match doc.get(SCENARIO_KEY) {
        None => SimConfig::default(),
        Some(Value::String(name)) => {
            builtin_scenario(name).ok_or_else(|| ParseError::UnknownScenario(name.clone()))?.config
        }
        Some(other) => {
            return Err(ParseError::Type { field: SCENARIO_KEY.into(), message: format!("expected a scenario name, got {other}") })
        }
    };

    let base_value = serde_json::to_value(&base).expect("config serializes");
    let mut merged = base_value.clone();
    for (key, value) in doc.iter().filter(|(k, _)| k.as_str() != SCENARIO_KEY) {
        // Check each override alone so a type error names its field.
        let mut probe = base_value.clone();
        probe[key] = value.clone();
        if let Err(e) = serde_json::from_value::<SimConfig>(probe) {
            return Err(ParseError::Type { field: key.clone(), message: e.to_string() });
        }
        merged[key] = value.clone();
    }
    let config: SimConfig = serde_json::from_value(merged).map_err(|e| ParseError::Type { field: String::new(), message: e.to_string() })?;
    config.validate()?;
    Ok(config)
}

pub fn serialize_config(config: &SimConfig) -> String {
    serde_json::to_string_pretty(config).expect("config serializes")
}

/// Formats `x` with 17 significant digits, positional for moderate
/// exponents and scientific otherwise.
pub fn format_f64(x: f64) -> String {
    if x == 0.0 {
        return "0.0".into();
    }
    if !x.is_finite() {
        return "null".into();
    }
    let sci = format!("{:.16e}", x.abs());
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    let digits: String = mantissa.chars().filter(char::is_ascii_digit).collect();
    let sign = if x < 0.0 { "-" } else { "" };
    let body = if (0..17).contains(&exp) {
        let split = exp as usize + 1;
        let frac = &digits[split..];
        format!("{}.{}", &digits[..split], if frac.is_empty() { "0" } else { frac })
    } else if (-5..0).contains(&exp) {
        format!("0.{}{}", "0".repeat((-exp - 1) as usize), digits)
    } else {
        format!("{}.{}e{}", &digits[..1], &digits[1..], exp)
    };
    format!("{sign}{body}")
}

/// JSON formatter that writes floats via [`format_f64`].
struct FixedFloats<F>(F);

macro_rules! forward {
    ($($name:ident($($arg:ident: $ty:ty),*)),* $(,)?) => {
        $(
            fn $name<W: ?Sized + Write>(&mut self, w: &mut W $(, $arg: $ty)*) -> io::Result<()> {
                self.0.$name(w $(, $arg)*)
            }
        )*
    };
}

impl<F: Formatter> Formatter for FixedFloats<F> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        w.write_all(format_f64(value).as_bytes())
    }

    forward!(
        begin_array(),
        end_array(),
        begin_array_value(first: bool),
        end_array_value(),
        begin_object(),
        end_object(),
        begin_object_key(first: bool),
        end_object_key(),
        begin_object_value(),
        end_object_value(),
    );
}

fn to_json_pretty<T: Serialize>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, FixedFloats(PrettyFormatter::new()));
    value.serialize(&mut ser).expect("in-memory serialization");
    let mut s = String::from_utf8(buf).expect("utf-8");
    s.push('\n');
    s
}

fn to_json_line<T: Serialize>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, FixedFloats(CompactFormatter));
    value.serialize(&mut ser).expect("in-memory serialization");
    String::from_utf8(buf).expect("utf-8")
}

#[derive(Debug, thiserror::Error)]
pub enum OutputError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: malformed aggregate: {message}")]
    Malformed { path: PathBuf, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> OutputError + '_ {
    move |source| OutputError::Io { path: path.to_path_buf(), source }
}

#[derive(Serialize)]
struct TradeFractionStats {
    mean: f64,
    median: f64,
    min: f64,
    max: f64,
    pooled: f64,
}

#[derive(Serialize)]
struct CollapseStats {
    share: f64,
    median_step: Option<f64>,
}

#[derive(Serialize)]
struct AggregateDoc<'a> {
    scenario: &'a str,
    replications: u32,
    failed_replications: u32,
    trade_fraction: TradeFractionStats,
    collapse: CollapseStats,
    total_actions: u64,
    trading_actions: u64,
    contact_fraction: f64,
    mean_final_population: f64,
    mean_steps_executed: f64,
    targets: &'a [TargetCheck],
    all_targets_pass: bool,
    config: &'a SimConfig,
}

pub fn aggregate_json(result: &ScenarioResult) -> String {
    let s = &result.stats;
    to_json_pretty(&AggregateDoc {
        scenario: &result.spec_name,
        replications: s.replications,
        failed_replications: s.failed_replications,
        trade_fraction: TradeFractionStats {
            mean: s.mean_trade_fraction,
            median: s.median_trade_fraction,
            min: s.min_trade_fraction,
            max: s.max_trade_fraction,
            pooled: s.pooled_trade_fraction,
        },
        collapse: CollapseStats { share: s.collapse_share, median_step: s.median_collapse_step },
        total_actions: s.total_actions,
        trading_actions: s.trading_actions,
        contact_fraction: s.contact_fraction,
        mean_final_population: s.mean_final_population,
        mean_steps_executed: s.mean_steps_executed,
        targets: &result.checks,
        all_targets_pass: result.all_targets_pass(),
        config: &result.config,
    })
}

pub fn summary_csv(result: &ScenarioResult) -> Result<String, csv::Error> {
    let mut rows: Vec<_> = result.replication_summaries.iter().collect();
    rows.sort_by_key(|s| s.replication_index);
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SUMMARY_HEADER)?;
    for s in rows {
        w.write_record([
            s.replication_index.to_string(),
            s.seed.to_string(),
            s.total_actions.to_string(),
            s.trading_actions.to_string(),
            format_f64(s.trade_fraction),
            s.collapse_step.map(|c| c.to_string()).unwrap_or_default(),
            s.final_population.to_string(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("utf-8"))
}

#[derive(Serialize)]
struct TraceLine<'a> {
    replication: u32,
    #[serde(flatten)]
    event: &'a StepEvent,
}

/// One JSON object per step event, replications in ascending order.
pub fn trace_jsonl(traces: &[(u32, Vec<StepEvent>)]) -> String {
    let mut sorted: Vec<_> = traces.iter().collect();
    sorted.sort_by_key(|(rep, _)| *rep);
    let mut out = String::new();
    for (rep, events) in sorted {
        for event in events {
            out.push_str(&to_json_line(&TraceLine { replication: *rep, event }));
            out.push('\n');
        }
    }
    out
}

/// Writes `summary.csv`, `aggregate.json` and, when traces are given,
/// `trace.jsonl` into `dir` (created if needed). Returns the written paths.
pub fn emit_results(
    result: &ScenarioResult,
    dir: &Path,
    traces: Option<&[(u32, Vec<StepEvent>)]>,
) -> Result<Vec<PathBuf>, OutputError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut written = Vec::new();

    let path = dir.join(SUMMARY_FILE);
    let csv = summary_csv(result).map_err(|source| OutputError::Csv { path: path.clone(), source })?;
    fs::write(&path, csv).map_err(io_err(&path))?;
    written.push(path);

    let path = dir.join(AGGREGATE_FILE);
    fs::write(&path, aggregate_json(result)).map_err(io_err(&path))?;
    written.push(path);

    if let Some(traces) = traces {
        let path = dir.join(TRACE_FILE);
        fs::write(&path, trace_jsonl(traces)).map_err(io_err(&path))?;
        written.push(path);
    }
    Ok(written)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), OutputError> {
    fs::write(path, to_json_pretty(value)).map_err(io_err(path))
}

/// Reads the scenario name and aggregate statistics back from an
/// `aggregate.json`.
pub fn load_aggregate(path: &Path) -> Result<(String, ScenarioStats), OutputError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let malformed = |message: String| OutputError::Malformed { path: path.to_path_buf(), message };
    let doc: Value = serde_json::from_str(&text).map_err(|e| malformed(e.to_string()))?;

    let get = |ptr: &str| doc.pointer(ptr).ok_or_else(|| malformed(format!("missing {ptr}")));
    let num = |ptr: &str| get(ptr)?.as_f64().ok_or_else(|| malformed(format!("{ptr} is not a number")));
    let int = |ptr: &str| get(ptr)?.as_u64().ok_or_else(|| malformed(format!("{ptr} is not an integer")));

    let name = get("/scenario")?.as_str().ok_or_else(|| malformed("/scenario is not a string".into()))?.to_string();
    let median_step = get("/collapse/median_step")?;
    let stats = ScenarioStats {
        replications: int("/replications")? as u32,
        failed_replications: int("/failed_replications")? as u32,
        mean_trade_fraction: num("/trade_fraction/mean")?,
        median_trade_fraction: num("/trade_fraction/median")?,
        min_trade_fraction: num("/trade_fraction/min")?,
        max_trade_fraction: num("/trade_fraction/max")?,
        pooled_trade_fraction: num("/trade_fraction/pooled")?,
        total_actions: int("/total_actions")?,
        trading_actions: int("/trading_actions")?,
        contact_fraction: num("/contact_fraction")?,
        mean_final_population: num("/mean_final_population")?,
        collapse_share: num("/collapse/share")?,
        median_collapse_step: if median_step.is_null() { None } else { Some(num("/collapse/median_step")?) },
        mean_steps_executed: num("/mean_steps_executed")?,
    };
    Ok((name, stats))
}

/// Loads every `*/aggregate.json` directly under `dir`, keyed by scenario.
pub fn load_suite(dir: &Path) -> Result<BTreeMap<String, ScenarioStats>, OutputError> {
    let mut out = BTreeMap::new();
    let entries = fs::read_dir(dir).map_err(io_err(dir))?;
    for entry in entries {
        let entry = entry.map_err(io_err(dir))?;
        let path = entry.path().join(AGGREGATE_FILE);
        if path.is_file() {
            let (name, stats) = load_aggregate(&path)?;
            out.insert(name, stats);
        }
    }
    Ok(out)
}
