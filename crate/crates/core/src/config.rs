//! Run parameterization and its validation rules.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Inclusive integer interval `[lo, hi]`, serialized as a two-element array.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "[u32; 2]", into = "[u32; 2]")]
pub struct Interval {
    pub lo: u32,
    pub hi: u32,
}

impl Interval {
    pub const fn new(lo: u32, hi: u32) -> Self {
        Self { lo, hi }
    }

    /// Degenerate interval holding a single value.
    pub const fn point(v: u32) -> Self {
        Self { lo: v, hi: v }
    }

    pub fn contains(&self, v: u32) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn is_degenerate(&self) -> bool {
        self.lo == self.hi
    }
}

impl From<[u32; 2]> for Interval {
    fn from([lo, hi]: [u32; 2]) -> Self {
        Self { lo, hi }
    }
}

impl From<Interval> for [u32; 2] {
    fn from(iv: Interval) -> Self {
        [iv.lo, iv.hi]
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{}]", self.lo, self.hi)
    }
}

/// Grid adjacency, which also fixes the distance metric used for vision.
///
/// Moore uses the Chebyshev distance (8 directions), von Neumann the
/// Manhattan distance (4 directions).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Neighborhood {
    #[default]
    Moore,
    VonNeumann,
}

impl Neighborhood {
    pub fn distance(self, a: (u32, u32), b: (u32, u32)) -> u32 {
        let dx = a.0.abs_diff(b.0);
        let dy = a.1.abs_diff(b.1);
        match self {
            Neighborhood::Moore => dx.max(dy),
            Neighborhood::VonNeumann => dx + dy,
        }
    }
}

/// Full parameterization of a simulation run.
///
/// All resource quantities are in abstract resource units; `bonds` plays the
/// role of the first good and `cash` the second.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub grid_width: u32,
    pub grid_height: u32,
    pub neighborhood: Neighborhood,
    pub n_agents: u32,
    pub vision_range: Interval,
    pub metabolism_range_bonds: Interval,
    pub metabolism_range_cash: Interval,
    pub endowment_range_bonds: Interval,
    pub endowment_range_cash: Interval,
    pub cell_capacity_range_bonds: Interval,
    pub cell_capacity_range_cash: Interval,
    /// Units added to every cell and resource per step, clamped at capacity.
    pub regrowth_rate: f64,
    pub max_steps: u32,
    pub seed: u64,
    pub replications: u32,
}

/// Calibrated landscape: per-cell capacity range for both resources.
pub const DEFAULT_CELL_CAPACITY: Interval = Interval::new(0, 40);
/// Calibrated starting holdings for both resources.
pub const DEFAULT_ENDOWMENT: Interval = Interval::new(50, 100);

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            grid_width: 50,
            grid_height: 50,
            neighborhood: Neighborhood::Moore,
            n_agents: 4,
            vision_range: Interval::new(1, 5),
            metabolism_range_bonds: Interval::new(1, 5),
            metabolism_range_cash: Interval::new(1, 5),
            endowment_range_bonds: DEFAULT_ENDOWMENT,
            endowment_range_cash: DEFAULT_ENDOWMENT,
            cell_capacity_range_bonds: DEFAULT_CELL_CAPACITY,
            cell_capacity_range_cash: DEFAULT_CELL_CAPACITY,
            regrowth_rate: 0.0,
            max_steps: 4000,
            seed: 0,
            replications: 200,
        }
    }
}

/// One violated invariant, tagged with the offending field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub field: &'static str,
    pub kind: ViolationKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ViolationKind {
    /// `lo > hi`.
    IntervalOrder { lo: u32, hi: u32 },
    /// `lo` below the smallest admissible value.
    IntervalFloor { lo: u32, min: u32 },
    /// Value must be at least `min`.
    TooSmall { min: u64 },
    /// Vision reaches beyond the larger grid dimension.
    VisionExceedsGrid { hi: u32, max: u32 },
    /// More agents than cells.
    TooManyAgents { cells: u64 },
    /// Regrowth must be finite and non-negative.
    BadRegrowth,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let field = self.field;
        match &self.kind {
            ViolationKind::IntervalOrder { lo, hi } => {
                write!(f, "{field}: interval order violated (lo {lo} > hi {hi})")
            }
            ViolationKind::IntervalFloor { lo, min } => {
                write!(f, "{field}: lower bound {lo} is below {min}")
            }
            ViolationKind::TooSmall { min } => write!(f, "{field}: must be at least {min}"),
            ViolationKind::VisionExceedsGrid { hi, max } => {
                write!(f, "{field}: upper bound {hi} exceeds the largest grid dimension {max}")
            }
            ViolationKind::TooManyAgents { cells } => {
                write!(f, "{field}: more agents than the {cells} available cells")
            }
            ViolationKind::BadRegrowth => write!(f, "{field}: must be finite and non-negative"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid configuration: {}", join_violations(.0))]
pub struct ConfigError(pub Vec<Violation>);

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

impl ConfigError {
    pub fn violations(&self) -> &[Violation] {
        &self.0
    }

    pub fn names_field(&self, field: &str) -> bool {
        self.0.iter().any(|v| v.field == field)
    }
}

impl SimConfig {
    /// Field names in declaration order, as they appear in config documents.
    pub const FIELDS: &'static [&'static str] = &[
        "grid_width",
        "grid_height",
        "neighborhood",
        "n_agents",
        "vision_range",
        "metabolism_range_bonds",
        "metabolism_range_cash",
        "endowment_range_bonds",
        "endowment_range_cash",
        "cell_capacity_range_bonds",
        "cell_capacity_range_cash",
        "regrowth_rate",
        "max_steps",
        "seed",
        "replications",
    ];

    pub fn cell_count(&self) -> u64 {
        u64::from(self.grid_width) * u64::from(self.grid_height)
    }

    pub fn max_dimension(&self) -> u32 {
        self.grid_width.max(self.grid_height)
    }

    /// Checks every invariant and reports all violations at once.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut out = Vec::new();
        let mut positive = |field, v: u64| {
            if v < 1 {
                out.push(Violation { field, kind: ViolationKind::TooSmall { min: 1 } });
            }
        };
        positive("grid_width", self.grid_width.into());
        positive("grid_height", self.grid_height.into());
        positive("n_agents", self.n_agents.into());
        positive("max_steps", self.max_steps.into());
        positive("replications", self.replications.into());

        let intervals = [
            ("vision_range", self.vision_range, 1),
            ("metabolism_range_bonds", self.metabolism_range_bonds, 1),
            ("metabolism_range_cash", self.metabolism_range_cash, 1),
            ("endowment_range_bonds", self.endowment_range_bonds, 1),
            ("endowment_range_cash", self.endowment_range_cash, 1),
            ("cell_capacity_range_bonds", self.cell_capacity_range_bonds, 0),
            ("cell_capacity_range_cash", self.cell_capacity_range_cash, 0),
        ];
        for (field, iv, min) in intervals {
            if iv.lo > iv.hi {
                out.push(Violation { field, kind: ViolationKind::IntervalOrder { lo: iv.lo, hi: iv.hi } });
            }
            if iv.lo < min {
                out.push(Violation { field, kind: ViolationKind::IntervalFloor { lo: iv.lo, min } });
            }
        }
        if self.vision_range.hi > self.max_dimension() {
            out.push(Violation {
                field: "vision_range",
                kind: ViolationKind::VisionExceedsGrid { hi: self.vision_range.hi, max: self.max_dimension() },
            });
        }
        if u64::from(self.n_agents) > self.cell_count() && self.cell_count() > 0 {
            out.push(Violation { field: "n_agents", kind: ViolationKind::TooManyAgents { cells: self.cell_count() } });
        }
        if !(self.regrowth_rate.is_finite() && self.regrowth_rate >= 0.0) {
            out.push(Violation { field: "regrowth_rate", kind: ViolationKind::BadRegrowth });
        }

        if out.is_empty() {
            Ok(())
        } else {
            Err(ConfigError(out))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid() {
        SimConfig::default().validate().unwrap();
    }

    #[test]
    fn reports_every_violation() {
        let cfg = SimConfig {
            vision_range: Interval::new(5, 1),
            metabolism_range_cash: Interval::new(0, 3),
            replications: 0,
            ..SimConfig::default()
        };
        let err = cfg.validate().unwrap_err();
        assert!(err.names_field("vision_range"));
        assert!(err.names_field("metabolism_range_cash"));
        assert!(err.names_field("replications"));
        assert_eq!(err.violations().len(), 3);
    }

    #[test]
    fn capacity_may_start_at_zero() {
        let cfg = SimConfig { cell_capacity_range_bonds: Interval::new(0, 0), ..SimConfig::default() };
        cfg.validate().unwrap();
    }

    #[test]
    fn vision_capped_by_grid() {
        let cfg = SimConfig { vision_range: Interval::new(1, 51), ..SimConfig::default() };
        assert!(cfg.validate().unwrap_err().names_field("vision_range"));
        let cfg = SimConfig { vision_range: Interval::new(50, 50), ..SimConfig::default() };
        cfg.validate().unwrap();
    }

    #[test]
    fn too_many_agents() {
        let cfg = SimConfig { grid_width: 2, grid_height: 2, n_agents: 5, vision_range: Interval::new(1, 1), ..SimConfig::default() };
        assert!(cfg.validate().unwrap_err().names_field("n_agents"));
    }

    #[test]
    fn metric_distances() {
        assert_eq!(Neighborhood::Moore.distance((0, 0), (3, 4)), 4);
        assert_eq!(Neighborhood::VonNeumann.distance((0, 0), (3, 4)), 7);
    }
}
