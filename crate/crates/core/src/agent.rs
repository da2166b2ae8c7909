//! Market-maker state.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Opaque agent identifier, stable for the life of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AgentId(pub u32);

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Amounts of the two resources, either held by an agent or lying on a cell.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Holdings {
    pub bonds: f64,
    pub cash: f64,
}

impl Holdings {
    pub const fn new(bonds: f64, cash: f64) -> Self {
        Self { bonds, cash }
    }

    pub fn both_positive(&self) -> bool {
        self.bonds > 0.0 && self.cash > 0.0
    }

    pub fn scaled(self, c: f64) -> Self {
        Self::new(self.bonds * c, self.cash * c)
    }
}

impl std::ops::Add for Holdings {
    type Output = Holdings;
    fn add(self, rhs: Holdings) -> Holdings {
        Holdings::new(self.bonds + rhs.bonds, self.cash + rhs.cash)
    }
}

impl std::ops::AddAssign for Holdings {
    fn add_assign(&mut self, rhs: Holdings) {
        self.bonds += rhs.bonds;
        self.cash += rhs.cash;
    }
}

/// Per-step consumption of each resource. Fixed for an agent's lifetime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Metabolism {
    pub bonds: u32,
    pub cash: u32,
}

impl Metabolism {
    pub const fn new(bonds: u32, cash: u32) -> Self {
        Self { bonds, cash }
    }

    pub fn total(&self) -> u32 {
        self.bonds + self.cash
    }
}

/// Inherited traits drawn once per seed and reused across replications.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Genome {
    pub vision: u32,
    pub metabolism: Metabolism,
    pub endowment_bonds: u32,
    pub endowment_cash: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    pub id: AgentId,
    pub position: (u32, u32),
    vision: u32,
    metabolism: Metabolism,
    pub accum: Holdings,
    pub alive: bool,
}

impl AgentState {
    pub fn new(id: AgentId, position: (u32, u32), vision: u32, metabolism: Metabolism, accum: Holdings) -> Self {
        Self { id, position, vision, metabolism, accum, alive: true }
    }

    pub fn from_genome(id: AgentId, position: (u32, u32), genome: &Genome) -> Self {
        let accum = Holdings::new(f64::from(genome.endowment_bonds), f64::from(genome.endowment_cash));
        Self::new(id, position, genome.vision, genome.metabolism, accum)
    }

    pub fn vision(&self) -> u32 {
        self.vision
    }

    pub fn metabolism(&self) -> Metabolism {
        self.metabolism
    }

    /// Burns one step's worth of both resources; the agent dies when either
    /// holding reaches zero or below.
    pub fn metabolize(&mut self) {
        debug_assert!(self.alive);
        self.accum.bonds -= f64::from(self.metabolism.bonds);
        self.accum.cash -= f64::from(self.metabolism.cash);
        if self.accum.bonds <= 0.0 || self.accum.cash <= 0.0 {
            self.alive = false;
        }
    }
}
