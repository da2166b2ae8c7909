//! The client-base grid that agents harvest from.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::agent::Holdings;
use crate::config::SimConfig;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub level: Holdings,
    pub capacity: Holdings,
}

impl Cell {
    pub fn is_empty(&self) -> bool {
        self.level.bonds == 0.0 && self.level.cash == 0.0
    }

    /// Removes and returns everything lying on the cell.
    pub fn harvest(&mut self) -> Holdings {
        std::mem::take(&mut self.level)
    }
}

/// Row-major `width × height` grid of cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Landscape {
    width: u32,
    height: u32,
    cells: Vec<Cell>,
}

impl Landscape {
    /// Draws each cell's capacities uniformly from the configured ranges and
    /// fills every cell to capacity.
    pub fn generate<R: Rng + ?Sized>(config: &SimConfig, rng: &mut R) -> Self {
        let n = config.cell_count() as usize;
        let cb = config.cell_capacity_range_bonds;
        let cc = config.cell_capacity_range_cash;
        let cells = (0..n)
            .map(|_| {
                let capacity =
                    Holdings::new(f64::from(rng.random_range(cb.lo..=cb.hi)), f64::from(rng.random_range(cc.lo..=cc.hi)));
                Cell { level: capacity, capacity }
            })
            .collect();
        Self { width: config.grid_width, height: config.grid_height, cells }
    }

    pub fn from_cells(width: u32, height: u32, cells: Vec<Cell>) -> Self {
        assert_eq!(cells.len(), (width as usize) * (height as usize), "cell count must match dimensions");
        Self { width, height, cells }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    #[inline]
    pub fn index(&self, (x, y): (u32, u32)) -> usize {
        y as usize * self.width as usize + x as usize
    }

    #[inline]
    pub fn position(&self, index: usize) -> (u32, u32) {
        ((index % self.width as usize) as u32, (index / self.width as usize) as u32)
    }

    pub fn cell(&self, pos: (u32, u32)) -> &Cell {
        &self.cells[self.index(pos)]
    }

    pub fn cell_mut(&mut self, pos: (u32, u32)) -> &mut Cell {
        let i = self.index(pos);
        &mut self.cells[i]
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn total_level(&self) -> Holdings {
        self.cells.iter().fold(Holdings::default(), |acc, c| acc + c.level)
    }

    /// Raises every level by `rate`, clamped at capacity. Returns the amount
    /// actually added.
    pub fn regrow(&mut self, rate: f64) -> Holdings {
        let mut added = Holdings::default();
        if rate == 0.0 {
            return added;
        }
        for c in &mut self.cells {
            let nb = (c.level.bonds + rate).min(c.capacity.bonds);
            let nc = (c.level.cash + rate).min(c.capacity.cash);
            added.bonds += nb - c.level.bonds;
            added.cash += nc - c.level.cash;
            c.level = Holdings::new(nb, nc);
        }
        added
    }
}
