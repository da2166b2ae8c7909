//! World state and the per-step lifecycle.
//!
//! Each step activates the living agents one at a time in a freshly shuffled
//! order. An activation is: move to the best visible cell and harvest it,
//! trade with every partner in vision, then pay metabolism. Once every agent
//! has acted the landscape regrows.
//!
//! Two random streams are derived from the configured seed. Stream 0 draws
//! agent traits and is shared by every replication, so the same population
//! recurs. Stream `1 + replication_index` draws the landscape, placement,
//! activation order, tie-breaks and partner order.

use rand::seq::index;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agent::{AgentId, AgentState, Genome, Holdings, Metabolism};
use crate::config::{ConfigError, SimConfig};
use crate::landscape::Landscape;
use crate::metrics::{RunSummary, SummaryBuilder};
use crate::trading::{execute_trade_session, find_partners, welfare_unchecked, TradeRecord};

/// Population size below which bilateral trade is impossible.
pub const COLLAPSE_THRESHOLD: u32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    ForageOnly,
    Trade,
}

/// What one activated agent did during a step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepEvent {
    pub step: u32,
    pub agent_id: AgentId,
    pub action_kind: ActionKind,
    /// Alive agents within vision at the time of the activation.
    pub partners: u32,
    pub trades: Vec<TradeRecord>,
}

impl StepEvent {
    fn new(step: u32, agent_id: AgentId, partners: u32, trades: Vec<TradeRecord>) -> Self {
        let action_kind = if trades.is_empty() { ActionKind::ForageOnly } else { ActionKind::Trade };
        Self { step, agent_id, action_kind, partners, trades }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub step: u32,
    pub events: Vec<StepEvent>,
    /// Alive agents once the step has finished.
    pub population: u32,
    pub collapsed: bool,
    pub regrowth_added: Holdings,
    pub metabolism_consumed: Holdings,
}

/// Draws `n` agent trait tuples from the seed-only stream.
pub fn draw_genomes(config: &SimConfig) -> Vec<Genome> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(0);
    (0..config.n_agents)
        .map(|_| {
            let vision = rng.random_range(config.vision_range.lo..=config.vision_range.hi);
            let mb = rng.random_range(config.metabolism_range_bonds.lo..=config.metabolism_range_bonds.hi);
            let mc = rng.random_range(config.metabolism_range_cash.lo..=config.metabolism_range_cash.hi);
            let eb = rng.random_range(config.endowment_range_bonds.lo..=config.endowment_range_bonds.hi);
            let ec = rng.random_range(config.endowment_range_cash.lo..=config.endowment_range_cash.hi);
            Genome { vision, metabolism: Metabolism::new(mb, mc), endowment_bonds: eb, endowment_cash: ec }
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct WorldState {
    config: SimConfig,
    replication_index: u32,
    landscape: Landscape,
    /// Indexed by `AgentId`; dead agents stay in place with `alive == false`.
    agents: Vec<AgentState>,
    occupancy: Vec<Option<u32>>,
    rng: ChaCha8Rng,
    step: u32,
}

impl PartialEq for WorldState {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config
            && self.replication_index == other.replication_index
            && self.landscape == other.landscape
            && self.agents == other.agents
            && self.occupancy == other.occupancy
            && self.step == other.step
            && self.rng.get_word_pos() == other.rng.get_word_pos()
            && self.rng.get_seed() == other.rng.get_seed()
            && self.rng.get_stream() == other.rng.get_stream()
    }
}

impl WorldState {
    pub fn init(config: &SimConfig, replication_index: u32) -> Result<Self, ConfigError> {
        config.validate()?;
        let genomes = draw_genomes(config);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(1 + u64::from(replication_index));

        let landscape = Landscape::generate(config, &mut rng);
        let cells = config.cell_count() as usize;
        let sites = index::sample(&mut rng, cells, config.n_agents as usize);
        let mut occupancy = vec![None; cells];
        let agents = genomes
            .iter()
            .zip(sites.iter())
            .enumerate()
            .map(|(i, (genome, site))| {
                occupancy[site] = Some(i as u32);
                AgentState::from_genome(AgentId(i as u32), landscape.position(site), genome)
            })
            .collect();

        Ok(Self { config: config.clone(), replication_index, landscape, agents, occupancy, rng, step: 0 })
    }

    /// Builds a world from explicit parts. Agent ids must equal their index.
    pub fn from_parts(config: SimConfig, landscape: Landscape, agents: Vec<AgentState>, seed_stream: u64) -> Self {
        let mut occupancy = vec![None; landscape.cells().len()];
        for (i, a) in agents.iter().enumerate() {
            assert_eq!(a.id.0 as usize, i, "agent ids must match their index");
            if a.alive {
                let cell = landscape.index(a.position);
                assert!(occupancy[cell].is_none(), "two agents share cell {:?}", a.position);
                occupancy[cell] = Some(i as u32);
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(seed_stream);
        Self { config, replication_index: 0, landscape, agents, occupancy, rng, step: 0 }
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn replication_index(&self) -> u32 {
        self.replication_index
    }

    pub fn landscape(&self) -> &Landscape {
        &self.landscape
    }

    pub fn landscape_mut(&mut self) -> &mut Landscape {
        &mut self.landscape
    }

    pub fn agents(&self) -> &[AgentState] {
        &self.agents
    }

    /// Steps completed so far.
    pub fn current_step(&self) -> u32 {
        self.step
    }

    pub fn population(&self) -> u32 {
        self.agents.iter().filter(|a| a.alive).count() as u32
    }

    pub fn is_collapsed(&self) -> bool {
        self.population() < COLLAPSE_THRESHOLD
    }

    /// Sum of every agent's holdings (dead agents keep their final holdings)
    /// plus every cell level.
    pub fn total_resources(&self) -> Holdings {
        self.agents.iter().fold(self.landscape.total_level(), |acc, a| acc + a.accum)
    }

    /// Moves agent `idx` to the welfare-maximizing unoccupied cell within its
    /// vision and harvests that cell. Ties go to the nearest cell, then to a
    /// uniform draw.
    pub fn move_agent(&mut self, idx: usize) -> (u32, u32) {
        let target = self.best_site(idx);
        let agent = &mut self.agents[idx];
        debug_assert!(agent.alive);
        let from = self.landscape.index(agent.position);
        let to = self.landscape.index(target);
        self.occupancy[from] = None;
        self.occupancy[to] = Some(idx as u32);
        agent.position = target;
        let got = self.landscape.cell_mut(target).harvest();
        agent.accum += got;
        target
    }

    fn best_site(&mut self, idx: usize) -> (u32, u32) {
        let agent = &self.agents[idx];
        let here = agent.position;
        let vision = agent.vision();
        let metabolism = agent.metabolism();
        let accum = agent.accum;
        let hood = self.config.neighborhood;

        let x_lo = here.0.saturating_sub(vision);
        let x_hi = (here.0 + vision).min(self.landscape.width() - 1);
        let y_lo = here.1.saturating_sub(vision);
        let y_hi = (here.1 + vision).min(self.landscape.height() - 1);

        let mut best = here;
        let mut best_welfare = welfare_unchecked(accum + self.landscape.cell(here).level, metabolism);
        let mut best_dist = 0u32;
        let mut ties = 1u32;
        for y in y_lo..=y_hi {
            for x in x_lo..=x_hi {
                let pos = (x, y);
                if pos == here {
                    continue;
                }
                let dist = hood.distance(here, pos);
                if dist > vision {
                    continue;
                }
                let i = self.landscape.index(pos);
                let cell = &self.landscape.cells()[i];
                // An empty cell can at best tie with staying put, which is nearer.
                if self.occupancy[i].is_some() || cell.is_empty() {
                    continue;
                }
                let w = welfare_unchecked(accum + cell.level, metabolism);
                if w > best_welfare || (w == best_welfare && dist < best_dist) {
                    best = pos;
                    best_welfare = w;
                    best_dist = dist;
                    ties = 1;
                } else if w == best_welfare && dist == best_dist {
                    ties += 1;
                    if self.rng.random_range(0..ties) == 0 {
                        best = pos;
                    }
                }
            }
        }
        best
    }

    /// Executes one full step. A collapsed world is left untouched.
    pub fn step(&mut self) -> StepReport {
        let step = self.step;
        if self.is_collapsed() {
            return StepReport {
                step,
                events: Vec::new(),
                population: self.population(),
                collapsed: true,
                regrowth_added: Holdings::default(),
                metabolism_consumed: Holdings::default(),
            };
        }

        let mut order: Vec<usize> = (0..self.agents.len()).filter(|&i| self.agents[i].alive).collect();
        order.shuffle(&mut self.rng);

        let mut events = Vec::with_capacity(order.len());
        let mut consumed = Holdings::default();
        for idx in order {
            if !self.agents[idx].alive {
                continue;
            }
            self.move_agent(idx);

            let partners = find_partners(&self.agents, idx, self.config.neighborhood, &mut self.rng);
            let n_partners = partners.len() as u32;
            let mut trades = Vec::new();
            for p in partners {
                let (me, other) = pair_mut(&mut self.agents, idx, p);
                trades.extend(execute_trade_session(me, other, step));
            }

            let agent = &mut self.agents[idx];
            let m = agent.metabolism();
            consumed += Holdings::new(f64::from(m.bonds), f64::from(m.cash));
            agent.metabolize();
            if !agent.alive {
                let cell = self.landscape.index(agent.position);
                self.occupancy[cell] = None;
            }
            events.push(StepEvent::new(step, AgentId(idx as u32), n_partners, trades));
        }

        let regrowth_added = self.landscape.regrow(self.config.regrowth_rate);
        self.step += 1;
        let population = self.population();
        StepReport {
            step,
            events,
            population,
            collapsed: population < COLLAPSE_THRESHOLD,
            regrowth_added,
            metabolism_consumed: consumed,
        }
    }
}

fn pair_mut<T>(v: &mut [T], i: usize, j: usize) -> (&mut T, &mut T) {
    assert_ne!(i, j);
    if i < j {
        let (lo, hi) = v.split_at_mut(j);
        (&mut lo[i], &mut hi[0])
    } else {
        let (lo, hi) = v.split_at_mut(i);
        (&mut hi[0], &mut lo[j])
    }
}

/// Initializes and steps a world until `max_steps` or collapse, calling
/// `observe` on every step report.
pub fn run_observed(
    config: &SimConfig,
    replication_index: u32,
    mut observe: impl FnMut(&StepReport),
) -> Result<RunSummary, ConfigError> {
    let mut world = WorldState::init(config, replication_index)?;
    let mut summary = SummaryBuilder::new(replication_index, config.seed, world.population());
    while world.current_step() < config.max_steps && !world.is_collapsed() {
        let report = world.step();
        observe(&report);
        summary.record(&report);
    }
    Ok(summary.finish())
}

pub fn run(config: &SimConfig, replication_index: u32) -> Result<RunSummary, ConfigError> {
    run_observed(config, replication_index, |_| {})
}

/// Like [`run`], also returning every step event in order.
pub fn run_traced(config: &SimConfig, replication_index: u32) -> Result<(RunSummary, Vec<StepEvent>), ConfigError> {
    let mut events = Vec::new();
    let summary = run_observed(config, replication_index, |r| events.extend(r.events.iter().cloned()))?;
    Ok((summary, events))
}
