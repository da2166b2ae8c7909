//! Marginal rate of substitution, welfare, and bilateral bargaining.
//!
//! Bonds are the first good and cash the second. An agent's MRS compares
//! how many steps its cash would last against how many steps its bonds would
//! last:
//!
//! ```text
//! MRS = (cash / met_cash) / (bonds / met_bonds)
//! ```
//!
//! so `MRS > 1` marks an agent that is short of bonds and willing to pay cash
//! for them. Welfare is the Cobb-Douglas product with metabolism-share
//! exponents:
//!
//! ```text
//! W = bonds^(met_bonds / m) * cash^(met_cash / m),   m = met_bonds + met_cash
//! ```
//!
//! A trade session between two agents repeats unit trades at the geometric
//! mean of their MRS values for as long as each trade leaves both strictly
//! better off and does not reverse their MRS ordering.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::agent::{AgentId, AgentState, Holdings, Metabolism};
use crate::config::Neighborhood;

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum TradeError {
    #[error("MRS undefined for holdings with no bonds")]
    UndefinedMrs,
    #[error("holdings must be non-negative (bonds {bonds}, cash {cash})")]
    NegativeHoldings { bonds: f64, cash: f64 },
    #[error("MRS values must be positive and finite (got {0})")]
    NonPositiveMrs(f64),
}

/// One executed unit trade.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeRecord {
    pub step: u32,
    /// Receives bonds, pays cash.
    pub buyer_id: AgentId,
    /// Gives bonds, receives cash.
    pub seller_id: AgentId,
    pub bonds_moved: f64,
    pub cash_moved: f64,
    /// Cash per bond.
    pub price: f64,
}

pub fn compute_mrs(holdings: Holdings, metabolism: Metabolism) -> Result<f64, TradeError> {
    if holdings.bonds < 0.0 || holdings.cash < 0.0 {
        return Err(TradeError::NegativeHoldings { bonds: holdings.bonds, cash: holdings.cash });
    }
    if holdings.bonds == 0.0 {
        return Err(TradeError::UndefinedMrs);
    }
    let cash_horizon = holdings.cash / f64::from(metabolism.cash);
    let bond_horizon = holdings.bonds / f64::from(metabolism.bonds);
    Ok(cash_horizon / bond_horizon)
}

pub fn compute_welfare(holdings: Holdings, metabolism: Metabolism) -> Result<f64, TradeError> {
    if holdings.bonds < 0.0 || holdings.cash < 0.0 {
        return Err(TradeError::NegativeHoldings { bonds: holdings.bonds, cash: holdings.cash });
    }
    Ok(welfare_unchecked(holdings, metabolism))
}

#[inline]
pub(crate) fn welfare_unchecked(h: Holdings, m: Metabolism) -> f64 {
    let total = f64::from(m.total());
    let eb = f64::from(m.bonds) / total;
    let ec = f64::from(m.cash) / total;
    h.bonds.powf(eb) * h.cash.powf(ec)
}

/// Geometric mean of the two MRS values, in cash per bond.
pub fn bargain_price(mrs_a: f64, mrs_b: f64) -> Result<f64, TradeError> {
    for v in [mrs_a, mrs_b] {
        if !(v.is_finite() && v > 0.0) {
            return Err(TradeError::NonPositiveMrs(v));
        }
    }
    Ok((mrs_a * mrs_b).sqrt())
}

/// Size of one unit trade at `price`: one bond when bonds are dear, one unit
/// of cash otherwise. Returns `(bonds, cash)`.
pub fn unit_quantities(price: f64) -> (f64, f64) {
    if price >= 1.0 {
        (1.0, price)
    } else {
        (1.0 / price, 1.0)
    }
}

/// Runs unit trades between `a` and `b` until no further trade is mutually
/// welfare-improving. Agents that are dead or hold nothing of either
/// resource do not trade.
pub fn execute_trade_session(a: &mut AgentState, b: &mut AgentState, step: u32) -> Vec<TradeRecord> {
    let mut trades = Vec::new();
    if a.id == b.id || !a.alive || !b.alive || !a.accum.both_positive() || !b.accum.both_positive() {
        return trades;
    }
    while let Some(record) = try_unit_trade(a, b, step) {
        trades.push(record);
    }
    trades
}

/// Attempts one unit trade, applying it and returning its record when every
/// acceptance condition holds.
fn try_unit_trade(a: &mut AgentState, b: &mut AgentState, step: u32) -> Option<TradeRecord> {
    let mrs_a = compute_mrs(a.accum, a.metabolism()).ok()?;
    let mrs_b = compute_mrs(b.accum, b.metabolism()).ok()?;
    if mrs_a == mrs_b {
        return None;
    }
    let (buyer, seller, mrs_hi, mrs_lo) = if mrs_a > mrs_b { (a, b, mrs_a, mrs_b) } else { (b, a, mrs_b, mrs_a) };
    let price = bargain_price(mrs_hi, mrs_lo).ok()?;
    if !(mrs_lo < price && price < mrs_hi) {
        return None;
    }
    let (bonds, cash) = unit_quantities(price);

    let buyer_after = Holdings::new(buyer.accum.bonds + bonds, buyer.accum.cash - cash);
    let seller_after = Holdings::new(seller.accum.bonds - bonds, seller.accum.cash + cash);
    if !buyer_after.both_positive() || !seller_after.both_positive() {
        return None;
    }

    let bm = buyer.metabolism();
    let sm = seller.metabolism();
    if welfare_unchecked(buyer_after, bm) <= welfare_unchecked(buyer.accum, bm)
        || welfare_unchecked(seller_after, sm) <= welfare_unchecked(seller.accum, sm)
    {
        return None;
    }
    let buyer_mrs_after = compute_mrs(buyer_after, bm).ok()?;
    let seller_mrs_after = compute_mrs(seller_after, sm).ok()?;
    if buyer_mrs_after < seller_mrs_after {
        return None;
    }

    buyer.accum = buyer_after;
    seller.accum = seller_after;
    Some(TradeRecord {
        step,
        buyer_id: buyer.id,
        seller_id: seller.id,
        bonds_moved: bonds,
        cash_moved: cash,
        price: cash / bonds,
    })
}

/// Indices of alive agents (other than `self_idx`) within the vision of
/// agent `self_idx`, shuffled.
pub fn find_partners<R: Rng + ?Sized>(
    agents: &[AgentState],
    self_idx: usize,
    neighborhood: Neighborhood,
    rng: &mut R,
) -> Vec<usize> {
    let me = &agents[self_idx];
    let mut out: Vec<usize> = agents
        .iter()
        .enumerate()
        .filter(|&(i, other)| {
            i != self_idx && other.alive && neighborhood.distance(me.position, other.position) <= me.vision()
        })
        .map(|(i, _)| i)
        .collect();
    out.shuffle(rng);
    out
}
