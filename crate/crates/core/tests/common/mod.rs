#![allow(dead_code)]

use bilat_sim::agent::{AgentId, AgentState, Holdings, Metabolism};
use bilat_sim::config::{Interval, SimConfig};
use bilat_sim::engine::WorldState;
use bilat_sim::trading::{execute_trade_session, TradeRecord};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Relative slack for comparisons between the library's arithmetic and the
/// oracle's independently ordered arithmetic.
pub const REL_EPS: f64 = 1e-12;

pub fn oracle_welfare(h: Holdings, m: Metabolism) -> f64 {
    let total = f64::from(m.bonds + m.cash);
    (f64::from(m.bonds) / total * h.bonds.ln() + f64::from(m.cash) / total * h.cash.ln()).exp()
}

pub fn oracle_mrs(h: Holdings, m: Metabolism) -> f64 {
    (h.cash * f64::from(m.bonds)) / (h.bonds * f64::from(m.cash))
}

fn improves(after: f64, before: f64) -> bool {
    after > before * (1.0 + REL_EPS)
}

/// Whether the rule's next unit trade between the two holdings would be
/// accepted, judged with oracle arithmetic and a margin against round-off.
pub fn oracle_trade_available(a: Holdings, ma: Metabolism, b: Holdings, mb: Metabolism) -> bool {
    let (ra, rb) = (oracle_mrs(a, ma), oracle_mrs(b, mb));
    if (ra - rb).abs() <= REL_EPS * ra.max(rb) {
        return false;
    }
    let ((buyer, bm, hi), (seller, sm, lo)) = if ra > rb { ((a, ma, ra), (b, mb, rb)) } else { ((b, mb, rb), (a, ma, ra)) };
    let price = (hi * lo).sqrt();
    if !(lo < price && price < hi) {
        return false;
    }
    let (dq, dc) = if price >= 1.0 { (1.0, price) } else { (1.0 / price, 1.0) };
    let buyer_after = Holdings::new(buyer.bonds + dq, buyer.cash - dc);
    let seller_after = Holdings::new(seller.bonds - dq, seller.cash + dc);
    if !(buyer_after.bonds > 0.0 && buyer_after.cash > 0.0 && seller_after.bonds > 0.0 && seller_after.cash > 0.0) {
        return false;
    }
    improves(oracle_welfare(buyer_after, bm), oracle_welfare(buyer, bm))
        && improves(oracle_welfare(seller_after, sm), oracle_welfare(seller, sm))
        && oracle_mrs(buyer_after, bm) > oracle_mrs(seller_after, sm) * (1.0 + REL_EPS)
}

/// Replays a session's records from the starting holdings and returns the
/// first violated property, if any.
pub fn check_session(
    start_a: &AgentState,
    start_b: &AgentState,
    end_a: &AgentState,
    end_b: &AgentState,
    trades: &[TradeRecord],
) -> Result<(), String> {
    let (ma, mb) = (start_a.metabolism(), start_b.metabolism());
    let mut ha = start_a.accum;
    let mut hb = start_b.accum;
    let total_before = (ha.bonds + hb.bonds, ha.cash + hb.cash);

    for (k, t) in trades.iter().enumerate() {
        let (ra, rb) = (oracle_mrs(ha, ma), oracle_mrs(hb, mb));
        let a_buys = t.buyer_id == start_a.id;
        if a_buys == (t.seller_id == start_a.id) {
            return Err(format!("trade {k}: agent {:?} is not exactly one side", start_a.id));
        }
        let (buyer_mrs, seller_mrs) = if a_buys { (ra, rb) } else { (rb, ra) };
        let slack = REL_EPS * buyer_mrs.max(seller_mrs);
        if !(seller_mrs - slack < t.price && t.price < buyer_mrs + slack && seller_mrs < buyer_mrs) {
            return Err(format!("trade {k}: price {} outside ({seller_mrs}, {buyer_mrs})", t.price));
        }
        if (t.cash_moved / t.bonds_moved - t.price).abs() > REL_EPS * t.price {
            return Err(format!("trade {k}: quantities disagree with price"));
        }
        let (wa, wb) = (oracle_welfare(ha, ma), oracle_welfare(hb, mb));
        let sign = if a_buys { 1.0 } else { -1.0 };
        ha = Holdings::new(ha.bonds + sign * t.bonds_moved, ha.cash - sign * t.cash_moved);
        hb = Holdings::new(hb.bonds - sign * t.bonds_moved, hb.cash + sign * t.cash_moved);
        if !(ha.bonds > 0.0 && ha.cash > 0.0 && hb.bonds > 0.0 && hb.cash > 0.0) {
            return Err(format!("trade {k}: holdings left the positive orthant"));
        }
        let (wa2, wb2) = (oracle_welfare(ha, ma), oracle_welfare(hb, mb));
        if !(wa2 > wa * (1.0 - REL_EPS) && wb2 > wb * (1.0 - REL_EPS)) {
            return Err(format!("trade {k}: welfare did not improve ({wa} -> {wa2}, {wb} -> {wb2})"));
        }
        let (ra2, rb2) = (oracle_mrs(ha, ma), oracle_mrs(hb, mb));
        let (buyer_after, seller_after) = if a_buys { (ra2, rb2) } else { (rb2, ra2) };
        if buyer_after < seller_after * (1.0 - REL_EPS) {
            return Err(format!("trade {k}: MRS crossed ({buyer_after} < {seller_after})"));
        }
    }

    let close = |x: f64, y: f64| (x - y).abs() <= 1e-9 * x.abs().max(y.abs()).max(1.0);
    if !(close(ha.bonds, end_a.accum.bonds) && close(ha.cash, end_a.accum.cash) && close(hb.bonds, end_b.accum.bonds) && close(hb.cash, end_b.accum.cash)) {
        return Err("replayed holdings differ from the session's final state".into());
    }
    let total_after = (end_a.accum.bonds + end_b.accum.bonds, end_a.accum.cash + end_b.accum.cash);
    if !(close(total_before.0, total_after.0) && close(total_before.1, total_after.1)) {
        return Err(format!("pair totals changed: {total_before:?} -> {total_after:?}"));
    }
    if oracle_trade_available(end_a.accum, ma, end_b.accum, mb) {
        return Err("a welfare-improving unit trade remains after the session".into());
    }
    Ok(())
}

pub fn random_agent<R: Rng>(rng: &mut R, id: u32) -> AgentState {
    let scale = [1.0, 10.0, 100.0, 1000.0][rng.random_range(0..4)];
    let holdings = Holdings::new(rng.random_range(0.05..1.0) * scale, rng.random_range(0.05..1.0) * scale);
    let metabolism = Metabolism::new(rng.random_range(1..=20), rng.random_range(1..=20));
    AgentState::new(AgentId(id), (0, 0), 1, metabolism, holdings)
}

/// Runs `n` random sessions and returns the first failure.
pub fn soundness_sweep(n: usize, seed: u64) -> Result<usize, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sessions_with_trades = 0;
    for i in 0..n {
        let a0 = random_agent(&mut rng, 0);
        let b0 = random_agent(&mut rng, 1);
        let (mut a, mut b) = (a0.clone(), b0.clone());
        let trades = execute_trade_session(&mut a, &mut b, 0);
        if !trades.is_empty() {
            sessions_with_trades += 1;
        }
        check_session(&a0, &b0, &a, &b, &trades).map_err(|e| format!("pair {i}: {e}"))?;
    }
    Ok(sessions_with_trades)
}

/// A small random config of the shape used for conservation checks.
pub fn small_config<R: Rng>(rng: &mut R) -> SimConfig {
    let m_hi = rng.random_range(1..=6);
    SimConfig {
        grid_width: 10,
        grid_height: 10,
        n_agents: 3,
        vision_range: Interval::new(1, rng.random_range(1..=6)),
        metabolism_range_bonds: Interval::new(1, m_hi),
        metabolism_range_cash: Interval::new(1, m_hi),
        cell_capacity_range_bonds: Interval::new(0, rng.random_range(1..=10)),
        cell_capacity_range_cash: Interval::new(0, rng.random_range(1..=10)),
        endowment_range_bonds: Interval::new(1, rng.random_range(1..=30)),
        endowment_range_cash: Interval::new(1, rng.random_range(1..=30)),
        regrowth_rate: [0.0, 0.25, 1.0, 2.5][rng.random_range(0..4)],
        max_steps: 50,
        seed: rng.random(),
        replications: 1,
        ..SimConfig::default()
    }
}

/// Steps one world to completion, checking the per-step accounting identity.
pub fn check_conservation(config: &SimConfig) -> Result<(), String> {
    let mut world = WorldState::init(config, 0).map_err(|e| e.to_string())?;
    let total = |w: &WorldState| {
        let a = w.total_resources();
        (a.bonds, a.cash)
    };
    for _ in 0..config.max_steps {
        if world.is_collapsed() {
            break;
        }
        let before = total(&world);
        let report = world.step();
        let after = total(&world);
        let expected = (
            before.0 + report.regrowth_added.bonds - report.metabolism_consumed.bonds,
            before.1 + report.regrowth_added.cash - report.metabolism_consumed.cash,
        );
        let tol = |x: f64| 1e-9 * x.abs().max(1.0);
        if (after.0 - expected.0).abs() > tol(expected.0) || (after.1 - expected.1).abs() > tol(expected.1) {
            return Err(format!("step {}: totals {after:?}, expected {expected:?} (seed {})", report.step, config.seed));
        }
    }
    Ok(())
}
