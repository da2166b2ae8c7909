//! Prints suite aggregates for a candidate landscape calibration.
//!
//! ```text
//! cargo run --release --example calibrate -- <cap_lo> <cap_hi> <endow_lo> <endow_hi> [SCENARIO ...]
//! ```

use bilat_sim::config::Interval;
use bilat_sim::experiments::{builtin_scenarios, run_scenario};

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let num = |i: usize| -> Option<u32> { args.get(i).and_then(|s| s.parse().ok()) };
    let capacity = num(0).zip(num(1)).map(|(lo, hi)| Interval::new(lo, hi));
    let endowment = num(2).zip(num(3)).map(|(lo, hi)| Interval::new(lo, hi));
    let only: Vec<&str> = args.iter().skip(4).map(String::as_str).collect();

    println!("{:<14} {:>8} {:>8} {:>8} {:>8} {:>9} {:>9} {:>8}", "scenario", "mean", "median", "min", "max", "collapse", "med.coll", "steps");
    for mut spec in builtin_scenarios() {
        if !only.is_empty() && !only.contains(&spec.name.as_str()) {
            continue;
        }
        if let Some(c) = capacity {
            spec.config.cell_capacity_range_bonds = c;
            spec.config.cell_capacity_range_cash = c;
        }
        if let Some(e) = endowment {
            if !spec.config.endowment_range_bonds.is_degenerate() {
                spec.config.endowment_range_bonds = e;
                spec.config.endowment_range_cash = e;
            }
        }
        let r = run_scenario(&spec);
        let s = &r.stats;
        println!(
            "{:<14} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>9.3} {:>9} {:>8.1}  {}",
            spec.name,
            s.mean_trade_fraction,
            s.median_trade_fraction,
            s.min_trade_fraction,
            s.max_trade_fraction,
            s.collapse_share,
            s.median_collapse_step.map_or("never".to_string(), |v| v.to_string()),
            s.mean_steps_executed,
            if r.all_targets_pass() { "ok" } else { "MISS" }
        );
    }
}
