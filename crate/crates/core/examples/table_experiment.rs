//! Enumeration experiment: every connected family network of size n,
//! compiled and decompiled under every order with node 1 eliminated last.
//!
//! cargo run --release --example table_experiment -- 4

use bnspn::verify::{run_table_experiment, OrderingMode, TableConfig};

fn main() -> bnspn::Result<()> {
    let n: usize = std::env::args().nth(1).map_or(4, |a| a.parse().expect("n"));
    println!("{:>3} {:>6} {:>6} {:>7} {:>8} {:>14}", "N", "BNs", "orders", "trials", "matches", "rev-topo");
    for mode in [OrderingMode::Node1Last, OrderingMode::ReverseTopological] {
        let mut config = TableConfig::new(n);
        config.orderings = mode;
        let s = run_table_experiment(&config)?;
        let orders = s.ordering_count.map_or("varies".to_string(), |o| o.to_string());
        println!(
            "{:>3} {:>6} {:>6} {:>7} {:>8} {:>7}/{:<6}",
            s.n, s.bn_count, orders, s.trial_count, s.match_count, s.rev_topo_matches, s.rev_topo_trials
        );
        let mut reasons = std::collections::BTreeMap::new();
        for r in s.records.iter().filter(|r| !r.closure_match) {
            let key = r.notes.split(':').next().unwrap_or("").to_string();
            *reasons.entry(key).or_insert(0) += 1;
        }
        for (why, count) in reasons {
            println!("    {count} mismatches: {why}");
        }
    }
    Ok(())
}
