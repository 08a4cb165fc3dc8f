//! Four robots cross the arena center with and without the safety certificate.

use std::path::Path;

use barrier_compose::prelude::*;
use barrier_compose::scenario::Scenario;

fn main() -> Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios");
    for name in ["exp1_safety", "exp1_baseline"] {
        let scenario = Scenario::load(dir.join(format!("{name}.toml")))?;
        let config = &scenario.config;
        let start = std::time::Instant::now();
        let log = run(config)?;
        let m = metrics(&log, config)?;
        println!(
            "{name}: {} steps in {:.0?}, min pair distance {:.4} (D_s = {}), waypoints {:?} of {:?}",
            m.records - 1,
            start.elapsed(),
            m.min_pair_distance,
            config.params.safety_distance,
            m.waypoints_visited,
            m.waypoints_planned
        );
        let closest = m
            .pair_ranges
            .iter()
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("at least one pair");
        println!("  closest pair: robots {} and {}", closest.0 .0 + 1, closest.0 .1 + 1);
    }
    Ok(())
}
