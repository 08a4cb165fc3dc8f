//! Dynamic connectivity: any one of several graphs may carry the team.

use std::path::Path;

use barrier_compose::prelude::*;
use barrier_compose::scenario::Scenario;

fn main() -> Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/dynamic_switch.toml");
    let scenario = Scenario::load(path)?;
    let log = run(&scenario.config)?;
    let m = metrics(&log, &scenario.config)?;
    println!("B = {}", log.certificate.as_deref().unwrap_or("none"));

    let per_step = m.satisfied_graph.as_ref().expect("dynamic certificate");
    let mut previous = None;
    for (r, g) in log.records.iter().zip(per_step) {
        if Some(*g) != previous {
            let shown = g.map_or("none".to_string(), |g| format!("graph {}", g + 1));
            println!("t = {:6.2} s: first satisfied {shown}, distances {:.3?}", r.t, r.distances);
            previous = Some(*g);
        }
    }
    println!("{} switch(es); waypoints {:?}", m.graph_switches, m.waypoints_visited);
    Ok(())
}
