//! Safety plus static connectivity with OR-groups. Robot 1's last waypoint is
//! out of reach, so the filter holds it back.

use std::path::Path;

use barrier_compose::prelude::*;
use barrier_compose::scenario::Scenario;

fn main() -> Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/exp2_safety_connectivity.toml");
    let scenario = Scenario::load(path)?;
    let config = &scenario.config;
    let log = run(config)?;
    let m = metrics(&log, config)?;

    println!("B = {}", log.certificate.as_deref().unwrap_or("none"));
    for c in &m.conditions {
        println!("  {:<4} {}", c.status.as_str(), c.name);
    }
    for g in &m.or_groups {
        println!("  max over time of the closer link in {:?}: {:.4}", g.edges, g.max_min_distance);
    }
    let r1 = log.records.last().expect("non-empty log").state.positions[0];
    let goal = *config.plan.waypoints[0].last().expect("robot 1 has waypoints");
    println!(
        "robot 1 visited {} of {} waypoints; ends at ({:.3}, {:.3}), {:.3} m short of ({}, {})",
        m.waypoints_visited[0],
        m.waypoints_planned[0],
        r1[0],
        r1[1],
        ((r1[0] - goal[0]).powi(2) + (r1[1] - goal[1]).powi(2)).sqrt(),
        goal[0],
        goal[1]
    );
    Ok(())
}
