//! A user-defined atom: keep robot 1 outside a circular obstacle, composed
//! with pairwise safety and enforced by the same filter.

use barrier_compose::prelude::*;

/// `h = |p1 - c|^2 - r^2 + 2 (p1 - c) · v1 / k`, a first-order barrier with
/// a velocity lead so the control appears in its derivative.
#[derive(Debug)]
struct DiskObstacle {
    center: [f64; 2],
    radius: f64,
    lead: f64,
}

impl BarrierAtom for DiskObstacle {
    fn label(&self) -> String {
        "Bobs".into()
    }

    fn raw_value(&self, x: &EnsembleState) -> Result<f64> {
        let [p, v] = [x.positions[0], x.velocities[0]];
        let d = [p[0] - self.center[0], p[1] - self.center[1]];
        Ok(d[0] * d[0] + d[1] * d[1] - self.radius * self.radius + 2.0 * (d[0] * v[0] + d[1] * v[1]) / self.lead)
    }

    fn gradient(&self, x: &EnsembleState) -> Result<Vec<f64>> {
        let [p, v] = [x.positions[0], x.velocities[0]];
        let d = [p[0] - self.center[0], p[1] - self.center[1]];
        let mut g = vec![0.0; x.dim()];
        g[0] = 2.0 * d[0] + 2.0 * v[0] / self.lead;
        g[1] = 2.0 * d[1] + 2.0 * v[1] / self.lead;
        let k = x.velocity_index(0);
        g[k] = 2.0 * d[0] / self.lead;
        g[k + 1] = 2.0 * d[1] / self.lead;
        Ok(g)
    }
}

fn main() -> Result<()> {
    let params = TeamParams::new(2, 2.0, 0.5, 0.15, 0.6)?;
    let obstacle = DiskObstacle {
        center: [0.0, 0.0],
        radius: 0.3,
        lead: 2.0,
    };
    let tree = BarrierTree::compose_and(vec![build_safety_certificate(&params)?, BarrierTree::atom(obstacle)])?;
    println!("B = {tree}");

    let filter = SafetyFilter::new(tree.clone(), ClassKappa::default(), params, ControllerGains::default());
    let plan = WaypointPlan::new(vec![vec![[1.0, 0.05]], vec![[-1.0, 1.0]]], 0.05)?;
    let mut tracker = WaypointTracker::new(&plan);
    let mut x = EnsembleState::at_rest(vec![[-1.0, 0.0], [-1.0, 1.0]]);
    let mut closest = f64::INFINITY;
    for _ in 0..1500 {
        let nominal = nominal_control(&x, &plan, &mut tracker, &ControllerGains::default(), &params)?;
        let (u, _) = filter.safe_control(&x, &nominal)?;
        x = step(&x, &u, 0.01, &params)?;
        let p = x.positions[0];
        closest = closest.min((p[0] * p[0] + p[1] * p[1]).sqrt());
    }
    println!(
        "robot 1 ends at ({:.3}, {:.3}); closest approach to the obstacle center {closest:.3} m (radius 0.3)",
        x.positions[0][0], x.positions[0][1]
    );
    Ok(())
}
