//! The dual active-set QP: projection onto a halfspace inside a box, and an
//! infeasible problem with its conflicting constraints.

use barrier_compose::prelude::*;
use barrier_compose::qp::kkt_residual;

fn main() -> Result<()> {
    let solver = QpSolver::default();

    // project (0, 0) onto u1 >= 2 inside |u| <= 3
    let mut p = QpProblem::with_box(vec![0.0, 0.0], 3.0)?;
    p.push_inequality(vec![1.0, 0.0], -2.0)?;
    let s = solver.solve(&p)?;
    println!(
        "u* = {:?}, status {}, multiplier {}, KKT {:.1e}, active {:?}",
        s.u,
        s.status.as_str(),
        s.multipliers.inequality[0],
        kkt_residual(&p, &s.u, &s.multipliers)?,
        s.active_set
    );

    // a feasible nominal point comes back untouched
    let mut p = QpProblem::with_box(vec![2.5, -1.0], 3.0)?;
    p.push_inequality(vec![1.0, 0.0], -2.0)?;
    let s = solver.solve(&p)?;
    println!("feasible nominal returned as {:?} after {} iterations", s.u, s.iterations);

    // u1 + u2 >= 3 cannot hold when |u| <= 1
    let mut p = QpProblem::with_box(vec![0.0, 0.0], 1.0)?;
    p.push_inequality(vec![1.0, 1.0], -3.0)?;
    let s = solver.solve(&p)?;
    println!("status {}, conflicting constraints {:?}", s.status.as_str(), s.infeasible_subset);
    Ok(())
}
