//! Nominal go-to-goal waypoint controller and the QP safety filter around it.

use crate::barrier::{BarrierTree, ClassKappa, LinearControlConstraint};
use crate::certificates::TeamParams;
use crate::qp::{QpProblem, QpSolver, QpStatus};
use crate::state::{norm, sub, EnsembleState};
use crate::{Error, Result};

/// Ordered waypoints for each robot.
#[derive(Debug, Clone, PartialEq)]
pub struct WaypointPlan {
    pub waypoints: Vec<Vec<[f64; 2]>>,
    /// A waypoint counts as visited once the robot is within this distance, m.
    pub arrival_radius: f64,
    /// After the final waypoint, keep regulating to it (`true`) or only brake (`false`).
    pub hold_at_final: bool,
}

impl WaypointPlan {
    pub fn new(waypoints: Vec<Vec<[f64; 2]>>, arrival_radius: f64) -> Result<Self> {
        let plan = Self {
            waypoints,
            arrival_radius,
            hold_at_final: true,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(k) = self.waypoints.iter().position(|w| w.is_empty()) {
            return Err(Error::input(format!("robot {} has no waypoints", k + 1)));
        }
        if !(self.arrival_radius.is_finite() && self.arrival_radius > 0.0) {
            return Err(Error::input("arrival radius must be positive"));
        }
        if self.waypoints.iter().flatten().any(|w| !(w[0].is_finite() && w[1].is_finite())) {
            return Err(Error::input("waypoints must be finite"));
        }
        Ok(())
    }

    pub fn robot_count(&self) -> usize {
        self.waypoints.len()
    }

    pub fn total_waypoints(&self) -> usize {
        self.waypoints.iter().map(Vec::len).sum()
    }

    /// Plan with every waypoint shifted by `offset`.
    pub fn translated(&self, offset: [f64; 2]) -> Self {
        let mut plan = self.clone();
        for w in plan.waypoints.iter_mut().flatten() {
            w[0] += offset[0];
            w[1] += offset[1];
        }
        plan
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerGains {
    /// Position gain, 1/s².
    pub kp: f64,
    /// Velocity damping, 1/s.
    pub kd: f64,
}

impl Default for ControllerGains {
    fn default() -> Self {
        Self { kp: 1.0, kd: 2.0 }
    }
}

impl ControllerGains {
    pub fn validate(&self) -> Result<()> {
        if !(self.kp.is_finite() && self.kp > 0.0 && self.kd.is_finite() && self.kd > 0.0) {
            return Err(Error::input("controller gains must be positive"));
        }
        Ok(())
    }
}

/// Per-robot progress through a [`WaypointPlan`]. Indices only move forward.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WaypointTracker {
    /// Number of waypoints visited so far by each robot.
    pub visited: Vec<usize>,
}

impl WaypointTracker {
    pub fn new(plan: &WaypointPlan) -> Self {
        Self {
            visited: vec![0; plan.robot_count()],
        }
    }

    /// Current target of robot `i` (the final waypoint once all are visited).
    pub fn target(&self, plan: &WaypointPlan, i: usize) -> [f64; 2] {
        let w = &plan.waypoints[i];
        w[self.visited[i].min(w.len() - 1)]
    }

    pub fn finished(&self, plan: &WaypointPlan, i: usize) -> bool {
        self.visited[i] >= plan.waypoints[i].len()
    }

    /// Marks the current waypoint of each robot as visited when within the arrival radius.
    pub fn advance(&mut self, plan: &WaypointPlan, x: &EnsembleState) {
        for i in 0..plan.robot_count() {
            if !self.finished(plan, i)
                && norm(sub(x.positions[i], self.target(plan, i))) <= plan.arrival_radius
            {
                self.visited[i] += 1;
            }
        }
    }
}

fn clamp_accel(u: f64, bound: f64) -> f64 {
    u.clamp(-bound, bound)
}

/// PD go-to-goal law `û_i = -k_p (p_i - w_i) - k_d v_i`, clamped per coordinate
/// to `±max_accel`. Advances `tracker` first.
pub fn nominal_control(
    x: &EnsembleState,
    plan: &WaypointPlan,
    tracker: &mut WaypointTracker,
    gains: &ControllerGains,
    params: &TeamParams,
) -> Result<Vec<f64>> {
    if plan.robot_count() != x.robot_count() || tracker.visited.len() != x.robot_count() {
        return Err(Error::input("plan, tracker and state disagree on robot count"));
    }
    tracker.advance(plan, x);
    let mut u = Vec::with_capacity(2 * x.robot_count());
    for i in 0..x.robot_count() {
        let v = x.velocities[i];
        let hold = plan.hold_at_final || !tracker.finished(plan, i);
        let w = tracker.target(plan, i);
        for k in 0..2 {
            let spring = if hold { -gains.kp * (x.positions[i][k] - w[k]) } else { 0.0 };
            u.push(clamp_accel(spring - gains.kd * v[k], params.max_accel));
        }
    }
    Ok(u)
}

/// Braking command `clamp(-k_d v)` used when the filter cannot produce a certified control.
pub fn emergency_stop(x: &EnsembleState, gains: &ControllerGains, params: &TeamParams) -> Vec<f64> {
    x.velocities
        .iter()
        .flatten()
        .map(|v| clamp_accel(-gains.kd * v, params.max_accel))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SafeControlDiagnostics {
    pub constraint: Option<LinearControlConstraint>,
    pub qp_status: Option<QpStatus>,
    pub iterations: usize,
    pub kkt_residual: f64,
    /// `u* != û`.
    pub modified: bool,
    /// The emergency stop replaced the QP solution.
    pub fallback: bool,
    pub fallback_reason: Option<String>,
}

/// Minimally invasive filter: `argmin ‖u - û‖²` subject to the composite
/// barrier constraint and the per-coordinate acceleration box.
#[derive(Debug, Clone)]
pub struct SafetyFilter {
    pub tree: BarrierTree,
    pub alpha: ClassKappa,
    pub params: TeamParams,
    /// Used only for the emergency-stop fallback.
    pub gains: ControllerGains,
    pub solver: QpSolver,
}

impl SafetyFilter {
    pub fn new(tree: BarrierTree, alpha: ClassKappa, params: TeamParams, gains: ControllerGains) -> Self {
        Self {
            tree,
            alpha,
            params,
            gains,
            solver: QpSolver::default(),
        }
    }

    pub fn safe_control(&self, x: &EnsembleState, nominal: &[f64]) -> Result<(Vec<f64>, SafeControlDiagnostics)> {
        if nominal.len() != 2 * x.robot_count() {
            return Err(Error::input("nominal control has wrong dimension"));
        }
        let mut diag = SafeControlDiagnostics {
            constraint: None,
            qp_status: None,
            iterations: 0,
            kkt_residual: 0.0,
            modified: false,
            fallback: false,
            fallback_reason: None,
        };
        let constraint = match self.tree.eval_constraint(x, &self.alpha) {
            Ok(c) => c,
            Err(err @ (Error::InvarianceViolated { .. } | Error::DegenerateState { .. })) => {
                diag.fallback = true;
                diag.fallback_reason = Some(err.to_string());
                diag.modified = true;
                return Ok((emergency_stop(x, &self.gains, &self.params), diag));
            }
            Err(e) => return Err(e),
        };
        let bound = self.params.max_accel;
        let in_box = nominal.iter().all(|u| u.abs() <= bound);
        if in_box && constraint.is_satisfied(nominal) {
            diag.constraint = Some(constraint);
            diag.qp_status = Some(QpStatus::Optimal);
            return Ok((nominal.to_vec(), diag));
        }

        let mut problem = QpProblem::with_box(nominal.to_vec(), bound)?;
        problem.push_inequality(constraint.coeff.clone(), constraint.offset)?;
        let sol = self.solver.solve(&problem)?;
        diag.constraint = Some(constraint);
        diag.qp_status = Some(sol.status);
        diag.iterations = sol.iterations;
        diag.kkt_residual = sol.kkt_residual;
        diag.modified = true;
        if sol.status == QpStatus::Optimal {
            Ok((sol.u, diag))
        } else {
            diag.fallback = true;
            diag.fallback_reason = Some(format!("QP {}", sol.status.as_str()));
            Ok((emergency_stop(x, &self.gains, &self.params), diag))
        }
    }
}
