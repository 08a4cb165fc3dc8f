//! Dense QP for the minimally invasive correction:
//!
//! ```text
//! minimize   ‖u - û‖²
//! subject to a_k·u + c_k ≥ 0        for each inequality k
//!            lower_i ≤ u_i ≤ upper_i
//! ```
//!
//! Solved with a dual active-set method (Goldfarb–Idnani) specialized to the
//! identity Hessian. It starts at the unconstrained minimizer `û`, so a
//! feasible `û` is returned untouched, and it terminates either at the
//! optimum or with a subset of constraints that has no common solution.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

pub const DEFAULT_FEAS_TOL: f64 = 1e-8;
pub const DEFAULT_KKT_TOL: f64 = 1e-8;

/// `a·u + c ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Inequality {
    pub coeff: Vec<f64>,
    pub offset: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    pub nominal: Vec<f64>,
    pub inequalities: Vec<Inequality>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// Identifies one constraint of a [`QpProblem`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ConstraintId {
    Inequality(usize),
    Lower(usize),
    Upper(usize),
}

impl QpProblem {
    pub fn new(nominal: Vec<f64>, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let problem = Self {
            nominal,
            inequalities: Vec::new(),
            lower,
            upper,
        };
        problem.validate()?;
        Ok(problem)
    }

    /// Symmetric box `|u_i| ≤ bound`.
    pub fn with_box(nominal: Vec<f64>, bound: f64) -> Result<Self> {
        let m = nominal.len();
        Self::new(nominal, vec![-bound; m], vec![bound; m])
    }

    pub fn push_inequality(&mut self, coeff: Vec<f64>, offset: f64) -> Result<()> {
        if coeff.len() != self.dim() {
            return Err(Error::input(format!(
                "inequality has {} coefficients, problem dimension is {}",
                coeff.len(),
                self.dim()
            )));
        }
        if !(coeff.iter().all(|a| a.is_finite()) && offset.is_finite()) {
            return Err(Error::input("inequality coefficients must be finite"));
        }
        self.inequalities.push(Inequality { coeff, offset });
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.nominal.len()
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.dim();
        if m == 0 {
            return Err(Error::input("QP dimension must be positive"));
        }
        if self.lower.len() != m || self.upper.len() != m {
            return Err(Error::input("box bounds must match the problem dimension"));
        }
        if !self.nominal.iter().all(|v| v.is_finite()) {
            return Err(Error::input("nominal control must be finite"));
        }
        for (k, (lo, hi)) in self.lower.iter().zip(&self.upper).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::input(format!("invalid box [{lo}, {hi}] on coordinate {k}")));
            }
        }
        for (k, ineq) in self.inequalities.iter().enumerate() {
            if ineq.coeff.len() != m {
                return Err(Error::input(format!("inequality {k} has wrong dimension")));
            }
            if !(ineq.coeff.iter().all(|a| a.is_finite()) && ineq.offset.is_finite()) {
                return Err(Error::input(format!("inequality {k} is not finite")));
            }
        }
        Ok(())
    }

    pub fn objective(&self, u: &[f64]) -> f64 {
        u.iter().zip(&self.nominal).map(|(a, b)| (a - b) * (a - b)).sum()
    }

    /// Slack of one constraint at `u`; non-negative when satisfied.
    pub fn slack(&self, id: ConstraintId, u: &[f64]) -> f64 {
        match id {
            ConstraintId::Inequality(k) => {
                let ineq = &self.inequalities[k];
                ineq.coeff.iter().zip(u).map(|(a, u)| a * u).sum::<f64>() + ineq.offset
            }
            ConstraintId::Lower(k) => u[k] - self.lower[k],
            ConstraintId::Upper(k) => self.upper[k] - u[k],
        }
    }

    /// All constraint ids in canonical order: inequalities, lower bounds, upper bounds.
    pub fn constraint_ids(&self) -> Vec<ConstraintId> {
        let m = self.dim();
        (0..self.inequalities.len())
            .map(ConstraintId::Inequality)
            .chain((0..m).map(ConstraintId::Lower))
            .chain((0..m).map(ConstraintId::Upper))
            .collect()
    }

    fn normal(&self, id: ConstraintId) -> DVector<f64> {
        let m = self.dim();
        match id {
            ConstraintId::Inequality(k) => DVector::from_column_slice(&self.inequalities[k].coeff),
            ConstraintId::Lower(k) => {
                let mut e = DVector::zeros(m);
                e[k] = 1.0;
                e
            }
            ConstraintId::Upper(k) => {
                let mut e = DVector::zeros(m);
                e[k] = -1.0;
                e
            }
        }
    }

    pub fn is_feasible(&self, u: &[f64], tol: f64) -> bool {
        self.constraint_ids().into_iter().all(|id| self.slack(id, u) >= -tol)
    }
}

/// Lagrange multipliers for the objective `‖u - û‖²` (not `½‖u - û‖²`).
#[derive(Debug, Clone, PartialEq)]
pub struct Multipliers {
    pub inequality: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Multipliers {
    pub fn zeros(problem: &QpProblem) -> Self {
        Self {
            inequality: vec![0.0; problem.inequalities.len()],
            lower: vec![0.0; problem.dim()],
            upper: vec![0.0; problem.dim()],
        }
    }

    fn get_mut(&mut self, id: ConstraintId) -> &mut f64 {
        match id {
            ConstraintId::Inequality(k) => &mut self.inequality[k],
            ConstraintId::Lower(k) => &mut self.lower[k],
            ConstraintId::Upper(k) => &mut self.upper[k],
        }
    }

    fn get(&self, id: ConstraintId) -> f64 {
        match id {
            ConstraintId::Inequality(k) => self.inequality[k],
            ConstraintId::Lower(k) => self.lower[k],
            ConstraintId::Upper(k) => self.upper[k],
        }
    }
}

/// Largest violation among stationarity, primal feasibility, dual
/// feasibility and complementary slackness.
pub fn kkt_residual(problem: &QpProblem, u: &[f64], multipliers: &Multipliers) -> Result<f64> {
    let m = problem.dim();
    if u.len() != m
        || multipliers.inequality.len() != problem.inequalities.len()
        || multipliers.lower.len() != m
        || multipliers.upper.len() != m
    {
        return Err(Error::input("dimension mismatch in KKT residual"));
    }
    let mut stationarity: Vec<f64> = u
        .iter()
        .zip(&problem.nominal)
        .map(|(u, n)| 2.0 * (u - n))
        .collect();
    for (ineq, lam) in problem.inequalities.iter().zip(&multipliers.inequality) {
        for (s, a) in stationarity.iter_mut().zip(&ineq.coeff) {
            *s -= lam * a;
        }
    }
    for k in 0..m {
        stationarity[k] += -multipliers.lower[k] + multipliers.upper[k];
    }
    let mut residual = stationarity.iter().fold(0.0f64, |acc, s| acc.max(s.abs()));
    for id in problem.constraint_ids() {
        let slack = problem.slack(id, u);
        let lam = multipliers.get(id);
        residual = residual.max(-slack).max(-lam).max((lam * slack).abs());
    }
    Ok(residual)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Optimal,
    Infeasible,
    IterationLimit,
}

impl QpStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            QpStatus::Optimal => "optimal",
            QpStatus::Infeasible => "infeasible",
            QpStatus::IterationLimit => "iteration-limit",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub u: Vec<f64>,
    pub status: QpStatus,
    pub kkt_residual: f64,
    pub iterations: usize,
    pub active_set: Vec<ConstraintId>,
    pub multipliers: Multipliers,
    /// For infeasible problems: constraints with no common solution.
    pub infeasible_subset: Vec<ConstraintId>,
}

impl QpSolution {
    pub fn objective(&self, problem: &QpProblem) -> f64 {
        problem.objective(&self.u)
    }
}

#[derive(Debug, Clone)]
pub struct QpSolver {
    pub feas_tol: f64,
    pub kkt_tol: f64,
    /// Step limit; `None` means `100 · dim`.
    pub max_iterations: Option<usize>,
}

impl Default for QpSolver {
    fn default() -> Self {
        Self {
            feas_tol: DEFAULT_FEAS_TOL,
            kkt_tol: DEFAULT_KKT_TOL,
            max_iterations: None,
        }
    }
}

/// Current active set with its normals stacked as columns.
struct ActiveSet {
    ids: Vec<ConstraintId>,
    normals: Vec<DVector<f64>>,
}

impl ActiveSet {
    /// Returns `(z, r)`: the component of `n` orthogonal to the active
    /// normals and the least-squares coefficients of `n` on them.
    fn split(&self, n: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let q = self.ids.len();
        if q == 0 {
            return (n.clone(), DVector::zeros(0));
        }
        let m = n.len();
        let basis = DMatrix::from_fn(m, q, |row, col| self.normals[col][row]);
        let gram = basis.transpose() * &basis;
        let rhs = basis.transpose() * n;
        let r = match gram.clone().cholesky() {
            Some(chol) => chol.solve(&rhs),
            None => gram.lu().solve(&rhs).unwrap_or_else(|| DVector::zeros(q)),
        };
        let z = n - basis * &r;
        (z, r)
    }

    fn remove(&mut self, pos: usize) {
        self.ids.remove(pos);
        self.normals.remove(pos);
    }
}

impl QpSolver {
    pub fn new(tol: f64) -> Self {
        Self {
            feas_tol: tol,
            kkt_tol: tol,
            max_iterations: None,
        }
    }

    pub fn solve(&self, problem: &QpProblem) -> Result<QpSolution> {
        problem.validate()?;
        let m = problem.dim();
        let max_iter = self.max_iterations.unwrap_or(100 * m);
        let ids = problem.constraint_ids();

        let mut u = DVector::from_column_slice(&problem.nominal);
        // multipliers of ½‖u - û‖², doubled on output
        let mut lambda = Multipliers::zeros(problem);
        let mut active = ActiveSet {
            ids: Vec::new(),
            normals: Vec::new(),
        };
        let mut iterations = 0;

        loop {
            let Some(p) = self.most_violated(problem, &ids, &active.ids, u.as_slice()) else {
                return Ok(self.finish(problem, u, lambda, active.ids, QpStatus::Optimal, iterations, Vec::new()));
            };
            let n_p = problem.normal(p);
            *lambda.get_mut(p) = 0.0;

            loop {
                if iterations >= max_iter {
                    return Ok(self.finish(
                        problem,
                        u,
                        lambda,
                        active.ids,
                        QpStatus::IterationLimit,
                        iterations,
                        Vec::new(),
                    ));
                }
                iterations += 1;

                let (z, r) = active.split(&n_p);
                // partial step: largest dual step keeping active multipliers ≥ 0
                let mut t_dual = f64::INFINITY;
                let mut leaving = None;
                for (pos, &id) in active.ids.iter().enumerate() {
                    if r[pos] > 0.0 {
                        let ratio = lambda.get(id) / r[pos];
                        if ratio < t_dual {
                            t_dual = ratio;
                            leaving = Some(pos);
                        }
                    }
                }
                let z_norm = z.norm();
                let t_primal = if z_norm > 1e-12 * n_p.norm().max(1.0) {
                    -problem.slack(p, u.as_slice()) / z.dot(&n_p)
                } else {
                    f64::INFINITY
                };
                let t = t_primal.min(t_dual);
                if !t.is_finite() {
                    let mut subset = active.ids.clone();
                    subset.push(p);
                    subset.sort();
                    return Ok(self.finish(
                        problem,
                        u,
                        lambda,
                        active.ids,
                        QpStatus::Infeasible,
                        iterations,
                        subset,
                    ));
                }
                if t_primal.is_finite() {
                    u += &z * t;
                }
                for (pos, &id) in active.ids.iter().enumerate() {
                    *lambda.get_mut(id) -= t * r[pos];
                }
                *lambda.get_mut(p) += t;

                if t_primal <= t_dual {
                    active.ids.push(p);
                    active.normals.push(n_p.clone());
                    break;
                }
                let pos = leaving.expect("finite dual step has a leaving constraint");
                *lambda.get_mut(active.ids[pos]) = 0.0;
                active.remove(pos);
            }
        }
    }

    /// Most violated inactive constraint; ties go to the lowest id.
    fn most_violated(
        &self,
        problem: &QpProblem,
        ids: &[ConstraintId],
        active: &[ConstraintId],
        u: &[f64],
    ) -> Option<ConstraintId> {
        let mut best: Option<(ConstraintId, f64)> = None;
        for &id in ids {
            if active.contains(&id) {
                continue;
            }
            let slack = problem.slack(id, u);
            if slack < -self.feas_tol && best.is_none_or(|(_, s)| slack < s) {
                best = Some((id, slack));
            }
        }
        best.map(|(id, _)| id)
    }

    #[allow(clippy::too_many_arguments)]
    fn finish(
        &self,
        problem: &QpProblem,
        u: DVector<f64>,
        lambda: Multipliers,
        mut active_set: Vec<ConstraintId>,
        mut status: QpStatus,
        iterations: usize,
        infeasible_subset: Vec<ConstraintId>,
    ) -> QpSolution {
        let mut u: Vec<f64> = u.iter().copied().collect();
        for (k, v) in u.iter_mut().enumerate() {
            *v = v.clamp(problem.lower[k], problem.upper[k]);
        }
        let multipliers = Multipliers {
            inequality: lambda.inequality.iter().map(|l| 2.0 * l).collect(),
            lower: lambda.lower.iter().map(|l| 2.0 * l).collect(),
            upper: lambda.upper.iter().map(|l| 2.0 * l).collect(),
        };
        let kkt = kkt_residual(problem, &u, &multipliers).unwrap_or(f64::INFINITY);
        if status == QpStatus::Optimal && kkt > self.kkt_tol.max(self.feas_tol) {
            // optimal in exact arithmetic but numerically degraded
            status = QpStatus::IterationLimit;
        }
        active_set.sort();
        QpSolution {
            u,
            status,
            kkt_residual: kkt,
            iterations,
            active_set,
            multipliers,
            infeasible_subset,
        }
    }
}
