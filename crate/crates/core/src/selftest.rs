//! Built-in numerical self-checks: analytic derivatives against finite
//! differences, the QP solver against a grid oracle, and composition
//! membership against a boolean truth table.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::barrier::{AffineAtom, BarrierAtom, BarrierTree, ClassKappa, NodeKind};
use crate::certificates::{
    build_static_certificate_with_alternatives, Arena, ArenaSampler, ConnectivityGraph, StateSampler,
    TeamParams,
};
use crate::dynamics::DoubleIntegrator;
use crate::oracle::{
    central_directional, central_gradient, forward_directional, grid_search_qp, refined_grid_search_qp, relative_error,
};
use crate::qp::{QpProblem, QpSolver, QpStatus};
use crate::state::EnsembleState;
use crate::Result;

pub const FD_STEP: f64 = 1e-6;
/// Domain margin below which a fixed central-difference step overshoots the
/// curvature of a square-root atom.
pub const EDGE_BAND: f64 = 1e-3;
pub const GRADIENT_TOL: f64 = 1e-5;
pub const QP_GAP_TOL: f64 = 1e-3;
pub const KKT_TOL: f64 = 1e-8;
pub const GRID_STEP: f64 = 0.01;

/// Outcome of one suite: the worst error seen over `cases` checks.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteResult {
    pub name: &'static str,
    pub cases: usize,
    pub max_error: f64,
    pub tolerance: f64,
}

impl SuiteResult {
    pub fn passed(&self) -> bool {
        self.cases > 0 && self.max_error < self.tolerance
    }
}

/// Depth-first atoms of a tree.
pub fn atoms(tree: &BarrierTree) -> Vec<&dyn BarrierAtom> {
    match tree.as_atom() {
        Some(a) => vec![a],
        None => tree.children().iter().flat_map(atoms).collect(),
    }
}

/// Membership by direct boolean evaluation: AND over products, OR over sums.
pub fn truth_table_membership(tree: &BarrierTree, x: &EnsembleState) -> Result<bool> {
    Ok(match tree.kind() {
        NodeKind::Atom => tree.as_atom().expect("atom node").raw_value(x)? > 0.0,
        NodeKind::Product => {
            let mut all = true;
            for c in tree.children() {
                all &= truth_table_membership(c, x)?;
            }
            all
        }
        NodeKind::Sum => {
            let mut any = false;
            for c in tree.children() {
                any |= truth_table_membership(c, x)?;
            }
            any
        }
    })
}

/// Four robots, all pairs safe, edge 2-3 required, and 1 and 4 each
/// connected to robot 2 or 3.
pub fn reference_params() -> TeamParams {
    TeamParams::new(4, 2.0, 0.5, 0.15, 0.6).expect("valid reference parameters")
}

pub fn reference_tree(params: &TeamParams) -> Result<BarrierTree> {
    let graph = ConnectivityGraph::new(4, [(1, 2)])?;
    build_static_certificate_with_alternatives(params, &graph, &[vec![(0, 1), (0, 2)], vec![(1, 3), (2, 3)]])
}

fn reference_states(count: usize, seed: u64) -> Result<(TeamParams, BarrierTree, Vec<EnsembleState>)> {
    let params = reference_params();
    let tree = reference_tree(&params)?;
    let mut sampler = ArenaSampler::new(&params, Arena::square(0.5), seed).inside(tree.clone());
    let states = (0..count).map(|_| sampler.sample()).collect::<Result<Vec<_>>>()?;
    Ok((params, tree, states))
}

fn log_b(tree: &BarrierTree, x: &EnsembleState, flat: &[f64]) -> Result<f64> {
    Ok(tree.eval_value(&x.with_vector(flat)?)?.log_value)
}

/// True when some atom sits within `band` of its kink, where one-sided and
/// central differences disagree.
fn near_kink(tree: &BarrierTree, x: &EnsembleState, band: f64) -> Result<bool> {
    for a in atoms(tree) {
        let h = a.raw_value(x)?;
        if h.is_finite() && h.abs() < band {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Gradients of the atoms with `h > 0` (those that make up `B` at `x`) and
/// their closed-form Lie derivatives against central differences of `h`.
/// Central-difference step for an atom `margin` away from its domain edge:
/// [`FD_STEP`] outside [`EDGE_BAND`], shrinking in proportion inside it.
pub fn fd_step_for(margin: Option<f64>) -> f64 {
    match margin {
        Some(m) if m < EDGE_BAND => FD_STEP * (m / EDGE_BAND).max(1e-3),
        _ => FD_STEP,
    }
}

pub fn gradient_suite(count: usize, seed: u64) -> Result<SuiteResult> {
    let (_, tree, states) = reference_states(count, seed)?;
    let dyn_ = DoubleIntegrator;
    let mut cases = 0;
    let mut worst = 0.0f64;
    for x in &states {
        let flat = x.to_vector();
        for atom in atoms(&tree) {
            if atom.raw_value(x)? <= 0.0 {
                continue;
            }
            let step = fd_step_for(atom.domain_margin(x));
            let fd = central_gradient(|v| atom.raw_value(&x.with_vector(v)?), &flat, step)?;
            if !fd.iter().all(|g| g.is_finite()) {
                // atom undefined within one step of x
                continue;
            }
            let grad = atom.gradient(x)?;
            worst = worst.max(relative_error(&grad, &fd, 1.0));
            let lie = [vec![dyn_.lie_drift(x, &fd)], dyn_.lie_input(x, &fd)].concat();
            let closed = [vec![atom.drift_term(x)?], atom.control_row(x)?].concat();
            worst = worst.max(relative_error(&closed, &lie, 1.0));
            cases += 1;
        }
    }
    Ok(SuiteResult {
        name: "atom gradients",
        cases,
        max_error: worst,
        tolerance: GRADIENT_TOL,
    })
}

/// Normalized constraint `a = ∂ln B/∂v`, `c - α(B)/B = ∇ln B · f(x)` against
/// central differences of `ln B`.
pub fn constraint_suite(count: usize, seed: u64) -> Result<SuiteResult> {
    let (_, tree, states) = reference_states(count, seed)?;
    let alpha = ClassKappa::default();
    let mut cases = 0;
    let mut worst = 0.0f64;
    for x in &states {
        if near_kink(&tree, x, 1e-4)? {
            continue;
        }
        let flat = x.to_vector();
        let c = tree.eval_constraint(x, &alpha)?;
        let f = |v: &[f64]| log_b(&tree, x, v);
        let grad = central_gradient(f, &flat, FD_STEP)?;
        let drift = central_directional(f, &flat, &DoubleIntegrator.drift(x), FD_STEP)?;
        let mut fd = grad[x.dim() / 2..].to_vec();
        fd.push(drift);
        let mut analytic = c.coeff.clone();
        analytic.push(c.offset - alpha.ratio_from_log(c.log_value));
        worst = worst.max(relative_error(&analytic, &fd, 1.0));
        cases += 1;
    }
    Ok(SuiteResult {
        name: "constraint coefficients",
        cases,
        max_error: worst,
        tolerance: GRADIENT_TOL,
    })
}

/// B-derivative along random directions against a one-sided difference.
pub fn b_derivative_suite(count: usize, seed: u64) -> Result<SuiteResult> {
    let (_, tree, states) = reference_states(count, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut worst = 0.0f64;
    let mut cases = 0;
    for x in &states {
        let flat = x.to_vector();
        let q: Vec<f64> = (0..flat.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let fd = forward_directional(|v| Ok(tree.eval_value(&x.with_vector(v)?)?.value), &flat, &q, 1e-8)?;
        if !fd.is_finite() {
            continue;
        }
        let bd = tree.b_derivative(x, &q)?;
        worst = worst.max(relative_error(&[bd], &[fd], 1.0));
        cases += 1;
    }
    Ok(SuiteResult {
        name: "B-derivative",
        cases,
        max_error: worst,
        tolerance: 1e-4,
    })
}

/// Random box-constrained QP in 4 variables with 3 inequalities that are
/// all satisfied at a random interior point.
pub fn random_qp(rng: &mut ChaCha8Rng, bound: f64) -> QpProblem {
    let nominal: Vec<f64> = (0..4).map(|_| rng.gen_range(-2.0 * bound..2.0 * bound)).collect();
    let mut p = QpProblem::with_box(nominal, bound).expect("valid box");
    let anchor: Vec<f64> = (0..4).map(|_| rng.gen_range(-bound..bound)).collect();
    for _ in 0..3 {
        let a: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let at: f64 = a.iter().zip(&anchor).map(|(a, u)| a * u).sum();
        let slack = rng.gen_range(0.0..0.3);
        p.push_inequality(a, slack - at).expect("finite row");
    }
    p
}

/// Objective gaps against the grid oracles, KKT residual of optimal returns,
/// and bitwise idempotence when the nominal point is already feasible.
///
/// The plain grid only yields feasible points, so its objective bounds the
/// optimum from above and the signed gap `solver - grid` must stay below the
/// tolerance. The refined grid resolves oblique optima closely enough for a
/// two-sided comparison.
pub fn qp_suites(count: usize, seed: u64) -> Result<[SuiteResult; 4]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let problems: Vec<QpProblem> = (0..count).map(|_| random_qp(&mut rng, 0.5)).collect();
    let solver = QpSolver::default();
    let solved = problems
        .par_iter()
        .map(|p| {
            Ok((
                solver.solve(p)?,
                grid_search_qp(p, GRID_STEP),
                refined_grid_search_qp(p, GRID_STEP, 2),
            ))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut gap = f64::NEG_INFINITY;
    let mut refined_gap = 0.0f64;
    let mut gap_cases = 0;
    let mut kkt = 0.0f64;
    let mut kkt_cases = 0;
    for (p, (sol, grid, refined)) in problems.iter().zip(&solved) {
        if sol.status == QpStatus::Optimal {
            kkt = kkt.max(sol.kkt_residual);
            kkt_cases += 1;
        }
        match (grid, refined) {
            (Some((best, _)), Some((fine, _))) if sol.status == QpStatus::Optimal => {
                let obj = sol.objective(p);
                gap = gap.max(obj - best);
                refined_gap = refined_gap.max((obj - fine).abs());
                gap_cases += 1;
            }
            // oracle found a feasible point the solver missed
            (Some(_), _) => {
                gap = f64::INFINITY;
                refined_gap = f64::INFINITY;
            }
            _ => {}
        }
    }

    let mut mismatches = 0;
    let mut slack_cases = 0;
    for _ in 0..count {
        let mut p = random_qp(&mut rng, 0.5);
        let inside: Vec<f64> = (0..4).map(|_| rng.gen_range(-0.5..0.5)).collect();
        p.nominal = inside;
        for ineq in &mut p.inequalities {
            let at: f64 = ineq.coeff.iter().zip(&p.nominal).map(|(a, u)| a * u).sum();
            ineq.offset = ineq.offset.max(-at);
        }
        let sol = solver.solve(&p)?;
        slack_cases += 1;
        if sol.u != p.nominal || sol.status != QpStatus::Optimal {
            mismatches += 1;
        }
    }

    Ok([
        SuiteResult {
            name: "QP objective excess over grid",
            cases: gap_cases,
            max_error: gap,
            tolerance: QP_GAP_TOL,
        },
        SuiteResult {
            name: "QP objective gap vs refined grid",
            cases: gap_cases,
            max_error: refined_gap,
            tolerance: QP_GAP_TOL,
        },
        SuiteResult {
            name: "QP KKT residual",
            cases: kkt_cases,
            max_error: kkt,
            tolerance: KKT_TOL,
        },
        SuiteResult {
            name: "QP idempotence mismatches",
            cases: slack_cases,
            max_error: mismatches as f64,
            tolerance: 0.5,
        },
    ])
}

fn random_affine(rng: &mut ChaCha8Rng, label: String, dim: usize) -> BarrierTree {
    let weights = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    BarrierTree::atom(AffineAtom::new(label, weights, rng.gen_range(-0.5..0.5)))
}

/// Random tree of depth two over affine atoms on a state of dimension `dim`.
pub fn random_two_level_tree(rng: &mut ChaCha8Rng, dim: usize) -> Result<BarrierTree> {
    let mut next = 0;
    let mut leaf = |rng: &mut ChaCha8Rng| {
        next += 1;
        random_affine(rng, format!("h{next}"), dim)
    };
    let compose = |rng: &mut ChaCha8Rng, children: Vec<BarrierTree>| {
        if rng.gen_bool(0.5) {
            BarrierTree::compose_and(children)
        } else {
            BarrierTree::compose_or(children)
        }
    };
    let mut children = Vec::new();
    for _ in 0..rng.gen_range(2..=4) {
        if rng.gen_bool(0.3) {
            children.push(leaf(rng));
        } else {
            let grand = (0..rng.gen_range(2..=3)).map(|_| leaf(rng)).collect();
            children.push(compose(rng, grand)?);
        }
    }
    compose(rng, children)
}

/// Random two-robot state with entries uniform in `[-1, 1]`.
pub fn random_pair_state(rng: &mut ChaCha8Rng) -> EnsembleState {
    let mut v = || [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
    EnsembleState {
        positions: vec![v(), v()],
        velocities: vec![v(), v()],
        t: 0.0,
    }
}

/// Product/sum membership against AND/OR of child memberships.
pub fn truth_table_suite(count: usize, seed: u64) -> Result<SuiteResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mismatches = 0;
    for _ in 0..count {
        let x = random_pair_state(&mut rng);
        let tree = random_two_level_tree(&mut rng, x.dim())?;
        if tree.membership(&x)? != truth_table_membership(&tree, &x)? {
            mismatches += 1;
        }
    }
    Ok(SuiteResult {
        name: "composition truth table mismatches",
        cases: count,
        max_error: mismatches as f64,
        tolerance: 0.5,
    })
}

/// All suites with their default sizes.
pub fn run_all(seed: u64) -> Result<Vec<SuiteResult>> {
    let [gap, refined, kkt, idem] = qp_suites(100, seed)?;
    Ok(vec![
        gradient_suite(100, seed)?,
        constraint_suite(100, seed)?,
        b_derivative_suite(100, seed)?,
        gap,
        refined,
        kkt,
        idem,
        truth_table_suite(1000, seed)?,
    ])
}
