//! Pairwise safety and connectivity atoms for double integrators, composite
//! certificate builders, and a sampling audit of admissible-control feasibility.
//!
//! Pair quantities follow `Δp = p_i - p_j`, `Δv = v_i - v_j`, `n = Δp / ‖Δp‖`
//! and `s = n·Δv` (the rate of change of the pair distance). With braking
//! authority `a`:
//!
//! * safety: `h = 2 sqrt(a (‖Δp‖ - D_s)) + s`
//! * connectivity: `h̄ = 2 sqrt(a (D_c - ‖Δp‖)) - s`
//!
//! Outside the square-root domain the raw value is `-inf` and the barrier is 0.
//! Robot indices are 0-based in the API; labels and error messages use
//! 1-based robot numbers (`B12` is the safety atom of the first two robots).

use std::collections::BTreeSet;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::barrier::{BarrierAtom, BarrierTree, ClassKappa, LinearControlConstraint};
use crate::state::{dot, EnsembleState};
use crate::{Error, Result};

/// Square-root arguments in `(-DOMAIN_TOL, 0)` are clamped to zero.
pub const DOMAIN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TeamParams {
    pub robot_count: usize,
    /// Acceleration bound per robot and per coordinate, m/s².
    pub max_accel: f64,
    /// Speed bound per robot, m/s.
    pub max_speed: f64,
    pub safety_distance: f64,
    pub connectivity_distance: f64,
}

impl TeamParams {
    pub fn new(
        robot_count: usize,
        max_accel: f64,
        max_speed: f64,
        safety_distance: f64,
        connectivity_distance: f64,
    ) -> Result<Self> {
        let params = Self {
            robot_count,
            max_accel,
            max_speed,
            safety_distance,
            connectivity_distance,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if self.robot_count < 2 {
            return Err(Error::input(format!(
                "a team needs at least 2 robots, got {}",
                self.robot_count
            )));
        }
        if !(self.max_accel.is_finite() && self.max_accel > 0.0) {
            return Err(Error::input("max_accel must be positive"));
        }
        if !(self.max_speed.is_finite() && self.max_speed > 0.0) {
            return Err(Error::input("max_speed must be positive"));
        }
        if !(self.safety_distance > 0.0 && self.safety_distance < self.connectivity_distance)
            || !self.connectivity_distance.is_finite()
        {
            return Err(Error::input(format!(
                "need 0 < D_s < D_c, got D_s = {}, D_c = {}",
                self.safety_distance, self.connectivity_distance
            )));
        }
        Ok(())
    }

    /// All pairs `(i, j)` with `i < j`, lexicographic.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        let n = self.robot_count;
        (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect()
    }
}

/// Geometry shared by both pair atoms at one state.
struct PairGeometry {
    dist: f64,
    n: [f64; 2],
    dv: [f64; 2],
    s: f64,
}

impl PairGeometry {
    fn new(x: &EnsembleState, i: usize, j: usize) -> Result<Self> {
        let count = x.robot_count();
        if i >= count || j >= count {
            return Err(Error::input(format!(
                "pair ({}, {}) out of range for {count} robots",
                i + 1,
                j + 1
            )));
        }
        let dp = x.relative_position(i, j);
        let dist = dp[0].hypot(dp[1]);
        if dist == 0.0 {
            return Err(Error::DegenerateState { i: i + 1, j: j + 1 });
        }
        let n = [dp[0] / dist, dp[1] / dist];
        let dv = x.relative_velocity(i, j);
        Ok(Self {
            dist,
            n,
            dv,
            s: dot(n, dv),
        })
    }

    /// `∂(n·Δv)/∂Δp = (Δv - s n) / ‖Δp‖`.
    fn projection_gradient(&self) -> [f64; 2] {
        [
            (self.dv[0] - self.s * self.n[0]) / self.dist,
            (self.dv[1] - self.s * self.n[1]) / self.dist,
        ]
    }

    /// `(‖Δv‖² - s²) / ‖Δp‖`, the tangential part of `d/dt (n·Δv)`.
    fn tangential_rate(&self) -> f64 {
        (dot(self.dv, self.dv) - self.s * self.s) / self.dist
    }
}

fn sqrt_margin(arg: f64) -> Option<f64> {
    if arg >= 0.0 {
        Some(arg.sqrt())
    } else if arg > -DOMAIN_TOL {
        Some(0.0)
    } else {
        None
    }
}

/// Scatters a pair gradient `(∂/∂Δp, ∂/∂Δv)` into the full state gradient.
fn scatter(x: &EnsembleState, i: usize, j: usize, gp: [f64; 2], gv: [f64; 2]) -> Vec<f64> {
    let mut g = vec![0.0; x.dim()];
    for k in 0..2 {
        g[x.position_index(i) + k] += gp[k];
        g[x.position_index(j) + k] -= gp[k];
        g[x.velocity_index(i) + k] += gv[k];
        g[x.velocity_index(j) + k] -= gv[k];
    }
    g
}

fn pair_row(x: &EnsembleState, i: usize, j: usize, dir: [f64; 2]) -> Vec<f64> {
    let mut row = vec![0.0; 2 * x.robot_count()];
    for k in 0..2 {
        row[2 * i + k] += dir[k];
        row[2 * j + k] -= dir[k];
    }
    row
}

/// Braking-distance collision-avoidance atom for robots `i < j`.
#[derive(Debug, Clone, PartialEq)]
pub struct SafetyPairAtom {
    pub i: usize,
    pub j: usize,
    pub max_accel: f64,
    pub safety_distance: f64,
}

impl SafetyPairAtom {
    pub fn new(i: usize, j: usize, params: &TeamParams) -> Result<Self> {
        let (i, j) = ordered_pair(i, j, params.robot_count)?;
        Ok(Self {
            i,
            j,
            max_accel: params.max_accel,
            safety_distance: params.safety_distance,
        })
    }

    fn margin(&self, geo: &PairGeometry) -> Option<f64> {
        sqrt_margin(self.max_accel * (geo.dist - self.safety_distance))
    }

    /// Square-root term; an error on the exact domain boundary where `∇h` is unbounded.
    fn active_margin(&self, geo: &PairGeometry) -> Result<Option<f64>> {
        match self.margin(geo) {
            Some(z) if z == 0.0 => Err(Error::InvarianceViolated {
                atoms: vec![self.label()],
            }),
            other => Ok(other),
        }
    }
}

impl BarrierAtom for SafetyPairAtom {
    fn label(&self) -> String {
        format!("B{}{}", self.i + 1, self.j + 1)
    }

    fn domain_margin(&self, x: &EnsembleState) -> Option<f64> {
        PairGeometry::new(x, self.i, self.j).ok().map(|g| g.dist - self.safety_distance)
    }

    fn raw_value(&self, x: &EnsembleState) -> Result<f64> {
        let geo = PairGeometry::new(x, self.i, self.j)?;
        Ok(match self.margin(&geo) {
            Some(z) => 2.0 * z + geo.s,
            None => f64::NEG_INFINITY,
        })
    }

    fn gradient(&self, x: &EnsembleState) -> Result<Vec<f64>> {
        let geo = PairGeometry::new(x, self.i, self.j)?;
        let Some(z) = self.active_margin(&geo)? else {
            return Ok(vec![0.0; x.dim()]);
        };
        let radial = self.max_accel / z;
        let proj = geo.projection_gradient();
        let gp = [radial * geo.n[0] + proj[0], radial * geo.n[1] + proj[1]];
        Ok(scatter(x, self.i, self.j, gp, geo.n))
    }

    fn drift_term(&self, x: &EnsembleState) -> Result<f64> {
        let geo = PairGeometry::new(x, self.i, self.j)?;
        Ok(match self.active_margin(&geo)? {
            Some(z) => self.max_accel * geo.s / z + geo.tangential_rate(),
            None => 0.0,
        })
    }

    fn control_row(&self, x: &EnsembleState) -> Result<Vec<f64>> {
        let geo = PairGeometry::new(x, self.i, self.j)?;
        Ok(match self.margin(&geo) {
            Some(_) => pair_row(x, self.i, self.j, geo.n),
            None => vec![0.0; 2 * x.robot_count()],
        })
    }
}

/// Worst-case-acceleration connectivity atom for robots `i < j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectivityPairAtom {
    pub i: usize,
    pub j: usize,
    pub max_accel: f64,
    pub connectivity_distance: f64,
}

impl ConnectivityPairAtom {
    pub fn new(i: usize, j: usize, params: &TeamParams) -> Result<Self> {
        let (i, j) = ordered_pair(i, j, params.robot_count)?;
        Ok(Self {
            i,
            j,
            max_accel: params.max_accel,
            connectivity_distance: params.connectivity_distance,
        })
    }

    fn margin(&self, geo: &PairGeometry) -> Option<f64> {
        sqrt_margin(self.max_accel * (self.connectivity_distance - geo.dist))
    }

    fn active_margin(&self, geo: &PairGeometry) -> Result<Option<f64>> {
        match self.margin(geo) {
            Some(z) if z == 0.0 => Err(Error::InvarianceViolated {
                atoms: vec![self.label()],
            }),
            other => Ok(other),
        }
    }
}

impl BarrierAtom for ConnectivityPairAtom {
    fn label(&self) -> String {
        format!("Bc{}{}", self.i + 1, self.j + 1)
    }

    fn domain_margin(&self, x: &EnsembleState) -> Option<f64> {
        PairGeometry::new(x, self.i, self.j).ok().map(|g| self.connectivity_distance - g.dist)
    }

    fn raw_value(&self, x: &EnsembleState) -> Result<f64> {
        let geo = PairGeometry::new(x, self.i, self.j)?;
        Ok(match self.margin(&geo) {
            Some(z) => 2.0 * z - geo.s,
            None => f64::NEG_INFINITY,
        })
    }

    fn gradient(&self, x: &EnsembleState) -> Result<Vec<f64>> {
        let geo = PairGeometry::new(x, self.i, self.j)?;
        let Some(z) = self.active_margin(&geo)? else {
            return Ok(vec![0.0; x.dim()]);
        };
        let radial = self.max_accel / z;
        let proj = geo.projection_gradient();
        let gp = [-radial * geo.n[0] - proj[0], -radial * geo.n[1] - proj[1]];
        Ok(scatter(x, self.i, self.j, gp, [-geo.n[0], -geo.n[1]]))
    }

    fn drift_term(&self, x: &EnsembleState) -> Result<f64> {
        let geo = PairGeometry::new(x, self.i, self.j)?;
        Ok(match self.active_margin(&geo)? {
            Some(z) => -self.max_accel * geo.s / z - geo.tangential_rate(),
            None => 0.0,
        })
    }

    fn control_row(&self, x: &EnsembleState) -> Result<Vec<f64>> {
        let geo = PairGeometry::new(x, self.i, self.j)?;
        Ok(match self.margin(&geo) {
            Some(_) => pair_row(x, self.i, self.j, [-geo.n[0], -geo.n[1]]),
            None => vec![0.0; 2 * x.robot_count()],
        })
    }
}

fn ordered_pair(i: usize, j: usize, n: usize) -> Result<(usize, usize)> {
    if i == j {
        return Err(Error::input(format!("pair ({}, {}) is a self-loop", i + 1, j + 1)));
    }
    if i >= n || j >= n {
        return Err(Error::input(format!(
            "pair ({}, {}) out of range for {n} robots",
            i + 1,
            j + 1
        )));
    }
    Ok((i.min(j), i.max(j)))
}

/// `h_ij` and its state gradient.
pub fn safety_h(x: &EnsembleState, i: usize, j: usize, params: &TeamParams) -> Result<(f64, Vec<f64>)> {
    let atom = SafetyPairAtom::new(i, j, params)?;
    Ok((atom.raw_value(x)?, atom.gradient(x)?))
}

/// `h̄_ij` and its state gradient.
pub fn connectivity_h(
    x: &EnsembleState,
    i: usize,
    j: usize,
    params: &TeamParams,
) -> Result<(f64, Vec<f64>)> {
    let atom = ConnectivityPairAtom::new(i, j, params)?;
    Ok((atom.raw_value(x)?, atom.gradient(x)?))
}

/// Required connectivity graph over robots `0..n`; edges stored as `(i, j)`, `i < j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConnectivityGraph {
    pub robot_count: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl ConnectivityGraph {
    pub fn new(robot_count: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut set = BTreeSet::new();
        for (i, j) in edges {
            let edge = ordered_pair(i, j, robot_count)?;
            if !set.insert(edge) {
                return Err(Error::input(format!(
                    "duplicate edge ({}, {})",
                    edge.0 + 1,
                    edge.1 + 1
                )));
            }
        }
        Ok(Self {
            robot_count,
            edges: set,
        })
    }

    /// Builds a graph from 1-based robot numbers.
    pub fn from_one_based(
        robot_count: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let mut shifted = Vec::new();
        for (i, j) in edges {
            if i == 0 || j == 0 {
                return Err(Error::input("robot numbers are 1-based"));
            }
            shifted.push((i - 1, j - 1));
        }
        Self::new(robot_count, shifted)
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// `true` when every edge's endpoints are closer than `distance`.
    pub fn is_satisfied(&self, x: &EnsembleState, distance: f64) -> bool {
        self.edges().all(|(i, j)| x.distance(i, j) < distance)
    }
}

/// Non-empty set of allowable connectivity graphs over one robot set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AllowableGraphSet {
    graphs: Vec<ConnectivityGraph>,
}

impl AllowableGraphSet {
    pub fn new(graphs: Vec<ConnectivityGraph>) -> Result<Self> {
        let Some(first) = graphs.first() else {
            return Err(Error::input("allowable graph set is empty"));
        };
        if graphs.iter().any(|g| g.robot_count != first.robot_count) {
            return Err(Error::input("allowable graphs must share the same robot set"));
        }
        Ok(Self { graphs })
    }

    pub fn graphs(&self) -> &[ConnectivityGraph] {
        &self.graphs
    }

    /// Index of the first graph whose edges are all within `distance`.
    pub fn first_satisfied(&self, x: &EnsembleState, distance: f64) -> Option<usize> {
        self.graphs.iter().position(|g| g.is_satisfied(x, distance))
    }
}

fn safety_atoms(params: &TeamParams) -> Result<Vec<BarrierTree>> {
    params
        .pairs()
        .into_iter()
        .map(|(i, j)| Ok(BarrierTree::atom(SafetyPairAtom::new(i, j, params)?)))
        .collect()
}

fn connectivity_atom(params: &TeamParams, (i, j): (usize, usize)) -> Result<BarrierTree> {
    Ok(BarrierTree::atom(ConnectivityPairAtom::new(i, j, params)?))
}

fn check_graph(params: &TeamParams, graph: &ConnectivityGraph) -> Result<()> {
    if graph.robot_count != params.robot_count {
        return Err(Error::input(format!(
            "graph has {} robots, team has {}",
            graph.robot_count, params.robot_count
        )));
    }
    Ok(())
}

/// Product of the safety atoms of all pairs.
pub fn build_safety_certificate(params: &TeamParams) -> Result<BarrierTree> {
    params.validate()?;
    BarrierTree::compose_and(safety_atoms(params)?)
}

/// Safety atoms of all pairs times one connectivity atom per required edge.
pub fn build_static_certificate(params: &TeamParams, graph: &ConnectivityGraph) -> Result<BarrierTree> {
    build_static_certificate_with_alternatives(params, graph, &[])
}

/// [`build_static_certificate`] with additional OR-groups: each group is a
/// sum of connectivity atoms, at least one of which must hold.
pub fn build_static_certificate_with_alternatives(
    params: &TeamParams,
    graph: &ConnectivityGraph,
    or_groups: &[Vec<(usize, usize)>],
) -> Result<BarrierTree> {
    params.validate()?;
    check_graph(params, graph)?;
    let mut factors = safety_atoms(params)?;
    for edge in graph.edges() {
        factors.push(connectivity_atom(params, edge)?);
    }
    for group in or_groups {
        let terms = group
            .iter()
            .map(|&e| connectivity_atom(params, e))
            .collect::<Result<Vec<_>>>()?;
        factors.push(BarrierTree::compose_or(terms)?);
    }
    BarrierTree::compose_and(factors)
}

/// Safety atoms times a sum over allowable graphs of each graph's edge product.
pub fn build_dynamic_certificate(params: &TeamParams, graphs: &AllowableGraphSet) -> Result<BarrierTree> {
    params.validate()?;
    let mut alternatives = Vec::with_capacity(graphs.graphs().len());
    for (k, graph) in graphs.graphs().iter().enumerate() {
        check_graph(params, graph)?;
        if graph.edge_count() == 0 {
            return Err(Error::input(format!("allowable graph {} has no edges", k + 1)));
        }
        let edges = graph
            .edges()
            .map(|e| connectivity_atom(params, e))
            .collect::<Result<Vec<_>>>()?;
        alternatives.push(BarrierTree::compose_and(edges)?);
    }
    let mut factors = safety_atoms(params)?;
    factors.push(BarrierTree::compose_or(alternatives)?);
    BarrierTree::compose_and(factors)
}

/// Source of team states for the validity audit.
pub trait StateSampler {
    fn sample(&mut self) -> Result<EnsembleState>;
}

/// Axis-aligned box that sampled positions are drawn from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arena {
    pub x: [f64; 2],
    pub y: [f64; 2],
}

impl Arena {
    pub fn square(half_width: f64) -> Self {
        Self {
            x: [-half_width, half_width],
            y: [-half_width, half_width],
        }
    }
}

/// Uniform positions in an arena and uniform velocities in the speed ball,
/// optionally rejection-sampled until the state is inside a certificate's set.
#[derive(Debug, Clone)]
pub struct ArenaSampler {
    rng: ChaCha8Rng,
    robot_count: usize,
    arena: Arena,
    max_speed: f64,
    filter: Option<Arc<BarrierTree>>,
    max_attempts: usize,
}

impl ArenaSampler {
    pub fn new(params: &TeamParams, arena: Arena, seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            robot_count: params.robot_count,
            arena,
            max_speed: params.max_speed,
            filter: None,
            max_attempts: 10_000_000,
        }
    }

    /// Only yield states with `B(x) > 0` for `tree`.
    pub fn inside(mut self, tree: BarrierTree) -> Self {
        self.filter = Some(Arc::new(tree));
        self
    }

    pub fn max_attempts(mut self, attempts: usize) -> Self {
        self.max_attempts = attempts;
        self
    }

    fn draw(&mut self) -> EnsembleState {
        let mut positions = Vec::with_capacity(self.robot_count);
        let mut velocities = Vec::with_capacity(self.robot_count);
        for _ in 0..self.robot_count {
            positions.push([
                self.rng.gen_range(self.arena.x[0]..=self.arena.x[1]),
                self.rng.gen_range(self.arena.y[0]..=self.arena.y[1]),
            ]);
            let r = self.max_speed * self.rng.gen::<f64>().sqrt();
            let theta = self.rng.gen_range(0.0..std::f64::consts::TAU);
            velocities.push([r * theta.cos(), r * theta.sin()]);
        }
        EnsembleState {
            positions,
            velocities,
            t: 0.0,
        }
    }
}

impl StateSampler for ArenaSampler {
    fn sample(&mut self) -> Result<EnsembleState> {
        for _ in 0..self.max_attempts {
            let x = self.draw();
            match &self.filter {
                None => return Ok(x),
                Some(tree) => match tree.membership(&x) {
                    Ok(true) => return Ok(x),
                    Ok(false) | Err(Error::DegenerateState { .. }) => {}
                    Err(e) => return Err(e),
                },
            }
        }
        Err(Error::input(format!(
            "no in-set state found after {} attempts",
            self.max_attempts
        )))
    }
}

/// A sampled in-set state whose admissible control set (within the box) is empty.
#[derive(Debug, Clone, PartialEq)]
pub struct Counterexample {
    pub index: usize,
    pub state: EnsembleState,
    /// `max a·u + c` over the control box; negative here.
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidityReport {
    pub requested: usize,
    pub evaluated: usize,
    /// Samples outside the set (or where the constraint was undefined).
    pub skipped: usize,
    pub feasible: usize,
    /// Smallest box-maximized margin over evaluated samples (normalized form).
    pub worst_margin: f64,
    pub infeasible: usize,
    /// At most [`ValidityReport::MAX_COUNTEREXAMPLES`] infeasible samples, in draw order.
    pub counterexamples: Vec<Counterexample>,
}

impl ValidityReport {
    pub const MAX_COUNTEREXAMPLES: usize = 20;

    pub fn feasible_fraction(&self) -> f64 {
        if self.evaluated == 0 {
            0.0
        } else {
            self.feasible as f64 / self.evaluated as f64
        }
    }

    pub fn all_feasible(&self) -> bool {
        self.evaluated > 0 && self.infeasible == 0
    }
}

enum SampleOutcome {
    Skipped,
    Margin(f64),
}

fn audit_sample(tree: &BarrierTree, alpha: &ClassKappa, bound: f64, x: &EnsembleState) -> SampleOutcome {
    match tree.membership(x) {
        Ok(true) => {}
        _ => return SampleOutcome::Skipped,
    }
    match tree.eval_constraint(x, alpha) {
        Ok(c) => SampleOutcome::Margin(box_margin(&c, bound)),
        Err(_) => SampleOutcome::Skipped,
    }
}

fn box_margin(c: &LinearControlConstraint, bound: f64) -> f64 {
    c.box_maximum(bound)
}

/// Draws `count` states and checks that `a·u + c ≥ 0` is attainable within
/// `|u_k| ≤ max_accel` at each. Samples are evaluated in parallel; aggregation
/// follows draw order, so reports are reproducible for a seeded sampler.
pub fn check_validity(
    tree: &BarrierTree,
    params: &TeamParams,
    alpha: &ClassKappa,
    sampler: &mut dyn StateSampler,
    count: usize,
) -> Result<ValidityReport> {
    params.validate()?;
    alpha.validate()?;
    let states = (0..count).map(|_| sampler.sample()).collect::<Result<Vec<_>>>()?;
    let outcomes: Vec<SampleOutcome> = states
        .par_iter()
        .map(|x| audit_sample(tree, alpha, params.max_accel, x))
        .collect();

    let mut report = ValidityReport {
        requested: count,
        evaluated: 0,
        skipped: 0,
        feasible: 0,
        worst_margin: f64::INFINITY,
        infeasible: 0,
        counterexamples: Vec::new(),
    };
    for (index, (outcome, state)) in outcomes.into_iter().zip(states).enumerate() {
        match outcome {
            SampleOutcome::Skipped => report.skipped += 1,
            SampleOutcome::Margin(margin) => {
                report.evaluated += 1;
                report.worst_margin = report.worst_margin.min(margin);
                if margin >= 0.0 {
                    report.feasible += 1;
                } else {
                    report.infeasible += 1;
                    if report.counterexamples.len() < ValidityReport::MAX_COUNTEREXAMPLES {
                        report.counterexamples.push(Counterexample {
                            index,
                            state,
                            margin,
                        });
                    }
                }
            }
        }
    }
    Ok(report)
}
