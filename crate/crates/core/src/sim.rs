//! Deterministic team simulation: nominal control, safety filter, exact
//! zero-order-hold integration, and run metrics.

use crate::barrier::{BarrierTree, ClassKappa};
use crate::certificates::{
    build_dynamic_certificate, build_safety_certificate, build_static_certificate_with_alternatives,
    AllowableGraphSet, ConnectivityGraph, TeamParams,
};
use crate::controller::{nominal_control, ControllerGains, SafetyFilter, WaypointPlan, WaypointTracker};
use crate::state::{norm, EnsembleState};
use crate::{Error, Result};

/// Every atom must exceed this at the initial state.
pub const INIT_MARGIN: f64 = 1e-6;

pub const DEFAULT_DT: f64 = 0.02;

/// Which composite barrier the filter enforces.
#[derive(Debug, Clone, PartialEq)]
pub enum CertificateSpec {
    /// Nominal control only.
    None,
    Safety,
    /// Safety, every edge of `graph`, and at least one edge of each OR-group.
    Static {
        graph: ConnectivityGraph,
        or_groups: Vec<Vec<(usize, usize)>>,
    },
    /// Safety and all edges of at least one allowable graph.
    Dynamic { graphs: AllowableGraphSet },
}

impl CertificateSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            CertificateSpec::None => "none",
            CertificateSpec::Safety => "safety",
            CertificateSpec::Static { .. } => "static",
            CertificateSpec::Dynamic { .. } => "dynamic",
        }
    }

    pub fn build(&self, params: &TeamParams) -> Result<Option<BarrierTree>> {
        Ok(match self {
            CertificateSpec::None => None,
            CertificateSpec::Safety => Some(build_safety_certificate(params)?),
            CertificateSpec::Static { graph, or_groups } => Some(
                build_static_certificate_with_alternatives(params, graph, or_groups)?,
            ),
            CertificateSpec::Dynamic { graphs } => Some(build_dynamic_certificate(params, graphs)?),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    pub duration: f64,
    pub params: TeamParams,
    pub plan: WaypointPlan,
    pub certificate: CertificateSpec,
    pub alpha: ClassKappa,
    pub gains: ControllerGains,
    pub initial: EnsembleState,
    /// Seeds sampling-based audits; the run itself draws no random numbers.
    pub seed: u64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.plan.validate()?;
        self.alpha.validate()?;
        self.gains.validate()?;
        self.initial.check_finite()?;
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.duration.is_finite() && self.duration >= 0.0) {
            return Err(Error::config(format!("duration must be non-negative, got {}", self.duration)));
        }
        let n = self.params.robot_count;
        if self.plan.robot_count() != n || self.initial.robot_count() != n {
            return Err(Error::config(format!(
                "team has {n} robots but the plan has {} and the initial state {}",
                self.plan.robot_count(),
                self.initial.robot_count()
            )));
        }
        if let Some(i) = (0..n).find(|&i| self.initial.speed(i) > self.params.max_speed) {
            return Err(Error::config(format!("robot {} starts above max_speed", i + 1)));
        }
        Ok(())
    }

    /// Number of integration steps, `floor(duration / dt)`.
    pub fn step_count(&self) -> usize {
        (self.duration / self.dt + 1e-9).floor() as usize
    }
}

/// Exact discretization of the double integrator under constant `u` for `dt`,
/// followed by rescaling any velocity above `max_speed` back onto the bound.
pub fn step(x: &EnsembleState, u: &[f64], dt: f64, params: &TeamParams) -> Result<EnsembleState> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::input(format!("dt must be positive, got {dt}")));
    }
    x.check_finite()?;
    let n = x.robot_count();
    if u.len() != 2 * n || !u.iter().all(|v| v.is_finite()) {
        return Err(Error::input("control must be a finite vector of length 2N"));
    }
    let mut next = x.clone();
    for i in 0..n {
        let ui = [u[2 * i], u[2 * i + 1]];
        let (p, v) = (x.positions[i], x.velocities[i]);
        let mut v_next = [0.0; 2];
        for k in 0..2 {
            next.positions[i][k] = p[k] + v[k] * dt + 0.5 * ui[k] * dt * dt;
            v_next[k] = v[k] + ui[k] * dt;
        }
        next.velocities[i] = clamp_speed(v_next, params.max_speed);
    }
    next.t = x.t + dt;
    Ok(next)
}

fn clamp_speed(mut v: [f64; 2], max_speed: f64) -> [f64; 2] {
    let speed = norm(v);
    if speed <= max_speed {
        return v;
    }
    let scale = max_speed / speed;
    v = [v[0] * scale, v[1] * scale];
    while norm(v) > max_speed {
        v = [v[0] * (1.0 - f64::EPSILON), v[1] * (1.0 - f64::EPSILON)];
    }
    v
}

/// How the applied control at a step was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepStatus {
    /// No certificate configured.
    Unfiltered,
    /// Nominal control already admissible.
    Slack,
    /// QP correction applied.
    Corrected,
    /// Emergency stop after an infeasible QP or an out-of-set state.
    Fallback,
}

impl StepStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            StepStatus::Unfiltered => "unfiltered",
            StepStatus::Slack => "slack",
            StepStatus::Corrected => "corrected",
            StepStatus::Fallback => "fallback",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub t: f64,
    pub state: EnsembleState,
    pub nominal: Vec<f64>,
    pub control: Vec<f64>,
    /// `ln B(x)`; `None` without a certificate.
    pub log_b: Option<f64>,
    /// Pair distances in lexicographic pair order.
    pub distances: Vec<f64>,
    pub status: StepStatus,
    pub qp_iterations: usize,
    pub active_branches: Vec<Vec<bool>>,
}

/// One record per step, including the initial state (`step_count + 1` records).
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryLog {
    pub records: Vec<TrajectoryRecord>,
    /// Waypoints visited per robot at the end of the run.
    pub waypoints_visited: Vec<usize>,
    /// Composite barrier as an expression, when configured.
    pub certificate: Option<String>,
}

impl TrajectoryLog {
    pub fn fallback_count(&self) -> usize {
        self.records.iter().filter(|r| r.status == StepStatus::Fallback).count()
    }
}

/// Runs nominal control → safety filter → integration for `step_count` steps.
pub fn run(config: &SimConfig) -> Result<TrajectoryLog> {
    config.validate()?;
    let params = &config.params;
    let tree = config.certificate.build(params)?;
    let mut x = config.initial.clone();
    x.t = 0.0;
    if let Some(tree) = &tree {
        tree.admit(&x, INIT_MARGIN).map_err(|e| match e {
            Error::InvarianceViolated { atoms } => Error::config(format!(
                "initial state is outside the certificate set; violated atoms: {}",
                atoms.join(", ")
            )),
            other => other,
        })?;
    }
    let filter = tree
        .clone()
        .map(|t| SafetyFilter::new(t, config.alpha, *params, config.gains));
    let mut tracker = WaypointTracker::new(&config.plan);
    let steps = config.step_count();
    let mut records = Vec::with_capacity(steps + 1);

    for k in 0..=steps {
        x.t = k as f64 * config.dt;
        let nominal = nominal_control(&x, &config.plan, &mut tracker, &config.gains, params)?;
        let (control, status, qp_iterations) = match &filter {
            None => (nominal.clone(), StepStatus::Unfiltered, 0),
            Some(f) => {
                let (u, diag) = f.safe_control(&x, &nominal)?;
                let status = if diag.fallback {
                    StepStatus::Fallback
                } else if diag.modified {
                    StepStatus::Corrected
                } else {
                    StepStatus::Slack
                };
                (u, status, diag.iterations)
            }
        };
        let (log_b, active_branches) = match &tree {
            None => (None, Vec::new()),
            Some(t) => match t.eval_value(&x) {
                Ok(e) => (Some(e.log_value), e.active_branches),
                Err(Error::DegenerateState { .. }) => (Some(f64::NEG_INFINITY), Vec::new()),
                Err(e) => return Err(e),
            },
        };
        records.push(TrajectoryRecord {
            t: x.t,
            distances: x.pairwise_distances(),
            state: x.clone(),
            nominal,
            control: control.clone(),
            log_b,
            status,
            qp_iterations,
            active_branches,
        });
        if k < steps {
            x = step(&x, &control, config.dt, params)?;
        }
    }

    Ok(TrajectoryLog {
        records,
        waypoints_visited: tracker.visited,
        certificate: tree.map(|t| t.to_string()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PropertyStatus {
    Pass,
    Fail,
    NotApplicable,
}

impl PropertyStatus {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            PropertyStatus::Pass
        } else {
            PropertyStatus::Fail
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            PropertyStatus::Pass => "pass",
            PropertyStatus::Fail => "fail",
            PropertyStatus::NotApplicable => "n/a",
        }
    }
}

/// A checked run property. `certified` marks properties the configured
/// certificate is supposed to guarantee.
#[derive(Debug, Clone, PartialEq)]
pub struct Condition {
    pub name: String,
    pub status: PropertyStatus,
    pub certified: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeMetric {
    pub edge: (usize, usize),
    pub max_distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupMetric {
    pub edges: Vec<(usize, usize)>,
    /// Max over time of the smallest distance among the group's edges.
    pub max_min_distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryMetrics {
    pub records: usize,
    pub min_pair_distance: f64,
    /// `(pair, min distance over time, max distance over time)`.
    pub pair_ranges: Vec<((usize, usize), f64, f64)>,
    pub required_edges: Vec<EdgeMetric>,
    pub or_groups: Vec<GroupMetric>,
    pub min_log_b: Option<f64>,
    pub waypoints_visited: Vec<usize>,
    pub waypoints_planned: Vec<usize>,
    /// Dynamic certificates: first satisfied allowable graph at each record.
    pub satisfied_graph: Option<Vec<Option<usize>>>,
    pub graph_switches: usize,
    pub max_speed: f64,
    pub fallback_steps: usize,
    pub conditions: Vec<Condition>,
}

impl SummaryMetrics {
    pub fn condition(&self, name: &str) -> Option<&Condition> {
        self.conditions.iter().find(|c| c.name == name)
    }

    /// All certified properties hold.
    pub fn certified_pass(&self) -> bool {
        self.conditions
            .iter()
            .all(|c| !c.certified || c.status != PropertyStatus::Fail)
    }
}

fn pair_index(n: usize, (i, j): (usize, usize)) -> usize {
    // position of (i, j), i < j, in lexicographic pair order
    i * (2 * n - i - 1) / 2 + (j - i - 1)
}

fn group_name(edges: &[(usize, usize)]) -> String {
    let shared = edges.first().and_then(|&(a, b)| {
        [a, b]
            .into_iter()
            .find(|&r| edges.iter().all(|&(i, j)| i == r || j == r))
    });
    match (shared, edges.len()) {
        (Some(r), len) if len > 1 => {
            let others: Vec<String> = edges
                .iter()
                .map(|&(i, j)| (if i == r { j } else { i } + 1).to_string())
                .collect();
            format!("robot {} connected to robot {}", r + 1, others.join(" or "))
        }
        _ => {
            let list: Vec<String> = edges.iter().map(|&(i, j)| format!("{}-{}", i + 1, j + 1)).collect();
            format!("one of edges {} connected", list.join(", "))
        }
    }
}

/// Summarizes a run: distances, barrier margin, waypoint progress and
/// pass/fail of each safety and connectivity property.
pub fn metrics(log: &TrajectoryLog, config: &SimConfig) -> Result<SummaryMetrics> {
    let Some(first) = log.records.first() else {
        return Err(Error::input("trajectory log is empty"));
    };
    let params = &config.params;
    let n = params.robot_count;
    let pairs = params.pairs();
    let certified = config.certificate != CertificateSpec::None;

    let mut pair_ranges: Vec<_> = pairs
        .iter()
        .map(|&p| (p, f64::INFINITY, f64::NEG_INFINITY))
        .collect();
    let mut max_speed = 0.0f64;
    for r in &log.records {
        for (range, &d) in pair_ranges.iter_mut().zip(&r.distances) {
            range.1 = range.1.min(d);
            range.2 = range.2.max(d);
        }
        for i in 0..r.state.robot_count() {
            max_speed = max_speed.max(r.state.speed(i));
        }
    }
    let min_pair_distance = pair_ranges.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    let min_log_b = first
        .log_b
        .map(|_| log.records.iter().filter_map(|r| r.log_b).fold(f64::INFINITY, f64::min));

    let ds = params.safety_distance;
    let dc = params.connectivity_distance;
    let mut conditions = vec![Condition {
        name: "no inter-robot collisions".into(),
        status: PropertyStatus::from_bool(min_pair_distance >= ds),
        certified,
    }];

    let mut required_edges = Vec::new();
    let mut or_groups = Vec::new();
    let mut satisfied_graph = None;
    let mut graph_switches = 0;
    match &config.certificate {
        CertificateSpec::Static { graph, or_groups: groups } => {
            for edge in graph.edges() {
                let max_distance = pair_ranges[pair_index(n, edge)].2;
                conditions.push(Condition {
                    name: format!("robots {} and {} connected", edge.0 + 1, edge.1 + 1),
                    status: PropertyStatus::from_bool(max_distance < dc),
                    certified,
                });
                required_edges.push(EdgeMetric { edge, max_distance });
            }
            for group in groups {
                let edges: Vec<(usize, usize)> = group.iter().map(|&(i, j)| (i.min(j), i.max(j))).collect();
                let max_min_distance = log
                    .records
                    .iter()
                    .map(|r| {
                        edges
                            .iter()
                            .map(|&e| r.distances[pair_index(n, e)])
                            .fold(f64::INFINITY, f64::min)
                    })
                    .fold(f64::NEG_INFINITY, f64::max);
                conditions.push(Condition {
                    name: group_name(&edges),
                    status: PropertyStatus::from_bool(max_min_distance < dc),
                    certified,
                });
                or_groups.push(GroupMetric {
                    edges,
                    max_min_distance,
                });
            }
        }
        CertificateSpec::Dynamic { graphs } => {
            let per_step: Vec<Option<usize>> = log
                .records
                .iter()
                .map(|r| graphs.first_satisfied(&r.state, dc))
                .collect();
            graph_switches = per_step.windows(2).filter(|w| w[0] != w[1]).count();
            conditions.push(Condition {
                name: "some allowable graph connected".into(),
                status: PropertyStatus::from_bool(per_step.iter().all(Option::is_some)),
                certified,
            });
            satisfied_graph = Some(per_step);
        }
        CertificateSpec::None | CertificateSpec::Safety => {}
    }

    conditions.push(Condition {
        name: "composite barrier positive".into(),
        status: match min_log_b {
            None => PropertyStatus::NotApplicable,
            Some(b) => PropertyStatus::from_bool(b > f64::NEG_INFINITY),
        },
        certified,
    });
    conditions.push(Condition {
        name: "speed bound".into(),
        status: PropertyStatus::from_bool(max_speed <= params.max_speed),
        certified: true,
    });

    Ok(SummaryMetrics {
        records: log.records.len(),
        min_pair_distance,
        pair_ranges,
        required_edges,
        or_groups,
        min_log_b,
        waypoints_visited: log.waypoints_visited.clone(),
        waypoints_planned: config.plan.waypoints.iter().map(Vec::len).collect(),
        satisfied_graph,
        graph_switches,
        max_speed,
        fallback_steps: log.fallback_count(),
        conditions,
    })
}
