//! Compositional piecewise barrier functions for teams of double-integrator robots.
//!
//! Objectives are encoded as barrier atoms (pairwise safety and connectivity),
//! combined into [`BarrierTree`]s where a product node is logical AND and a sum
//! node is logical OR, and enforced through a minimally invasive quadratic
//! program wrapped around a nominal waypoint controller.
//!
//! ```
//! use barrier_compose::prelude::*;
//!
//! let params = TeamParams::new(2, 2.0, 0.5, 0.15, 0.6).unwrap();
//! let tree = build_safety_certificate(&params).unwrap();
//! let x = EnsembleState::at_rest(vec![[0.0, 0.0], [0.65, 0.0]]);
//! let eval = tree.eval_value(&x).unwrap();
//! assert!((eval.value - 2.0).abs() < 1e-12);
//! ```

pub mod barrier;
pub mod certificates;
pub mod commands;
pub mod controller;
pub mod dynamics;
mod error;
pub mod oracle;
pub mod qp;
pub mod report;
pub mod scenario;
pub mod selftest;
pub mod sim;
pub mod state;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::barrier::{
        AffineAtom, BarrierAtom, BarrierEvaluation, BarrierTree, ClassKappa, ConstraintForm,
        LinearControlConstraint, NodeKind,
    };
    pub use crate::certificates::{
        build_dynamic_certificate, build_safety_certificate, build_static_certificate,
        build_static_certificate_with_alternatives, check_validity, AllowableGraphSet,
        ArenaSampler, ConnectivityGraph, ConnectivityPairAtom, SafetyPairAtom, StateSampler,
        TeamParams, ValidityReport,
    };
    pub use crate::controller::{
        nominal_control, ControllerGains, SafeControlDiagnostics, SafetyFilter, WaypointPlan,
        WaypointTracker,
    };
    pub use crate::dynamics::DoubleIntegrator;
    pub use crate::qp::{QpProblem, QpSolution, QpSolver, QpStatus};
    pub use crate::sim::{metrics, run, step, CertificateSpec, SimConfig, SummaryMetrics, TrajectoryLog};
    pub use crate::state::EnsembleState;
    pub use crate::{Error, Result};
}
