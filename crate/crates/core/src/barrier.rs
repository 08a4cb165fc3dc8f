//! Piecewise barrier functions and their composition.
//!
//! A barrier atom is `B(x) = max{h(x), 0}` for a smooth `h`; its set is
//! `{x : B(x) > 0}`. Trees combine atoms with product nodes (set intersection)
//! and sum nodes (set union). Because every value is non-negative, a product
//! is positive iff all factors are, and a sum is positive iff some term is.
//!
//! For control, a tree at an in-set state is reduced to one affine inequality
//! `a·u + c ≥ 0` equivalent to `L_f B + L_g B u + α(B) ≥ 0`. The reduction
//! works with logarithmic derivatives `∇B / B`, so products of many small
//! factors never underflow.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dynamics::DoubleIntegrator;
use crate::state::EnsembleState;
use crate::{Error, Result};

/// Width of the band around `h = 0` where the B-derivative selects between pieces.
pub const KINK_TOL: f64 = 1e-9;

/// Sum-node children with value at or below this contribute nothing to the
/// constraint, and product-path atoms at or below it make the constraint undefined.
pub const BRANCH_DROP_TOL: f64 = 1e-12;

/// Class-K function `α(s) = γ s^p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassKappa {
    pub gain: f64,
    pub power: u32,
}

impl Default for ClassKappa {
    fn default() -> Self {
        Self {
            gain: 1.0,
            power: 1,
        }
    }
}

impl ClassKappa {
    pub fn new(gain: f64, power: u32) -> Result<Self> {
        let kappa = Self { gain, power };
        kappa.validate()?;
        Ok(kappa)
    }

    pub fn linear(gain: f64) -> Result<Self> {
        Self::new(gain, 1)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gain.is_finite() && self.gain > 0.0) {
            return Err(Error::input(format!(
                "class-K gain must be positive, got {}",
                self.gain
            )));
        }
        if self.power == 0 {
            return Err(Error::input("class-K power must be at least 1"));
        }
        Ok(())
    }

    pub fn eval(&self, s: f64) -> f64 {
        self.gain * s.powi(self.power as i32)
    }

    /// `α(s) / s` given `ln s`; equals `γ` for `p = 1` regardless of scale.
    pub fn ratio_from_log(&self, log_s: f64) -> f64 {
        if self.power == 1 {
            self.gain
        } else {
            self.gain * ((self.power - 1) as f64 * log_s).exp()
        }
    }
}

/// Raw value and Lie derivatives of an atom under the team dynamics.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomLinearization {
    pub h: f64,
    pub drift: f64,
    pub control_row: Vec<f64>,
}

/// A smooth function `h` whose positive part is a barrier `B = max{h, 0}`.
///
/// `raw_value` returns `-inf` outside the atom's domain of definition, so the
/// barrier value there is zero. Gradients are over the flat state vector.
/// The Lie derivatives default to contracting the gradient with the
/// double-integrator fields; implementors may supply closed forms instead.
pub trait BarrierAtom: fmt::Debug + Send + Sync {
    fn label(&self) -> String;

    fn raw_value(&self, x: &EnsembleState) -> Result<f64>;

    fn gradient(&self, x: &EnsembleState) -> Result<Vec<f64>>;

    /// Distance from `x` to the edge of the region where `h` is smooth; `None`
    /// for atoms smooth everywhere. Near that edge `∇h` grows without bound.
    fn domain_margin(&self, _x: &EnsembleState) -> Option<f64> {
        None
    }

    fn value(&self, x: &EnsembleState) -> Result<f64> {
        Ok(self.raw_value(x)?.max(0.0))
    }

    fn drift_term(&self, x: &EnsembleState) -> Result<f64> {
        Ok(DoubleIntegrator.lie_drift(x, &self.gradient(x)?))
    }

    fn control_row(&self, x: &EnsembleState) -> Result<Vec<f64>> {
        Ok(DoubleIntegrator.lie_input(x, &self.gradient(x)?))
    }

    fn linearize(&self, x: &EnsembleState) -> Result<AtomLinearization> {
        Ok(AtomLinearization {
            h: self.raw_value(x)?,
            drift: self.drift_term(x)?,
            control_row: self.control_row(x)?,
        })
    }
}

/// `h(x) = w · x + b` over the flat state vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineAtom {
    pub label: String,
    pub weights: Vec<f64>,
    pub offset: f64,
}

impl AffineAtom {
    pub fn new(label: impl Into<String>, weights: Vec<f64>, offset: f64) -> Self {
        Self {
            label: label.into(),
            weights,
            offset,
        }
    }

    fn check_dim(&self, x: &EnsembleState) -> Result<()> {
        if self.weights.len() == x.dim() {
            Ok(())
        } else {
            Err(Error::input(format!(
                "atom {} has {} weights for a state of dimension {}",
                self.label,
                self.weights.len(),
                x.dim()
            )))
        }
    }
}

impl BarrierAtom for AffineAtom {
    fn label(&self) -> String {
        self.label.clone()
    }

    fn raw_value(&self, x: &EnsembleState) -> Result<f64> {
        self.check_dim(x)?;
        let flat = x.to_vector();
        Ok(self.weights.iter().zip(&flat).map(|(w, s)| w * s).sum::<f64>() + self.offset)
    }

    fn gradient(&self, x: &EnsembleState) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        Ok(self.weights.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Atom,
    Product,
    Sum,
}

#[derive(Debug, Clone)]
enum Node {
    Atom(Arc<dyn BarrierAtom>),
    Product(Vec<BarrierTree>),
    Sum(Vec<BarrierTree>),
}

/// Composition tree of barrier atoms. Product = AND, Sum = OR.
#[derive(Debug, Clone)]
pub struct BarrierTree {
    node: Node,
}

/// Value of one atom inside an evaluated tree. `id` is the atom's depth-first position.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomValue {
    pub id: usize,
    pub label: String,
    pub h: f64,
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BarrierEvaluation {
    pub value: f64,
    /// `ln(value)`, or `-inf` when the value is zero.
    pub log_value: f64,
    pub atoms: Vec<AtomValue>,
    /// One entry per sum node in depth-first order; `true` for children whose
    /// value exceeds [`BRANCH_DROP_TOL`].
    pub active_branches: Vec<Vec<bool>>,
}

impl BarrierEvaluation {
    pub fn is_member(&self) -> bool {
        self.log_value > f64::NEG_INFINITY
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConstraintForm {
    /// Divided through by `B(x)`: `a = L_g B / B`, `c = L_f B / B + α(B)/B`.
    #[default]
    Normalized,
    /// `a = L_g B`, `c = L_f B + α(B)`.
    Unnormalized,
}

/// Admissible-control condition `a·u + c ≥ 0` extracted from a tree at a state.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearControlConstraint {
    pub coeff: Vec<f64>,
    pub offset: f64,
    pub normalized: bool,
    /// `ln B(x)` at the state the constraint was built for.
    pub log_value: f64,
}

impl LinearControlConstraint {
    pub fn evaluate(&self, u: &[f64]) -> f64 {
        self.coeff.iter().zip(u).map(|(a, u)| a * u).sum::<f64>() + self.offset
    }

    pub fn is_satisfied(&self, u: &[f64]) -> bool {
        self.evaluate(u) >= 0.0
    }

    /// `max a·u + c` over the box `|u_k| ≤ bound`.
    pub fn box_maximum(&self, bound: f64) -> f64 {
        self.coeff.iter().map(|a| a.abs() * bound).sum::<f64>() + self.offset
    }
}

struct NodeValue {
    value: f64,
    log: f64,
}

/// Normalized rates of a positive node: `L_f V / V` and `L_g V / V`.
struct NodeRate {
    log: f64,
    drift: f64,
    row: Vec<f64>,
}

impl BarrierTree {
    pub fn atom(atom: impl BarrierAtom + 'static) -> Self {
        Self::from_arc(Arc::new(atom))
    }

    pub fn from_arc(atom: Arc<dyn BarrierAtom>) -> Self {
        Self {
            node: Node::Atom(atom),
        }
    }

    /// Product node: the result's set is the intersection of the inputs' sets.
    pub fn compose_and(trees: Vec<BarrierTree>) -> Result<Self> {
        if trees.is_empty() {
            return Err(Error::input("compose_and needs at least one tree"));
        }
        Ok(Self {
            node: Node::Product(trees),
        })
    }

    /// Sum node: the result's set is the union of the inputs' sets.
    pub fn compose_or(trees: Vec<BarrierTree>) -> Result<Self> {
        if trees.is_empty() {
            return Err(Error::input("compose_or needs at least one tree"));
        }
        Ok(Self {
            node: Node::Sum(trees),
        })
    }

    pub fn kind(&self) -> NodeKind {
        match self.node {
            Node::Atom(_) => NodeKind::Atom,
            Node::Product(_) => NodeKind::Product,
            Node::Sum(_) => NodeKind::Sum,
        }
    }

    pub fn children(&self) -> &[BarrierTree] {
        match &self.node {
            Node::Atom(_) => &[],
            Node::Product(c) | Node::Sum(c) => c,
        }
    }

    pub fn as_atom(&self) -> Option<&dyn BarrierAtom> {
        match &self.node {
            Node::Atom(a) => Some(a.as_ref()),
            _ => None,
        }
    }

    /// Atom labels in depth-first order; position in this list is the atom id.
    pub fn atom_labels(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.visit_atoms(&mut |a| out.push(a.label()));
        out
    }

    pub fn atom_count(&self) -> usize {
        let mut n = 0;
        self.visit_atoms(&mut |_| n += 1);
        n
    }

    fn visit_atoms(&self, f: &mut dyn FnMut(&dyn BarrierAtom)) {
        match &self.node {
            Node::Atom(a) => f(a.as_ref()),
            Node::Product(c) | Node::Sum(c) => c.iter().for_each(|t| t.visit_atoms(f)),
        }
    }

    pub fn eval_value(&self, x: &EnsembleState) -> Result<BarrierEvaluation> {
        x.check_finite()?;
        let mut atoms = Vec::new();
        let mut branches = Vec::new();
        let root = self.eval_node(x, &mut atoms, &mut branches)?;
        Ok(BarrierEvaluation {
            value: root.value,
            log_value: root.log,
            atoms,
            active_branches: branches,
        })
    }

    fn eval_node(
        &self,
        x: &EnsembleState,
        atoms: &mut Vec<AtomValue>,
        branches: &mut Vec<Vec<bool>>,
    ) -> Result<NodeValue> {
        match &self.node {
            Node::Atom(a) => {
                let h = a.raw_value(x)?;
                let b = h.max(0.0);
                atoms.push(AtomValue {
                    id: atoms.len(),
                    label: a.label(),
                    h,
                    b,
                });
                Ok(NodeValue {
                    value: b,
                    log: safe_ln(b),
                })
            }
            Node::Product(children) => {
                let mut value = 1.0;
                let mut log = 0.0;
                for child in children {
                    let v = child.eval_node(x, atoms, branches)?;
                    value *= v.value;
                    log += v.log;
                }
                Ok(NodeValue { value, log })
            }
            Node::Sum(children) => {
                let slot = branches.len();
                branches.push(Vec::with_capacity(children.len()));
                let mut value = 0.0;
                let mut logs = Vec::with_capacity(children.len());
                for child in children {
                    let v = child.eval_node(x, atoms, branches)?;
                    value += v.value;
                    branches[slot].push(v.log > BRANCH_DROP_TOL.ln());
                    logs.push(v.log);
                }
                Ok(NodeValue {
                    value,
                    log: log_sum_exp(&logs),
                })
            }
        }
    }

    /// `true` iff `B(x) > 0`. Decided in the log domain so that long products
    /// of small factors are not misreported through underflow.
    pub fn membership(&self, x: &EnsembleState) -> Result<bool> {
        Ok(self.eval_value(x)?.is_member())
    }

    /// Membership where each atom only counts as positive when `h > margin`.
    /// On failure, returns the labels of the atoms that blocked membership.
    pub fn admit(&self, x: &EnsembleState, margin: f64) -> Result<()> {
        x.check_finite()?;
        let mut violated = Vec::new();
        if self.admit_node(x, margin, &mut violated)? {
            Ok(())
        } else {
            violated.dedup();
            Err(Error::InvarianceViolated { atoms: violated })
        }
    }

    fn admit_node(&self, x: &EnsembleState, margin: f64, violated: &mut Vec<String>) -> Result<bool> {
        match &self.node {
            Node::Atom(a) => {
                let ok = a.raw_value(x)? > margin;
                if !ok {
                    violated.push(a.label());
                }
                Ok(ok)
            }
            Node::Product(children) => {
                let mut all = true;
                for child in children {
                    all &= child.admit_node(x, margin, violated)?;
                }
                Ok(all)
            }
            Node::Sum(children) => {
                let mut local = Vec::new();
                let mut any = false;
                for child in children {
                    any |= child.admit_node(x, margin, &mut local)?;
                }
                if !any {
                    violated.extend(local);
                }
                Ok(any)
            }
        }
    }

    /// One-sided directional derivative `B'(x; q)` by piece selection.
    ///
    /// For an atom: `∇h·q` when `h > KINK_TOL`, `0` when `h < -KINK_TOL`, and
    /// `max{∇h·q, 0}` in between. Interior nodes use the product and sum rules.
    pub fn b_derivative(&self, x: &EnsembleState, q: &[f64]) -> Result<f64> {
        x.check_finite()?;
        if q.len() != x.dim() {
            return Err(Error::input(format!(
                "direction has length {}, expected {}",
                q.len(),
                x.dim()
            )));
        }
        Ok(self.b_derivative_node(x, q)?.1)
    }

    fn b_derivative_node(&self, x: &EnsembleState, q: &[f64]) -> Result<(f64, f64)> {
        match &self.node {
            Node::Atom(a) => {
                let h = a.raw_value(x)?;
                if h < -KINK_TOL {
                    return Ok((0.0, 0.0));
                }
                let slope: f64 = a.gradient(x)?.iter().zip(q).map(|(g, q)| g * q).sum();
                if h > KINK_TOL {
                    Ok((h, slope))
                } else {
                    Ok((h.max(0.0), slope.max(0.0)))
                }
            }
            Node::Product(children) => {
                let parts = children
                    .iter()
                    .map(|c| c.b_derivative_node(x, q))
                    .collect::<Result<Vec<_>>>()?;
                // d(Π v) = Σ_k d_k Π_{j≠k} v_j via prefix and suffix products
                let n = parts.len();
                let mut suffix = vec![1.0; n + 1];
                for k in (0..n).rev() {
                    suffix[k] = suffix[k + 1] * parts[k].0;
                }
                let mut prefix = 1.0;
                let mut deriv = 0.0;
                for (k, &(v, d)) in parts.iter().enumerate() {
                    deriv += d * prefix * suffix[k + 1];
                    prefix *= v;
                }
                Ok((prefix, deriv))
            }
            Node::Sum(children) => children.iter().try_fold((0.0, 0.0), |acc, c| {
                let (v, d) = c.b_derivative_node(x, q)?;
                Ok((acc.0 + v, acc.1 + d))
            }),
        }
    }

    /// Normalized admissible-control constraint at `x`.
    pub fn eval_constraint(
        &self,
        x: &EnsembleState,
        alpha: &ClassKappa,
    ) -> Result<LinearControlConstraint> {
        self.eval_constraint_with(x, alpha, ConstraintForm::Normalized)
    }

    /// Builds `a·u + c ≥ 0` equivalent to `L_f B + L_g B u + α(B) ≥ 0`.
    ///
    /// Sum children at or below [`BRANCH_DROP_TOL`] are dropped; any atom on a
    /// surviving product path at or below it is reported as violated.
    pub fn eval_constraint_with(
        &self,
        x: &EnsembleState,
        alpha: &ClassKappa,
        form: ConstraintForm,
    ) -> Result<LinearControlConstraint> {
        x.check_finite()?;
        let mut violated = Vec::new();
        let rate = match self.rate_node(x, &mut violated)? {
            Some(rate) => rate,
            None => {
                violated.dedup();
                return Err(Error::InvarianceViolated { atoms: violated });
            }
        };
        let kappa_ratio = alpha.ratio_from_log(rate.log);
        Ok(match form {
            ConstraintForm::Normalized => LinearControlConstraint {
                coeff: rate.row,
                offset: rate.drift + kappa_ratio,
                normalized: true,
                log_value: rate.log,
            },
            ConstraintForm::Unnormalized => {
                let b = rate.log.exp();
                LinearControlConstraint {
                    coeff: rate.row.iter().map(|r| r * b).collect(),
                    offset: rate.drift * b + alpha.eval(b),
                    normalized: false,
                    log_value: rate.log,
                }
            }
        })
    }

    fn rate_node(&self, x: &EnsembleState, violated: &mut Vec<String>) -> Result<Option<NodeRate>> {
        match &self.node {
            Node::Atom(a) => {
                let lin = a.linearize(x)?;
                if lin.h > BRANCH_DROP_TOL {
                    let inv = 1.0 / lin.h;
                    Ok(Some(NodeRate {
                        log: lin.h.ln(),
                        drift: lin.drift * inv,
                        row: lin.control_row.iter().map(|r| r * inv).collect(),
                    }))
                } else {
                    violated.push(a.label());
                    Ok(None)
                }
            }
            Node::Product(children) => {
                let mut acc: Option<NodeRate> = None;
                let mut ok = true;
                for child in children {
                    match child.rate_node(x, violated)? {
                        Some(r) if ok => {
                            acc = Some(match acc {
                                None => r,
                                Some(mut a) => {
                                    a.log += r.log;
                                    a.drift += r.drift;
                                    a.row.iter_mut().zip(&r.row).for_each(|(s, t)| *s += t);
                                    a
                                }
                            })
                        }
                        Some(_) => {}
                        None => ok = false,
                    }
                }
                Ok(if ok { acc } else { None })
            }
            Node::Sum(children) => {
                let mut local = Vec::new();
                let mut kept = Vec::new();
                for child in children {
                    let mut child_violations = Vec::new();
                    match child.rate_node(x, &mut child_violations)? {
                        Some(r) if r.log > BRANCH_DROP_TOL.ln() => kept.push(r),
                        _ => local.extend(child_violations),
                    }
                }
                if kept.is_empty() {
                    violated.extend(local);
                    return Ok(None);
                }
                // ∇V/V = Σ_k (V_k/V) ∇V_k/V_k with weights from the log domain
                let log = log_sum_exp(&kept.iter().map(|r| r.log).collect::<Vec<_>>());
                let dim = kept[0].row.len();
                let mut drift = 0.0;
                let mut row = vec![0.0; dim];
                for r in &kept {
                    let w = (r.log - log).exp();
                    drift += w * r.drift;
                    row.iter_mut().zip(&r.row).for_each(|(s, t)| *s += w * t);
                }
                Ok(Some(NodeRate { log, drift, row }))
            }
        }
    }
}

impl fmt::Display for BarrierTree {
    /// Writes the tree as an algebraic expression, e.g. `B12*B13*(Bc12+Bc13)`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.node {
            Node::Atom(a) => write!(f, "{}", a.label()),
            Node::Product(children) => {
                for (k, c) in children.iter().enumerate() {
                    if k > 0 {
                        write!(f, "*")?;
                    }
                    if c.kind() == NodeKind::Sum && c.children().len() > 1 {
                        write!(f, "({c})")?;
                    } else {
                        write!(f, "{c}")?;
                    }
                }
                Ok(())
            }
            Node::Sum(children) => {
                for (k, c) in children.iter().enumerate() {
                    if k > 0 {
                        write!(f, "+")?;
                    }
                    write!(f, "{c}")?;
                }
                Ok(())
            }
        }
    }
}

fn safe_ln(v: f64) -> f64 {
    if v > 0.0 {
        v.ln()
    } else {
        f64::NEG_INFINITY
    }
}

fn log_sum_exp(logs: &[f64]) -> f64 {
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + logs.iter().map(|l| (l - max).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Atom with a fixed value, independent of the state.
    fn constant(label: &str, h: f64, dim: usize) -> BarrierTree {
        BarrierTree::atom(AffineAtom::new(label, vec![0.0; dim], h))
    }

    fn x1() -> EnsembleState {
        EnsembleState::at_rest(vec![[0.0, 0.0]])
    }

    #[test]
    fn sum_and_product_of_constants() {
        let x = x1();
        let or = BarrierTree::compose_or(vec![constant("A", 2.0, 4), constant("B", 3.0, 4)]).unwrap();
        let and =
            BarrierTree::compose_and(vec![constant("A", 2.0, 4), constant("B", 3.0, 4)]).unwrap();
        assert_eq!(or.eval_value(&x).unwrap().value, 5.0);
        assert_eq!(and.eval_value(&x).unwrap().value, 6.0);
        let zero =
            BarrierTree::compose_or(vec![constant("A", 0.0, 4), constant("B", -1.0, 4)]).unwrap();
        let eval = zero.eval_value(&x).unwrap();
        assert_eq!(eval.value, 0.0);
        assert!(!eval.is_member());
    }

    #[test]
    fn membership_follows_and_or_semantics() {
        let x = x1();
        let or = BarrierTree::compose_or(vec![constant("A", 0.0, 4), constant("B", 1.0, 4)]).unwrap();
        let and =
            BarrierTree::compose_and(vec![constant("A", 0.0, 4), constant("B", 1.0, 4)]).unwrap();
        assert!(or.membership(&x).unwrap());
        assert!(!and.membership(&x).unwrap());
        let and2 =
            BarrierTree::compose_and(vec![constant("A", 2.0, 4), constant("B", 3.0, 4)]).unwrap();
        assert!(and2.membership(&x).unwrap());
    }

    #[test]
    fn singleton_composition_is_identity() {
        let x = x1();
        let a = constant("A", 2.5, 4);
        assert_eq!(BarrierTree::compose_and(vec![a.clone()]).unwrap().eval_value(&x).unwrap().value, 2.5);
        assert_eq!(BarrierTree::compose_or(vec![a]).unwrap().eval_value(&x).unwrap().value, 2.5);
    }

    #[test]
    fn empty_composition_is_rejected() {
        assert!(matches!(BarrierTree::compose_and(vec![]), Err(Error::InvalidInput(_))));
        assert!(matches!(BarrierTree::compose_or(vec![]), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn non_finite_state_is_an_input_error() {
        let x = EnsembleState::at_rest(vec![[f64::NAN, 0.0]]);
        assert!(matches!(constant("A", 1.0, 4).eval_value(&x), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn log_domain_survives_underflow() {
        let x = x1();
        let tiny: Vec<_> = (0..40).map(|k| constant(&format!("A{k}"), 1e-10, 4)).collect();
        let tree = BarrierTree::compose_and(tiny).unwrap();
        let eval = tree.eval_value(&x).unwrap();
        assert_eq!(eval.value, 0.0);
        assert!((eval.log_value - 40.0 * 1e-10f64.ln()).abs() < 1e-9);
        assert!(tree.membership(&x).unwrap());
    }

    #[test]
    fn b_derivative_selects_pieces() {
        let x = x1();
        // h = 2 - 0.7 * p1x along q = e_0 has slope -0.7
        let mut w = vec![0.0; 4];
        w[0] = -0.7;
        let smooth = BarrierTree::atom(AffineAtom::new("A", w.clone(), 2.0));
        let q = [1.0, 0.0, 0.0, 0.0];
        assert!((smooth.b_derivative(&x, &q).unwrap() + 0.7).abs() < 1e-15);
        let inactive = BarrierTree::atom(AffineAtom::new("A", w.clone(), -1.0));
        assert_eq!(inactive.b_derivative(&x, &q).unwrap(), 0.0);
        let kink = BarrierTree::atom(AffineAtom::new("A", w, 0.0));
        assert_eq!(kink.b_derivative(&x, &q).unwrap(), 0.0);
        assert!((kink.b_derivative(&x, &[-1.0, 0.0, 0.0, 0.0]).unwrap() - 0.7).abs() < 1e-15);
    }

    #[test]
    fn constraint_reports_violated_atoms() {
        let x = x1();
        let tree = BarrierTree::compose_and(vec![constant("A", 1.0, 4), constant("B", 0.0, 4)]).unwrap();
        match tree.eval_constraint(&x, &ClassKappa::default()) {
            Err(Error::InvarianceViolated { atoms }) => assert_eq!(atoms, vec!["B".to_string()]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn constraint_drops_dead_sum_branches() {
        let x = x1();
        let dead = constant("Dead", 0.0, 4);
        let mut w = vec![0.0; 4];
        w[2] = 1.0; // h = v1x + 2
        let live = BarrierTree::atom(AffineAtom::new("Live", w, 2.0));
        let tree = BarrierTree::compose_or(vec![dead, live]).unwrap();
        let c = tree.eval_constraint(&x, &ClassKappa::default()).unwrap();
        // L_g h / h = (1, 0) / 2 and α(B)/B = 1
        assert_eq!(c.coeff, vec![0.5, 0.0]);
        assert!((c.offset - 1.0).abs() < 1e-15);
        let all_dead = BarrierTree::compose_or(vec![constant("D1", 0.0, 4), constant("D2", -3.0, 4)])
            .unwrap();
        match all_dead.eval_constraint(&x, &ClassKappa::default()) {
            Err(Error::InvarianceViolated { atoms }) => assert_eq!(atoms, vec!["D1", "D2"]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn normalized_and_unnormalized_forms_agree() {
        let x = EnsembleState::new(vec![[0.3, -0.2]], vec![[0.1, 0.4]]).unwrap();
        let a = BarrierTree::atom(AffineAtom::new("A", vec![0.5, 1.0, -2.0, 0.3], 1.5));
        let b = BarrierTree::atom(AffineAtom::new("B", vec![-1.0, 0.2, 0.7, 1.1], 2.0));
        let c = BarrierTree::atom(AffineAtom::new("C", vec![0.0, 0.0, 1.0, -1.0], 0.8));
        let tree = BarrierTree::compose_and(vec![a, BarrierTree::compose_or(vec![b, c]).unwrap()]).unwrap();
        let alpha = ClassKappa::new(2.0, 2).unwrap();
        let n = tree.eval_constraint_with(&x, &alpha, ConstraintForm::Normalized).unwrap();
        let r = tree.eval_constraint_with(&x, &alpha, ConstraintForm::Unnormalized).unwrap();
        let bval = tree.eval_value(&x).unwrap().value;
        for (cn, cr) in n.coeff.iter().zip(&r.coeff) {
            assert!((cn * bval - cr).abs() < 1e-12);
        }
        assert!((n.offset * bval - r.offset).abs() < 1e-12);
    }

    #[test]
    fn display_writes_expression() {
        let t = BarrierTree::compose_and(vec![
            constant("B12", 1.0, 4),
            BarrierTree::compose_or(vec![constant("Bc12", 1.0, 4), constant("Bc13", 1.0, 4)]).unwrap(),
        ])
        .unwrap();
        assert_eq!(t.to_string(), "B12*(Bc12+Bc13)");
        assert_eq!(t.atom_labels(), vec!["B12", "Bc12", "Bc13"]);
    }

    #[test]
    fn class_kappa_validation() {
        assert!(ClassKappa::new(0.0, 1).is_err());
        assert!(ClassKappa::new(1.0, 0).is_err());
        let k = ClassKappa::new(3.0, 2).unwrap();
        assert_eq!(k.eval(2.0), 12.0);
        assert!((k.ratio_from_log(2.0f64.ln()) - 6.0).abs() < 1e-12);
    }
}
