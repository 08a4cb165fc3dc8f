use barrier_compose::barrier::{AffineAtom, BarrierAtom, BarrierTree, ClassKappa, ConstraintForm};
use barrier_compose::oracle::{central_gradient, relative_error, scalar_relative_error};
use barrier_compose::selftest::truth_table_membership;
use barrier_compose::state::EnsembleState;
use barrier_compose::Result;
use proptest::prelude::*;

const DIM: usize = 8;

fn state(flat: &[f64]) -> EnsembleState {
    EnsembleState::at_rest(vec![[0.0; 2]; 2]).with_vector(flat).unwrap()
}

fn affine(k: usize, w: &[f64], b: f64) -> BarrierTree {
    BarrierTree::atom(AffineAtom::new(format!("h{k}"), w.to_vec(), b))
}

/// `c - Σ q_k x_k²`: a smooth nonlinear atom with a closed-form gradient.
#[derive(Debug)]
struct Quadratic {
    c: f64,
    q: Vec<f64>,
}

impl BarrierAtom for Quadratic {
    fn label(&self) -> String {
        "quad".into()
    }

    fn raw_value(&self, x: &EnsembleState) -> Result<f64> {
        let v = x.to_vector();
        Ok(self.c - self.q.iter().zip(&v).map(|(q, x)| q * x * x).sum::<f64>())
    }

    fn gradient(&self, x: &EnsembleState) -> Result<Vec<f64>> {
        Ok(self.q.iter().zip(x.to_vector()).map(|(q, x)| -2.0 * q * x).collect())
    }
}

fn vec_in(lo: f64, hi: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(lo..hi, DIM)
}

/// Two-level tree: an AND of ORs (or an OR of ANDs) over affine atoms.
fn tree_strategy() -> impl Strategy<Value = BarrierTree> {
    (
        any::<bool>(),
        prop::collection::vec(prop::collection::vec((vec_in(-1.0, 1.0), -0.5..0.5f64), 1..4), 1..4),
    )
        .prop_map(|(and_of_or, groups)| {
            let mut k = 0;
            let inner: Vec<BarrierTree> = groups
                .into_iter()
                .map(|g| {
                    let leaves: Vec<BarrierTree> = g
                        .into_iter()
                        .map(|(w, b)| {
                            k += 1;
                            affine(k, &w, b)
                        })
                        .collect();
                    if and_of_or {
                        BarrierTree::compose_or(leaves).unwrap()
                    } else {
                        BarrierTree::compose_and(leaves).unwrap()
                    }
                })
                .collect();
            if and_of_or {
                BarrierTree::compose_and(inner).unwrap()
            } else {
                BarrierTree::compose_or(inner).unwrap()
            }
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn log_value_matches_value(tree in tree_strategy(), x in vec_in(-1.0, 1.0)) {
        let x = state(&x);
        let e = tree.eval_value(&x).unwrap();
        prop_assert_eq!(e.is_member(), truth_table_membership(&tree, &x).unwrap());
        prop_assert_eq!(e.is_member(), tree.membership(&x).unwrap());
        if e.value > 0.0 {
            prop_assert!(scalar_relative_error(e.log_value, e.value.ln(), 1.0) < 1e-12);
        } else {
            prop_assert_eq!(e.log_value, f64::NEG_INFINITY);
        }
    }

    #[test]
    fn normalized_constraint_is_scaled_raw_constraint(tree in tree_strategy(), x in vec_in(-1.0, 1.0), u in prop::collection::vec(-2.0..2.0f64, 4)) {
        let x = state(&x);
        let alpha = ClassKappa::linear(1.5).unwrap();
        let (Ok(n), Ok(r)) = (
            tree.eval_constraint_with(&x, &alpha, ConstraintForm::Normalized),
            tree.eval_constraint_with(&x, &alpha, ConstraintForm::Unnormalized),
        ) else {
            return Ok(());
        };
        let b = n.log_value.exp();
        let scaled: Vec<f64> = n.coeff.iter().map(|a| a * b).collect();
        prop_assert!(relative_error(&scaled, &r.coeff, 1.0) < 1e-9);
        prop_assert!(scalar_relative_error(n.offset * b, r.offset, 1.0) < 1e-9);
        let margin = r.evaluate(&u);
        if margin.abs() > 1e-9 {
            prop_assert_eq!(n.is_satisfied(&u), r.is_satisfied(&u));
        }
    }

    #[test]
    fn b_derivative_of_product_with_quadratic_atom(x in vec_in(-0.5, 0.5), q in vec_in(-1.0, 1.0), w in vec_in(-1.0, 1.0)) {
        let quad = Quadratic { c: 1.0, q: (1..=DIM).map(|k| 0.1 * k as f64).collect() };
        let tree = BarrierTree::compose_and(vec![BarrierTree::atom(quad), affine(1, &w, 2.5)]).unwrap();
        let x = state(&x);
        let flat = x.to_vector();
        let step = 1e-7;
        let moved: Vec<f64> = flat.iter().zip(&q).map(|(x, q)| x + step * q).collect();
        let fd = (tree.eval_value(&state(&moved)).unwrap().value - tree.eval_value(&x).unwrap().value) / step;
        prop_assert!(scalar_relative_error(tree.b_derivative(&x, &q).unwrap(), fd, 1.0) < 1e-5);
    }
}

#[test]
fn quadratic_atom_gradient_matches_finite_differences() {
    let atom = Quadratic { c: 1.0, q: vec![0.3, 0.1, 0.7, 0.2, 0.5, 0.9, 0.4, 0.6] };
    let flat = vec![0.1, -0.2, 0.3, 0.05, -0.4, 0.25, 0.0, 0.15];
    let x = state(&flat);
    let fd = central_gradient(|v| atom.raw_value(&state(v)), &flat, 1e-6).unwrap();
    assert!(relative_error(&atom.gradient(&x).unwrap(), &fd, 1.0) < 1e-8);
}

#[test]
fn b_derivative_is_one_sided_at_a_kink() {
    let mut w = vec![0.0; DIM];
    w[0] = 1.0;
    let tree = affine(1, &w, 0.0);
    let x = state(&[0.0; DIM]);
    let mut q = vec![0.0; DIM];
    q[0] = 1.0;
    assert_eq!(tree.b_derivative(&x, &q).unwrap(), 1.0);
    q[0] = -1.0;
    assert_eq!(tree.b_derivative(&x, &q).unwrap(), 0.0);
}

#[test]
fn deep_products_stay_finite_in_log_domain() {
    let w = vec![0.0; DIM];
    let leaves: Vec<BarrierTree> = (0..400).map(|k| affine(k, &w, 1e-3)).collect();
    let tree = BarrierTree::compose_and(leaves).unwrap();
    let e = tree.eval_value(&state(&[0.0; DIM])).unwrap();
    assert!(e.is_member());
    assert!(scalar_relative_error(e.log_value, 400.0 * 1e-3f64.ln(), 1.0) < 1e-12);
    let c = tree.eval_constraint(&state(&[0.0; DIM]), &ClassKappa::default()).unwrap();
    assert!(c.offset.is_finite() && c.coeff.iter().all(|a| a.is_finite()));
}
