//! Control-affine double-integrator team dynamics `x' = f(x) + g(x) u`.

use crate::state::EnsembleState;

/// `p_i' = v_i`, `v_i' = u_i` for every robot; `u` has length `2N`.
#[derive(Debug, Clone, Copy, Default)]
pub struct DoubleIntegrator;

impl DoubleIntegrator {
    /// Drift `f(x) = (v, 0)` in the flat state layout.
    pub fn drift(&self, x: &EnsembleState) -> Vec<f64> {
        let n = x.robot_count();
        let mut f = vec![0.0; 4 * n];
        for (i, v) in x.velocities.iter().enumerate() {
            f[2 * i] = v[0];
            f[2 * i + 1] = v[1];
        }
        f
    }

    /// `g(x) u = (0, u)` in the flat state layout.
    pub fn input_effect(&self, x: &EnsembleState, u: &[f64]) -> Vec<f64> {
        let n = x.robot_count();
        let mut out = vec![0.0; 4 * n];
        out[2 * n..].copy_from_slice(u);
        out
    }

    /// Contracts a state-space gradient with the drift: `L_f h = ∇h · f(x)`.
    pub fn lie_drift(&self, x: &EnsembleState, gradient: &[f64]) -> f64 {
        let n = x.robot_count();
        gradient[..2 * n]
            .iter()
            .zip(x.velocities.iter().flatten())
            .map(|(g, v)| g * v)
            .sum()
    }

    /// Contracts a state-space gradient with the input columns: `L_g h = ∇h · g(x)`.
    pub fn lie_input(&self, x: &EnsembleState, gradient: &[f64]) -> Vec<f64> {
        let n = x.robot_count();
        gradient[2 * n..4 * n].to_vec()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lie_derivatives_contract_gradient() {
        let x = EnsembleState::new(vec![[0.0, 0.0], [1.0, 0.0]], vec![[0.5, -1.0], [2.0, 3.0]])
            .unwrap();
        let grad = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0];
        let f = DoubleIntegrator.drift(&x);
        let direct: f64 = grad.iter().zip(&f).map(|(a, b)| a * b).sum();
        assert_eq!(DoubleIntegrator.lie_drift(&x, &grad), direct);
        assert_eq!(DoubleIntegrator.lie_input(&x, &grad), vec![5.0, 6.0, 7.0, 8.0]);
        let gu = DoubleIntegrator.input_effect(&x, &[1.0, 0.0, 0.0, 0.0]);
        assert_eq!(gu[4], 1.0);
    }
}
