//! Ensemble state of a planar robot team.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Stacked positions and velocities of `N` planar robots at time `t`.
///
/// The flat state-vector layout used for gradients and directions is
/// `[p1x, p1y, ..., pNx, pNy, v1x, v1y, ..., vNx, vNy]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleState {
    pub positions: Vec<[f64; 2]>,
    pub velocities: Vec<[f64; 2]>,
    #[serde(default)]
    pub t: f64,
}

impl EnsembleState {
    pub fn new(positions: Vec<[f64; 2]>, velocities: Vec<[f64; 2]>) -> Result<Self> {
        if positions.len() != velocities.len() {
            return Err(Error::input(format!(
                "{} positions but {} velocities",
                positions.len(),
                velocities.len()
            )));
        }
        let state = Self {
            positions,
            velocities,
            t: 0.0,
        };
        state.check_finite()?;
        Ok(state)
    }

    /// Robots at the given positions with zero velocity.
    pub fn at_rest(positions: Vec<[f64; 2]>) -> Self {
        let velocities = vec![[0.0; 2]; positions.len()];
        Self {
            positions,
            velocities,
            t: 0.0,
        }
    }

    pub fn robot_count(&self) -> usize {
        self.positions.len()
    }

    /// Length of the flat state vector, `4N`.
    pub fn dim(&self) -> usize {
        4 * self.robot_count()
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite()
            && self
                .positions
                .iter()
                .chain(self.velocities.iter())
                .all(|p| p[0].is_finite() && p[1].is_finite())
    }

    pub fn check_finite(&self) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::input("state contains non-finite entries"))
        }
    }

    pub fn to_vector(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dim());
        out.extend(self.positions.iter().flatten());
        out.extend(self.velocities.iter().flatten());
        out
    }

    /// Inverse of [`EnsembleState::to_vector`]; keeps the time stamp of `self`.
    pub fn with_vector(&self, flat: &[f64]) -> Result<Self> {
        let n = self.robot_count();
        if flat.len() != 4 * n {
            return Err(Error::input(format!(
                "state vector has length {}, expected {}",
                flat.len(),
                4 * n
            )));
        }
        let pair = |k: usize| [flat[2 * k], flat[2 * k + 1]];
        Ok(Self {
            positions: (0..n).map(pair).collect(),
            velocities: (n..2 * n).map(pair).collect(),
            t: self.t,
        })
    }

    /// `p_i - p_j`.
    pub fn relative_position(&self, i: usize, j: usize) -> [f64; 2] {
        sub(self.positions[i], self.positions[j])
    }

    /// `v_i - v_j`.
    pub fn relative_velocity(&self, i: usize, j: usize) -> [f64; 2] {
        sub(self.velocities[i], self.velocities[j])
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        norm(self.relative_position(i, j))
    }

    /// Distances for all pairs `i < j`, in lexicographic pair order.
    pub fn pairwise_distances(&self) -> Vec<f64> {
        let n = self.robot_count();
        let mut out = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                out.push(self.distance(i, j));
            }
        }
        out
    }

    pub fn speed(&self, i: usize) -> f64 {
        norm(self.velocities[i])
    }

    /// Flat index of the x position coordinate of robot `i`.
    pub fn position_index(&self, i: usize) -> usize {
        2 * i
    }

    /// Flat index of the x velocity coordinate of robot `i`.
    pub fn velocity_index(&self, i: usize) -> usize {
        2 * self.robot_count() + 2 * i
    }
}

pub(crate) fn sub(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

pub(crate) fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

pub(crate) fn norm(a: [f64; 2]) -> f64 {
    a[0].hypot(a[1])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vector_layout_round_trips() {
        let x = EnsembleState::new(vec![[1.0, 2.0], [3.0, 4.0]], vec![[5.0, 6.0], [7.0, 8.0]])
            .unwrap();
        let flat = x.to_vector();
        assert_eq!(flat, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]);
        assert_eq!(x.with_vector(&flat).unwrap(), x);
        assert_eq!(x.velocity_index(1), 6);
    }

    #[test]
    fn rejects_non_finite() {
        assert!(EnsembleState::new(vec![[f64::NAN, 0.0]], vec![[0.0, 0.0]]).is_err());
        assert!(EnsembleState::new(vec![[0.0, 0.0]], vec![]).is_err());
    }

    #[test]
    fn relative_quantities_use_i_minus_j() {
        let x = EnsembleState::new(vec![[0.0, 0.0], [0.65, 0.0]], vec![[1.0, 0.0], [0.0, 0.0]])
            .unwrap();
        assert_eq!(x.relative_position(0, 1), [-0.65, 0.0]);
        assert_eq!(x.relative_velocity(0, 1), [1.0, 0.0]);
        assert!((x.distance(0, 1) - 0.65).abs() < 1e-15);
    }
}
