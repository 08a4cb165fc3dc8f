//! Brute-force reference computations used to cross-check the analytic code
//! paths: finite-difference derivatives and grid search for small QPs.
//! Nothing here shares code with the routines it checks.

use crate::qp::QpProblem;
use crate::Result;

/// Central-difference gradient of `f` at `x` with step `h`.
pub fn central_gradient<F>(f: F, x: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let mut probe = x.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for k in 0..x.len() {
        probe[k] = x[k] + h;
        let up = f(&probe)?;
        probe[k] = x[k] - h;
        let down = f(&probe)?;
        probe[k] = x[k];
        grad.push((up - down) / (2.0 * h));
    }
    Ok(grad)
}

/// Central difference of `f` along direction `q`.
pub fn central_directional<F>(f: F, x: &[f64], q: &[f64], h: f64) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let shifted = |s: f64| -> Vec<f64> { x.iter().zip(q).map(|(x, q)| x + s * q).collect() };
    Ok((f(&shifted(h))? - f(&shifted(-h))?) / (2.0 * h))
}

/// One-sided difference `(f(x + a q) - f(x)) / a`.
pub fn forward_directional<F>(f: F, x: &[f64], q: &[f64], a: f64) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let shifted: Vec<f64> = x.iter().zip(q).map(|(x, q)| x + a * q).collect();
    Ok((f(&shifted)? - f(x)?) / a)
}

/// Normwise relative error `‖a - b‖∞ / max(‖b‖∞, floor)`.
pub fn relative_error(a: &[f64], b: &[f64], floor: f64) -> f64 {
    let diff = a.iter().zip(b).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let scale = b.iter().map(|b| b.abs()).fold(floor, f64::max);
    diff / scale
}

/// Scalar relative error `|a - b| / max(|b|, floor)`.
pub fn scalar_relative_error(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / b.abs().max(floor)
}

fn grid_axis(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let count = ((hi - lo) / step).round() as usize;
    (0..=count).map(|k| (lo + k as f64 * step).min(hi)).collect()
}

/// Best feasible objective over a grid with spacing `step` on all
/// coordinates but the last; the last coordinate is minimized exactly on
/// its feasible interval at each grid point. `None` if no grid point is feasible.
pub fn grid_search_qp(problem: &QpProblem, step: f64) -> Option<(f64, Vec<f64>)> {
    grid_search_qp_in(problem, &problem.lower, &problem.upper, step)
}

/// [`grid_search_qp`] restricted to the sub-box `[lo, hi]`.
pub fn grid_search_qp_in(problem: &QpProblem, lo: &[f64], hi: &[f64], step: f64) -> Option<(f64, Vec<f64>)> {
    let m = problem.dim();
    let last = m - 1;
    let axes: Vec<Vec<f64>> = (0..last).map(|k| grid_axis(lo[k], hi[k], step)).collect();
    let mut index = vec![0usize; last];
    let mut u = vec![0.0; m];
    let mut best: Option<(f64, Vec<f64>)> = None;

    loop {
        for k in 0..last {
            u[k] = axes[k][index[k]];
        }
        let mut lo_last = problem.lower[last];
        let mut hi_last = problem.upper[last];
        for ineq in &problem.inequalities {
            let partial: f64 = ineq.coeff[..last].iter().zip(&u[..last]).map(|(a, u)| a * u).sum::<f64>() + ineq.offset;
            let a = ineq.coeff[last];
            if a > 0.0 {
                lo_last = lo_last.max(-partial / a);
            } else if a < 0.0 {
                hi_last = hi_last.min(-partial / a);
            } else if partial < 0.0 {
                hi_last = f64::NEG_INFINITY;
            }
        }
        if lo_last <= hi_last {
            u[last] = problem.nominal[last].clamp(lo_last, hi_last);
            let feasible = problem.inequalities.iter().all(|ineq| {
                ineq.coeff.iter().zip(&u).map(|(a, u)| a * u).sum::<f64>() + ineq.offset >= -1e-12
            });
            if feasible {
                let obj = problem.objective(&u);
                if best.as_ref().is_none_or(|(b, _)| obj < *b) {
                    best = Some((obj, u.clone()));
                }
            }
        }
        // odometer increment
        let mut k = 0;
        loop {
            if k == last {
                return best;
            }
            index[k] += 1;
            if index[k] < axes[k].len() {
                break;
            }
            index[k] = 0;
            k += 1;
        }
    }
}

/// Coarse-to-fine grid search: a full grid at `step`, then `levels` further
/// grids, each ten times finer, over a window of two coarse cells around the
/// incumbent. Sound for the convex problems [`QpProblem`] describes.
pub fn refined_grid_search_qp(problem: &QpProblem, step: f64, levels: usize) -> Option<(f64, Vec<f64>)> {
    let mut best = grid_search_qp(problem, step)?;
    let mut h = step;
    for _ in 0..levels {
        let lo: Vec<f64> = best.1.iter().zip(&problem.lower).map(|(u, l)| (u - 2.0 * h).max(*l)).collect();
        let hi: Vec<f64> = best.1.iter().zip(&problem.upper).map(|(u, b)| (u + 2.0 * h).min(*b)).collect();
        h /= 10.0;
        if let Some(found) = grid_search_qp_in(problem, &lo, &hi, h) {
            if found.0 < best.0 {
                best = found;
            }
        }
    }
    Some(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn central_gradient_of_quadratic_is_exact() {
        let f = |x: &[f64]| Ok(x[0] * x[0] + 3.0 * x[1]);
        let g = central_gradient(f, &[2.0, 1.0], 1e-4).unwrap();
        assert!((g[0] - 4.0).abs() < 1e-8 && (g[1] - 3.0).abs() < 1e-8);
    }

    #[test]
    fn forward_difference_sees_kinks() {
        let f = |x: &[f64]| Ok(x[0].max(0.0));
        assert!((forward_directional(f, &[0.0], &[1.0], 1e-6).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(forward_directional(f, &[0.0], &[-1.0], 1e-6).unwrap(), 0.0);
    }

    #[test]
    fn grid_search_finds_projection() {
        let mut p = QpProblem::with_box(vec![1.0, 0.0], 3.0).unwrap();
        p.push_inequality(vec![1.0, 0.0], -2.0).unwrap();
        let (obj, u) = grid_search_qp(&p, 0.01).unwrap();
        assert!((obj - 1.0).abs() < 1e-9, "{obj} at {u:?}");
    }

    #[test]
    fn refinement_tightens_oblique_optimum() {
        let mut p = QpProblem::with_box(vec![0.0, 0.0, 0.0], 1.0).unwrap();
        p.push_inequality(vec![1.0, 0.7, 0.3], -0.5).unwrap();
        p.push_inequality(vec![0.2, 1.0, -0.6], -0.4).unwrap();
        let coarse = grid_search_qp(&p, 0.01).unwrap().0;
        let fine = refined_grid_search_qp(&p, 0.01, 2).unwrap().0;
        assert!(fine <= coarse);
        assert!(p.is_feasible(&refined_grid_search_qp(&p, 0.01, 2).unwrap().1, 1e-9));
    }

    #[test]
    fn grid_search_reports_infeasible() {
        let mut p = QpProblem::with_box(vec![0.0, 0.0], 1.0).unwrap();
        p.push_inequality(vec![1.0, 1.0], -3.0).unwrap();
        assert!(grid_search_qp(&p, 0.1).is_none());
    }
}
