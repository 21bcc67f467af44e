//! Damped Gauss-Newton root finding with deterministic multi-start.
//!
//! Square systems take an LU step; singular or overdetermined systems fall
//! back to an SVD least-squares step. Steps are damped by backtracking on the
//! squared residual norm.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::exec::{map_ordered, Execution};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    pub max_iter: usize,
    /// converged once `|dx| <= step_tol * (1 + |x|)`
    pub step_tol: f64,
    /// iterates leaving this ball are treated as divergent
    pub max_abs: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { max_iter: 100, step_tol: 1e-12, max_abs: 1e12 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Root {
    pub x: Vec<f64>,
    pub residual_norm: f64,
    pub iterations: usize,
}

/// Residual vector and Jacobian at a point.
pub type Linear = (DVector<f64>, DMatrix<f64>);

fn newton_step(f: &DVector<f64>, j: &DMatrix<f64>) -> Option<DVector<f64>> {
    let rhs = -f;
    if j.is_square() {
        if let Some(dx) = j.clone().lu().solve(&rhs) {
            if dx.iter().all(|d| d.is_finite()) {
                return Some(dx);
            }
        }
    }
    let svd = j.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 || !smax.is_finite() {
        return None;
    }
    svd.solve(&rhs, smax * 1e-13).ok().filter(|dx| dx.iter().all(|d| d.is_finite()))
}

/// Runs damped Newton from `x0`. Returns `None` on divergence, evaluation
/// failure at the start point, or when the iteration budget runs out.
pub fn damped_newton<F>(system: &F, x0: Vec<f64>, opts: &NewtonOptions) -> Option<Root>
where
    F: Fn(&[f64]) -> Result<Linear>,
{
    let mut x = DVector::from_vec(x0);
    let (mut f, mut j) = system(x.as_slice()).ok()?;
    for iter in 1..=opts.max_iter {
        let phi = f.norm_squared();
        if !phi.is_finite() {
            return None;
        }
        let dx = newton_step(&f, &j)?;
        if dx.norm() <= opts.step_tol * (1.0 + x.norm()) {
            x += dx;
            let residual_norm = system(x.as_slice()).map(|(f, _)| f.norm()).unwrap_or_else(|_| f.norm());
            return Some(Root { x: x.as_slice().to_vec(), residual_norm, iterations: iter });
        }
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..30 {
            let trial = &x + &dx * t;
            if let Ok((ft, jt)) = system(trial.as_slice()) {
                let p = ft.norm_squared();
                if p.is_finite() && p <= (1.0 - 1e-4 * t) * phi {
                    accepted = Some((trial, ft, jt));
                    break;
                }
            }
            t *= 0.5;
        }
        let (xn, fn_, jn) = accepted?;
        if xn.amax() > opts.max_abs {
            return None;
        }
        x = xn;
        f = fn_;
        j = jn;
        if f.norm_squared() == 0.0 {
            return Some(Root { x: x.as_slice().to_vec(), residual_norm: 0.0, iterations: iter });
        }
    }
    None
}

/// Runs Newton from every start; results stay in start order.
pub fn multistart<F>(system: &F, starts: Vec<Vec<f64>>, opts: &NewtonOptions, exec: Execution) -> Vec<Option<Root>>
where
    F: Fn(&[f64]) -> Result<Linear> + Sync,
{
    map_ordered(starts, exec, |x0| damped_newton(system, x0, opts))
}

/// Start 0 is `base`; later starts add independent uniform(-1, 1) offsets.
pub fn perturbed_starts(base: &[f64], count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count.max(1));
    out.push(base.to_vec());
    for _ in 1..count {
        out.push(base.iter().map(|b| b + rng.gen_range(-1.0..1.0)).collect());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn circle_line(x: &[f64]) -> Result<Linear> {
        // x^2 + y^2 = 4, x = y
        let f = DVector::from_vec(vec![x[0] * x[0] + x[1] * x[1] - 4.0, x[0] - x[1]]);
        let j = DMatrix::from_row_slice(2, 2, &[2.0 * x[0], 2.0 * x[1], 1.0, -1.0]);
        Ok((f, j))
    }

    #[test]
    fn finds_both_intersections() {
        let opts = NewtonOptions::default();
        let r = damped_newton(&circle_line, vec![1.0, 0.5], &opts).unwrap();
        assert!((r.x[0] - 2f64.sqrt()).abs() < 1e-12);
        let r = damped_newton(&circle_line, vec![-3.0, -1.0], &opts).unwrap();
        assert!((r.x[0] + 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn overdetermined_consistent_system() {
        let sys = |x: &[f64]| -> Result<Linear> {
            let f = DVector::from_vec(vec![x[0] - 1.0, 2.0 * (x[0] - 1.0), (x[0] - 1.0).powi(2)]);
            let j = DMatrix::from_column_slice(3, 1, &[1.0, 2.0, 2.0 * (x[0] - 1.0)]);
            Ok((f, j))
        };
        let r = damped_newton(&sys, vec![5.0], &NewtonOptions::default()).unwrap();
        assert!((r.x[0] - 1.0).abs() < 1e-12);
        assert!(r.residual_norm < 1e-12);
    }

    #[test]
    fn divergent_iterates_are_rejected() {
        // no root: exp-like growth pushes x away
        let sys = |x: &[f64]| -> Result<Linear> {
            Ok((DVector::from_vec(vec![1.0 / (1.0 + x[0] * x[0])]), DMatrix::from_element(1, 1, -2.0 * x[0] / (1.0 + x[0] * x[0]).powi(2))))
        };
        assert!(damped_newton(&sys, vec![1.0], &NewtonOptions::default()).is_none());
    }

    #[test]
    fn starts_are_reproducible() {
        let a = perturbed_starts(&[0.5, 1.0], 8, 3);
        assert_eq!(a, perturbed_starts(&[0.5, 1.0], 8, 3));
        assert_eq!(a[0], vec![0.5, 1.0]);
        assert_ne!(a[1], a[0]);
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let starts = perturbed_starts(&[1.0, 1.0], 16, 11);
        let opts = NewtonOptions::default();
        assert_eq!(
            multistart(&circle_line, starts.clone(), &opts, Execution::Sequential),
            multistart(&circle_line, starts, &opts, Execution::default())
        );
    }
}
