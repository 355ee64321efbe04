//! Cyclic coordinate descent for the Lasso in Gram form.
//!
//! Minimizes `½ αᵀRα − ãᵀα + λ|α|₁` in correlation units (see the parent
//! module), which is the node-wise Lasso objective divided by `σ̂_ii`.

use nalgebra::DMatrix;

use super::{check_delta, RegressionProblem, Standardized};
use crate::error::{Error, Result};

/// Stop when no coordinate moves by more than this in a full sweep.
pub const LASSO_TOL: f64 = 1e-7;
pub const LASSO_MAX_SWEEPS: usize = 10_000;
/// KKT tolerance checked on the gradient at the returned point.
pub const LASSO_KKT_TOL: f64 = 1e-6;

#[inline]
pub(crate) fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// Lasso along a penalty path with warm starts.
#[derive(Debug, Clone)]
pub struct LassoPath {
    std: Standardized,
    alpha: Vec<f64>,
    grad: Vec<f64>,
}

impl LassoPath {
    pub fn new(problem: &RegressionProblem) -> Self {
        let std = problem.standardized();
        let m = std.a.len();
        let grad = std.a.iter().map(|v| -v).collect();
        LassoPath {
            std,
            alpha: vec![0.0; m],
            grad,
        }
    }

    /// Solution in correlation units from the last call to `solve`.
    pub fn scaled_coefficients(&self) -> &[f64] {
        &self.alpha
    }

    /// Largest KKT violation of the current point at penalty `lambda` (correlation units).
    pub fn kkt_violation(&self, lambda: f64) -> f64 {
        let grad = gradient(&self.std.corr, &self.std.a, &self.alpha);
        kkt_violation(&grad, &self.alpha, lambda)
    }

    fn run(&mut self, lambda: f64) -> Result<usize> {
        let r = &self.std.corr;
        let m = self.alpha.len();
        for sweep in 1..=LASSO_MAX_SWEEPS {
            let mut max_change = 0.0f64;
            for l in 0..m {
                let old = self.alpha[l];
                let rll = r[(l, l)];
                let new = soft_threshold(rll * old - self.grad[l], lambda) / rll;
                if new != old {
                    let d = new - old;
                    for (k, g) in self.grad.iter_mut().enumerate() {
                        *g += d * r[(k, l)];
                    }
                    self.alpha[l] = new;
                    max_change = max_change.max(d.abs());
                }
            }
            if max_change < LASSO_TOL {
                // refresh the running gradient before certifying
                self.grad = gradient(r, &self.std.a, &self.alpha);
                if kkt_violation(&self.grad, &self.alpha, lambda) <= LASSO_KKT_TOL {
                    return Ok(sweep);
                }
            }
        }
        self.grad = gradient(r, &self.std.a, &self.alpha);
        Err(Error::Convergence {
            iterations: LASSO_MAX_SWEEPS,
            violation: kkt_violation(&self.grad, &self.alpha, lambda),
        })
    }
}

impl super::NodeSolver for LassoPath {
    fn solve(&mut self, delta: f64) -> Result<Vec<f64>> {
        check_delta(delta)?;
        let lambda = self.std.lambda(delta);
        self.run(lambda)?;
        Ok(self.std.to_beta(&self.alpha))
    }
}

fn gradient(r: &DMatrix<f64>, a: &[f64], alpha: &[f64]) -> Vec<f64> {
    let m = a.len();
    (0..m)
        .map(|k| {
            let mut s = -a[k];
            for (l, &al) in alpha.iter().enumerate() {
                if al != 0.0 {
                    s += r[(k, l)] * al;
                }
            }
            s
        })
        .collect()
}

fn kkt_violation(grad: &[f64], alpha: &[f64], lambda: f64) -> f64 {
    grad.iter()
        .zip(alpha)
        .map(|(&g, &a)| {
            if a == 0.0 {
                (g.abs() - lambda).max(0.0)
            } else {
                (g + a.signum() * lambda).abs()
            }
        })
        .fold(0.0, f64::max)
}

/// Node-wise Lasso `β̂_i(δ)` from a cold start.
pub fn solve_lasso(problem: &RegressionProblem, delta: f64) -> Result<Vec<f64>> {
    use super::NodeSolver;
    LassoPath::new(problem).solve(delta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mathcore::SymmetricMatrix;
    use crate::solvers::{lambda_for, NodeSolver};

    fn problem(gram: &[f64], cross: &[f64], var: f64, n: usize) -> RegressionProblem {
        let m = cross.len();
        let g = SymmetricMatrix::new(DMatrix::from_row_slice(m, m, gram)).unwrap();
        RegressionProblem::new(0, g, cross.to_vec(), var, n, m + 1).unwrap()
    }

    #[test]
    fn zero_penalty_is_ols() {
        let gram = [2.0, 0.3, 0.1, 0.3, 1.0, -0.2, 0.1, -0.2, 1.5];
        let cross = [0.4, -0.3, 0.9];
        let prob = problem(&gram, &cross, 1.2, 50);
        let beta = solve_lasso(&prob, 0.0).unwrap();
        let g = DMatrix::from_row_slice(3, 3, &gram);
        let ols = g.lu().solve(&nalgebra::DVector::from_row_slice(&cross)).unwrap();
        for l in 0..3 {
            assert!((beta[l] - ols[l]).abs() < 1e-6);
        }
    }

    #[test]
    fn decoupled_design_soft_thresholds() {
        let d = [4.0, 0.25, 1.0];
        let gram = [d[0], 0.0, 0.0, 0.0, d[1], 0.0, 0.0, 0.0, d[2]];
        let cross = [1.0, -0.2, 0.05];
        let var = 2.0;
        let prob = problem(&gram, &cross, var, 30);
        let delta = 0.7;
        let lambda = lambda_for(&prob, delta).unwrap();
        let beta = solve_lasso(&prob, delta).unwrap();
        for l in 0..3 {
            // α_l = S(a_l/√d_l, λ) in the unscaled problem, β_l = α_l / √d_l
            let alpha = soft_threshold(cross[l] / d[l].sqrt(), lambda);
            assert!((beta[l] - alpha / d[l].sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn large_penalty_gives_zero() {
        let gram = [1.0, 0.5, 0.5, 1.0];
        let cross = [0.2, -0.1];
        let prob = problem(&gram, &cross, 1.0, 10);
        let lambda_max = cross.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let unit = lambda_for(&prob, 1.0).unwrap();
        let beta = solve_lasso(&prob, lambda_max / unit * 1.0001).unwrap();
        assert_eq!(beta, vec![0.0, 0.0]);
    }

    #[test]
    fn warm_path_certifies_kkt() {
        let gram = [1.0, 0.6, 0.2, 0.6, 1.0, 0.4, 0.2, 0.4, 1.0];
        let cross = [0.5, 0.45, -0.1];
        let prob = problem(&gram, &cross, 1.0, 40);
        let mut path = LassoPath::new(&prob);
        for j in (0..=40).rev() {
            let delta = j as f64 / 20.0;
            path.solve(delta).unwrap();
            assert!(path.kkt_violation(path.std.lambda(delta)) <= LASSO_KKT_TOL);
        }
    }

    #[test]
    fn singular_gram_reports_non_convergence_or_solves() {
        // perfectly collinear columns at λ = 0: any split of the weight is optimal
        let gram = [1.0, 1.0, 1.0, 1.0];
        let cross = [0.5, 0.5];
        let prob = problem(&gram, &cross, 1.0, 10);
        let beta = solve_lasso(&prob, 0.0).unwrap();
        assert!((beta[0] + beta[1] - 0.5).abs() < 1e-6);
    }
}
