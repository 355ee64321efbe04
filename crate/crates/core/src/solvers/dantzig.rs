//! Dantzig selector as a linear program.
//!
//! In correlation units the problem is `min Σ_l |v_l| / √d_l` subject to
//! `|R v − ã|_∞ ≤ λ`. Writing `v = u − z` with `u, z ≥ 0` gives `2(p−1)`
//! variables and the `2(p−1)` inequality rows
//!
//! ```text
//!   R u − R z ≤ λ + ã
//!  −R u + R z ≤ λ − ã
//! ```
//!
//! The costs are rescaled so the largest is 1, which leaves the argmin unchanged.

use nalgebra::DMatrix;

use super::simplex::DualSimplex;
use super::{check_delta, RegressionProblem, Standardized};
use crate::error::{Error, Result};

/// Post-hoc tolerance on the constraint `|R v − ã|_∞ ≤ λ`.
pub const FEASIBILITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct DantzigPath {
    std: Standardized,
    lp: DualSimplex,
}

impl DantzigPath {
    pub fn new(problem: &RegressionProblem) -> Self {
        let std = problem.standardized();
        let m = std.a.len();
        let mut a = DMatrix::<f64>::zeros(2 * m, 2 * m);
        for r in 0..m {
            for l in 0..m {
                let v = std.corr[(r, l)];
                a[(r, l)] = v;
                a[(r, m + l)] = -v;
                a[(m + r, l)] = -v;
                a[(m + r, m + l)] = v;
            }
        }
        let w: Vec<f64> = std.root_d.iter().map(|rd| 1.0 / rd).collect();
        let wmax = w.iter().cloned().fold(0.0, f64::max);
        let c: Vec<f64> = w.iter().chain(w.iter()).map(|v| v / wmax).collect();
        let b = rhs(&std.a, 0.0);
        DantzigPath {
            lp: DualSimplex::new(a, c, b),
            std,
        }
    }

    fn current(&self) -> Vec<f64> {
        let x = self.lp.primal();
        let m = self.std.a.len();
        (0..m).map(|l| x[l] - x[m + l]).collect()
    }

    fn max_violation(&self, v: &[f64], lambda: f64) -> f64 {
        let m = v.len();
        (0..m)
            .map(|r| {
                let s: f64 = (0..m).map(|l| self.std.corr[(r, l)] * v[l]).sum::<f64>() - self.std.a[r];
                (s.abs() - lambda).max(0.0)
            })
            .fold(0.0, f64::max)
    }
}

fn rhs(a: &[f64], lambda: f64) -> Vec<f64> {
    a.iter()
        .map(|ai| lambda + ai)
        .chain(a.iter().map(|ai| lambda - ai))
        .collect()
}

impl super::NodeSolver for DantzigPath {
    fn solve(&mut self, delta: f64) -> Result<Vec<f64>> {
        check_delta(delta)?;
        let lambda = self.std.lambda(delta);
        self.lp.set_rhs(rhs(&self.std.a, lambda));
        let mut pivots = self.lp.solve()?;
        let mut v = self.current();
        let mut violation = self.max_violation(&v, lambda);
        if violation > FEASIBILITY_TOL {
            // drift in the updated tableau; retry from a fresh factorization
            self.lp.refactor();
            pivots += self.lp.solve()?;
            v = self.current();
            violation = self.max_violation(&v, lambda);
        }
        if violation > FEASIBILITY_TOL {
            return Err(Error::Convergence {
                iterations: pivots,
                violation,
            });
        }
        Ok(self.std.to_beta(&v))
    }
}

/// Node-wise Dantzig selector `β̂_i(δ)` from a cold start.
pub fn solve_dantzig(problem: &RegressionProblem, delta: f64) -> Result<Vec<f64>> {
    use super::NodeSolver;
    DantzigPath::new(problem).solve(delta)
}
