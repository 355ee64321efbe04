//! Bias-corrected residual covariances and their studentized form.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mathcore::pairwise_dot;
use crate::solvers::{NodeRegressionSet, SolverKind};

/// Smallest admissible residual second moment `r̂_ii`.
pub const RESIDUAL_FLOOR: f64 = 1e-12;

/// Position of pair `(i, j)`, `i < j`, in row-major packed upper-triangular storage.
#[inline]
pub fn pair_index(p: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < p);
    i * (2 * p - i - 1) / 2 + (j - i - 1)
}

/// Iterates pairs `(i, j)`, `i < j`, in packed order.
pub fn pairs(p: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..p).flat_map(move |i| ((i + 1)..p).map(move |j| (i, j)))
}

/// `T_ij` and `T̂_ij` for every pair `i < j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestStatistics {
    pub p: usize,
    pub n: usize,
    /// Packed `T_ij`, see [`pair_index`].
    pub t_raw: Vec<f64>,
    /// Packed `T̂_ij`.
    pub t_hat: Vec<f64>,
    pub r_diag: Vec<f64>,
    pub delta: f64,
    pub solver: SolverKind,
}

impl TestStatistics {
    /// Statistics supplied directly (e.g. simulated), with unit residual variances.
    pub fn from_t_hat(p: usize, n: usize, t_hat: Vec<f64>) -> Result<Self> {
        if p < 2 || t_hat.len() != p * (p - 1) / 2 {
            return Err(Error::Parameter(format!(
                "expected {} statistics for p = {p}, got {}",
                p * p.saturating_sub(1) / 2,
                t_hat.len()
            )));
        }
        if t_hat.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("statistics must be finite".into()));
        }
        let scale = (n as f64).sqrt();
        Ok(TestStatistics {
            p,
            n,
            t_raw: t_hat.iter().map(|v| v / scale).collect(),
            t_hat,
            r_diag: vec![1.0; p],
            delta: f64::NAN,
            solver: SolverKind::Lasso,
        })
    }

    pub fn pair_count(&self) -> usize {
        self.t_hat.len()
    }

    pub fn t_hat(&self, i: usize, j: usize) -> f64 {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        self.t_hat[pair_index(self.p, a, b)]
    }

    pub fn t_raw(&self, i: usize, j: usize) -> f64 {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        self.t_raw[pair_index(self.p, a, b)]
    }

    /// `(i, j, T̂_ij)` in packed order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        pairs(self.p).zip(&self.t_hat).map(|((i, j), &t)| (i, j, t))
    }

    /// CSV with header `i,j,t_hat`, 1-based indices, 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "i,j,t_hat")?;
        for (i, j, t) in self.iter() {
            writeln!(w, "{},{},{:.16e}", i + 1, j + 1, t)?;
        }
        Ok(())
    }
}

/// `r̂_ij = (1/n) Σ_k ε̂_ki ε̂_kj`.
///
/// # Panics
/// If `i == j`; the diagonal is read from the regression set.
pub fn residual_cross_moment(reg: &NodeRegressionSet, i: usize, j: usize) -> f64 {
    assert_ne!(i, j, "r_ii comes from the regression set");
    pairwise_dot(reg.residual(i), reg.residual(j)) / reg.n as f64
}

/// Bias-corrected `T_ij`: the residual cross moment plus each node's residual
/// sum of squares times the other node's coefficient on it.
///
/// # Panics
/// Unless `i < j`.
pub fn bias_corrected_t(reg: &NodeRegressionSet, i: usize, j: usize) -> f64 {
    assert!(i < j, "bias_corrected_t needs i < j, got ({i}, {j})");
    let ei = reg.residual(i);
    let ej = reg.residual(j);
    let cross = pairwise_dot(ei, ej);
    let ss_i = pairwise_dot(ei, ei);
    let ss_j = pairwise_dot(ej, ej);
    // node j's coefficient on variable i, and node i's coefficient on variable j
    let b_j_on_i = reg.coefficient(j, i);
    let b_i_on_j = reg.coefficient(i, j);
    (cross + ss_i * b_j_on_i + ss_j * b_i_on_j) / reg.n as f64
}

/// Fills `T_ij` and `T̂_ij = √(n / (r̂_ii r̂_jj)) T_ij` for all pairs.
pub fn studentize(reg: &NodeRegressionSet) -> Result<TestStatistics> {
    let r_diag = reg.r_diag();
    if let Some(node) = r_diag.iter().position(|&r| !(r > RESIDUAL_FLOOR)) {
        return Err(Error::DegenerateResidual {
            node,
            floor: RESIDUAL_FLOOR,
        });
    }
    let p = reg.p;
    let row = |i: usize| -> Vec<f64> { ((i + 1)..p).map(|j| bias_corrected_t(reg, i, j)).collect() };
    #[cfg(feature = "parallel")]
    let rows: Vec<Vec<f64>> = {
        use rayon::prelude::*;
        (0..p).into_par_iter().map(row).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let rows: Vec<Vec<f64>> = (0..p).map(row).collect();
    let t_raw: Vec<f64> = rows.into_iter().flatten().collect();
    let n = reg.n as f64;
    let t_hat = pairs(p)
        .zip(&t_raw)
        .map(|((i, j), &t)| (n / (r_diag[i] * r_diag[j])).sqrt() * t)
        .collect();
    Ok(TestStatistics {
        p,
        n: reg.n,
        t_raw,
        t_hat,
        r_diag,
        delta: reg.delta,
        solver: reg.solver,
    })
}
