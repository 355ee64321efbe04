//! Node-wise sparse regression of each variable on all the others.
//!
//! Both estimators work on the standardized Gram form of the problem: with
//! `D = diag(Σ̂_{-i,-i})` and `s = √σ̂_ii`, the correlation matrix
//! `R = D^{-1/2} Σ̂_{-i,-i} D^{-1/2}` and the vector `ã = D^{-1/2} â / s`. In
//! these units the penalty is `δ √(log p / n)` and the coefficients map back
//! as `β_l = s · v_l / √d_l`.

mod dantzig;
mod lasso;
mod simplex;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::mathcore::{center_and_covariance, pairwise_dot, SymmetricMatrix};

pub use dantzig::{solve_dantzig, DantzigPath};
pub use lasso::{solve_lasso, LassoPath, LASSO_KKT_TOL, LASSO_MAX_SWEEPS, LASSO_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Lasso,
    Dantzig,
}

impl std::str::FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lasso" => Ok(SolverKind::Lasso),
            "dantzig" => Ok(SolverKind::Dantzig),
            other => Err(Error::Parameter(format!("unknown solver {other:?}"))),
        }
    }
}

impl std::fmt::Display for SolverKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SolverKind::Lasso => "lasso",
            SolverKind::Dantzig => "dantzig",
        })
    }
}

/// Regression of variable `target` on the remaining `p - 1` variables, in Gram form.
#[derive(Debug, Clone)]
pub struct RegressionProblem {
    target: usize,
    gram: DMatrix<f64>,
    cross: Vec<f64>,
    diag_scale: Vec<f64>,
    target_variance: f64,
    n: usize,
    p: usize,
    column_map: Vec<usize>,
}

impl RegressionProblem {
    /// Extracts the problem for node `target` from the sample covariance.
    pub fn from_covariance(cov: &SymmetricMatrix, target: usize, n: usize) -> Result<Self> {
        let p = cov.dim();
        if target >= p {
            return Err(Error::Parameter(format!("target {target} out of range for p = {p}")));
        }
        let column_map = column_map(p, target);
        let m = p - 1;
        let gram = DMatrix::from_fn(m, m, |a, b| cov.get(column_map[a], column_map[b]));
        let cross = column_map.iter().map(|&g| cov.get(g, target)).collect();
        Self::assemble(target, gram, cross, cov.get(target, target), n, p, column_map)
    }

    /// Builds a problem from explicit pieces. `gram` is `(p-1)×(p-1)`.
    pub fn new(
        target: usize,
        gram: SymmetricMatrix,
        cross: Vec<f64>,
        target_variance: f64,
        n: usize,
        p: usize,
    ) -> Result<Self> {
        if p < 2 || target >= p {
            return Err(Error::Parameter(format!("invalid target {target} for p = {p}")));
        }
        if gram.dim() != p - 1 || cross.len() != p - 1 {
            return Err(Error::Parameter(format!(
                "gram is {0}x{0} and cross has length {1}, expected {2}",
                gram.dim(),
                cross.len(),
                p - 1
            )));
        }
        Self::assemble(
            target,
            gram.into_matrix(),
            cross,
            target_variance,
            n,
            p,
            column_map(p, target),
        )
    }

    fn assemble(
        target: usize,
        gram: DMatrix<f64>,
        cross: Vec<f64>,
        target_variance: f64,
        n: usize,
        p: usize,
        column_map: Vec<usize>,
    ) -> Result<Self> {
        if n < 2 || p < 2 {
            return Err(Error::InsufficientData(format!("need n >= 2 and p >= 2, got n = {n}, p = {p}")));
        }
        if !(target_variance > 0.0) {
            return Err(Error::ConstantColumn { column: target });
        }
        let diag_scale: Vec<f64> = (0..p - 1).map(|l| gram[(l, l)]).collect();
        if let Some(l) = diag_scale.iter().position(|&d| !(d > 0.0)) {
            return Err(Error::ConstantColumn { column: column_map[l] });
        }
        Ok(RegressionProblem {
            target,
            gram,
            cross,
            diag_scale,
            target_variance,
            n,
            p,
            column_map,
        })
    }

    pub fn target(&self) -> usize {
        self.target
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn cross(&self) -> &[f64] {
        &self.cross
    }

    pub fn diag_scale(&self) -> &[f64] {
        &self.diag_scale
    }

    pub fn target_variance(&self) -> f64 {
        self.target_variance
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Local coefficient position → global variable index.
    pub fn column_map(&self) -> &[usize] {
        &self.column_map
    }

    fn standardized(&self) -> Standardized {
        let m = self.p - 1;
        let root_d: Vec<f64> = self.diag_scale.iter().map(|d| d.sqrt()).collect();
        let s = self.target_variance.sqrt();
        let corr = DMatrix::from_fn(m, m, |a, b| {
            if a == b {
                1.0
            } else {
                self.gram[(a, b)] / (root_d[a] * root_d[b])
            }
        });
        let a = (0..m).map(|l| self.cross[l] / (root_d[l] * s)).collect();
        Standardized {
            corr,
            a,
            root_d,
            target_scale: s,
            lambda_unit: ((self.p as f64).ln() / self.n as f64).sqrt(),
        }
    }
}

/// Local-to-global index map for node `target`: `l ↦ l` below the target, `l + 1` above.
pub fn column_map(p: usize, target: usize) -> Vec<usize> {
    (0..p).filter(|&g| g != target).collect()
}

/// Problem in correlation units; see the module docs.
#[derive(Debug, Clone)]
struct Standardized {
    corr: DMatrix<f64>,
    a: Vec<f64>,
    root_d: Vec<f64>,
    target_scale: f64,
    lambda_unit: f64,
}

impl Standardized {
    fn lambda(&self, delta: f64) -> f64 {
        delta * self.lambda_unit
    }

    fn to_beta(&self, v: &[f64]) -> Vec<f64> {
        v.iter()
            .zip(&self.root_d)
            .map(|(v, rd)| self.target_scale * v / rd)
            .collect()
    }
}

/// Penalty level `λ = δ √(σ̂_ii log p / n)`.
pub fn lambda_for(problem: &RegressionProblem, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    Ok(delta * (problem.target_variance * (problem.p as f64).ln() / problem.n as f64).sqrt())
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta >= 0.0) || !delta.is_finite() {
        return Err(Error::Parameter(format!("delta must be a finite value >= 0, got {delta}")));
    }
    Ok(())
}

/// A per-node solver that can be re-solved at successive penalty levels,
/// reusing its previous solution as a warm start.
pub trait NodeSolver: Send {
    fn solve(&mut self, delta: f64) -> Result<Vec<f64>>;
}

pub fn node_solver(kind: SolverKind, problem: &RegressionProblem) -> Box<dyn NodeSolver> {
    match kind {
        SolverKind::Lasso => Box::new(LassoPath::new(problem)),
        SolverKind::Dantzig => Box::new(DantzigPath::new(problem)),
    }
}

/// Fitted coefficients of one node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeFit {
    pub node: usize,
    /// Length `p - 1`, ordered by `column_map`.
    pub beta: Vec<f64>,
    pub column_map: Vec<usize>,
    /// `r̂_ii = (1/n) Σ_k ε̂²_ki`.
    pub r_ii: f64,
}

/// Coefficients and residuals of all `p` node-wise regressions at one `δ`.
#[derive(Debug, Clone)]
pub struct NodeRegressionSet {
    pub n: usize,
    pub p: usize,
    pub delta: f64,
    pub solver: SolverKind,
    pub nodes: Vec<NodeFit>,
    /// `n × p`; column `i` holds `ε̂_{·i}`.
    residuals: DMatrix<f64>,
}

impl NodeRegressionSet {
    /// Computes residuals `ε̂_ki = X_ki - X̄_i - (X_{k,-i} - X̄_{-i}) β̂_i` for given coefficients.
    pub fn from_coefficients(
        x: &DataMatrix,
        betas: Vec<Vec<f64>>,
        delta: f64,
        solver: SolverKind,
    ) -> Result<Self> {
        let p = x.p();
        if betas.len() != p {
            return Err(Error::Parameter(format!("expected {p} coefficient vectors, got {}", betas.len())));
        }
        let centered = x.centered();
        Self::from_centered(&centered, betas, delta, solver)
    }

    fn from_centered(
        centered: &DMatrix<f64>,
        betas: Vec<Vec<f64>>,
        delta: f64,
        solver: SolverKind,
    ) -> Result<Self> {
        let (n, p) = centered.shape();
        let mut residuals = DMatrix::<f64>::zeros(n, p);
        let mut nodes = Vec::with_capacity(p);
        for (i, beta) in betas.into_iter().enumerate() {
            if beta.len() + 1 != p {
                return Err(Error::Parameter(format!(
                    "node {} has {} coefficients, expected {}",
                    i + 1,
                    beta.len(),
                    p - 1
                )));
            }
            let map = column_map(p, i);
            let mut eps: Vec<f64> = centered.column(i).iter().copied().collect();
            for (l, &b) in beta.iter().enumerate() {
                if b != 0.0 {
                    let col = centered.column(map[l]);
                    eps.iter_mut().zip(col.iter()).for_each(|(e, &xv)| *e -= xv * b);
                }
            }
            let r_ii = pairwise_dot(&eps, &eps) / n as f64;
            residuals.column_mut(i).copy_from_slice(&eps);
            nodes.push(NodeFit {
                node: i,
                beta,
                column_map: map,
                r_ii,
            });
        }
        Ok(NodeRegressionSet {
            n,
            p,
            delta,
            solver,
            nodes,
            residuals,
        })
    }

    /// Assembles a set from explicit residuals (`n × p`) and coefficients,
    /// recomputing each `r̂_ii` from its residual column.
    pub fn from_parts(
        residuals: DMatrix<f64>,
        betas: Vec<Vec<f64>>,
        delta: f64,
        solver: SolverKind,
    ) -> Result<Self> {
        let (n, p) = residuals.shape();
        if betas.len() != p || betas.iter().any(|b| b.len() + 1 != p) {
            return Err(Error::Parameter(format!("expected {p} coefficient vectors of length {}", p.saturating_sub(1))));
        }
        let nodes = betas
            .into_iter()
            .enumerate()
            .map(|(i, beta)| {
                let col = &residuals.as_slice()[i * n..(i + 1) * n];
                NodeFit {
                    node: i,
                    beta,
                    column_map: column_map(p, i),
                    r_ii: pairwise_dot(col, col) / n as f64,
                }
            })
            .collect();
        Ok(NodeRegressionSet {
            n,
            p,
            delta,
            solver,
            nodes,
            residuals,
        })
    }

    pub fn residual(&self, node: usize) -> &[f64] {
        let n = self.n;
        &self.residuals.as_slice()[node * n..(node + 1) * n]
    }

    pub fn residual_matrix(&self) -> &DMatrix<f64> {
        &self.residuals
    }

    /// Node `node`'s coefficient on global variable `var`.
    ///
    /// # Panics
    /// If `var == node` or out of range: that lookup has no meaning.
    pub fn coefficient(&self, node: usize, var: usize) -> f64 {
        let fit = &self.nodes[node];
        match fit.column_map.binary_search(&var) {
            Ok(l) => fit.beta[l],
            Err(_) => panic!("node {node} has no coefficient for variable {var}"),
        }
    }

    pub fn r_diag(&self) -> Vec<f64> {
        self.nodes.iter().map(|f| f.r_ii).collect()
    }

    pub fn to_json(&self) -> Vec<NodeFitJson> {
        self.nodes
            .iter()
            .map(|f| NodeFitJson {
                i: f.node + 1,
                delta: self.delta,
                solver: self.solver,
                beta: f
                    .beta
                    .iter()
                    .enumerate()
                    .filter(|(_, b)| **b != 0.0)
                    .map(|(l, &b)| (f.column_map[l] + 1, b))
                    .collect(),
                r_ii: f.r_ii,
            })
            .collect()
    }
}

/// Debug dump of one node: nonzero coefficients as `(variable, value)`, 1-based.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NodeFitJson {
    pub i: usize,
    pub delta: f64,
    pub solver: SolverKind,
    pub beta: Vec<(usize, f64)>,
    pub r_ii: f64,
}

/// Data prepared once and shared by every node and every penalty level.
#[derive(Debug, Clone)]
pub struct PreparedData {
    centered: DMatrix<f64>,
    problems: Vec<RegressionProblem>,
}

impl PreparedData {
    pub fn new(x: &DataMatrix) -> Result<Self> {
        if let Some(j) = x.constant_column() {
            return Err(Error::ConstantColumn { column: j });
        }
        let (_, cov) = center_and_covariance(x)?;
        let problems = (0..x.p())
            .map(|i| RegressionProblem::from_covariance(&cov, i, x.n()))
            .collect::<Result<Vec<_>>>()?;
        Ok(PreparedData {
            centered: x.centered(),
            problems,
        })
    }

    pub fn p(&self) -> usize {
        self.problems.len()
    }

    pub fn problem(&self, i: usize) -> &RegressionProblem {
        &self.problems[i]
    }
}

/// Fits every node at one `δ`.
pub fn fit_all_nodes(x: &DataMatrix, solver: SolverKind, delta: f64) -> Result<NodeRegressionSet> {
    let prepared = PreparedData::new(x)?;
    fit_path(&prepared, solver, &[delta]).pop().expect("one delta")
}

/// Fits every node at each `δ` in `deltas`, in the given order, warm-starting
/// each node's solver from its previous solution. Pass the grid in
/// descending order for the cheapest path.
pub fn fit_path(
    prepared: &PreparedData,
    solver: SolverKind,
    deltas: &[f64],
) -> Vec<Result<NodeRegressionSet>> {
    if let Some(&bad) = deltas.iter().find(|d| check_delta(**d).is_err()) {
        return deltas
            .iter()
            .map(|_| Err(Error::Parameter(format!("delta must be a finite value >= 0, got {bad}"))))
            .collect();
    }
    let solve_node = |i: usize| -> Vec<Result<Vec<f64>>> {
        let mut s = node_solver(solver, &prepared.problems[i]);
        deltas
            .iter()
            .map(|&d| s.solve(d).map_err(|e| e.at_node(i)))
            .collect()
    };
    let p = prepared.p();
    #[cfg(feature = "parallel")]
    let per_node: Vec<Vec<Result<Vec<f64>>>> = {
        use rayon::prelude::*;
        (0..p).into_par_iter().map(solve_node).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let per_node: Vec<Vec<Result<Vec<f64>>>> = (0..p).map(solve_node).collect();

    let mut per_node: Vec<std::vec::IntoIter<Result<Vec<f64>>>> =
        per_node.into_iter().map(Vec::into_iter).collect();
    deltas
        .iter()
        .map(|&delta| {
            let betas: Vec<Result<Vec<f64>>> = per_node
                .iter_mut()
                .map(|it| it.next().expect("one result per delta"))
                .collect();
            let betas = betas.into_iter().collect::<Result<Vec<_>>>()?;
            NodeRegressionSet::from_centered(&prepared.centered, betas, delta, solver)
        })
        .collect()
}
