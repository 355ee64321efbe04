//! Dense dual simplex for `min cᵀx  s.t.  Ax ≤ b, x ≥ 0` with `c ≥ 0`.
//!
//! With nonnegative costs the all-slack basis is dual feasible for every
//! right-hand side, so no phase one is needed and a changed `b` is re-solved
//! from the previous optimal basis. The leaving row is the most infeasible
//! one; after a run of degenerate pivots the solver switches to Bland's rule
//! (smallest basic index leaves, ratio ties to the smallest column) until the
//! objective moves again, which rules out cycling.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub(crate) const MAX_PIVOTS: usize = 50_000;
const FEAS_TOL: f64 = 1e-10;
const PIVOT_TOL: f64 = 1e-11;
const REFACTOR_EVERY: usize = 100;
const STALL_LIMIT: usize = 30;

#[derive(Debug, Clone)]
pub(crate) struct DualSimplex {
    rows: usize,
    nx: usize,
    ncols: usize,
    a: DMatrix<f64>,
    c: Vec<f64>,
    b: Vec<f64>,
    /// `B⁻¹[A | I]`, row-major `rows × ncols`.
    t: Vec<f64>,
    rhs: Vec<f64>,
    /// Reduced costs over all columns.
    d: Vec<f64>,
    basis: Vec<usize>,
    since_refactor: usize,
}

impl DualSimplex {
    pub(crate) fn new(a: DMatrix<f64>, c: Vec<f64>, b: Vec<f64>) -> Self {
        let (rows, nx) = a.shape();
        assert_eq!(c.len(), nx);
        assert_eq!(b.len(), rows);
        debug_assert!(c.iter().all(|&v| v >= 0.0));
        let ncols = nx + rows;
        let mut t = vec![0.0; rows * ncols];
        for r in 0..rows {
            for j in 0..nx {
                t[r * ncols + j] = a[(r, j)];
            }
            t[r * ncols + nx + r] = 1.0;
        }
        let mut d = c.clone();
        d.resize(ncols, 0.0);
        DualSimplex {
            rows,
            nx,
            ncols,
            a,
            c,
            rhs: b.clone(),
            b,
            t,
            d,
            basis: (nx..ncols).collect(),
            since_refactor: 0,
        }
    }

    /// Replaces `b`, keeping the current basis.
    pub(crate) fn set_rhs(&mut self, b: Vec<f64>) {
        assert_eq!(b.len(), self.rows);
        let (nx, nc) = (self.nx, self.ncols);
        for r in 0..self.rows {
            let row = &self.t[r * nc + nx..(r + 1) * nc];
            self.rhs[r] = row.iter().zip(&b).map(|(x, y)| x * y).sum();
        }
        self.b = b;
    }

    /// Runs dual simplex pivots until primal feasible. Returns the pivot count.
    pub(crate) fn solve(&mut self) -> Result<usize> {
        let mut pivots = 0usize;
        let mut stalled = 0usize;
        loop {
            let leaving = if stalled >= STALL_LIMIT {
                self.leaving_row_bland()
            } else {
                self.leaving_row()
            };
            let r = match leaving {
                Some(r) => r,
                None => return Ok(pivots),
            };
            if pivots >= MAX_PIVOTS {
                return Err(Error::Convergence {
                    iterations: pivots,
                    violation: -self.rhs[r],
                });
            }
            let j = self.entering_column(r).ok_or(Error::Infeasible)?;
            if self.d[j] > PIVOT_TOL {
                stalled = 0;
            } else {
                stalled += 1;
            }
            self.pivot(r, j);
            pivots += 1;
            if self.since_refactor >= REFACTOR_EVERY {
                self.refactor();
            }
        }
    }

    fn leaving_row(&self) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (r, &v) in self.rhs.iter().enumerate() {
            if v < -FEAS_TOL && best.is_none_or(|(_, b)| v < b) {
                best = Some((r, v));
            }
        }
        best.map(|(r, _)| r)
    }

    fn leaving_row_bland(&self) -> Option<usize> {
        (0..self.rows)
            .filter(|&r| self.rhs[r] < -FEAS_TOL)
            .min_by_key(|&r| self.basis[r])
    }

    fn entering_column(&self, r: usize) -> Option<usize> {
        let row = &self.t[r * self.ncols..(r + 1) * self.ncols];
        let mut best: Option<(usize, f64)> = None;
        for (j, &coef) in row.iter().enumerate() {
            if coef < -PIVOT_TOL {
                let ratio = self.d[j].max(0.0) / -coef;
                match best {
                    Some((_, b)) if ratio >= b => {}
                    _ => best = Some((j, ratio)),
                }
            }
        }
        best.map(|(j, _)| j)
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let nc = self.ncols;
        let piv = self.t[r * nc + j];
        {
            let row = &mut self.t[r * nc..(r + 1) * nc];
            row.iter_mut().for_each(|v| *v /= piv);
            row[j] = 1.0;
        }
        self.rhs[r] /= piv;
        let (before, rest) = self.t.split_at_mut(r * nc);
        let (prow, after) = rest.split_at_mut(nc);
        let rhs_r = self.rhs[r];
        for (i, row) in before
            .chunks_exact_mut(nc)
            .enumerate()
            .chain(after.chunks_exact_mut(nc).enumerate().map(|(k, row)| (r + 1 + k, row)))
        {
            let f = row[j];
            if f != 0.0 {
                row.iter_mut().zip(prow.iter()).for_each(|(v, p)| *v -= f * p);
                row[j] = 0.0;
                self.rhs[i] -= f * rhs_r;
            }
        }
        let f = self.d[j];
        if f != 0.0 {
            self.d.iter_mut().zip(prow.iter()).for_each(|(v, p)| *v -= f * p);
        }
        self.d[j] = 0.0;
        self.basis[r] = j;
        self.since_refactor += 1;
    }

    /// Rebuilds the tableau from the original data and the current basis.
    pub(crate) fn refactor(&mut self) {
        let (rows, nx, nc) = (self.rows, self.nx, self.ncols);
        let mut bmat = DMatrix::<f64>::zeros(rows, rows);
        for (k, &col) in self.basis.iter().enumerate() {
            if col < nx {
                bmat.set_column(k, &self.a.column(col));
            } else {
                bmat[(col - nx, k)] = 1.0;
            }
        }
        let binv = match bmat.try_inverse() {
            Some(m) => m,
            None => return,
        };
        let ta = &binv * &self.a;
        for r in 0..rows {
            for j in 0..nx {
                self.t[r * nc + j] = ta[(r, j)];
            }
            for k in 0..rows {
                self.t[r * nc + nx + k] = binv[(r, k)];
            }
            self.rhs[r] = (0..rows).map(|k| binv[(r, k)] * self.b[k]).sum();
        }
        let cb: Vec<f64> = self
            .basis
            .iter()
            .map(|&col| if col < nx { self.c[col] } else { 0.0 })
            .collect();
        for j in 0..nc {
            let cj = if j < nx { self.c[j] } else { 0.0 };
            let z: f64 = (0..rows).map(|r| cb[r] * self.t[r * nc + j]).sum();
            self.d[j] = cj - z;
        }
        for (r, &col) in self.basis.iter().enumerate() {
            for i in 0..rows {
                self.t[i * nc + col] = if i == r { 1.0 } else { 0.0 };
            }
            self.d[col] = 0.0;
        }
        self.since_refactor = 0;
    }

    /// Values of the structural variables at the current basis.
    pub(crate) fn primal(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.nx];
        for (r, &col) in self.basis.iter().enumerate() {
            if col < self.nx {
                x[col] = self.rhs[r].max(0.0);
            }
        }
        x
    }
}
