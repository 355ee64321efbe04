//! Scalar and small dense-matrix kernels shared by the rest of the crate.

use nalgebra::{DMatrix, SymmetricEigen};
use statrs::function::erf;

use crate::data::DataMatrix;
use crate::error::{Error, Result};

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Dense symmetric matrix. Symmetry is exact: `m[(i, j)] == m[(j, i)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix(DMatrix<f64>);

impl SymmetricMatrix {
    /// Wraps `m`, rejecting non-square, empty or non-symmetric input.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() == 0 || m.nrows() != m.ncols() {
            return Err(Error::Parameter(format!(
                "expected a non-empty square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let d = m.nrows();
        for j in 0..d {
            for i in (j + 1)..d {
                if m[(i, j)] != m[(j, i)] {
                    return Err(Error::Parameter(format!(
                        "matrix is not symmetric at ({}, {})",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        Ok(SymmetricMatrix(m))
    }

    /// Builds a symmetric matrix from the lower triangle of `m`, mirroring it.
    pub fn from_lower(mut m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::Parameter("expected a square matrix".into()));
        }
        let d = m.nrows();
        for j in 0..d {
            for i in (j + 1)..d {
                m[(j, i)] = m[(i, j)];
            }
        }
        Self::new(m)
    }

    pub fn identity(dim: usize) -> Self {
        SymmetricMatrix(DMatrix::identity(dim, dim))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.0[(i, i)]).collect()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        SymmetricEigen::new(self.0.clone()).eigenvalues.min()
    }

    /// Returns `self + shift * I`.
    pub fn shifted(&self, shift: f64) -> Self {
        let mut m = self.0.clone();
        for i in 0..self.dim() {
            m[(i, i)] += shift;
        }
        SymmetricMatrix(m)
    }
}

/// Lower-triangular Cholesky factor `L` with `L Lᵀ = A`.
#[derive(Debug, Clone, PartialEq)]
pub struct CholeskyFactor {
    lower: DMatrix<f64>,
}

impl CholeskyFactor {
    pub fn dim(&self) -> usize {
        self.lower.nrows()
    }

    pub fn lower(&self) -> &DMatrix<f64> {
        &self.lower
    }

    /// Solves `A x = b` by forward then backward substitution.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let l = &self.lower;
        let mut y = b.to_vec();
        for i in 0..d {
            let mut s = y[i];
            for k in 0..i {
                s -= l[(i, k)] * y[k];
            }
            y[i] = s / l[(i, i)];
        }
        for i in (0..d).rev() {
            let mut s = y[i];
            for k in (i + 1)..d {
                s -= l[(k, i)] * y[k];
            }
            y[i] = s / l[(i, i)];
        }
        y
    }

    /// `A⁻¹`, column by column. The result is symmetrized exactly.
    pub fn inverse(&self) -> SymmetricMatrix {
        let d = self.dim();
        let mut inv = DMatrix::zeros(d, d);
        let mut e = vec![0.0; d];
        for j in 0..d {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            let col = self.solve(&e);
            for i in 0..d {
                inv[(i, j)] = col[i];
            }
        }
        for j in 0..d {
            for i in (j + 1)..d {
                let avg = 0.5 * (inv[(i, j)] + inv[(j, i)]);
                inv[(i, j)] = avg;
                inv[(j, i)] = avg;
            }
        }
        SymmetricMatrix(inv)
    }
}

/// Cholesky factorization without pivoting.
///
/// Fails with [`Error::NotPositiveDefinite`] at the first pivot that is not
/// strictly positive.
pub fn cholesky(m: &SymmetricMatrix) -> Result<CholeskyFactor> {
    let d = m.dim();
    let mut l = DMatrix::<f64>::zeros(d, d);
    for j in 0..d {
        let mut diag = m.get(j, j);
        for k in 0..j {
            diag -= l[(j, k)] * l[(j, k)];
        }
        if !(diag > 0.0) {
            return Err(Error::NotPositiveDefinite { pivot: j });
        }
        let ljj = diag.sqrt();
        l[(j, j)] = ljj;
        for i in (j + 1)..d {
            let mut s = m.get(i, j);
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(CholeskyFactor { lower: l })
}

pub fn gaussian_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard normal CDF `Φ(x)`.
pub fn gaussian_cdf(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::Domain(format!("gaussian_cdf of non-finite {x}")));
    }
    Ok(0.5 * libm::erfc(-x * std::f64::consts::FRAC_1_SQRT_2))
}

/// Upper tail `1 - Φ(x)`, accurate in relative terms for large `x`.
pub fn gaussian_sf(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::Domain(format!("gaussian_sf of non-finite {x}")));
    }
    Ok(0.5 * libm::erfc(x * std::f64::consts::FRAC_1_SQRT_2))
}

/// Standard normal quantile `Φ⁻¹(p)`.
///
/// Seeded by the rational approximation behind `erfc_inv`, then polished by
/// Newton steps on the lower tail so relative accuracy holds for tiny `p`.
pub fn gaussian_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("gaussian_quantile needs p in (0,1), got {p}")));
    }
    if p > 0.5 {
        return Ok(-lower_quantile(1.0 - p));
    }
    Ok(lower_quantile(p))
}

// p in (0, 0.5]
fn lower_quantile(p: f64) -> f64 {
    let mut x = -std::f64::consts::SQRT_2 * erf::erfc_inv(2.0 * p);
    for step in 0..8 {
        let f = 0.5 * libm::erfc(-x * std::f64::consts::FRAC_1_SQRT_2);
        let dens = gaussian_pdf(x);
        if dens == 0.0 {
            break;
        }
        let dx = (f - p) / dens;
        x -= dx;
        if step >= 1 && dx.abs() <= 1e-15 * x.abs().max(1.0) {
            break;
        }
    }
    x
}

/// `G(t) = 2 - 2Φ(t)`, the two-sided normal tail mass beyond `t ≥ 0`.
pub fn survival_double(t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("survival_double needs t >= 0, got {t}")));
    }
    Ok(2.0 * gaussian_sf(t)?)
}

/// Inverse of [`survival_double`]: the `t ≥ 0` with `G(t) = c`, for `c` in (0, 1].
pub fn survival_double_inverse(c: f64) -> Result<f64> {
    if !(c > 0.0 && c <= 1.0) {
        return Err(Error::Domain(format!("survival_double_inverse needs c in (0,1], got {c}")));
    }
    if c == 1.0 {
        return Ok(0.0);
    }
    Ok(-gaussian_quantile(0.5 * c)?)
}

/// Column means and the covariance with divisor `n`.
pub fn center_and_covariance(x: &DataMatrix) -> Result<(Vec<f64>, SymmetricMatrix)> {
    let n = x.n();
    if n < 2 {
        return Err(Error::InsufficientData(format!("need at least 2 samples, got {n}")));
    }
    let centered = x.centered();
    let p = x.p();
    let mut cov = DMatrix::zeros(p, p);
    for j in 0..p {
        let cj = centered.column(j);
        for i in j..p {
            let v = pairwise_dot(centered.column(i).as_slice(), cj.as_slice()) / n as f64;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    Ok((x.means(), SymmetricMatrix(cov)))
}

const PAIRWISE_BLOCK: usize = 32;

/// Dot product with pairwise (cascade) summation.
pub fn pairwise_dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    if a.len() <= PAIRWISE_BLOCK {
        return a.iter().zip(b).map(|(x, y)| x * y).sum();
    }
    let mid = a.len() / 2;
    pairwise_dot(&a[..mid], &b[..mid]) + pairwise_dot(&a[mid..], &b[mid..])
}

pub fn pairwise_sum(a: &[f64]) -> f64 {
    if a.len() <= PAIRWISE_BLOCK {
        return a.iter().sum();
    }
    let mid = a.len() / 2;
    pairwise_sum(&a[..mid]) + pairwise_sum(&a[mid..])
}
