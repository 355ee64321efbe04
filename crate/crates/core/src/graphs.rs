//! Ground-truth precision matrices and multivariate normal sampling.

use nalgebra::DMatrix;
use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::mathcore::{cholesky, gaussian_quantile, SymmetricMatrix};

/// Margin added on top of `|λ_min(Ω₁)|` for hub and Erdős–Rényi models.
pub const EIGEN_MARGIN: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphFamily {
    Band,
    Hub,
    ErdosRenyi,
}

impl GraphFamily {
    /// Diagonal of `Ω₁` before any eigenvalue shift.
    fn base_diagonal(self) -> f64 {
        match self {
            GraphFamily::Band | GraphFamily::Hub => 1.0,
            GraphFamily::ErdosRenyi => 0.0,
        }
    }
}

impl std::str::FromStr for GraphFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "band" => Ok(GraphFamily::Band),
            "hub" => Ok(GraphFamily::Hub),
            "er" | "erdos_renyi" | "erdos-renyi" => Ok(GraphFamily::ErdosRenyi),
            other => Err(Error::Parameter(format!("unknown graph family {other:?}"))),
        }
    }
}

impl std::fmt::Display for GraphFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            GraphFamily::Band => "band",
            GraphFamily::Hub => "hub",
            GraphFamily::ErdosRenyi => "erdos_renyi",
        })
    }
}

/// A precision matrix `Ω`, its inverse `Σ`, and the edge set (off-diagonal support of `Ω`).
#[derive(Debug, Clone)]
pub struct PrecisionModel {
    pub family: GraphFamily,
    pub omega: SymmetricMatrix,
    pub sigma: SymmetricMatrix,
    /// `(i, j)` with `i < j`, 0-based, sorted.
    pub edges: Vec<(usize, usize)>,
    pub seed: Option<u64>,
    pub shift: f64,
}

impl PrecisionModel {
    pub fn p(&self) -> usize {
        self.omega.dim()
    }

    /// Certifies `omega` by Cholesky, inverts it, and reads the edge set off its support.
    pub fn from_omega(
        family: GraphFamily,
        omega: SymmetricMatrix,
        shift: f64,
        seed: Option<u64>,
    ) -> Result<Self> {
        let chol = cholesky(&omega)?;
        let sigma = chol.inverse();
        let p = omega.dim();
        let prod = omega.as_matrix() * sigma.as_matrix();
        let err = (prod - DMatrix::<f64>::identity(p, p)).amax();
        if err > 1e-8 {
            return Err(Error::Domain(format!(
                "precision matrix inversion residual {err:e} exceeds 1e-8"
            )));
        }
        let mut edges = Vec::new();
        for i in 0..p {
            for j in (i + 1)..p {
                if omega.get(i, j) != 0.0 {
                    edges.push((i, j));
                }
            }
        }
        Ok(PrecisionModel {
            family,
            omega,
            sigma,
            edges,
            seed,
            shift,
        })
    }

    /// `Ω = Ω₁ + (|λ_min(Ω₁)| + 0.05)·I`, the shift used by hub and Erdős–Rényi models.
    pub fn with_eigen_shift(
        family: GraphFamily,
        omega1: SymmetricMatrix,
        seed: Option<u64>,
    ) -> Result<Self> {
        let shift = omega1.min_eigenvalue().abs() + EIGEN_MARGIN;
        let omega = omega1.shifted(shift);
        Self::from_omega(family, omega, shift, seed)
    }

    pub fn is_edge(&self, i: usize, j: usize) -> bool {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        self.edges.binary_search(&(a, b)).is_ok()
    }

    /// Number of null pairs `|ℋ₀|`.
    pub fn null_count(&self) -> usize {
        let p = self.p();
        p * (p - 1) / 2 - self.edges.len()
    }

    /// Partial correlation `ω_ij / √(ω_ii ω_jj)`.
    pub fn partial_correlation(&self, i: usize, j: usize) -> f64 {
        self.omega.get(i, j) / (self.omega.get(i, i) * self.omega.get(j, j)).sqrt()
    }

    /// True node-wise regression coefficients `β_i = -Ω_{-i,i} / ω_ii`, in
    /// global variable order with entry `i` omitted.
    pub fn regression_coefficients(&self, i: usize) -> Vec<f64> {
        let w = self.omega.get(i, i);
        (0..self.p())
            .filter(|&l| l != i)
            .map(|l| -self.omega.get(l, i) / w)
            .collect()
    }

    pub fn to_json(&self) -> ModelJson {
        ModelJson {
            family: self.family,
            p: self.p(),
            seed: self.seed,
            shift: self.shift,
            edges: self
                .edges
                .iter()
                .map(|&(i, j)| (i + 1, j + 1, self.omega.get(i, j)))
                .collect(),
        }
    }

    /// Rebuilds a model from its JSON description.
    pub fn from_json(json: &ModelJson) -> Result<Self> {
        let p = json.p;
        if p == 0 {
            return Err(Error::Parameter("model has p = 0".into()));
        }
        let diag = json.family.base_diagonal() + json.shift;
        let mut m = DMatrix::from_diagonal_element(p, p, diag);
        for &(i, j, w) in &json.edges {
            if i == 0 || j == 0 || i > p || j > p || i >= j {
                return Err(Error::Parameter(format!("invalid edge [{i}, {j}]")));
            }
            m[(i - 1, j - 1)] = w;
            m[(j - 1, i - 1)] = w;
        }
        Self::from_omega(json.family, SymmetricMatrix::new(m)?, json.shift, json.seed)
    }
}

/// Serialized model: edges are `[i, j, ω_ij]` with 1-based indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelJson {
    pub family: GraphFamily,
    pub p: usize,
    pub seed: Option<u64>,
    pub shift: f64,
    pub edges: Vec<(usize, usize, f64)>,
}

/// Band graph: `ω_ii = 1`, `ω_{i,i±1} = 0.6`, `ω_{i,i±2} = 0.3`.
pub fn band_graph(p: usize) -> Result<PrecisionModel> {
    if p < 3 {
        return Err(Error::Parameter(format!("band graph needs p >= 3, got {p}")));
    }
    let omega = DMatrix::from_fn(p, p, |i, j| match i.abs_diff(j) {
        0 => 1.0,
        1 => 0.6,
        2 => 0.3,
        _ => 0.0,
    });
    PrecisionModel::from_omega(GraphFamily::Band, SymmetricMatrix::new(omega)?, 0.0, None)
}

/// Hub graph: blocks of ten, the first node of each block joined to the other
/// nine with weight 0.5, then shifted to `λ_min = 0.05`.
pub fn hub_graph(p: usize) -> Result<PrecisionModel> {
    if p == 0 || p % 10 != 0 {
        return Err(Error::Parameter(format!(
            "hub graph needs p to be a positive multiple of 10, got {p}"
        )));
    }
    let mut m = DMatrix::<f64>::identity(p, p);
    for block in 0..p / 10 {
        let hub = 10 * block;
        for j in (hub + 1)..(hub + 10) {
            m[(hub, j)] = 0.5;
            m[(j, hub)] = 0.5;
        }
    }
    PrecisionModel::with_eigen_shift(GraphFamily::Hub, SymmetricMatrix::new(m)?, None)
}

/// Edge probability of the Erdős–Rényi model.
pub fn er_edge_probability(p: usize) -> f64 {
    0.05f64.min(5.0 / p as f64)
}

/// Erdős–Rényi graph: each pair `i < j` (row-major order) draws one uniform for
/// the edge indicator and, if present, one for the weight `U(0.4, 0.8)`.
/// `Ω₁` has zero diagonal before the eigenvalue shift.
pub fn er_graph<R: RngCore>(p: usize, rng: &mut R) -> Result<PrecisionModel> {
    er_graph_inner(p, rng, None)
}

pub fn er_graph_seeded(p: usize, seed: u64) -> Result<PrecisionModel> {
    let mut rng = model_rng(seed);
    er_graph_inner(p, &mut rng, Some(seed))
}

fn er_graph_inner<R: RngCore>(p: usize, rng: &mut R, seed: Option<u64>) -> Result<PrecisionModel> {
    if p < 2 {
        return Err(Error::Parameter(format!("Erdős–Rényi graph needs p >= 2, got {p}")));
    }
    let prob = er_edge_probability(p);
    let mut m = DMatrix::<f64>::zeros(p, p);
    for i in 0..p {
        for j in (i + 1)..p {
            if uniform_open(rng) < prob {
                let u = 0.4 + 0.4 * uniform_open(rng);
                m[(i, j)] = u;
                m[(j, i)] = u;
            }
        }
    }
    PrecisionModel::with_eigen_shift(GraphFamily::ErdosRenyi, SymmetricMatrix::new(m)?, seed)
}

/// Builds the model for `family`; only Erdős–Rényi consumes the seed.
pub fn generate(family: GraphFamily, p: usize, seed: u64) -> Result<PrecisionModel> {
    match family {
        GraphFamily::Band => band_graph(p),
        GraphFamily::Hub => hub_graph(p),
        GraphFamily::ErdosRenyi => er_graph_seeded(p, seed),
    }
}

/// Uniform on the open interval (0, 1) from the top 53 bits of one `u64`.
pub fn uniform_open<R: RngCore>(rng: &mut R) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Standard normal by inverse-CDF transform of [`uniform_open`].
pub fn standard_normal<R: RngCore>(rng: &mut R) -> f64 {
    gaussian_quantile(uniform_open(rng)).expect("uniform_open is inside (0, 1)")
}

/// ChaCha20 stream 0 of `seed`: graph construction.
pub fn model_rng(seed: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(0);
    rng
}

/// ChaCha20 stream 1 of `seed`: observations.
pub fn data_rng(seed: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(1);
    rng
}

/// `n` i.i.d. rows from `N(0, Σ)`, computed as `L z` with `L Lᵀ = Σ`.
/// Draws are taken row by row.
pub fn sample_mvn<R: RngCore>(model: &PrecisionModel, n: usize, rng: &mut R) -> Result<DataMatrix> {
    if n < 2 {
        return Err(Error::Parameter(format!("need n >= 2 samples, got {n}")));
    }
    let chol = cholesky(&model.sigma)?;
    let l = chol.lower();
    let p = model.p();
    let mut x = DMatrix::<f64>::zeros(n, p);
    let mut z = vec![0.0; p];
    for k in 0..n {
        z.iter_mut().for_each(|v| *v = standard_normal(rng));
        for i in 0..p {
            let mut s = 0.0;
            for m in 0..=i {
                s += l[(i, m)] * z[m];
            }
            x[(k, i)] = s;
        }
    }
    DataMatrix::from_matrix(x)
}
