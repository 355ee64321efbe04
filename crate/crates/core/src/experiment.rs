//! Seeded Monte Carlo replications: FDP/power simulation and null calibration.
//!
//! Replication `r` uses seed `base_seed + r` for its data (and, for
//! Erdős–Rényi models, its graph), so any single record can be rerun alone.

use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::gfc::{compute_statistics, evaluate, gfc_threshold, DEFAULT_GRID};
use crate::graphs::{data_rng, generate, sample_mvn, GraphFamily, PrecisionModel};
use crate::solvers::{NodeRegressionSet, SolverKind};
use crate::teststat::TestStatistics;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub family: GraphFamily,
    pub p: usize,
    pub n: usize,
    pub alpha: f64,
    pub solver: SolverKind,
    /// Fixed penalty level; tuned per replication when absent.
    pub delta: Option<f64>,
    pub replications: usize,
    pub base_seed: u64,
    /// Draw one Erdős–Rényi graph from `base_seed` for every replication.
    pub fix_model: bool,
    #[serde(rename = "N")]
    pub grid: usize,
}

impl ExperimentConfig {
    pub fn new(family: GraphFamily, p: usize, n: usize, alpha: f64, solver: SolverKind) -> Self {
        ExperimentConfig {
            family,
            p,
            n,
            alpha,
            solver,
            delta: None,
            replications: 1,
            base_seed: 0,
            fix_model: false,
            grid: DEFAULT_GRID,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::Parameter("replications must be >= 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Parameter(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.n < 2 {
            return Err(Error::Parameter(format!("need n >= 2, got {}", self.n)));
        }
        if self.grid == 0 {
            return Err(Error::Parameter("grid size N must be >= 1".into()));
        }
        if let Some(d) = self.delta {
            if !(d.is_finite() && d >= 0.0) {
                return Err(Error::Parameter(format!("delta must be finite and >= 0, got {d}")));
            }
        }
        Ok(())
    }

    pub fn seed(&self, replication: usize) -> u64 {
        self.base_seed.wrapping_add(replication as u64)
    }

    /// Ground truth for replication `r`.
    pub fn model(&self, replication: usize) -> Result<PrecisionModel> {
        let seed = if self.fix_model { self.base_seed } else { self.seed(replication) };
        generate(self.family, self.p, seed)
    }

    /// Model and data for replication `r`.
    pub fn sample(&self, replication: usize) -> Result<(PrecisionModel, DataMatrix)> {
        let model = self.model(replication)?;
        let x = sample_mvn(&model, self.n, &mut data_rng(self.seed(replication)))?;
        Ok((model, x))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub replication: usize,
    pub seed: u64,
    pub delta_hat: f64,
    pub t_hat: f64,
    pub fallback_used: bool,
    pub rejections: usize,
    pub true_positives: usize,
    pub false_positives: usize,
    pub fdp: f64,
    pub power: f64,
    pub runtime_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub mean_fdp: f64,
    pub sd_fdp: f64,
    pub mean_power: f64,
    pub sd_power: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub records: Vec<ReplicationRecord>,
    pub aggregates: Aggregates,
}

/// Mean and sample standard deviation (divisor `m − 1`; 0 for a single value).
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    let m = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / m;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    (mean, (ss / (m - 1.0)).sqrt())
}

impl Aggregates {
    pub fn from_records(records: &[ReplicationRecord]) -> Self {
        let fdp: Vec<f64> = records.iter().map(|r| r.fdp).collect();
        let power: Vec<f64> = records.iter().map(|r| r.power).collect();
        let (mean_fdp, sd_fdp) = mean_sd(&fdp);
        let (mean_power, sd_power) = mean_sd(&power);
        Aggregates {
            mean_fdp,
            sd_fdp,
            mean_power,
            sd_power,
        }
    }
}

impl ExperimentReport {
    pub fn new(config: ExperimentConfig, records: Vec<ReplicationRecord>) -> Self {
        let aggregates = Aggregates::from_records(&records);
        ExperimentReport {
            config,
            records,
            aggregates,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// One row per replication.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for r in &self.records {
            out.serialize(r).map_err(csv_error)?;
        }
        out.flush()?;
        Ok(())
    }
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parameter(format!("csv: {other:?}")),
    }
}

struct Clock(#[cfg(not(target_arch = "wasm32"))] std::time::Instant);

impl Clock {
    fn start() -> Self {
        Clock(
            #[cfg(not(target_arch = "wasm32"))]
            std::time::Instant::now(),
        )
    }

    fn elapsed_ms(&self) -> f64 {
        #[cfg(not(target_arch = "wasm32"))]
        return self.0.elapsed().as_secs_f64() * 1e3;
        #[cfg(target_arch = "wasm32")]
        0.0
    }
}

/// Applies `f` to replications `0..reps`, results in replication order.
fn for_each_replication<T, F>(reps: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync,
{
    let wrap = |r: usize| {
        f(r).map_err(|e| Error::Replication {
            replication: r,
            source: Box::new(e),
        })
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..reps).into_par_iter().map(wrap).collect()
    }
    #[cfg(not(feature = "parallel"))]
    (0..reps).map(wrap).collect()
}

/// Runs every replication of `config`.
pub fn run_simulation(config: &ExperimentConfig) -> Result<ExperimentReport> {
    Ok(run_simulation_levels(config, &[config.alpha])?.remove(0))
}

/// Like [`run_simulation`] for several levels at once; the statistics of a
/// replication do not depend on `α` and are computed once.
pub fn run_simulation_levels(config: &ExperimentConfig, alphas: &[f64]) -> Result<Vec<ExperimentReport>> {
    config.validate()?;
    for &a in alphas {
        ExperimentConfig { alpha: a, ..config.clone() }.validate()?;
    }
    let rows = for_each_replication(config.replications, |r| {
        let clock = Clock::start();
        let (model, x) = config.sample(r)?;
        let (stats, tuning) = compute_statistics(&x, config.solver, config.delta, config.grid)?;
        let delta_hat = tuning.map_or(stats.delta, |t| t.delta_hat);
        let fit_ms = clock.elapsed_ms();
        alphas
            .iter()
            .map(|&alpha| {
                let clock = Clock::start();
                let sel = gfc_threshold(&stats, alpha)?;
                let rep = evaluate(&sel, &model)?;
                Ok(ReplicationRecord {
                    replication: r,
                    seed: config.seed(r),
                    delta_hat,
                    t_hat: sel.t_hat,
                    fallback_used: sel.fallback_used,
                    rejections: sel.edge_count(),
                    true_positives: rep.true_positives,
                    false_positives: rep.false_positives,
                    fdp: rep.fdp,
                    power: rep.power,
                    runtime_ms: fit_ms + clock.elapsed_ms(),
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(alphas
        .iter()
        .enumerate()
        .map(|(k, &alpha)| {
            let records = rows.iter().map(|row| row[k].clone()).collect();
            ExperimentReport::new(ExperimentConfig { alpha, ..config.clone() }, records)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationConfig {
    pub family: GraphFamily,
    pub p: usize,
    pub n: usize,
    pub solver: SolverKind,
    pub delta: Option<f64>,
    pub replications: usize,
    pub base_seed: u64,
    pub fix_model: bool,
    #[serde(rename = "N")]
    pub grid: usize,
}

impl CalibrationConfig {
    pub fn new(family: GraphFamily, p: usize, n: usize) -> Self {
        CalibrationConfig {
            family,
            p,
            n,
            solver: SolverKind::Lasso,
            delta: None,
            replications: 1,
            base_seed: 0,
            fix_model: false,
            grid: DEFAULT_GRID,
        }
    }

    fn experiment(&self) -> ExperimentConfig {
        ExperimentConfig {
            family: self.family,
            p: self.p,
            n: self.n,
            alpha: 0.1,
            solver: self.solver,
            delta: self.delta,
            replications: self.replications,
            base_seed: self.base_seed,
            fix_model: self.fix_model,
            grid: self.grid,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRecord {
    pub replication: usize,
    pub seed: u64,
    pub delta_hat: f64,
    pub null_pairs: usize,
    pub mean: f64,
    pub sd: f64,
    pub runtime_ms: f64,
}

/// Pooled `T̂_ij` over null pairs of every replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub config: CalibrationConfig,
    pub records: Vec<CalibrationRecord>,
    pub count: usize,
    pub mean: f64,
    pub sd: f64,
    /// Fraction with `|T̂| > 1.96`.
    pub exceedance: f64,
    #[serde(skip)]
    pub pooled: Vec<f64>,
}

impl CalibrationReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for r in &self.records {
            out.serialize(r).map_err(csv_error)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// `T̂_ij` for the pairs with `ω_ij = 0`.
pub fn null_statistics(stats: &TestStatistics, model: &PrecisionModel) -> Vec<f64> {
    stats
        .iter()
        .filter(|&(i, j, _)| !model.is_edge(i, j))
        .map(|(_, _, t)| t)
        .collect()
}

pub fn run_calibration(config: &CalibrationConfig) -> Result<CalibrationReport> {
    let exp = config.experiment();
    exp.validate()?;
    let rows = for_each_replication(config.replications, |r| {
        let clock = Clock::start();
        let (model, x) = exp.sample(r)?;
        let (stats, tuning) = compute_statistics(&x, config.solver, config.delta, config.grid)?;
        let null = null_statistics(&stats, &model);
        let (mean, sd) = mean_sd(&null);
        let record = CalibrationRecord {
            replication: r,
            seed: exp.seed(r),
            delta_hat: tuning.map_or(stats.delta, |t| t.delta_hat),
            null_pairs: null.len(),
            mean,
            sd,
            runtime_ms: clock.elapsed_ms(),
        };
        Ok((record, null))
    })?;
    let mut records = Vec::with_capacity(rows.len());
    let mut pooled = Vec::new();
    for (rec, null) in rows {
        records.push(rec);
        pooled.extend(null);
    }
    if pooled.is_empty() {
        return Err(Error::Parameter(format!("{} model with p = {} has no null pairs", config.family, config.p)));
    }
    let (mean, sd) = mean_sd(&pooled);
    let exceedance = pooled.iter().filter(|t| t.abs() > 1.96).count() as f64 / pooled.len() as f64;
    Ok(CalibrationReport {
        config: config.clone(),
        records,
        count: pooled.len(),
        mean,
        sd,
        exceedance,
        pooled,
    })
}

/// Regression set built from the true model: `β_i = −Ω_{−i,i}/ω_ii` and the
/// latent errors `ε_i = Σ_j X_j ω_ji / ω_ii` (uncentered).
pub fn oracle_regression(model: &PrecisionModel, x: &DataMatrix) -> Result<NodeRegressionSet> {
    let p = model.p();
    if x.p() != p {
        return Err(Error::Parameter(format!("data has {} columns, model has p = {p}", x.p())));
    }
    let omega = model.omega.as_matrix();
    let mut eps: DMatrix<f64> = x.as_matrix() * omega;
    for i in 0..p {
        let w = omega[(i, i)];
        eps.column_mut(i).iter_mut().for_each(|v| *v /= w);
    }
    let betas = (0..p).map(|i| model.regression_coefficients(i)).collect();
    NodeRegressionSet::from_parts(eps, betas, f64::NAN, SolverKind::Lasso)
}
