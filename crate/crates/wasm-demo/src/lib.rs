//! Browser bindings for the demo page in `www/`.
//!
//! Every export returns a JSON string. The `*_json` functions hold the logic
//! and are plain Rust so they can be tested natively.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use ggmfdr::experiment::{null_statistics, ExperimentConfig};
use ggmfdr::gfc::{compute_statistics, evaluate, gfc_threshold, threshold_cap, DEFAULT_GRID};
use ggmfdr::graphs::{data_rng, generate, sample_mvn};
use ggmfdr::mathcore::{gaussian_pdf, survival_double};
use ggmfdr::{Error, GraphFamily, Result, SolverKind};

/// Largest `p` the page accepts; keeps a run under a few seconds.
pub const MAX_P: usize = 80;

fn check_size(p: usize, n: usize) -> Result<()> {
    if !(3..=MAX_P).contains(&p) {
        return Err(Error::Parameter(format!("p must lie in 3..={MAX_P}, got {p}")));
    }
    if !(10..=2000).contains(&n) {
        return Err(Error::Parameter(format!("n must lie in 10..=2000, got {n}")));
    }
    Ok(())
}

#[derive(Serialize)]
struct DiscoveryView {
    p: usize,
    n: usize,
    delta_hat: f64,
    t_hat: f64,
    fallback_used: bool,
    fdp: f64,
    power: f64,
    /// `[i, j]`, 0-based
    true_edges: Vec<(usize, usize)>,
    /// `[i, j, T̂, is_true_edge]`
    selected: Vec<(usize, usize, f64, bool)>,
}

/// One seeded run: generate a graph, sample, select edges, score them.
pub fn discover_json(family: &str, p: usize, n: usize, alpha: f64, solver: &str, seed: u64) -> Result<String> {
    check_size(p, n)?;
    let family: GraphFamily = family.parse()?;
    let solver: SolverKind = solver.parse()?;
    let model = generate(family, p, seed)?;
    let x = sample_mvn(&model, n, &mut data_rng(seed))?;
    let (stats, tuning) = compute_statistics(&x, solver, None, DEFAULT_GRID)?;
    let sel = gfc_threshold(&stats, alpha)?;
    let report = evaluate(&sel, &model)?;
    let view = DiscoveryView {
        p,
        n,
        delta_hat: tuning.map_or(stats.delta, |t| t.delta_hat),
        t_hat: sel.t_hat,
        fallback_used: sel.fallback_used,
        fdp: report.fdp,
        power: report.power,
        true_edges: model.edges.clone(),
        selected: sel.edges.iter().map(|&(i, j, t)| (i, j, t, model.is_edge(i, j))).collect(),
    };
    Ok(serde_json::to_string(&view)?)
}

#[derive(Serialize)]
struct HistogramView {
    count: usize,
    mean: f64,
    sd: f64,
    exceedance: f64,
    /// left edges, width `bin_width`
    bins: Vec<f64>,
    bin_width: f64,
    /// empirical density per bin
    density: Vec<f64>,
    /// `φ` at bin centres
    normal: Vec<f64>,
}

/// Null statistics pooled over `reps` seeded replications, binned on [-4, 4].
pub fn null_histogram_json(family: &str, p: usize, n: usize, reps: usize, seed: u64, bins: usize) -> Result<String> {
    check_size(p, n)?;
    if !(1..=50).contains(&reps) || !(4..=200).contains(&bins) {
        return Err(Error::Parameter("reps must lie in 1..=50 and bins in 4..=200".into()));
    }
    let mut cfg = ExperimentConfig::new(family.parse()?, p, n, 0.1, SolverKind::Lasso);
    cfg.replications = reps;
    cfg.base_seed = seed;
    let mut pooled = Vec::new();
    for r in 0..reps {
        let (model, x) = cfg.sample(r)?;
        let (stats, _) = compute_statistics(&x, cfg.solver, None, cfg.grid)?;
        pooled.extend(null_statistics(&stats, &model));
    }
    if pooled.is_empty() {
        return Err(Error::Parameter("model has no null pairs".into()));
    }
    let (mean, sd) = ggmfdr::experiment::mean_sd(&pooled);
    let (lo, hi) = (-4.0, 4.0);
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &t in &pooled {
        if (lo..hi).contains(&t) {
            counts[((t - lo) / width) as usize] += 1;
        }
    }
    let total = pooled.len() as f64;
    let view = HistogramView {
        count: pooled.len(),
        mean,
        sd,
        exceedance: pooled.iter().filter(|t| t.abs() > 1.96).count() as f64 / total,
        bins: (0..bins).map(|k| lo + k as f64 * width).collect(),
        bin_width: width,
        density: counts.iter().map(|&c| c as f64 / (total * width)).collect(),
        normal: (0..bins).map(|k| gaussian_pdf(lo + (k as f64 + 0.5) * width)).collect(),
    };
    Ok(serde_json::to_string(&view)?)
}

#[derive(Serialize)]
struct CurveView {
    cap: f64,
    t: Vec<f64>,
    /// `#{|T̂| ≥ t}`
    rejections: Vec<usize>,
    /// `G(t)·q / max(R(t), 1)`
    fdp_estimate: Vec<f64>,
    t_hat: f64,
    fallback_used: bool,
}

/// The estimated FDP as a function of the threshold for one seeded data set.
pub fn threshold_curve_json(family: &str, p: usize, n: usize, alpha: f64, seed: u64, points: usize) -> Result<String> {
    check_size(p, n)?;
    if !(2..=2000).contains(&points) {
        return Err(Error::Parameter("points must lie in 2..=2000".into()));
    }
    let model = generate(family.parse()?, p, seed)?;
    let x = sample_mvn(&model, n, &mut data_rng(seed))?;
    let (stats, _) = compute_statistics(&x, SolverKind::Lasso, None, DEFAULT_GRID)?;
    let sel = gfc_threshold(&stats, alpha)?;
    let cap = threshold_cap(p);
    let q = stats.pair_count() as f64;
    let mut abs: Vec<f64> = stats.t_hat.iter().map(|t| t.abs()).collect();
    abs.sort_by(|a, b| a.total_cmp(b));
    let t: Vec<f64> = (0..points).map(|k| cap * k as f64 / (points - 1) as f64).collect();
    let rejections: Vec<usize> = t.iter().map(|&v| abs.len() - abs.partition_point(|&a| a < v)).collect();
    let fdp_estimate = t
        .iter()
        .zip(&rejections)
        .map(|(&v, &r)| Ok(survival_double(v)? * q / r.max(1) as f64))
        .collect::<Result<Vec<f64>>>()?;
    let view = CurveView {
        cap,
        t,
        rejections,
        fdp_estimate,
        t_hat: sel.t_hat,
        fallback_used: sel.fallback_used,
    };
    Ok(serde_json::to_string(&view)?)
}

fn js(r: Result<String>) -> std::result::Result<String, JsError> {
    r.map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
pub fn discover(family: &str, p: usize, n: usize, alpha: f64, solver: &str, seed: u64) -> std::result::Result<String, JsError> {
    js(discover_json(family, p, n, alpha, solver, seed))
}

#[wasm_bindgen]
pub fn null_histogram(family: &str, p: usize, n: usize, reps: usize, seed: u64, bins: usize) -> std::result::Result<String, JsError> {
    js(null_histogram_json(family, p, n, reps, seed, bins))
}

#[wasm_bindgen]
pub fn threshold_curve(family: &str, p: usize, n: usize, alpha: f64, seed: u64, points: usize) -> std::result::Result<String, JsError> {
    js(threshold_curve_json(family, p, n, alpha, seed, points))
}
