//! The multiple-testing controller: threshold search, edge selection,
//! data-driven penalty tuning and truth-aware evaluation.

use serde::{Deserialize, Serialize, Serializer};

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::graphs::PrecisionModel;
use crate::mathcore::{gaussian_quantile, survival_double_inverse};
use crate::solvers::{fit_path, PreparedData, SolverKind};
use crate::teststat::{studentize, TestStatistics};

/// Default grid resolution `N`: the penalty grid is `δ = j/N`, `j = 0..=2N`.
pub const DEFAULT_GRID: usize = 20;

/// Upper end of the threshold search, `2√(log p)`.
pub fn threshold_cap(p: usize) -> f64 {
    2.0 * (p as f64).ln().sqrt()
}

/// Rejected pairs at level `alpha`.
#[derive(Debug, Clone, PartialEq)]
pub struct GfcSelection {
    pub alpha: f64,
    pub t_hat: f64,
    /// `(i, j, T̂_ij)` with `i < j`, 0-based, in packed pair order.
    pub edges: Vec<(usize, usize, f64)>,
    pub fallback_used: bool,
    pub p: usize,
    pub n: usize,
}

/// JSON form of a selection, 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionJson {
    pub alpha: f64,
    pub t_hat: f64,
    pub fallback_used: bool,
    pub edges: Vec<(usize, usize, f64)>,
}

impl GfcSelection {
    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn to_json(&self) -> SelectionJson {
        SelectionJson {
            alpha: self.alpha,
            t_hat: self.t_hat,
            fallback_used: self.fallback_used,
            edges: self.edges.iter().map(|&(i, j, t)| (i + 1, j + 1, t)).collect(),
        }
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Parameter(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

/// Smallest `t ∈ [0, 2√(log p)]` with `G(t)·q / max(R(t), 1) ≤ α`, where
/// `q = (p²−p)/2` and `R(t) = #{|T̂_ij| ≥ t}`; `2√(log p)` when none exists.
///
/// `R` is constant between consecutive distinct `|T̂|` values, so on each such
/// interval the condition reduces to `t ≥ G⁻¹(α·max(R,1)/q)` and is solved in
/// closed form. The first interval with a solution gives the infimum.
pub fn gfc_threshold(stats: &TestStatistics, alpha: f64) -> Result<GfcSelection> {
    check_alpha(alpha)?;
    let p = stats.p;
    if p < 2 {
        return Err(Error::Parameter(format!("need p >= 2, got {p}")));
    }
    let (t_hat, fallback_used) = threshold_search(&stats.t_hat, p, alpha)?;
    let edges = stats
        .iter()
        .filter(|&(_, _, t)| t.abs() >= t_hat)
        .collect();
    Ok(GfcSelection {
        alpha,
        t_hat,
        edges,
        fallback_used,
        p,
        n: stats.n,
    })
}

fn threshold_search(t_hat: &[f64], p: usize, alpha: f64) -> Result<(f64, bool)> {
    let q = t_hat.len() as f64;
    let cap = threshold_cap(p);
    let mut abs: Vec<f64> = t_hat.iter().map(|t| t.abs()).collect();
    abs.sort_by(|a, b| a.total_cmp(b));

    let solve_on = |lo: f64, hi: f64, r: usize| -> Result<Option<f64>> {
        let c = alpha * (r.max(1) as f64) / q;
        let t = if c >= 1.0 {
            lo
        } else {
            lo.max(survival_double_inverse(c)?)
        };
        Ok((t <= hi).then_some(t))
    };

    // Walk intervals (lo, hi] between distinct values; R on each is the count at or above hi.
    let mut lo = 0.0;
    let mut k = 0;
    while k < abs.len() {
        let hi = abs[k];
        if lo > cap {
            break;
        }
        let r = abs.len() - k;
        if let Some(t) = solve_on(lo, hi.min(cap), r)? {
            return Ok((t, false));
        }
        while k < abs.len() && abs[k] == hi {
            k += 1;
        }
        lo = hi;
    }
    if lo <= cap {
        if let Some(t) = solve_on(lo, cap, 0)? {
            return Ok((t, false));
        }
    }
    Ok((cap, true))
}

/// Truth-aware counts for one selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub fdp: f64,
    pub power: f64,
    pub true_positives: usize,
    pub false_positives: usize,
    /// `|ℋ₀|`
    pub q0: usize,
    /// `|ℋ₁|`
    pub q1: usize,
    /// Set when `ℋ₁` is empty and power is reported as 0 by convention.
    pub power_undefined: bool,
}

/// FDP and power of `selection` against the true edge set.
pub fn evaluate(selection: &GfcSelection, truth: &PrecisionModel) -> Result<EvaluationReport> {
    if truth.p() != selection.p {
        return Err(Error::Parameter(format!(
            "selection has p = {} but model has p = {}",
            selection.p,
            truth.p()
        )));
    }
    let true_positives = selection
        .edges
        .iter()
        .filter(|&&(i, j, _)| truth.is_edge(i, j))
        .count();
    let rejected = selection.edges.len();
    let false_positives = rejected - true_positives;
    let q1 = truth.edges.len();
    Ok(EvaluationReport {
        fdp: false_positives as f64 / rejected.max(1) as f64,
        power: if q1 == 0 { 0.0 } else { true_positives as f64 / q1 as f64 },
        true_positives,
        false_positives,
        q0: truth.null_count(),
        q1,
        power_undefined: q1 == 0,
    })
}

/// Penalty tuning outcome. `losses[j]` is `+∞` where the fit at `δ = j/N` failed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TuningResult {
    pub delta_hat: f64,
    pub j_hat: usize,
    #[serde(rename = "N")]
    pub grid: usize,
    #[serde(serialize_with = "finite_or_null")]
    pub losses: Vec<f64>,
    /// Grid indices whose fit failed, with the reason.
    pub failed: Vec<(usize, String)>,
}

fn finite_or_null<S: Serializer>(v: &[f64], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(|x| x.is_finite().then_some(*x)))
}

/// Thresholds `Φ⁻¹(1 − k/20)` for `k = 3..=9`.
fn tuning_levels() -> [(f64, f64); 7] {
    let mut out = [(0.0, 0.0); 7];
    for (slot, k) in out.iter_mut().zip(3..=9) {
        let k = k as f64;
        *slot = (k, gaussian_quantile(1.0 - k / 20.0).expect("level in (0,1)"));
    }
    out
}

/// Mismatch between the exceedance counts of `T̂` and the normal law:
/// `Σ_{k=3}^{9} (2·#{i<j: |T̂_ij| ≥ Φ⁻¹(1−k/20)} / (k(p²−p)/10) − 1)²`.
/// Each unordered pair is counted twice, once per orientation.
pub fn tuning_loss(stats: &TestStatistics) -> f64 {
    let p = stats.p as f64;
    let mut abs: Vec<f64> = stats.t_hat.iter().map(|t| t.abs()).collect();
    abs.sort_by(|a, b| a.total_cmp(b));
    tuning_levels()
        .iter()
        .map(|&(k, z)| {
            let below = abs.partition_point(|&v| v < z);
            let count = 2.0 * (abs.len() - below) as f64;
            let ratio = count / (k * (p * p - p) / 10.0);
            (ratio - 1.0).powi(2)
        })
        .sum()
}

/// Index of the smallest finite loss; ties go to the smaller index.
pub fn argmin_loss(losses: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (j, &l) in losses.iter().enumerate() {
        if !l.is_finite() {
            continue;
        }
        match best {
            Some((_, b)) if l >= b => {}
            _ => best = Some((j, l)),
        }
    }
    best.map(|(j, _)| j)
}

/// Picks `δ̂ = ĵ/N` on the grid `j = 0..=2N` by minimizing [`tuning_loss`].
pub fn tune_delta(x: &DataMatrix, solver: SolverKind, grid: usize) -> Result<TuningResult> {
    let prepared = PreparedData::new(x)?;
    tune_prepared(&prepared, solver, grid).map(|(t, _)| t)
}

/// Tuning on prepared data; also returns the statistics at `δ̂`.
pub fn tune_prepared(
    prepared: &PreparedData,
    solver: SolverKind,
    grid: usize,
) -> Result<(TuningResult, TestStatistics)> {
    if grid == 0 {
        return Err(Error::Parameter("grid size N must be >= 1".into()));
    }
    let js: Vec<usize> = (0..=2 * grid).rev().collect();
    let deltas: Vec<f64> = js.iter().map(|&j| j as f64 / grid as f64).collect();
    let fits = fit_path(prepared, solver, &deltas);

    let mut losses = vec![f64::INFINITY; 2 * grid + 1];
    let mut stats: Vec<Option<TestStatistics>> = vec![None; 2 * grid + 1];
    let mut failed = Vec::new();
    let mut first_error = None;
    for (&j, fit) in js.iter().zip(fits) {
        match fit.and_then(|set| studentize(&set)) {
            Ok(s) => {
                losses[j] = tuning_loss(&s);
                stats[j] = Some(s);
            }
            Err(e) => {
                failed.push((j, e.to_string()));
                first_error.get_or_insert(Error::Tuning {
                    grid_index: j,
                    source: Box::new(e),
                });
            }
        }
    }
    failed.sort_by_key(|(j, _)| *j);
    let j_hat = match argmin_loss(&losses) {
        Some(j) => j,
        None => return Err(first_error.expect("every grid point failed")),
    };
    let chosen = stats[j_hat].take().expect("finite loss has statistics");
    Ok((
        TuningResult {
            delta_hat: j_hat as f64 / grid as f64,
            j_hat,
            grid,
            losses,
            failed,
        },
        chosen,
    ))
}

/// End-to-end result of one run.
#[derive(Debug, Clone)]
pub struct GfcRun {
    pub selection: GfcSelection,
    pub stats: TestStatistics,
    pub tuning: Option<TuningResult>,
}

/// Statistics at a fixed `δ`, or at the tuned `δ̂` when `delta` is `None`.
pub fn compute_statistics(
    x: &DataMatrix,
    solver: SolverKind,
    delta: Option<f64>,
    grid: usize,
) -> Result<(TestStatistics, Option<TuningResult>)> {
    let prepared = PreparedData::new(x)?;
    match delta {
        Some(d) => {
            let set = fit_path(&prepared, solver, &[d]).pop().expect("one delta")?;
            Ok((studentize(&set)?, None))
        }
        None => {
            let (tuning, stats) = tune_prepared(&prepared, solver, grid)?;
            Ok((stats, Some(tuning)))
        }
    }
}

/// Tune (unless `delta` is given), fit, studentize and threshold.
pub fn run_gfc(x: &DataMatrix, solver: SolverKind, alpha: f64, delta: Option<f64>) -> Result<GfcRun> {
    check_alpha(alpha)?;
    let (stats, tuning) = compute_statistics(x, solver, delta, DEFAULT_GRID)?;
    let selection = gfc_threshold(&stats, alpha)?;
    Ok(GfcRun {
        selection,
        stats,
        tuning,
    })
}
