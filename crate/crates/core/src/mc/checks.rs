use serde::Serialize;

use super::stats::{ks_exp1, MCEstimate};
use super::{Generator, PathEnsemble};
use crate::error::{Error, Result};

/// Discretization allowance added to the Kolmogorov-Smirnov bound.
pub const LAW_ALLOWANCE: f64 = 0.01;

/// Supplied paths must visibly vanish: `L_h <= 0.01 L*` on 99% of them.
fn require_vanishing(e: &PathEnsemble) -> Result<()> {
    if e.summaries.is_empty() {
        return Err(Error::Precondition("empty ensemble".into()));
    }
    if e.generator.is_some() {
        return Ok(());
    }
    let decayed = e
        .summaries
        .iter()
        .filter(|s| s.terminal <= 0.01 * s.max_grid)
        .count();
    if (decayed as f64) < 0.99 * e.summaries.len() as f64 {
        return Err(Error::Precondition(format!(
            "paths do not vanish: only {decayed} of {} decayed below 1% of their maximum",
            e.summaries.len()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct DoobRow {
    pub gamma: f64,
    /// Frequency of `sup L > gamma` with bridge and tail corrections.
    pub empirical: f64,
    pub target: f64,
    pub se: f64,
    /// Frequency from grid values up to the horizon only.
    pub raw_empirical: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DoobTable {
    pub rows: Vec<DoobRow>,
    pub tolerance: f64,
    /// Mean `L_h / L*_h`: chance the supremum is exceeded after the horizon.
    pub residual_probability: MCEstimate,
    pub note: String,
    pub passed: bool,
}

impl DoobTable {
    pub fn worst_deviation(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| (r.empirical - r.target).abs())
            .fold(0.0, f64::max)
    }
}

/// Compares `P[sup L > gamma]` with `1 / gamma` for each `gamma >= 1`.
pub fn doob_identity_check(e: &PathEnsemble, gammas: &[f64], tol: f64) -> Result<DoobTable> {
    require_vanishing(e)?;
    if let Some(g) = gammas.iter().find(|g| !(**g >= 1.0)) {
        return Err(Error::Parameter(format!(
            "gamma must be at least 1, got {g}"
        )));
    }
    let rows: Vec<DoobRow> = gammas
        .iter()
        .map(|&gamma| {
            let est = MCEstimate::frequency(e.summaries.iter().map(|s| s.max_total >= gamma));
            let raw = MCEstimate::frequency(e.summaries.iter().map(|s| s.max_grid >= gamma));
            DoobRow {
                gamma,
                empirical: est.mean,
                target: 1.0 / gamma,
                se: est.se,
                raw_empirical: raw.mean,
            }
        })
        .collect();
    let passed = rows.iter().all(|r| (r.empirical - r.target).abs() <= tol);
    Ok(DoobTable {
        rows,
        tolerance: tol,
        residual_probability: e.residual_probability(),
        note: note(e),
        passed,
    })
}

fn note(e: &PathEnsemble) -> String {
    let mut parts = vec![format!(
        "grid maxima underestimate the supremum (dt = {}, horizon = {})",
        e.dt,
        e.horizon()
    )];
    if e.bridge {
        parts.push("bridge extremes sampled between grid points".into());
    }
    if e.tail {
        parts.push("post-horizon extreme sampled from its exact law".into());
    }
    parts.join("; ")
}

#[derive(Debug, Clone, Serialize)]
pub struct ExpLawReport {
    /// Mean of `log L*` with corrections.
    pub mean: MCEstimate,
    pub ks: f64,
    pub ks_bound: f64,
    pub mean_tolerance: f64,
    pub within_three_se: bool,
    /// Same statistics from grid values up to the horizon.
    pub raw_mean: f64,
    pub raw_ks: f64,
    /// `K = 1 - 1 / L*` stays below 1 on every path.
    pub k_below_one: bool,
    /// Largest `sum L dK - log L*` on the grid.
    pub max_clock_excess: f64,
    pub passed: bool,
}

/// Tests that `log L*` is standard exponential.
pub fn exp_law_check(e: &PathEnsemble, mean_tol: f64) -> Result<ExpLawReport> {
    require_vanishing(e)?;
    let logs: Vec<f64> = e.summaries.iter().map(|s| s.max_total.ln()).collect();
    let raw: Vec<f64> = e.summaries.iter().map(|s| s.max_grid.ln()).collect();
    let mean = MCEstimate::from_samples(logs.iter().copied());
    let ks = ks_exp1(&logs);
    let ks_bound = 1.63 / (e.summaries.len() as f64).sqrt() + LAW_ALLOWANCE;
    let k_below_one = e
        .summaries
        .iter()
        .all(|s| s.max_total.is_finite() && 1.0 - 1.0 / s.max_total < 1.0);
    let max_clock_excess = e
        .summaries
        .iter()
        .map(|s| s.clock_sum - s.max_grid.ln())
        .fold(0.0, f64::max);
    let passed = (mean.mean - 1.0).abs() <= mean_tol && ks < ks_bound && k_below_one;
    Ok(ExpLawReport {
        within_three_se: (mean.mean - 1.0).abs() <= 3.0 * mean.se,
        mean,
        ks,
        ks_bound,
        mean_tolerance: mean_tol,
        raw_mean: MCEstimate::from_samples(raw.iter().copied()).mean,
        raw_ks: ks_exp1(&raw),
        k_below_one,
        max_clock_excess,
        passed,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct MinTimeRow {
    pub fraction: f64,
    /// `E[X_T]` with `T` the grid time where `S` is lowest.
    pub mean: MCEstimate,
    /// `X_0 + 3 SE`.
    pub bound: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct MinTimeTable {
    pub rows: Vec<MinTimeRow>,
    /// `E[min S / S_0]` over all time, with corrections.
    pub buy_and_hold: MCEstimate,
    /// `E[min S / S_0]` over grid values up to the horizon.
    pub buy_and_hold_raw: MCEstimate,
    pub target: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// With `S = 1 / L`, evaluates each constant-fraction wealth at the time `S`
/// is lowest. Requires the inverse Bessel generator, so `1 / S` is a local
/// martingale and `S` drifts to infinity.
pub fn min_time_market_check(e: &PathEnsemble, tol: f64) -> Result<MinTimeTable> {
    if e.generator != Some(Generator::InverseBessel3) {
        return Err(Error::Precondition(
            "the downturn check needs S = 1 / L with L from the inverse Bessel generator".into(),
        ));
    }
    let rows: Vec<MinTimeRow> = e
        .fractions
        .iter()
        .enumerate()
        .map(|(j, &fraction)| {
            let mean = MCEstimate::from_samples(e.summaries.iter().map(|s| s.wealth_at_argmax[j]));
            let bound = 1.0 + 3.0 * mean.se;
            MinTimeRow {
                fraction,
                passed: mean.mean <= bound + 1e-12,
                mean,
                bound,
            }
        })
        .collect();
    let buy_and_hold = MCEstimate::from_samples(e.summaries.iter().map(|s| 1.0 / s.max_total));
    let buy_and_hold_raw = MCEstimate::from_samples(e.summaries.iter().map(|s| 1.0 / s.max_grid));
    let passed = rows.iter().all(|r| r.passed) && (buy_and_hold.mean - 0.5).abs() <= tol;
    Ok(MinTimeTable {
        rows,
        buy_and_hold,
        buy_and_hold_raw,
        target: 0.5,
        tolerance: tol,
        passed,
    })
}
