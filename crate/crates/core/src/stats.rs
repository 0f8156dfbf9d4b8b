//! Ensemble averages, standard errors, empirical density matrices and rate fits.

use std::ops::Add;

use serde::{Deserialize, Serialize};

use crate::entanglement::eof_from_concurrence;
use crate::error::{Error, Result};
use crate::lindblad::DensityMatrix;
use crate::linalg::Mat4;
use crate::qj::TrajectoryRecord;

/// Minimum number of grid points in a fit window.
pub const MIN_FIT_POINTS: usize = 10;
/// Points enter the fit window while `mean > SIGNAL_RATIO · stderr`.
pub const SIGNAL_RATIO: f64 = 5.0;

/// Sum in a fixed binary-tree order, independent of how the terms were produced.
pub fn pairwise_sum<T: Copy + Add<Output = T>>(xs: &[T], zero: T) -> T {
    match xs.len() {
        0 => zero,
        1 => xs[0],
        n => {
            let (a, b) = xs.split_at(n / 2);
            pairwise_sum(a, zero) + pairwise_sum(b, zero)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub times: Vec<f64>,
    pub mean_c: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Mean entanglement of formation over trajectories.
    pub mean_eof: Vec<f64>,
    pub stderr_eof: Vec<f64>,
    pub n_traj: usize,
    pub empirical_rho: Option<Vec<DensityMatrix>>,
}

fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let Some(&x0) = xs.first() else { return (f64::NAN, 0.0) };
    let shifted: Vec<f64> = xs.iter().map(|x| x - x0).collect();
    let mean = x0 + pairwise_sum(&shifted, 0.0) / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let dev: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&dev, 0.0) / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn check_grids(records: &[TrajectoryRecord]) -> Result<&[f64]> {
    let first = records.first().ok_or_else(|| Error::InvalidArgument("no trajectory records".into()))?;
    for r in records {
        if r.times != first.times || r.concurrences.len() != first.times.len() {
            return Err(Error::GridMismatch);
        }
    }
    Ok(&first.times)
}

/// Pointwise mean and standard error of the concurrence (and of the
/// entanglement of formation); the empirical density matrix is included when
/// every record retained its states.
pub fn average(records: &[TrajectoryRecord]) -> Result<EnsembleSummary> {
    let times = check_grids(records)?.to_vec();
    let mut mean_c = Vec::with_capacity(times.len());
    let mut stderr = Vec::with_capacity(times.len());
    let mut mean_eof = Vec::with_capacity(times.len());
    let mut stderr_eof = Vec::with_capacity(times.len());
    let mut column = Vec::with_capacity(records.len());
    let mut eof = Vec::with_capacity(records.len());
    for k in 0..times.len() {
        column.clear();
        eof.clear();
        for r in records {
            let conc = r.concurrences[k];
            column.push(conc);
            eof.push(eof_from_concurrence(conc.clamp(0.0, 1.0))?);
        }
        let (m, se) = mean_and_stderr(&column);
        mean_c.push(m);
        stderr.push(se);
        let (m, se) = mean_and_stderr(&eof);
        mean_eof.push(m);
        stderr_eof.push(se);
    }
    let empirical_rho = if records.iter().all(|r| r.states.is_some()) { Some(empirical_density(records)?) } else { None };
    Ok(EnsembleSummary { times, mean_c, stderr, mean_eof, stderr_eof, n_traj: records.len(), empirical_rho })
}

/// `(1/N) Σ |ψ⟩⟨ψ|` at every grid point.
pub fn empirical_density(records: &[TrajectoryRecord]) -> Result<Vec<DensityMatrix>> {
    let times = check_grids(records)?;
    let mut out = Vec::with_capacity(times.len());
    let mut projectors = Vec::with_capacity(records.len());
    for k in 0..times.len() {
        projectors.clear();
        for r in records {
            let states = r
                .states
                .as_ref()
                .ok_or_else(|| Error::InvalidArgument("empirical density needs retained states".into()))?;
            let v = states.get(k).ok_or(Error::GridMismatch)?.as_vec();
            projectors.push(v.outer(v));
        }
        let sum = pairwise_sum(&projectors, Mat4::zeros());
        out.push(DensityMatrix::new(sum.scale_re(1.0 / records.len() as f64))?);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub rate: f64,
    pub rate_stderr: f64,
    pub window: [f64; 2],
    pub r_squared: f64,
    pub points: usize,
}

/// Weighted least squares of `ln C̄` against `t` over the longest prefix of
/// the grid where `C̄ > 5·stderr`, with weights `(C̄/stderr)²`.
///
/// Points with zero standard error take the smallest positive one in the
/// window; when all are zero the fit is unweighted. The reported uncertainty
/// is scaled by the residuals.
pub fn fit_rate(summary: &EnsembleSummary) -> Result<RateFit> {
    let n_window = summary
        .mean_c
        .iter()
        .zip(&summary.stderr)
        .take_while(|(m, se)| **m > 0.0 && **m > SIGNAL_RATIO * **se)
        .count();
    if n_window < MIN_FIT_POINTS {
        return Err(Error::InsufficientSignal(format!(
            "only {n_window} leading grid points have mean > {SIGNAL_RATIO}·stderr, need {MIN_FIT_POINTS}"
        )));
    }
    let w = fit_weights(&summary.mean_c[..n_window], &summary.stderr[..n_window]);
    log_linear_fit(&summary.times[..n_window], &summary.mean_c[..n_window], &w)
}

/// Refits `reference` (for instance a closed-form curve sampled on the same
/// grid) over the window and with the weights that produced `fit`, so the two
/// rates are directly comparable.
pub fn fit_reference(summary: &EnsembleSummary, fit: &RateFit, reference: &[f64]) -> Result<RateFit> {
    let n = fit.points;
    if reference.len() < n || summary.mean_c.len() < n {
        return Err(Error::GridMismatch);
    }
    if let Some(bad) = reference[..n].iter().find(|v| !(**v > 0.0)) {
        return Err(Error::InsufficientSignal(format!("reference value {bad} inside the fit window")));
    }
    let w = fit_weights(&summary.mean_c[..n], &summary.stderr[..n]);
    log_linear_fit(&summary.times[..n], &reference[..n], &w)
}

fn fit_weights(m: &[f64], se: &[f64]) -> Vec<f64> {
    let floor = se.iter().copied().filter(|&s| s > 0.0).fold(f64::INFINITY, f64::min);
    m.iter()
        .zip(se)
        .map(|(&mi, &si)| if floor.is_finite() { (mi / if si > 0.0 { si } else { floor }).powi(2) } else { 1.0 })
        .collect()
}

fn log_linear_fit(t: &[f64], m: &[f64], w: &[f64]) -> Result<RateFit> {
    let n_window = t.len();
    let y: Vec<f64> = m.iter().map(|v| v.ln()).collect();

    let sw = pairwise_sum(w, 0.0);
    let wt: Vec<f64> = w.iter().zip(t).map(|(a, b)| a * b).collect();
    let wy: Vec<f64> = w.iter().zip(&y).map(|(a, b)| a * b).collect();
    let t_bar = pairwise_sum(&wt, 0.0) / sw;
    let y_bar = pairwise_sum(&wy, 0.0) / sw;
    let sxx: Vec<f64> = w.iter().zip(t).map(|(wi, ti)| wi * (ti - t_bar).powi(2)).collect();
    let sxy: Vec<f64> = w.iter().zip(t).zip(&y).map(|((wi, ti), yi)| wi * (ti - t_bar) * (yi - y_bar)).collect();
    let sxx = pairwise_sum(&sxx, 0.0);
    let slope = pairwise_sum(&sxy, 0.0) / sxx;
    let intercept = y_bar - slope * t_bar;

    let res: Vec<f64> = w.iter().zip(t).zip(&y).map(|((wi, ti), yi)| wi * (yi - intercept - slope * ti).powi(2)).collect();
    let tot: Vec<f64> = w.iter().zip(&y).map(|(wi, yi)| wi * (yi - y_bar).powi(2)).collect();
    let ss_res = pairwise_sum(&res, 0.0);
    let ss_tot = pairwise_sum(&tot, 0.0);
    let dof = (n_window - 2) as f64;
    let rate_stderr = (ss_res / dof / sxx).sqrt();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok(RateFit { rate: -slope, rate_stderr, window: [t[0], t[n_window - 1]], r_squared, points: n_window })
}
