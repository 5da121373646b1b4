//! Exponential continuation of capped trajectories.
//!
//! Once a run hits the particle cap, `ln μ(t)` is fitted by ordinary least
//! squares on a uniform grid over `[T_100, T_stop]` and the fitted line is
//! used for `μ` on `(T_stop, T_max]`.

use rayon::prelude::*;
use serde::Serialize;

use crate::engine::{simulate_site, EngineParams, Status, Trajectory};
use crate::error::{Error, Result};
use crate::lattice::{BoundaryPolicy, LatticeWindow};
use crate::medium::{sample_medium, IntensityLaw, MediumSpec, SourceConfiguration};
use crate::rng::derive_seeds;

pub const DEFAULT_GRID_DT: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegressionFit {
    /// Growth slope of `ln μ` per unit time.
    pub slope: f64,
    /// Intercept on the log scale.
    pub intercept: f64,
    pub r_squared: f64,
    pub n_points: usize,
    pub window: (f64, f64),
}

impl RegressionFit {
    #[inline]
    pub fn predict(&self, t: f64) -> f64 {
        (self.intercept + self.slope * t).exp()
    }

    #[inline]
    pub fn predict_ln(&self, t: f64) -> f64 {
        self.intercept + self.slope * t
    }
}

/// Ordinary least squares of `ys` on `ts` with intercept.
///
/// Returns `(slope, intercept, r_squared)`. A constant response has
/// `r_squared = 1` when the fit is exact.
pub fn ols(ts: &[f64], ys: &[f64]) -> Result<(f64, f64, f64)> {
    let n = ts.len();
    if n < 2 || ys.len() != n {
        return Err(Error::FitUnavailable(format!(
            "{n} points, need at least 2"
        )));
    }
    let nf = n as f64;
    let mt = ts.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let (mut stt, mut sty, mut syy) = (0.0, 0.0, 0.0);
    for (t, y) in ts.iter().zip(ys) {
        let (dt, dy) = (t - mt, y - my);
        stt += dt * dt;
        sty += dt * dy;
        syy += dy * dy;
    }
    if stt <= 0.0 {
        return Err(Error::FitUnavailable("regressor has no spread".into()));
    }
    let slope = sty / stt;
    let intercept = my - slope * mt;
    let sse: f64 = ts
        .iter()
        .zip(ys)
        .map(|(t, y)| {
            let r = y - (intercept + slope * t);
            r * r
        })
        .sum();
    let r_squared = if syy > 0.0 {
        (1.0 - sse / syy).clamp(0.0, 1.0)
    } else if sse <= 1e-24 {
        1.0
    } else {
        0.0
    };
    Ok((slope, intercept, r_squared))
}

/// Uniform grid `lo, lo + dt, …` not exceeding `hi`.
fn window_grid(lo: f64, hi: f64, dt: f64) -> Vec<f64> {
    let n = ((hi - lo) / dt + 1e-9).floor() as usize;
    (0..=n)
        .map(|i| lo + i as f64 * dt)
        .filter(|&t| t <= hi)
        .collect()
}

/// Fits `ln μ(t) = intercept + slope·t` on `{T_100, T_100 + dt, …} ∩ [T_100, T_stop]`.
pub fn fit_growth(traj: &Trajectory, grid_dt: f64) -> Result<RegressionFit> {
    if !(grid_dt.is_finite() && grid_dt > 0.0) {
        return Err(Error::InvalidParameter {
            name: "extrapolate.grid_dt",
            reason: format!("must be positive, got {grid_dt}"),
        });
    }
    let Status::Capped { t_stop } = traj.status() else {
        return Err(Error::FitUnavailable(format!(
            "trajectory is {}, not capped",
            traj.status().label()
        )));
    };
    let t_100 = traj
        .t_100()
        .ok_or_else(|| Error::FitUnavailable("live count never reached 100".into()))?;
    let ts = window_grid(t_100, t_stop, grid_dt);
    if ts.len() < 2 {
        return Err(Error::FitUnavailable(format!(
            "window [{t_100}, {t_stop}] holds {} grid point(s) at dt = {grid_dt}",
            ts.len()
        )));
    }
    let ys: Vec<f64> = ts
        .iter()
        .map(|&t| f64::from(traj.mu_at_unchecked(t)).ln())
        .collect();
    let (slope, intercept, r_squared) = ols(&ts, &ys)?;
    Ok(RegressionFit {
        slope,
        intercept,
        r_squared,
        n_points: ts.len(),
        window: (t_100, t_stop),
    })
}

/// [`fit_growth`], retrying on an 8-interval grid when the window is
/// narrower than two grid steps.
pub fn fit_growth_adaptive(traj: &Trajectory, grid_dt: f64) -> Result<RegressionFit> {
    match fit_growth(traj, grid_dt) {
        Err(Error::FitUnavailable(_)) if traj.t_100().is_some() => {
            let (lo, hi) = (traj.t_100().unwrap_or(0.0), traj.observed_until());
            if hi > lo {
                fit_growth(traj, (hi - lo) / 8.0)
            } else {
                fit_growth(traj, grid_dt)
            }
        }
        other => other,
    }
}

/// `μ(t)` with observed data up to `T_stop` and the fitted exponential after.
pub fn extrapolated_mu(traj: &Trajectory, fit: &RegressionFit, t: f64) -> Result<f64> {
    if t > traj.t_max() {
        return Err(Error::domain(format!(
            "t = {t} beyond T_max = {}",
            traj.t_max()
        )));
    }
    if t <= traj.observed_until() {
        return traj.mu_at(t).map(f64::from);
    }
    match traj.status() {
        Status::Capped { .. } => Ok(fit.predict(t)),
        Status::Extinct => Ok(0.0),
        _ => Err(Error::domain(format!("t = {t} beyond the observed range"))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ValidationReport {
    pub n_traj: usize,
    pub n_capped: usize,
    pub mean_r2: f64,
    pub min_r2: f64,
    /// Mean of `|μ_obs - μ_fit|` over every grid point of every capped run.
    pub mean_abs_err: f64,
    pub max_abs_err: f64,
}

impl ValidationReport {
    pub const CSV_HEADER: &'static str = "n_traj,n_capped,mean_r2,min_r2,mean_abs_err,max_abs_err";

    pub fn csv_row(&self) -> String {
        use crate::runner::fmt_g;
        format!(
            "{},{},{},{},{},{}",
            self.n_traj,
            self.n_capped,
            fmt_g(self.mean_r2),
            fmt_g(self.min_r2),
            fmt_g(self.mean_abs_err),
            fmt_g(self.max_abs_err)
        )
    }
}

struct FitQuality {
    r2: f64,
    abs_err_sum: f64,
    abs_err_max: f64,
    points: usize,
}

fn fit_quality(traj: &Trajectory, fit: &RegressionFit, grid_dt: f64) -> FitQuality {
    let ts = window_grid(fit.window.0, fit.window.1, grid_dt);
    let mut q = FitQuality {
        r2: fit.r_squared,
        abs_err_sum: 0.0,
        abs_err_max: 0.0,
        points: ts.len(),
    };
    for &t in &ts {
        let err = (f64::from(traj.mu_at_unchecked(t)) - fit.predict(t)).abs();
        q.abs_err_sum += err;
        q.abs_err_max = q.abs_err_max.max(err);
    }
    q
}

/// Summarises fit quality over an ensemble of trajectories.
pub fn summarize_fits<'a>(
    runs: impl IntoIterator<Item = (&'a Trajectory, &'a RegressionFit)>,
    n_traj: usize,
    grid_dt: f64,
) -> Result<ValidationReport> {
    let mut n_capped = 0usize;
    let (mut r2_sum, mut r2_min) = (0.0, f64::INFINITY);
    let (mut err_sum, mut err_max, mut points) = (0.0, 0.0f64, 0usize);
    for (traj, fit) in runs {
        let q = fit_quality(traj, fit, grid_dt);
        n_capped += 1;
        r2_sum += q.r2;
        r2_min = r2_min.min(q.r2);
        err_sum += q.abs_err_sum;
        err_max = err_max.max(q.abs_err_max);
        points += q.points;
    }
    if n_capped == 0 {
        return Err(Error::ValidationUnavailable);
    }
    Ok(ValidationReport {
        n_traj,
        n_capped,
        mean_r2: r2_sum / n_capped as f64,
        min_r2: r2_min,
        mean_abs_err: err_sum / points as f64,
        max_abs_err: err_max,
    })
}

/// Checks the exponential-growth assumption on a homogeneous constant medium.
///
/// Simulates `n_traj` runs of a d = 1 side-100 homogeneous medium with the
/// given constant intensities, fits every capped run, and compares observed
/// and fitted counts on its fit window.
pub fn validate_regression(
    split: f64,
    death: f64,
    n_traj: usize,
    params: &EngineParams,
    master_seed: u64,
    grid_dt: f64,
) -> Result<ValidationReport> {
    if n_traj < 100 {
        return Err(Error::InvalidParameter {
            name: "n_traj",
            reason: format!("need at least 100 trajectories, got {n_traj}"),
        });
    }
    params.validate()?;
    let window = LatticeWindow::new(1, 100, BoundaryPolicy::Error)?;
    let spec = MediumSpec::new(
        SourceConfiguration::EveryPoint,
        IntensityLaw::constant(split),
        IntensityLaw::constant(death),
    );
    let medium = sample_medium(&spec, derive_seeds(master_seed, 0, 0).0, &window)?;
    let start = window.origin_index();
    let runs: Vec<(Trajectory, RegressionFit)> = (0..n_traj as u64)
        .into_par_iter()
        .filter_map(|i| {
            let traj = simulate_site(&medium, params, start, derive_seeds(master_seed, 0, i).1);
            let fit = fit_growth(&traj, grid_dt).ok()?;
            Some((traj, fit))
        })
        .collect();
    summarize_fits(runs.iter().map(|(t, f)| (t, f)), n_traj, grid_dt)
}
