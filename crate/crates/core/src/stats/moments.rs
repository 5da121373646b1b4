//! Quenched and annealed moment estimators.

use serde::Serialize;

use crate::engine::{Status, Trajectory};
use crate::error::{Error, Result};
use crate::extrapolate::RegressionFit;

use super::log_mean_exp;
use super::trim::log_trimmed_mean;

/// Quenched estimate `m̂_n(t, ω) = (1/M) Σ μ_i(t)^n` on a time grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentCurve {
    pub time_grid: Vec<f64>,
    pub values: Vec<f64>,
    pub order: u32,
    /// Replicates averaged at each grid point.
    pub replicates: Vec<usize>,
    pub medium_id: Option<usize>,
}

/// `μ(t)` of one run on `grid`: observed up to the end of observation,
/// the fitted exponential beyond `T_stop`, zero after extinction.
pub fn grid_path(traj: &Trajectory, fit: Option<&RegressionFit>, grid: &[f64]) -> Result<Vec<f64>> {
    let observed = traj.observed_until();
    grid.iter()
        .map(|&t| {
            if t < 0.0 || t > traj.t_max() {
                return Err(Error::domain(format!(
                    "grid time {t} outside [0, {}]",
                    traj.t_max()
                )));
            }
            if t <= observed {
                return Ok(f64::from(traj.mu_at_unchecked(t)));
            }
            match (traj.status(), fit) {
                (Status::Capped { .. }, Some(f)) => Ok(f.predict(t)),
                (Status::Capped { .. }, None) => Err(Error::FitUnavailable(format!(
                    "capped run needs a fit to reach t = {t}"
                ))),
                _ => Err(Error::domain(format!(
                    "{} run not observed at t = {t}",
                    traj.status().label()
                ))),
            }
        })
        .collect()
}

/// Averages `μ_i(t)^n` over the given grid paths, summing in slice order.
pub fn quenched_moment(
    paths: &[Vec<f64>],
    order: u32,
    grid: &[f64],
    medium_id: Option<usize>,
) -> Result<MomentCurve> {
    if paths.is_empty() {
        return Err(Error::domain("no trajectories to average"));
    }
    if order == 0 {
        return Ok(MomentCurve {
            time_grid: grid.to_vec(),
            values: vec![1.0; grid.len()],
            order,
            replicates: vec![paths.len(); grid.len()],
            medium_id,
        });
    }
    if paths.iter().any(|p| p.len() != grid.len()) {
        return Err(Error::domain("path length differs from the time grid"));
    }
    let exponent = order as i32;
    let m = paths.len() as f64;
    let values = (0..grid.len())
        .map(|j| paths.iter().map(|p| p[j].powi(exponent)).sum::<f64>() / m)
        .collect();
    Ok(MomentCurve {
        time_grid: grid.to_vec(),
        values,
        order,
        replicates: vec![paths.len(); grid.len()],
        medium_id,
    })
}

/// [`quenched_moment`] straight from trajectories and their fits.
pub fn quenched_moment_from_trajectories(
    runs: &[(Trajectory, Option<RegressionFit>)],
    order: u32,
    grid: &[f64],
) -> Result<MomentCurve> {
    let paths = runs
        .iter()
        .map(|(t, f)| grid_path(t, f.as_ref(), grid))
        .collect::<Result<Vec<_>>>()?;
    quenched_moment(&paths, order, grid, None)
}

/// `⟨m_n^p⟩` over media (annealed, or pseudo-annealed for a non-random medium).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnnealedMoment {
    pub order: u32,
    pub power: u32,
    pub values: Vec<f64>,
    /// Natural log of `values`, accumulated with log-sum-exp.
    pub log_values: Vec<f64>,
    /// Trimmed counterpart; `None` when too few media to trim.
    pub trimmed: Option<Vec<f64>>,
    pub log_trimmed: Option<Vec<f64>>,
}

fn ensure_shared_grid(curves: &[MomentCurve]) -> Result<()> {
    let first = curves
        .first()
        .ok_or_else(|| Error::domain("no moment curves"))?;
    for c in curves {
        if c.time_grid != first.time_grid {
            return Err(Error::domain("moment curves use different time grids"));
        }
        if c.order != first.order {
            return Err(Error::domain("moment curves have different orders"));
        }
    }
    Ok(())
}

/// Averages `m̂_n(t, ω_k)^p` over the curves at each grid time.
pub fn annealed_moment(
    curves: &[MomentCurve],
    power: u32,
    trim_fraction: f64,
) -> Result<AnnealedMoment> {
    ensure_shared_grid(curves)?;
    let grid_len = curves[0].time_grid.len();
    let p = f64::from(power);
    let mut log_values = Vec::with_capacity(grid_len);
    let mut log_trimmed = Vec::with_capacity(grid_len);
    let mut trim_ok = true;
    let mut column = vec![0.0; curves.len()];
    for j in 0..grid_len {
        for (slot, c) in column.iter_mut().zip(curves) {
            *slot = p * c.values[j].ln();
        }
        log_values.push(log_mean_exp(&column));
        match log_trimmed_mean(&column, trim_fraction) {
            Ok(v) => log_trimmed.push(v),
            Err(Error::TrimUnavailable { .. }) => trim_ok = false,
            Err(e) => return Err(e),
        }
    }
    let values = log_values.iter().map(|v| v.exp()).collect();
    let (trimmed, log_trimmed) = if trim_ok {
        (
            Some(log_trimmed.iter().map(|v| v.exp()).collect()),
            Some(log_trimmed),
        )
    } else {
        (None, None)
    };
    Ok(AnnealedMoment {
        order: curves[0].order,
        power,
        values,
        log_values,
        trimmed,
        log_trimmed,
    })
}

/// Annealed moments for every requested `(n, p)` plus the per-medium curves.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnnealedSummary {
    pub time_grid: Vec<f64>,
    pub media: usize,
    pub trim_fraction: f64,
    /// Whether the medium is random (annealed) or not (pseudo-annealed).
    pub random_medium: bool,
    /// Per-medium quenched curves, grouped by order.
    pub curves: Vec<Vec<MomentCurve>>,
    pub moments: Vec<AnnealedMoment>,
}

impl AnnealedSummary {
    /// `curves_by_order[o]` holds the curves of one order over all media.
    pub fn build(
        curves_by_order: Vec<Vec<MomentCurve>>,
        max_power: u32,
        trim_fraction: f64,
        random_medium: bool,
    ) -> Result<Self> {
        let first = curves_by_order
            .first()
            .and_then(|c| c.first())
            .ok_or_else(|| Error::domain("no moment curves"))?;
        let time_grid = first.time_grid.clone();
        let media = curves_by_order[0].len();
        let mut moments = Vec::new();
        for curves in &curves_by_order {
            if curves.len() != media || curves.iter().any(|c| c.time_grid != time_grid) {
                return Err(Error::domain(
                    "moment curves use different grids or media counts",
                ));
            }
            for p in 1..=max_power.max(1) {
                moments.push(annealed_moment(curves, p, trim_fraction)?);
            }
        }
        Ok(AnnealedSummary {
            time_grid,
            media,
            trim_fraction,
            random_medium,
            curves: curves_by_order,
            moments,
        })
    }

    pub fn get(&self, order: u32, power: u32) -> Option<&AnnealedMoment> {
        self.moments
            .iter()
            .find(|m| m.order == order && m.power == power)
    }

    pub fn curves_of_order(&self, order: u32) -> Option<&[MomentCurve]> {
        self.curves
            .iter()
            .find(|c| c.first().is_some_and(|c| c.order == order))
            .map(Vec::as_slice)
    }

    /// Index of the grid time closest to `t`.
    pub fn grid_index(&self, t: f64) -> Result<usize> {
        nearest_index(&self.time_grid, t)
    }

    pub fn max_power(&self) -> u32 {
        self.moments.iter().map(|m| m.power).max().unwrap_or(0)
    }
}

pub(crate) fn nearest_index(grid: &[f64], t: f64) -> Result<usize> {
    let (lo, hi) = match (grid.first(), grid.last()) {
        (Some(&lo), Some(&hi)) => (lo, hi),
        _ => return Err(Error::domain("empty time grid")),
    };
    let tol = 1e-9 * hi.abs().max(1.0);
    if !(t >= lo - tol && t <= hi + tol) {
        return Err(Error::domain(format!(
            "t = {t} outside the grid [{lo}, {hi}]"
        )));
    }
    Ok(grid
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))
        .map(|(i, _)| i)
        .expect("non-empty"))
}
