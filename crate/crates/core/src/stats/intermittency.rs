//! Diagnostics for rare-peak dominance in the field of quenched moments.

use crate::error::{Error, Result};
use crate::extrapolate::ols;

use super::moments::AnnealedSummary;

/// `R(t)`: first annealed (or pseudo-annealed) moment over its trimmed value.
pub fn intermittency_ratio(summary: &AnnealedSummary, t: f64) -> Result<f64> {
    let j = summary.grid_index(t)?;
    let m = summary
        .get(1, 1)
        .ok_or_else(|| Error::domain("summary lacks the first annealed moment"))?;
    let log_trimmed = m.log_trimmed.as_ref().ok_or(Error::TrimUnavailable {
        len: summary.media,
        removed: 0,
    })?;
    if log_trimmed[j] == f64::NEG_INFINITY {
        return Err(Error::RatioUndefined);
    }
    Ok((m.log_values[j] - log_trimmed[j]).exp())
}

/// `log₁₀⟨m₁²⟩ − 2·log₁₀⟨m₁⟩` at `t`.
pub fn log_moment_gap(summary: &AnnealedSummary, t: f64) -> Result<f64> {
    let j = summary.grid_index(t)?;
    gap_at(summary, j)
}

pub(crate) fn gap_at(summary: &AnnealedSummary, j: usize) -> Result<f64> {
    let first = summary
        .get(1, 1)
        .ok_or_else(|| Error::domain("summary lacks ⟨m₁⟩"))?;
    let second = summary
        .get(1, 2)
        .ok_or_else(|| Error::domain("summary lacks ⟨m₁²⟩"))?;
    let (a, b) = (first.log_values[j], second.log_values[j]);
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::domain(format!(
            "annealed moments must be positive at t = {}",
            summary.time_grid[j]
        )));
    }
    Ok((b - 2.0 * a) / std::f64::consts::LN_10)
}

/// `ln⟨m₁^p(t)⟩ / (p·t^β)` at grid index `j`; `None` at `t = 0` or for a zero moment.
pub fn pointwise_lyapunov_ratio(
    summary: &AnnealedSummary,
    power: u32,
    beta: f64,
    j: usize,
) -> Option<f64> {
    let t = summary.time_grid[j];
    let lv = summary.get(1, power)?.log_values[j];
    (t > 0.0 && lv.is_finite()).then(|| lv / (f64::from(power) * t.powf(beta)))
}

/// Growth-rate ratios `Λ̂_p / p` for `p = 1..=max_power`.
///
/// `Λ̂_p` is the least-squares slope of `ln⟨m₁^p(t)⟩` against `t^β` over the
/// last `window_fraction` of the time grid. Under intermittency the ratios
/// increase with `p`; without it they coincide.
pub fn lyapunov_ratio_estimate(
    summary: &AnnealedSummary,
    max_power: u32,
    beta: f64,
    window_fraction: f64,
) -> Result<Vec<f64>> {
    if !(window_fraction > 0.0 && window_fraction <= 1.0) {
        return Err(Error::InvalidParameter {
            name: "window_fraction",
            reason: format!("must lie in (0, 1], got {window_fraction}"),
        });
    }
    let grid = &summary.time_grid;
    let (t0, t1) = (grid[0], grid[grid.len() - 1]);
    let start = t1 - window_fraction * (t1 - t0) - 1e-9;
    let idx: Vec<usize> = (0..grid.len()).filter(|&j| grid[j] >= start).collect();
    let xs: Vec<f64> = idx.iter().map(|&j| grid[j].powf(beta)).collect();
    (1..=max_power)
        .map(|p| {
            let m = summary
                .get(1, p)
                .ok_or_else(|| Error::domain(format!("summary lacks ⟨m₁^{p}⟩")))?;
            let ys: Vec<f64> = idx.iter().map(|&j| m.log_values[j]).collect();
            if ys.iter().any(|y| !y.is_finite()) {
                return Err(Error::domain(
                    "annealed moments must be positive on the window",
                ));
            }
            let (slope, _, _) = ols(&xs, &ys)?;
            Ok(slope / f64::from(p))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::MomentCurve;

    fn summary_from(
        values_per_medium: &[Vec<f64>],
        grid: &[f64],
        max_power: u32,
    ) -> AnnealedSummary {
        let curves: Vec<MomentCurve> = values_per_medium
            .iter()
            .enumerate()
            .map(|(k, v)| MomentCurve {
                time_grid: grid.to_vec(),
                values: v.clone(),
                order: 1,
                replicates: vec![1; grid.len()],
                medium_id: Some(k),
            })
            .collect();
        AnnealedSummary::build(vec![curves], max_power, 0.01, true).unwrap()
    }

    fn grid() -> Vec<f64> {
        (0..=100).map(|i| i as f64 / 10.0).collect()
    }

    #[test]
    fn degenerate_ensemble() {
        let g = grid();
        let v: Vec<f64> = g.iter().map(|t| (0.8 * t).exp()).collect();
        let s = summary_from(&vec![v; 20], &g, 3);
        assert!((intermittency_ratio(&s, 10.0).unwrap() - 1.0).abs() < 1e-12);
        assert!(log_moment_gap(&s, 10.0).unwrap().abs() < 1e-12);
        let ratios = lyapunov_ratio_estimate(&s, 3, 1.0, 0.3).unwrap();
        for r in &ratios {
            assert!((r - 0.8).abs() < 1e-9, "{ratios:?}");
        }
    }

    #[test]
    fn single_medium_collapses() {
        let g = grid();
        let v: Vec<f64> = g.iter().map(|t| 1.0 + t * t).collect();
        let s = summary_from(&[v], &g, 4);
        let ratios = lyapunov_ratio_estimate(&s, 4, 1.0, 0.3).unwrap();
        for r in &ratios {
            assert!((r - ratios[0]).abs() < 1e-9);
        }
        // one medium cannot be trimmed
        assert!(intermittency_ratio(&s, 5.0).is_err());
    }

    #[test]
    fn exponential_media_have_equal_ratios() {
        // m₁ = e^{λt} for every medium: Λ_p = pλt.
        let g = grid();
        let media: Vec<Vec<f64>> = (0..5)
            .map(|_| g.iter().map(|t| (1.3 * t).exp()).collect())
            .collect();
        let s = summary_from(&media, &g, 2);
        let r = lyapunov_ratio_estimate(&s, 2, 1.0, 0.3).unwrap();
        assert!((r[1] / r[0] - 1.0).abs() < 0.01);
        let pw1 = pointwise_lyapunov_ratio(&s, 1, 1.0, 100).unwrap();
        let pw2 = pointwise_lyapunov_ratio(&s, 2, 1.0, 100).unwrap();
        assert!((pw1 - 1.3).abs() < 1e-9 && (pw2 - 1.3).abs() < 1e-9);
        assert!(pointwise_lyapunov_ratio(&s, 1, 1.0, 0).is_none());
    }

    #[test]
    fn heterogeneous_rates_increase_with_power() {
        // Media grow at different rates: ln⟨m^p⟩ is dominated by the fastest
        // medium, so Λ_p/p increases with p.
        let g = grid();
        let media: Vec<Vec<f64>> = (0..10)
            .map(|k| g.iter().map(|t| (0.2 * k as f64 * t).exp()).collect())
            .collect();
        let s = summary_from(&media, &g, 3);
        let r = lyapunov_ratio_estimate(&s, 3, 1.0, 0.3).unwrap();
        assert!(r[0] < r[1] && r[1] < r[2], "{r:?}");
        assert!(log_moment_gap(&s, 10.0).unwrap() > 0.5);
        assert!(intermittency_ratio(&s, 10.0).unwrap() > 1.5);
    }

    #[test]
    fn zero_moments_are_errors() {
        let g = vec![0.0, 1.0, 2.0];
        let s = summary_from(&vec![vec![0.0, 0.0, 0.0]; 5], &g, 2);
        assert!(matches!(
            intermittency_ratio(&s, 1.0),
            Err(Error::RatioUndefined)
        ));
        assert!(log_moment_gap(&s, 1.0).is_err());
        assert!(lyapunov_ratio_estimate(&s, 2, 1.0, 1.0).is_err());
    }

    #[test]
    fn hand_computed_ratio_and_gap() {
        // 5 media at one time: 1, 2, 3, 4, 100. Trim drops 1 and 100.
        let g = vec![0.0, 1.0];
        let media: Vec<Vec<f64>> = [1.0, 2.0, 3.0, 4.0, 100.0]
            .iter()
            .map(|&v| vec![1.0, v])
            .collect();
        let s = summary_from(&media, &g, 2);
        let r = intermittency_ratio(&s, 1.0).unwrap();
        assert!((r - 22.0 / 3.0).abs() < 1e-12);
        let mean_sq: f64 = (1.0 + 4.0 + 9.0 + 16.0 + 10_000.0) / 5.0;
        let gap = mean_sq.log10() - 2.0 * 22.0f64.log10();
        assert!((log_moment_gap(&s, 1.0).unwrap() - gap).abs() < 1e-12);
    }
}
