//! Moment estimators and intermittency diagnostics.

pub(crate) mod intermittency;
mod moments;
mod shapiro;
mod trim;

pub use intermittency::{
    intermittency_ratio, log_moment_gap, lyapunov_ratio_estimate, pointwise_lyapunov_ratio,
};
pub use moments::{
    annealed_moment, grid_path, quenched_moment, quenched_moment_from_trajectories, AnnealedMoment,
    AnnealedSummary, MomentCurve,
};
pub use shapiro::{shapiro_wilk, ShapiroWilk};
pub use trim::{log_trimmed_mean, trim_count, trimmed_mean, DEFAULT_TRIM_FRACTION};

/// `ln Σ exp(x_i)` summed in slice order; `-inf` for an empty or all-`-inf` slice.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// `ln` of the arithmetic mean of `exp(x_i)`.
pub fn log_mean_exp(xs: &[f64]) -> f64 {
    log_sum_exp(xs) - (xs.len() as f64).ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_sum_exp_basics() {
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY; 3]), f64::NEG_INFINITY);
        let v = log_sum_exp(&[1f64.ln(), 2f64.ln(), 3f64.ln()]);
        assert!((v - 6f64.ln()).abs() < 1e-14);
        // no overflow for huge exponents
        let big = log_mean_exp(&[800.0, 800.0]);
        assert!((big - 800.0).abs() < 1e-12);
    }
}
