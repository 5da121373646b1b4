use crate::error::{Error, Result};

use super::log_mean_exp;

/// One percent, two-sided.
pub const DEFAULT_TRIM_FRACTION: f64 = 0.01;

/// Number of values removed from *each* end: `⌈fraction·len/2⌉`.
///
/// For 250 values at 1 % this is 2, so the two largest and two smallest go.
pub fn trim_count(len: usize, fraction: f64) -> usize {
    if fraction <= 0.0 {
        return 0;
    }
    // Guard against 0.01·200/2 = 1.0000000000000002 rounding up to 2.
    (fraction * len as f64 / 2.0 - 1e-9).ceil().max(0.0) as usize
}

fn check(len: usize, fraction: f64) -> Result<usize> {
    if !(0.0..0.5).contains(&fraction) {
        return Err(Error::InvalidParameter {
            name: "trim_fraction",
            reason: format!("must lie in [0, 0.5), got {fraction}"),
        });
    }
    let k = trim_count(len, fraction);
    if len == 0 || 2 * k >= len {
        return Err(Error::TrimUnavailable { len, removed: k });
    }
    Ok(k)
}

/// Symmetric trimmed mean: sort, drop [`trim_count`] values from each end,
/// average the rest.
pub fn trimmed_mean(values: &[f64], fraction: f64) -> Result<f64> {
    let k = check(values.len(), fraction)?;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let kept = &sorted[k..sorted.len() - k];
    Ok(kept.iter().sum::<f64>() / kept.len() as f64)
}

/// Trimmed mean of `exp(x_i)` returned on the log scale.
///
/// Ordering is preserved by `exp`, so trimming log values trims the same
/// observations as trimming the values themselves.
pub fn log_trimmed_mean(log_values: &[f64], fraction: f64) -> Result<f64> {
    let k = check(log_values.len(), fraction)?;
    let mut sorted = log_values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(log_mean_exp(&sorted[k..sorted.len() - k]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn count_for_250() {
        assert_eq!(trim_count(250, 0.01), 2);
        assert_eq!(trim_count(200, 0.01), 1);
        assert_eq!(trim_count(100, 0.01), 1);
        assert_eq!(trim_count(50, 0.01), 1);
        assert_eq!(trim_count(50, 0.0), 0);
    }

    #[test]
    fn hand_computed_example() {
        let xs: Vec<f64> = (0..250).map(f64::from).collect();
        // drops {0, 1} and {248, 249}; mean of 2..=247 is 124.5
        assert_eq!(trimmed_mean(&xs, 0.01).unwrap(), 124.5);
    }

    #[test]
    fn middle_246_of_250() {
        let mut xs: Vec<f64> = (0..250).map(|i| (i as f64 * 7.3).sin()).collect();
        xs[10] = 1e9;
        xs[20] = 2e9;
        xs[30] = -1e9;
        xs[40] = -2e9;
        let mut sorted = xs.clone();
        sorted.sort_by(f64::total_cmp);
        let expected = sorted[2..248].iter().sum::<f64>() / 246.0;
        assert!((trimmed_mean(&xs, 0.01).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn constant_list() {
        assert_eq!(trimmed_mean(&[3.5; 40], 0.01).unwrap(), 3.5);
    }

    #[test]
    fn too_few_values() {
        assert!(matches!(
            trimmed_mean(&[], 0.01),
            Err(Error::TrimUnavailable { .. })
        ));
        assert!(matches!(
            trimmed_mean(&[1.0, 2.0], 0.01),
            Err(Error::TrimUnavailable { .. })
        ));
        assert_eq!(trimmed_mean(&[1.0, 2.0, 6.0], 0.01).unwrap(), 2.0);
        assert!(trimmed_mean(&[1.0, 2.0, 3.0], 0.6).is_err());
    }

    #[test]
    fn log_variant_agrees() {
        let xs: Vec<f64> = (1..=60).map(|i| (i as f64).powf(1.7)).collect();
        let logs: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
        let a = trimmed_mean(&xs, 0.05).unwrap();
        let b = log_trimmed_mean(&logs, 0.05).unwrap().exp();
        assert!((a - b).abs() < 1e-10 * a);
    }

    proptest! {
        #[test]
        fn translation_equivariant(xs in prop::collection::vec(-1e3f64..1e3, 5..120), c in -1e3f64..1e3) {
            let shifted: Vec<f64> = xs.iter().map(|x| x + c).collect();
            let a = trimmed_mean(&xs, 0.1).unwrap();
            let b = trimmed_mean(&shifted, 0.1).unwrap();
            prop_assert!((a + c - b).abs() < 1e-9);
        }

        #[test]
        fn monotone_in_each_input(xs in prop::collection::vec(-1e3f64..1e3, 5..120), i in any::<prop::sample::Index>(), bump in 0f64..100.0) {
            let mut ys = xs.clone();
            let j = i.index(ys.len());
            ys[j] += bump;
            prop_assert!(trimmed_mean(&ys, 0.1).unwrap() >= trimmed_mean(&xs, 0.1).unwrap() - 1e-9);
        }
    }
}
