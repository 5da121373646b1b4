//! Shapiro-Wilk W test, Royston's AS R94 approximation.
//!
//! Coefficients and the p-value normalisation follow Royston (1995),
//! "Remark AS R94", Applied Statistics 44(4), valid for `3 <= n <= 5000`.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShapiroWilk {
    pub w: f64,
    pub p_value: f64,
}

const C1: [f64; 6] = [0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056];
const C2: [f64; 6] = [0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633];
const C3: [f64; 4] = [0.5440, -0.39978, 0.025054, -6.714e-4];
const C4: [f64; 4] = [1.3822, -0.77857, 0.062767, -0.0020322];
const C5: [f64; 4] = [-1.5861, -0.31082, -0.083751, 0.0038915];
const C6: [f64; 3] = [-0.4803, -0.082676, 0.0030302];
const G: [f64; 2] = [-2.273, 0.459];

fn poly(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &ci| acc * x + ci)
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("valid parameters")
}

/// Half-sample coefficients `a_1..a_{n/2}` (positive, for the upper order statistics).
fn coefficients(n: usize) -> Vec<f64> {
    let nn2 = n / 2;
    if n == 3 {
        return vec![std::f64::consts::FRAC_1_SQRT_2];
    }
    let normal = std_normal();
    let an = n as f64;
    let m: Vec<f64> = (1..=nn2)
        .map(|i| normal.inverse_cdf((i as f64 - 0.375) / (an + 0.25)))
        .collect();
    let summ2 = 2.0 * m.iter().map(|v| v * v).sum::<f64>();
    let ssumm2 = summ2.sqrt();
    let rsn = 1.0 / an.sqrt();
    let a1 = poly(&C1, rsn) - m[0] / ssumm2;
    let mut a = vec![0.0; nn2];
    a[0] = a1;
    let (first_plain, fac) = if n > 5 {
        let a2 = -m[1] / ssumm2 + poly(&C2, rsn);
        a[1] = a2;
        let fac = ((summ2 - 2.0 * m[0] * m[0] - 2.0 * m[1] * m[1])
            / (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2))
            .sqrt();
        (2, fac)
    } else {
        (
            1,
            ((summ2 - 2.0 * m[0] * m[0]) / (1.0 - 2.0 * a1 * a1)).sqrt(),
        )
    };
    for i in first_plain..nn2 {
        a[i] = -m[i] / fac;
    }
    a
}

fn p_value(w: f64, n: usize) -> f64 {
    if n == 3 {
        let pi6 = 6.0 / std::f64::consts::PI;
        let stqr = std::f64::consts::FRAC_PI_3;
        return (pi6 * (w.sqrt().asin() - stqr)).clamp(0.0, 1.0);
    }
    let an = n as f64;
    let w1 = (1.0 - w).ln();
    let (y, mean, sd) = if n <= 11 {
        let gamma = poly(&G, an);
        if w1 >= gamma {
            return 1e-99;
        }
        (-(gamma - w1).ln(), poly(&C3, an), poly(&C4, an).exp())
    } else {
        let ln_n = an.ln();
        (w1, poly(&C5, ln_n), poly(&C6, ln_n).exp())
    };
    std_normal().sf((y - mean) / sd)
}

/// Shapiro-Wilk statistic and p-value for `3..=5000` observations.
pub fn shapiro_wilk(values: &[f64]) -> Result<ShapiroWilk> {
    let n = values.len();
    if !(3..=5000).contains(&n) {
        return Err(Error::domain(format!(
            "Shapiro-Wilk needs 3..=5000 values, got {n}"
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain(
            "Shapiro-Wilk input contains non-finite values",
        ));
    }
    let mut x = values.to_vec();
    x.sort_by(f64::total_cmp);
    let range = x[n - 1] - x[0];
    if range <= 1e-19 * x[0].abs().max(1.0) {
        return Err(Error::domain("Shapiro-Wilk input has zero variance"));
    }
    // Rescale for conditioning; W is scale invariant.
    let mean = x.iter().sum::<f64>() / n as f64;
    let z: Vec<f64> = x.iter().map(|v| (v - mean) / range).collect();
    let a = coefficients(n);
    let numer: f64 = a
        .iter()
        .enumerate()
        .map(|(i, ai)| ai * (z[n - 1 - i] - z[i]))
        .sum();
    let ssq: f64 = z.iter().map(|v| v * v).sum();
    let w = (numer * numer / ssq).min(1.0);
    Ok(ShapiroWilk {
        w,
        p_value: p_value(w, n),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Exp1, StandardNormal};

    #[test]
    fn coefficients_are_normalised() {
        for n in [4, 5, 6, 11, 12, 50, 250, 5000] {
            let a = coefficients(n);
            let norm: f64 = 2.0 * a.iter().map(|v| v * v).sum::<f64>();
            assert!((norm - 1.0).abs() < 1e-10, "n = {n}: {norm}");
        }
    }

    #[test]
    fn matches_reference_values() {
        // Reference W and p from scipy.stats.shapiro (same AS R94 routine)
        // on a skewed deterministic sample and two small ones.
        let skewed: Vec<f64> = (1..=30)
            .map(|i| (i as f64).powf(1.5) + 3.0 * (i as f64).sin())
            .collect();
        let r = shapiro_wilk(&skewed).unwrap();
        assert!((r.w - REF_SKEWED.0).abs() < 1e-6, "W = {}", r.w);
        assert!(
            (r.p_value - REF_SKEWED.1).abs() < 1e-5 * REF_SKEWED.1.max(1e-3),
            "p = {}",
            r.p_value
        );

        let small = [2.1, 3.4, 1.9, 5.6, 4.4, 3.3, 2.8, 3.9];
        let r = shapiro_wilk(&small).unwrap();
        assert!((r.w - REF_SMALL.0).abs() < 1e-6, "W = {}", r.w);
        assert!((r.p_value - REF_SMALL.1).abs() < 1e-5, "p = {}", r.p_value);

        let three = [1.0, 2.0, 4.0];
        let r = shapiro_wilk(&three).unwrap();
        assert!((r.w - REF_THREE.0).abs() < 1e-6, "W = {}", r.w);
        assert!((r.p_value - REF_THREE.1).abs() < 1e-5, "p = {}", r.p_value);
    }

    // (W, p) frozen from scipy 1.15 `scipy.stats.shapiro`.
    const REF_SKEWED: (f64, f64) = (0.9262574271854623, 0.03909289211814954);
    const REF_SMALL: (f64, f64) = (0.9633478972581907, 0.8413204658052752);
    const REF_THREE: (f64, f64) = (0.9642857142857142, 0.6368868450289689);

    #[test]
    fn domain_errors() {
        assert!(shapiro_wilk(&[1.0, 2.0]).is_err());
        assert!(shapiro_wilk(&vec![1.0; 5001]).is_err());
        assert!(shapiro_wilk(&[4.0; 20]).is_err());
        assert!(shapiro_wilk(&[1.0, f64::NAN, 2.0]).is_err());
    }

    #[test]
    fn exponential_sample_rejected() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        let xs: Vec<f64> = (0..250).map(|_| Exp1.sample(&mut rng)).collect();
        let r = shapiro_wilk(&xs).unwrap();
        assert!(r.p_value < 1e-3, "p = {}", r.p_value);
    }

    #[test]
    fn null_rejection_rate() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2027);
        let repeats = 1000;
        let rejected = (0..repeats)
            .filter(|_| {
                let xs: Vec<f64> = (0..250).map(|_| StandardNormal.sample(&mut rng)).collect();
                shapiro_wilk(&xs).unwrap().p_value < 0.05
            })
            .count();
        let rate = rejected as f64 / repeats as f64;
        assert!((0.03..=0.07).contains(&rate), "rate {rate}");
    }
}
