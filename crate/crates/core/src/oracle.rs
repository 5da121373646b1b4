//! Deterministic first-moment solver on a finite window.
//!
//! Integrates `∂_t m = 𝒜m + V·m` with classical fourth-order Runge-Kutta,
//! where `(𝒜f)(x) = κ·[(1/2d)·Σ_{y~x} f(y) - f(x)]` and neighbours outside
//! the window contribute zero (Dirichlet boundary). The engine and the
//! solver agree only while the mass near the boundary is negligible.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{LatticePoint, LatticeWindow};
use crate::medium::MediumRealization;

/// Largest window the dense solver accepts.
pub const MAX_ORACLE_SITES: usize = 100_000;

/// Generator data: window, walk intensity and a dense potential.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorSpec {
    window: LatticeWindow,
    kappa: f64,
    potential: Vec<f64>,
    neighbors: Vec<usize>,
}

const OUTSIDE: usize = usize::MAX;

impl OperatorSpec {
    pub fn new(window: LatticeWindow, kappa: f64, potential: Vec<f64>) -> Result<Self> {
        if !(kappa.is_finite() && kappa > 0.0) {
            return Err(Error::InvalidParameter {
                name: "kappa",
                reason: format!("must be finite and positive, got {kappa}"),
            });
        }
        if window.len() > MAX_ORACLE_SITES {
            return Err(Error::InvalidParameter {
                name: "oracle.window_side",
                reason: format!(
                    "{} sites exceed the oracle limit of {MAX_ORACLE_SITES}",
                    window.len()
                ),
            });
        }
        if potential.len() != window.len() {
            return Err(Error::domain(format!(
                "potential has {} values, window has {} sites",
                potential.len(),
                window.len()
            )));
        }
        if let Some(v) = potential.iter().find(|v| !v.is_finite()) {
            return Err(Error::domain(format!("potential value {v} is not finite")));
        }
        let degree = window.degree();
        let neighbors = (0..window.len())
            .flat_map(|i| {
                let w = &window;
                (0..degree).map(move |dir| w.neighbor_index(i, dir).unwrap_or(OUTSIDE))
            })
            .collect();
        Ok(OperatorSpec {
            window,
            kappa,
            potential,
            neighbors,
        })
    }

    /// Potential of `medium` restricted to `window`.
    ///
    /// `window` may be smaller than the medium's own window; draws are keyed by
    /// lattice point, so the restriction sees the same intensities.
    pub fn from_medium(
        medium: &MediumRealization,
        window: LatticeWindow,
        kappa: f64,
    ) -> Result<Self> {
        if window.dimension() != medium.window().dimension() {
            return Err(Error::domain(
                "oracle window and medium differ in dimension",
            ));
        }
        let potential = (0..window.len())
            .map(|i| window.unindex(i).map(|p| medium.potential(&p)))
            .collect::<Result<Vec<_>>>()?;
        OperatorSpec::new(window, kappa, potential)
    }

    pub fn window(&self) -> &LatticeWindow {
        &self.window
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    pub fn max_abs_potential(&self) -> f64 {
        self.potential.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest step the stability guard admits (exclusive).
    pub fn step_bound(&self) -> f64 {
        1.0 / (2.0 * (self.kappa + self.max_abs_potential()))
    }

    /// `𝒜f` written into `out`.
    pub fn apply_generator_into(&self, f: &[f64], out: &mut [f64]) {
        let degree = self.window.degree();
        let w = self.kappa / degree as f64;
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.neighbors[i * degree..(i + 1) * degree];
            let sum: f64 = row.iter().filter(|&&j| j != OUTSIDE).map(|&j| f[j]).sum();
            *o = w * sum - self.kappa * f[i];
        }
    }

    /// `(𝒜 + V)f` written into `out`.
    fn rhs_into(&self, f: &[f64], out: &mut [f64]) {
        self.apply_generator_into(f, out);
        for ((o, v), x) in out.iter_mut().zip(&self.potential).zip(f) {
            *o += v * x;
        }
    }
}

/// `𝒜f` with Dirichlet-zero boundary.
pub fn apply_generator(spec: &OperatorSpec, f: &[f64]) -> Result<Vec<f64>> {
    if f.len() != spec.window.len() {
        return Err(Error::domain(format!(
            "field has {} values, window has {} sites",
            f.len(),
            spec.window.len()
        )));
    }
    let mut out = vec![0.0; f.len()];
    spec.apply_generator_into(f, &mut out);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum InitialCondition {
    /// `m(0, ·) ≡ 1`: expected total population from each start point.
    TotalCount,
    /// `m(0, ·) = δ_y`: expected occupation of `y`.
    LocalDelta(LatticePoint),
}

#[derive(Debug, Clone, PartialEq)]
pub struct M1Solution {
    pub times: Vec<f64>,
    /// Field at each output time, indexed like the window.
    pub fields: Vec<Vec<f64>>,
    pub start: LatticePoint,
    /// Field value at `start` for each output time.
    pub at_start: Vec<f64>,
    pub dt: f64,
}

impl M1Solution {
    /// Writes `time,m1` rows for the start point.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        w.write_record(["time", "m1"])?;
        for (t, v) in self.times.iter().zip(&self.at_start) {
            w.write_record([crate::runner::fmt_g(*t), crate::runner::fmt_g(*v)])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Integrates the first-moment equation and reports the field at each of
/// `output_times` (nondecreasing, nonnegative).
///
/// Steps of size `dt` are shortened where needed to land on output times.
pub fn solve_m1(
    spec: &OperatorSpec,
    initial: &InitialCondition,
    start: &LatticePoint,
    output_times: &[f64],
    dt: f64,
) -> Result<M1Solution> {
    let bound = spec.step_bound();
    if !(dt > 0.0 && dt < bound) {
        return Err(Error::StepSize {
            dt,
            suggested: 0.5 * bound,
        });
    }
    if output_times.iter().any(|t| !(t.is_finite() && *t >= 0.0))
        || output_times.windows(2).any(|w| w[1] < w[0])
    {
        return Err(Error::domain(
            "output times must be finite, nonnegative and nondecreasing",
        ));
    }
    let window = &spec.window;
    let start_site = window.index(start)?;
    let n = window.len();
    let mut f = match initial {
        InitialCondition::TotalCount => vec![1.0; n],
        InitialCondition::LocalDelta(y) => {
            let mut f = vec![0.0; n];
            f[window.index(y)?] = 1.0;
            f
        }
    };

    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    let mut t = 0.0;
    let mut fields = Vec::with_capacity(output_times.len());
    for &target in output_times {
        while target - t > 1e-12 * target.max(1.0) {
            let h = dt.min(target - t);
            spec.rhs_into(&f, &mut k1);
            axpy(&f, &k1, 0.5 * h, &mut tmp);
            spec.rhs_into(&tmp, &mut k2);
            axpy(&f, &k2, 0.5 * h, &mut tmp);
            spec.rhs_into(&tmp, &mut k3);
            axpy(&f, &k3, h, &mut tmp);
            spec.rhs_into(&tmp, &mut k4);
            for i in 0..n {
                f[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            t += h;
        }
        t = target;
        fields.push(f.clone());
    }
    let at_start = fields.iter().map(|f| f[start_site]).collect();
    Ok(M1Solution {
        times: output_times.to_vec(),
        fields,
        start: start.clone(),
        at_start,
        dt,
    })
}

#[inline]
fn axpy(x: &[f64], y: &[f64], a: f64, out: &mut [f64]) {
    for ((o, xi), yi) in out.iter_mut().zip(x).zip(y) {
        *o = xi + a * yi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::BoundaryPolicy;

    fn window(d: usize, side: usize) -> LatticeWindow {
        LatticeWindow::new(d, side, BoundaryPolicy::Error).unwrap()
    }

    fn single_source(side: usize, v: f64) -> OperatorSpec {
        let w = window(1, side);
        let mut pot = vec![0.0; w.len()];
        pot[w.origin_index()] = v;
        OperatorSpec::new(w, 1.0, pot).unwrap()
    }

    #[test]
    fn generator_annihilates_constants_in_interior() {
        let spec = OperatorSpec::new(window(2, 7), 1.0, vec![0.0; 49]).unwrap();
        let out = apply_generator(&spec, &[3.0; 49]).unwrap();
        for (i, &v) in out.iter().enumerate() {
            let p = spec.window().unindex(i).unwrap();
            let interior = p.coords().iter().all(|c| c.abs() < 3);
            if interior {
                assert!(v.abs() < 1e-15);
            } else {
                assert!(v < 0.0, "boundary leaks mass");
            }
        }
    }

    #[test]
    fn generator_on_delta() {
        let spec = single_source(9, 0.0);
        let w = spec.window();
        let o = w.origin_index();
        let mut f = vec![0.0; w.len()];
        f[o] = 1.0;
        let g = apply_generator(&spec, &f).unwrap();
        assert_eq!(g[o], -1.0);
        assert_eq!(g[o - 1], 0.5);
        assert_eq!(g[o + 1], 0.5);
        assert_eq!(g.iter().filter(|v| **v != 0.0).count(), 3);
    }

    #[test]
    fn generator_is_symmetric() {
        let spec = OperatorSpec::new(window(2, 6), 1.7, vec![0.0; 36]).unwrap();
        let f: Vec<f64> = (0..36).map(|i| ((i * 7) % 11) as f64 - 5.0).collect();
        let g: Vec<f64> = (0..36).map(|i| ((i * 3) % 5) as f64 * 0.3).collect();
        let af = apply_generator(&spec, &f).unwrap();
        let ag = apply_generator(&spec, &g).unwrap();
        let lhs: f64 = f.iter().zip(&ag).map(|(a, b)| a * b).sum();
        let rhs: f64 = af.iter().zip(&g).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn constant_potential_grows_exponentially() {
        // Periodic-free check: a constant potential on a wide window with
        // TotalCount; the start point is far from the boundary.
        let w = window(1, 201);
        let spec = OperatorSpec::new(w.clone(), 1.0, vec![1.0; w.len()]).unwrap();
        let sol = solve_m1(
            &spec,
            &InitialCondition::TotalCount,
            &LatticePoint::origin(1),
            &[10.0],
            1e-3,
        )
        .unwrap();
        let exact = 10f64.exp();
        assert!(
            (sol.at_start[0] / exact - 1.0).abs() < 1e-8,
            "{}",
            sol.at_start[0]
        );
    }

    #[test]
    fn critical_potential_stays_one() {
        let w = window(1, 201);
        let spec = OperatorSpec::new(w.clone(), 1.0, vec![0.0; w.len()]).unwrap();
        let sol = solve_m1(
            &spec,
            &InitialCondition::TotalCount,
            &LatticePoint::origin(1),
            &[5.0, 10.0],
            0.01,
        )
        .unwrap();
        for v in &sol.at_start {
            assert!((v - 1.0).abs() < 1e-10, "{v}");
        }
    }

    #[test]
    fn step_size_guard() {
        let spec = single_source(21, 1.0);
        // bound = 1/(2·(1+1)) = 0.25
        assert!((spec.step_bound() - 0.25).abs() < 1e-15);
        let err = solve_m1(
            &spec,
            &InitialCondition::TotalCount,
            &LatticePoint::origin(1),
            &[1.0],
            0.25,
        )
        .unwrap_err();
        match err {
            Error::StepSize { suggested, .. } => assert!(suggested < 0.25),
            e => panic!("unexpected {e:?}"),
        }
        assert!(solve_m1(
            &spec,
            &InitialCondition::TotalCount,
            &LatticePoint::origin(1),
            &[1.0],
            0.2
        )
        .is_ok());
    }

    #[test]
    fn halving_step_converges() {
        let spec = single_source(41, 1.0);
        let o = LatticePoint::origin(1);
        let a = solve_m1(&spec, &InitialCondition::TotalCount, &o, &[5.0], 0.02)
            .unwrap()
            .at_start[0];
        let b = solve_m1(&spec, &InitialCondition::TotalCount, &o, &[5.0], 0.01)
            .unwrap()
            .at_start[0];
        assert!(((a - b) / b).abs() < 1e-6, "{a} vs {b}");
    }

    #[test]
    fn positivity_of_delta_solution() {
        let spec = single_source(21, 1.0);
        let y = LatticePoint::new([3]);
        let sol = solve_m1(
            &spec,
            &InitialCondition::LocalDelta(y),
            &LatticePoint::origin(1),
            &[0.5, 1.0, 3.0],
            0.01,
        )
        .unwrap();
        for f in &sol.fields {
            assert!(f.iter().all(|v| *v > -1e-9));
        }
        assert!(sol.at_start[2] > 0.0);
    }

    #[test]
    fn single_source_first_moment() {
        // One (2, 1) source at the origin in d = 1: the point spectrum of
        // Δ/2 + δ_0 has top eigenvalue sqrt(2) - 1, so m₁ grows like e^{0.414 t}.
        let spec = single_source(101, 1.0);
        let o = LatticePoint::origin(1);
        let sol = solve_m1(
            &spec,
            &InitialCondition::TotalCount,
            &o,
            &[10.0, 20.0],
            1e-2,
        )
        .unwrap();
        assert!(
            (sol.at_start[0] - ORACLE_MODEL1_T10).abs() < 1e-6 * ORACLE_MODEL1_T10,
            "{}",
            sol.at_start[0]
        );
        let rate = (sol.at_start[1] / sol.at_start[0]).ln() / 10.0;
        assert!((rate - (2f64.sqrt() - 1.0)).abs() < 5e-3, "rate {rate}");
    }

    /// m₁(10, 0) for the single (2, 1) source, frozen from an independent
    /// dense matrix-exponential computation on the same 101-point window.
    pub(crate) const ORACLE_MODEL1_T10: f64 = 107.20962298451377;

    #[test]
    fn csv_export() {
        let spec = single_source(11, 0.0);
        let sol = solve_m1(
            &spec,
            &InitialCondition::TotalCount,
            &LatticePoint::origin(1),
            &[0.0, 1.0],
            0.1,
        )
        .unwrap();
        let mut buf = Vec::new();
        sol.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next(), Some("time,m1"));
        assert_eq!(text.lines().nth(1), Some("0,1"));
    }

    #[test]
    fn restriction_of_medium_uses_same_draws() {
        use crate::medium::{sample_medium, IntensityLaw, MediumSpec, SourceConfiguration};
        let big = window(1, 100);
        let spec = MediumSpec::new(
            SourceConfiguration::EveryPoint,
            IntensityLaw::weibull(2.0, 2.26),
            IntensityLaw::weibull(2.0, 1.13),
        );
        let m = sample_medium(&spec, 7, &big).unwrap();
        let op = OperatorSpec::from_medium(&m, window(1, 41), 1.0).unwrap();
        for (i, v) in op.potential().iter().enumerate() {
            let p = op.window().unindex(i).unwrap();
            assert_eq!(*v, m.potential_at(big.index(&p).unwrap()));
        }
    }
}
