use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::engine::{simulate_site, EngineParams};
use crate::error::{Error, Result};
use crate::lattice::LatticeWindow;
use crate::medium::sample_medium;
use crate::oracle::{solve_m1, InitialCondition, OperatorSpec};
use crate::rng::derive_seeds;

use super::config::ExperimentConfig;
use super::experiment::{run_path, RunCounts};
use super::fmt_g;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleRow {
    pub medium: usize,
    pub time: f64,
    pub engine_mean: f64,
    /// Standard error of the engine mean, `sd / sqrt(M)`.
    pub engine_se: f64,
    pub oracle: f64,
    /// `|engine_mean - oracle| / engine_se`.
    pub abs_z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleComparison {
    pub rows: Vec<OracleRow>,
    pub max_abs_z: f64,
    pub counts: RunCounts,
    pub oracle_window_side: usize,
    pub oracle_dt: f64,
}

impl OracleComparison {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        w.write_record([
            "medium",
            "time",
            "engine_mean",
            "engine_se",
            "oracle",
            "abs_z",
            "max_abs_z",
        ])?;
        for r in &self.rows {
            w.write_record([
                r.medium.to_string(),
                fmt_g(r.time),
                fmt_g(r.engine_mean),
                fmt_g(r.engine_se),
                fmt_g(r.oracle),
                fmt_g(r.abs_z),
                fmt_g(self.max_abs_z),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Engine mean of `μ(t)` against the first-moment solver on the first
/// `oracle.media` media of the ensemble (one medium when it is not random).
///
/// Runs use `oracle.particle_cap`; a run capped before `t` contributes its
/// fitted exponential, and runs leaving the window are dropped and counted.
pub fn oracle_comparison(cfg: &ExperimentConfig) -> Result<OracleComparison> {
    cfg.validate()?;
    let resolved = cfg.resolve()?;
    let o = &cfg.oracle;
    let mut times = o.times.clone();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let horizon = times.last().copied().unwrap_or(0.0).max(f64::MIN_POSITIVE);
    let params = EngineParams {
        t_max: horizon,
        particle_cap: o.particle_cap,
        ..cfg.engine_params()
    };
    let side = cfg.oracle_window_side(resolved.window.dimension());
    let oracle_window = LatticeWindow::new(
        resolved.window.dimension(),
        side,
        resolved.window.boundary_policy(),
    )?;
    if !oracle_window.contains(&resolved.start) {
        return Err(Error::domain("start point lies outside the oracle window"));
    }
    let media = if resolved.medium.is_random() {
        o.media
    } else {
        1
    };
    let start_site = resolved.window.index(&resolved.start)?;
    let pool = super::thread_pool(cfg.workers)?;

    let mut rows = Vec::new();
    let mut counts = RunCounts::default();
    let mut used_dt = o.dt;
    for k in 0..media {
        let (medium_seed, _) = derive_seeds(cfg.master_seed, k as u64, 0);
        let medium = sample_medium(&resolved.medium, medium_seed, &resolved.window)?;
        let results: Vec<(Option<Vec<f64>>, RunCounts)> = pool.install(|| {
            (0..o.replicates)
                .into_par_iter()
                .map(|i| {
                    let (_, seed) = derive_seeds(cfg.master_seed, k as u64, i as u64);
                    let traj = simulate_site(&medium, &params, start_site, seed);
                    let mut c = RunCounts::default();
                    let path = run_path(&traj, &times, cfg.extrapolate.grid_dt, &mut c);
                    (path, c)
                })
                .collect()
        });
        let mut paths = Vec::with_capacity(results.len());
        for (p, c) in results {
            counts.add(&c);
            paths.extend(p);
        }
        if paths.len() < 2 {
            return Err(Error::domain(format!(
                "medium {k}: fewer than two usable trajectories"
            )));
        }

        let op = OperatorSpec::from_medium(&medium, oracle_window.clone(), cfg.engine.kappa)?;
        let dt = o.dt.min(0.5 * op.step_bound());
        used_dt = used_dt.min(dt);
        let sol = solve_m1(
            &op,
            &InitialCondition::TotalCount,
            &resolved.start,
            &times,
            dt,
        )?;

        let n = paths.len() as f64;
        for (j, &t) in times.iter().enumerate() {
            let mean = paths.iter().map(|p| p[j]).sum::<f64>() / n;
            let var = paths.iter().map(|p| (p[j] - mean).powi(2)).sum::<f64>() / (n - 1.0);
            let se = (var / n).sqrt();
            let oracle = sol.at_start[j];
            let diff = (mean - oracle).abs();
            let abs_z = if se > 0.0 {
                diff / se
            } else if diff <= 1e-12 * oracle.abs().max(1.0) {
                0.0
            } else {
                f64::INFINITY
            };
            rows.push(OracleRow {
                medium: k,
                time: t,
                engine_mean: mean,
                engine_se: se,
                oracle,
                abs_z,
            });
        }
    }
    let max_abs_z = rows.iter().map(|r| r.abs_z).fold(0.0, f64::max);
    Ok(OracleComparison {
        rows,
        max_abs_z,
        counts,
        oracle_window_side: side,
        oracle_dt: used_dt,
    })
}
