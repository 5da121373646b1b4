use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::engine::{simulate_site, EngineParams, Status, Trajectory};
use crate::error::{Error, Result};
use crate::extrapolate::fit_growth_adaptive;
use crate::medium::{sample_medium, MediumRealization};
use crate::rng::{derive_seeds, SEED_SCHEME, SEED_SCHEME_VERSION};
use crate::stats::{
    grid_path, intermittency_ratio, lyapunov_ratio_estimate, pointwise_lyapunov_ratio,
    quenched_moment, shapiro_wilk, AnnealedSummary, MomentCurve,
};

use super::config::ExperimentConfig;
use super::fmt_g;
use super::report::render_report;

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Trajectory outcomes over a run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct RunCounts {
    pub trajectories: u64,
    pub extinct: u64,
    pub reached_horizon: u64,
    pub capped: u64,
    /// Excluded from every average.
    pub boundary_exit: u64,
    /// Walkers killed at the boundary under `kill_with_flag`.
    pub boundary_kills: u64,
    /// Capped runs whose fit failed; their count is held at the cap.
    pub fit_failures: u64,
    pub events: u64,
}

impl RunCounts {
    pub(crate) fn add(&mut self, other: &RunCounts) {
        self.trajectories += other.trajectories;
        self.extinct += other.extinct;
        self.reached_horizon += other.reached_horizon;
        self.capped += other.capped;
        self.boundary_exit += other.boundary_exit;
        self.boundary_kills += other.boundary_kills;
        self.fit_failures += other.fit_failures;
        self.events += other.events;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub config: ExperimentConfig,
    pub model: String,
    pub code_version: &'static str,
    pub seed_scheme_version: u32,
    pub seed_scheme: &'static str,
    /// `medium_seeds[k]` seeds medium `k`; replicate seeds follow the scheme.
    pub medium_seeds: Vec<u64>,
    pub counts: RunCounts,
    /// Boundary exits per medium, nonzero entries only: `(k, count)`.
    pub boundary_exits_by_medium: Vec<(usize, u64)>,
    pub wall_clock_seconds: f64,
    pub trajectories_per_second: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table2Row {
    pub model: String,
    pub t: f64,
    pub annealed_m1: f64,
    pub trimmed_m1: Option<f64>,
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormalityRow {
    pub t: f64,
    pub n: usize,
    pub w: Option<f64>,
    pub p_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutcome {
    pub summary: AnnealedSummary,
    pub manifest: RunManifest,
    pub table2: Table2Row,
    pub normality: Vec<NormalityRow>,
    /// Window-slope ratios `Λ̂_p / p`; `None` when some moment vanishes.
    pub lyapunov: Option<Vec<f64>>,
}

struct MediumResult {
    curves: Vec<MomentCurve>,
    counts: RunCounts,
}

/// `μ` on `grid` for one run, or `None` when the run left the window.
///
/// Capped runs are extended with their growth fit; when no fit is possible
/// the count is held at its last observed value.
pub(crate) fn run_path(
    traj: &Trajectory,
    grid: &[f64],
    fit_dt: f64,
    counts: &mut RunCounts,
) -> Option<Vec<f64>> {
    counts.trajectories += 1;
    counts.events += traj.events().len() as u64;
    counts.boundary_kills += u64::from(traj.boundary_kills());
    match traj.status() {
        Status::Extinct => counts.extinct += 1,
        Status::ReachedHorizon => counts.reached_horizon += 1,
        Status::Capped { .. } => counts.capped += 1,
        Status::BoundaryExit { .. } => {
            counts.boundary_exit += 1;
            return None;
        }
    }
    if let Status::Capped { t_stop } = traj.status() {
        match fit_growth_adaptive(traj, fit_dt) {
            Ok(fit) => return grid_path(traj, Some(&fit), grid).ok(),
            Err(_) => {
                counts.fit_failures += 1;
                let held = f64::from(traj.mu_at_unchecked(t_stop));
                return Some(
                    grid.iter()
                        .map(|&t| {
                            if t <= t_stop {
                                f64::from(traj.mu_at_unchecked(t))
                            } else {
                                held
                            }
                        })
                        .collect(),
                );
            }
        }
    }
    grid_path(traj, None, grid).ok()
}

fn run_medium(
    medium: &MediumRealization,
    params: &EngineParams,
    start_site: usize,
    master_seed: u64,
    k: usize,
    cfg: &ExperimentConfig,
    grid: &[f64],
) -> Result<MediumResult> {
    let results: Vec<(Option<Vec<f64>>, RunCounts)> = (0..cfg.m)
        .into_par_iter()
        .map(|i| {
            let (_, replicate_seed) = derive_seeds(master_seed, k as u64, i as u64);
            let traj = simulate_site(medium, params, start_site, replicate_seed);
            let mut counts = RunCounts::default();
            let path = run_path(&traj, grid, cfg.extrapolate.grid_dt, &mut counts);
            (path, counts)
        })
        .collect();
    let mut counts = RunCounts::default();
    let mut paths = Vec::with_capacity(results.len());
    for (path, c) in results {
        counts.add(&c);
        paths.extend(path);
    }
    if paths.is_empty() {
        return Err(Error::domain(format!(
            "every trajectory of medium {k} left the window; enlarge lattice.side"
        )));
    }
    let curves = (1..=cfg.report.max_order)
        .map(|n| quenched_moment(&paths, n, grid, Some(k)))
        .collect::<Result<Vec<_>>>()?;
    Ok(MediumResult { curves, counts })
}

/// Runs the full Monte Carlo protocol in memory.
///
/// Results do not depend on `workers`: every trajectory has its own seed and
/// reductions run in a fixed order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let started = Instant::now();
    let resolved = cfg.resolve()?;
    let params = cfg.engine_params();
    let grid = cfg.time_grid();
    let start_site = resolved.window.index(&resolved.start)?;
    let medium_seeds: Vec<u64> = (0..cfg.m1 as u64)
        .map(|k| derive_seeds(cfg.master_seed, k, 0).0)
        .collect();

    let pool = super::thread_pool(cfg.workers)?;
    let per_medium: Vec<Result<MediumResult>> = pool.install(|| {
        medium_seeds
            .par_iter()
            .enumerate()
            .map(|(k, &seed)| {
                let medium = sample_medium(&resolved.medium, seed, &resolved.window)?;
                run_medium(&medium, &params, start_site, cfg.master_seed, k, cfg, &grid)
            })
            .collect()
    });

    let orders = cfg.report.max_order as usize;
    let mut curves_by_order: Vec<Vec<MomentCurve>> = vec![Vec::with_capacity(cfg.m1); orders];
    let mut counts = RunCounts::default();
    let mut boundary_exits_by_medium = Vec::new();
    for (k, r) in per_medium.into_iter().enumerate() {
        let r = r?;
        counts.add(&r.counts);
        if r.counts.boundary_exit > 0 {
            boundary_exits_by_medium.push((k, r.counts.boundary_exit));
        }
        for (slot, curve) in curves_by_order.iter_mut().zip(r.curves) {
            slot.push(curve);
        }
    }
    let summary = AnnealedSummary::build(
        curves_by_order,
        cfg.report.max_power,
        cfg.report.trim_fraction,
        resolved.medium.is_random(),
    )?;

    let last = summary.time_grid.len() - 1;
    let first = summary.get(1, 1).expect("first moment always built");
    let table2 = Table2Row {
        model: resolved.label.clone(),
        t: summary.time_grid[last],
        annealed_m1: first.values[last],
        trimmed_m1: first.trimmed.as_ref().map(|v| v[last]),
        ratio: intermittency_ratio(&summary, summary.time_grid[last]).ok(),
    };
    let normality = cfg
        .snapshot_times
        .iter()
        .map(|&t| {
            let j = summary.grid_index(t)?;
            let values: Vec<f64> = summary.curves[0].iter().map(|c| c.values[j]).collect();
            let sw = shapiro_wilk(&values).ok();
            Ok(NormalityRow {
                t: summary.time_grid[j],
                n: values.len(),
                w: sw.map(|s| s.w),
                p_value: sw.map(|s| s.p_value),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let lyapunov = lyapunov_ratio_estimate(
        &summary,
        cfg.report.max_power,
        cfg.report.beta,
        cfg.report.lyapunov_window,
    )
    .ok();

    let elapsed = started.elapsed().as_secs_f64();
    let manifest = RunManifest {
        config: cfg.clone(),
        model: resolved.label,
        code_version: CODE_VERSION,
        seed_scheme_version: SEED_SCHEME_VERSION,
        seed_scheme: SEED_SCHEME,
        medium_seeds,
        counts,
        boundary_exits_by_medium,
        wall_clock_seconds: elapsed,
        trajectories_per_second: counts.trajectories as f64 / elapsed.max(1e-9),
    };
    Ok(ExperimentOutcome {
        summary,
        manifest,
        table2,
        normality,
        lyapunov,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_g).unwrap_or_default()
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::io::BufWriter<std::fs::File>>> {
    let file = std::io::BufWriter::new(std::fs::File::create(path)?);
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(file))
}

/// Writes every CSV, the manifest and the SVG plots into `dir`.
pub fn write_artifacts(outcome: &ExperimentOutcome, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let s = &outcome.summary;

    let mut w = csv_writer(&dir.join("moments.csv"))?;
    w.write_record(["medium", "order", "time", "value", "replicates"])?;
    for curves in &s.curves {
        for c in curves {
            let medium = c.medium_id.map(|k| k.to_string()).unwrap_or_default();
            for (j, &t) in c.time_grid.iter().enumerate() {
                w.write_record([
                    medium.clone(),
                    c.order.to_string(),
                    fmt_g(t),
                    fmt_g(c.values[j]),
                    c.replicates[j].to_string(),
                ])?;
            }
        }
    }
    w.flush()?;

    let mut w = csv_writer(&dir.join("annealed.csv"))?;
    w.write_record([
        "order",
        "power",
        "time",
        "value",
        "log_value",
        "trimmed",
        "log_trimmed",
    ])?;
    for m in &s.moments {
        for (j, &t) in s.time_grid.iter().enumerate() {
            w.write_record([
                m.order.to_string(),
                m.power.to_string(),
                fmt_g(t),
                fmt_g(m.values[j]),
                fmt_g(m.log_values[j]),
                opt(m.trimmed.as_ref().map(|v| v[j])),
                opt(m.log_trimmed.as_ref().map(|v| v[j])),
            ])?;
        }
    }
    w.flush()?;

    let max_power = s.max_power();
    let beta = outcome.manifest.config.report.beta;
    let mut w = csv_writer(&dir.join("diagnostics.csv"))?;
    let mut header = vec!["time".to_string(), "ratio".into(), "log10_gap".into()];
    header.extend((1..=max_power).map(|p| format!("lyapunov_p{p}")));
    w.write_record(&header)?;
    for (j, &t) in s.time_grid.iter().enumerate() {
        let mut row = vec![
            fmt_g(t),
            opt(intermittency_ratio(s, t).ok()),
            opt(crate::stats::intermittency::gap_at(s, j).ok()),
        ];
        row.extend((1..=max_power).map(|p| opt(pointwise_lyapunov_ratio(s, p, beta, j))));
        w.write_record(&row)?;
    }
    w.flush()?;

    let mut w = csv_writer(&dir.join("lyapunov.csv"))?;
    w.write_record(["power", "ratio"])?;
    if let Some(ratios) = &outcome.lyapunov {
        for (p, r) in ratios.iter().enumerate() {
            w.write_record([(p + 1).to_string(), fmt_g(*r)])?;
        }
    }
    w.flush()?;

    let mut w = csv_writer(&dir.join("normality.csv"))?;
    w.write_record(["time", "n", "w", "p_value"])?;
    for r in &outcome.normality {
        w.write_record([fmt_g(r.t), r.n.to_string(), opt(r.w), opt(r.p_value)])?;
    }
    w.flush()?;

    let mut w = csv_writer(&dir.join("table2.csv"))?;
    w.write_record(["model", "time", "annealed_m1", "trimmed_m1", "ratio"])?;
    let t2 = &outcome.table2;
    w.write_record([
        t2.model.clone(),
        fmt_g(t2.t),
        fmt_g(t2.annealed_m1),
        opt(t2.trimmed_m1),
        opt(t2.ratio),
    ])?;
    w.flush()?;

    let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join("manifest.json"))?);
    serde_json::to_writer_pretty(&mut f, &outcome.manifest)?;
    f.write_all(b"\n")?;
    f.flush()?;

    render_report(dir)
}
