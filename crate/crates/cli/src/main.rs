//! `brw`: command-line front end for the branching random walk toolkit.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};

use brw_core::extrapolate::DEFAULT_GRID_DT;
use brw_core::runner::{oracle_comparison, render_report, write_artifacts, MODEL_IDS};
use brw_core::{
    derive_seeds, run_experiment, sample_medium, simulate, validate_regression, EngineParams,
    ExperimentConfig, ValidationReport,
};

#[derive(Parser)]
#[command(
    name = "brw",
    version,
    about = "Branching random walks in random media"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one trajectory and export its event list.
    Simulate(SimulateArgs),
    /// Run the Monte Carlo protocol and write every artifact.
    Run(RunArgs),
    /// Check the exponential extrapolation on a homogeneous medium.
    ValidateRegression(ValidateArgs),
    /// Compare the engine mean with the first-moment solver.
    Oracle(OracleArgs),
    /// Re-render the SVG plots of a run directory.
    Report(ReportArgs),
}

#[derive(Args, Clone)]
struct Common {
    /// Registry model id (1-10).
    #[arg(long)]
    model: Option<String>,
    /// JSON configuration file.
    #[arg(long, conflicts_with = "model")]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long)]
    workers: Option<usize>,
    /// Replicates per medium.
    #[arg(long)]
    m: Option<usize>,
    /// Number of media.
    #[arg(long)]
    m1: Option<usize>,
    /// Horizon; snapshot times beyond it are dropped.
    #[arg(long)]
    tmax: Option<f64>,
    /// Output directory (file for `simulate`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    /// Medium and replicate index `k,i` to reproduce.
    #[arg(long, default_value = "0,0")]
    replay: String,
    /// Also write the medium realization to this CSV.
    #[arg(long)]
    medium_out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long, default_value_t = 5000)]
    n: usize,
    #[arg(long, default_value_t = 2.0)]
    split: f64,
    #[arg(long, default_value_t = 1.0)]
    death: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long, default_value_t = 10.0)]
    tmax: f64,
    #[arg(long, default_value_t = DEFAULT_GRID_DT)]
    grid_dt: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct ReportArgs {
    /// Run directory holding the CSVs and manifest.
    #[arg(long)]
    out: PathBuf,
}

fn build_config(c: &Common, model: Option<u32>) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = match (&c.config, model) {
        (Some(path), _) => ExperimentConfig::from_path(path)?,
        (None, Some(id)) => ExperimentConfig::for_model(id),
        (None, None) => bail!(brw_core::Error::Config {
            path: "model".into(),
            message: "pass --model or --config".into(),
        }),
    };
    if let Some(s) = c.seed {
        cfg.master_seed = s;
    }
    if let Some(w) = c.workers {
        cfg.workers = w;
    }
    if let Some(m) = c.m {
        cfg.m = m;
    }
    if let Some(m1) = c.m1 {
        cfg.m1 = m1;
    }
    if let Some(t) = c.tmax {
        cfg.t_max = t;
        cfg.snapshot_times.retain(|&s| s <= t);
    }
    if let Some(out) = &c.out {
        cfg.output_dir = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn parse_model(s: &str) -> anyhow::Result<u32> {
    s.parse::<u32>()
        .ok()
        .filter(|id| MODEL_IDS.contains(id))
        .ok_or_else(|| {
            anyhow!(brw_core::Error::Config {
                path: "model".into(),
                message: format!("expected 1-10 or `all`, got `{s}`"),
            })
        })
}

fn single_model(c: &Common) -> anyhow::Result<Option<u32>> {
    c.model.as_deref().map(parse_model).transpose()
}

fn output(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn cmd_simulate(a: &SimulateArgs) -> anyhow::Result<()> {
    let cfg = build_config(&a.common, single_model(&a.common)?)?;
    let (k, i) = a
        .replay
        .split_once(',')
        .and_then(|(k, i)| Some((k.trim().parse::<u64>().ok()?, i.trim().parse::<u64>().ok()?)))
        .ok_or_else(|| {
            anyhow!(brw_core::Error::Config {
                path: "replay".into(),
                message: format!("expected `k,i`, got `{}`", a.replay),
            })
        })?;
    let resolved = cfg.resolve()?;
    let (medium_seed, _) = derive_seeds(cfg.master_seed, k, 0);
    let (_, replicate_seed) = derive_seeds(cfg.master_seed, k, i);
    let medium = sample_medium(&resolved.medium, medium_seed, &resolved.window)?;
    let traj = simulate(
        &medium,
        &cfg.engine_params(),
        &resolved.start,
        replicate_seed,
    )?;
    if let Some(p) = &a.medium_out {
        medium.write_csv(BufWriter::new(File::create(p)?))?;
    }
    traj.write_csv(&resolved.window, output(a.common.out.as_deref())?)?;
    let summary = serde_json::json!({
        "medium_index": k,
        "replicate_index": i,
        "medium_seed": medium_seed,
        "replicate_seed": replicate_seed,
        "status": traj.status(),
        "t_100": traj.t_100(),
        "events": traj.events().len(),
        "max_mu": traj.max_mu(),
    });
    eprintln!("{summary}");
    Ok(())
}

fn run_one(cfg: &ExperimentConfig) -> anyhow::Result<()> {
    let outcome = run_experiment(cfg)?;
    write_artifacts(&outcome, &cfg.output_dir)?;
    let t2 = &outcome.table2;
    println!(
        "{}",
        serde_json::json!({
            "model": t2.model,
            "annealed_m1": t2.annealed_m1,
            "trimmed_m1": t2.trimmed_m1,
            "ratio": t2.ratio,
            "counts": outcome.manifest.counts,
            "seconds": outcome.manifest.wall_clock_seconds,
            "output_dir": cfg.output_dir,
        })
    );
    Ok(())
}

fn cmd_run(a: &RunArgs) -> anyhow::Result<()> {
    if a.common.model.as_deref() == Some("all") {
        let base = a.common.out.clone().unwrap_or_else(|| PathBuf::from("out"));
        for id in MODEL_IDS {
            let mut cfg = build_config(&a.common, Some(id))?;
            cfg.output_dir = base.join(format!("model_{id}"));
            run_one(&cfg)?;
        }
        return Ok(());
    }
    let cfg = build_config(&a.common, single_model(&a.common)?)?;
    run_one(&cfg)
}

fn cmd_validate(a: &ValidateArgs) -> anyhow::Result<()> {
    let params = EngineParams {
        t_max: a.tmax,
        ..EngineParams::default()
    };
    let pool = rayon_pool(a.workers)?;
    let report =
        pool.install(|| validate_regression(a.split, a.death, a.n, &params, a.seed, a.grid_dt))?;
    let mut w = output(a.out.as_deref())?;
    writeln!(w, "{}", ValidationReport::CSV_HEADER)?;
    writeln!(w, "{}", report.csv_row())?;
    w.flush()?;
    Ok(())
}

fn rayon_pool(workers: usize) -> anyhow::Result<brw_core::runner::ThreadPool> {
    brw_core::runner::thread_pool(workers).map_err(Into::into)
}

fn cmd_oracle(a: &OracleArgs) -> anyhow::Result<()> {
    let cfg = build_config(&a.common, single_model(&a.common)?)?;
    let mut cfg = cfg;
    if let Some(m) = a.common.m {
        cfg.oracle.replicates = m;
    }
    if let Some(m1) = a.common.m1 {
        cfg.oracle.media = m1;
    }
    let cmp = oracle_comparison(&cfg)?;
    let path = a.common.out.clone().map(|o| {
        if o.extension().is_some() {
            o
        } else {
            o.join("oracle.csv")
        }
    });
    if let Some(p) = &path {
        if let Some(dir) = p.parent() {
            std::fs::create_dir_all(dir)?;
        }
    }
    let mut w = output(path.as_deref())?;
    cmp.write_csv(&mut w)?;
    w.flush()?;
    eprintln!(
        "{}",
        serde_json::json!({ "max_abs_z": cmp.max_abs_z, "counts": cmp.counts, "oracle_dt": cmp.oracle_dt })
    );
    Ok(())
}

fn error_line(err: &anyhow::Error) -> serde_json::Value {
    let (kind, path) = match err.downcast_ref::<brw_core::Error>() {
        Some(brw_core::Error::Config { path, .. }) => ("config", Some(path.clone())),
        Some(e) => (e.kind(), None),
        None => ("io", None),
    };
    serde_json::json!({ "error": kind, "path": path, "message": format!("{err:#}") })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e)
            if matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            ) =>
        {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!(
                "{}",
                serde_json::json!({ "error": "usage", "path": null, "message": e.to_string().trim() })
            );
            return ExitCode::from(2);
        }
    };
    let result = match &cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Run(a) => cmd_run(a),
        Command::ValidateRegression(a) => cmd_validate(a),
        Command::Oracle(a) => cmd_oracle(a),
        Command::Report(a) => render_report(&a.out).map_err(Into::into),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", error_line(&e));
            let usage = matches!(
                e.downcast_ref::<brw_core::Error>(),
                Some(brw_core::Error::Config { .. })
            );
            ExitCode::from(if usage { 2 } else { 1 })
        }
    }
}
