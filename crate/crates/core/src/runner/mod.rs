//! Experiment orchestration: model registry, configuration, parallel runs
//! and report artifacts.

mod config;
mod experiment;
mod oracle_check;
mod registry;
mod report;
mod svg;

pub use crate::rng::derive_seeds;
pub use config::{
    EngineSection, ExperimentConfig, ExtrapolateSection, LatticeSection, OracleSection,
    ReportSection, ResolvedModel,
};
pub use experiment::{
    run_experiment, write_artifacts, ExperimentOutcome, NormalityRow, RunCounts, RunManifest,
    Table2Row, CODE_VERSION,
};
pub use oracle_check::{oracle_comparison, OracleComparison, OracleRow};
pub use registry::{registry, ModelDef, MODEL_IDS};
pub use report::render_report;

pub use rayon::ThreadPool;

/// Worker pool with exactly `workers` threads.
pub fn thread_pool(workers: usize) -> crate::Result<ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| crate::Error::domain(format!("cannot start worker pool: {e}")))
}

/// Formats like C's `%.12g`.
pub fn fmt_g(v: f64) -> String {
    const PREC: i32 = 12;
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return if v.is_sign_negative() {
            "-0".into()
        } else {
            "0".into()
        };
    }
    let sci = format!("{:.*e}", (PREC - 1) as usize, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..PREC).contains(&exp) {
        let mantissa = strip_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (PREC - 1 - exp).max(0) as usize;
        strip_zeros(&format!("{v:.decimals$}")).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}
