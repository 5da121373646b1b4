//! Continuous-time branching random walks on finite windows of `Z^d`.
//!
//! The crate is organised bottom-up:
//!
//! - [`lattice`]: the cubic window, point indexing and nearest-neighbour moves.
//! - [`medium`]: branching sources, intensity laws and sampled realizations.
//! - [`engine`]: the event-driven particle simulator producing [`Trajectory`] values.
//! - [`extrapolate`]: exponential regression used to continue capped trajectories.
//! - [`stats`]: quenched / annealed moment estimators, trimming, intermittency
//!   diagnostics and the Shapiro-Wilk test.
//! - [`oracle`]: RK4 integration of the first-moment equation, used to cross-check
//!   the engine.
//! - [`runner`]: model registry, seeding, parallel experiment execution and reports.

pub mod engine;
pub mod error;
pub mod extrapolate;
pub mod lattice;
pub mod medium;
pub mod oracle;
pub mod rng;
pub mod runner;
pub mod stats;

pub use engine::{simulate, EngineParams, Event, EventKind, HoldingTimeMode, Status, Trajectory};
pub use error::{Error, Result};
pub use extrapolate::{
    extrapolated_mu, fit_growth, validate_regression, RegressionFit, ValidationReport,
};
pub use lattice::{BoundaryPolicy, LatticePoint, LatticeWindow};
pub use medium::{
    sample_medium, weibull_inverse_cdf, IntensityLaw, MediumRealization, MediumSpec,
    SourceConfiguration,
};
pub use oracle::{apply_generator, solve_m1, InitialCondition, M1Solution, OperatorSpec};
pub use runner::{
    derive_seeds, registry, run_experiment, ExperimentConfig, ExperimentOutcome, ModelDef,
    RunManifest,
};
pub use stats::{AnnealedMoment, AnnealedSummary, MomentCurve, ShapiroWilk};
