//! Shared workloads for the criterion benches.

use brw_core::{
    registry, sample_medium, BoundaryPolicy, EngineParams, LatticeWindow, MediumRealization,
    OperatorSpec,
};

/// Medium `k = 0` of a registry model on the default side-100 window.
pub fn model_medium(model: u32, seed: u64) -> MediumRealization {
    let def = registry(model).expect("registry id");
    let window = LatticeWindow::new(def.dimension, 100, BoundaryPolicy::Error).expect("window");
    sample_medium(&def.medium, seed, &window).expect("medium")
}

pub fn desk_params() -> EngineParams {
    EngineParams::default()
}

/// Oracle operator for a registry model on a window of `side`.
pub fn model_operator(model: u32, seed: u64, side: usize) -> OperatorSpec {
    let medium = model_medium(model, seed);
    let window = LatticeWindow::new(medium.window().dimension(), side, BoundaryPolicy::Error)
        .expect("window");
    OperatorSpec::from_medium(&medium, window, 1.0).expect("operator")
}
