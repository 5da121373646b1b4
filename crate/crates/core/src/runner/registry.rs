use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::LatticePoint;
use crate::medium::{IntensityLaw, MediumSpec, SourceConfiguration};

pub const MODEL_IDS: std::ops::RangeInclusive<u32> = 1..=10;

/// One of the ten reference models.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelDef {
    pub id: u32,
    pub description: &'static str,
    pub dimension: usize,
    pub medium: MediumSpec,
}

impl ModelDef {
    pub fn is_random(&self) -> bool {
        self.medium.is_random()
    }
}

fn simplex(scale: i64) -> SourceConfiguration {
    SourceConfiguration::PointSet(vec![
        LatticePoint::new([scale, 0, 0]),
        LatticePoint::new([0, scale, 0]),
        LatticePoint::new([0, 0, scale]),
    ])
}

pub fn registry(model_id: u32) -> Result<ModelDef> {
    let constant = |plus, minus| (IntensityLaw::constant(plus), IntensityLaw::constant(minus));
    let weibull = (
        IntensityLaw::weibull(2.0, 2.26),
        IntensityLaw::weibull(2.0, 1.13),
    );
    let origin = SourceConfiguration::SinglePoint(LatticePoint::origin(1));
    let every = SourceConfiguration::EveryPoint;
    let (description, dimension, sources, (split, death)) = match model_id {
        1 => (
            "non-random, supercritical, non-homogeneous",
            1,
            origin,
            constant(2.0, 1.0),
        ),
        2 => ("random, supercritical, non-homogeneous", 1, origin, weibull),
        3 => (
            "non-random, supercritical, homogeneous",
            1,
            every,
            constant(2.0, 1.0),
        ),
        4 => ("random, supercritical, homogeneous", 1, every, weibull),
        5 => (
            "non-random, critical, homogeneous",
            1,
            every,
            constant(1.0, 1.0),
        ),
        6 => (
            "random, critical, homogeneous",
            1,
            every,
            (
                IntensityLaw::weibull(2.0, 1.13),
                IntensityLaw::weibull(2.0, 1.13),
            ),
        ),
        7 => (
            "non-random, supercritical, simplex of side sqrt(2)",
            3,
            simplex(1),
            constant(2.0, 1.0),
        ),
        8 => (
            "non-random, supercritical, simplex of side 2*sqrt(2)",
            3,
            simplex(2),
            constant(2.0, 1.0),
        ),
        9 => (
            "random, supercritical, simplex of side sqrt(2)",
            3,
            simplex(1),
            weibull,
        ),
        10 => (
            "random, supercritical, simplex of side 2*sqrt(2)",
            3,
            simplex(2),
            weibull,
        ),
        other => return Err(Error::UnknownModel(other)),
    };
    Ok(ModelDef {
        id: model_id,
        description,
        dimension,
        medium: MediumSpec::new(sources, split, death),
    })
}
