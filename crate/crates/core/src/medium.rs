//! Branching media: where the sources are and what intensities they carry.
//!
//! Weibull laws use the (shape `k`, scale `λ`) parameterisation with CDF
//! `1 - exp(-(x/λ)^k)`, so `Weib(2, 2.26)` has mean `2.26·Γ(1.5) ≈ 2.003`.
//!
//! Draws are counter-based: the intensity pair at a point is a pure function
//! of `(medium_seed, point)`, independent of the window and of visit order.
//! Media with a source at every site are therefore never materialised; the
//! pair is recomputed on each lookup.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{LatticePoint, LatticeWindow};
use crate::rng::{keyed_uniform, point_key};

const SPLIT_STREAM: u64 = 1;
const DEATH_STREAM: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IntensityLaw {
    Constant { value: f64 },
    Weibull { shape: f64, scale: f64 },
}

impl IntensityLaw {
    pub fn constant(value: f64) -> Self {
        IntensityLaw::Constant { value }
    }

    pub fn weibull(shape: f64, scale: f64) -> Self {
        IntensityLaw::Weibull { shape, scale }
    }

    pub fn validate(&self, name: &'static str) -> Result<()> {
        let bad = |reason: String| Err(Error::InvalidParameter { name, reason });
        match *self {
            IntensityLaw::Constant { value } if !(value.is_finite() && value >= 0.0) => bad(
                format!("constant intensity must be finite and >= 0, got {value}"),
            ),
            IntensityLaw::Weibull { shape, scale }
                if !(shape.is_finite() && shape > 0.0 && scale.is_finite() && scale > 0.0) =>
            {
                bad(format!(
                    "weibull shape and scale must be positive, got ({shape}, {scale})"
                ))
            }
            _ => Ok(()),
        }
    }

    pub fn is_random(&self) -> bool {
        matches!(self, IntensityLaw::Weibull { .. })
    }

    /// Law value at quantile `u` in `(0, 1)`.
    #[inline]
    pub fn quantile(&self, u: f64) -> f64 {
        match *self {
            IntensityLaw::Constant { value } => value,
            IntensityLaw::Weibull { shape, scale } => weibull_quantile(u, shape, scale),
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            IntensityLaw::Constant { value } => value,
            IntensityLaw::Weibull { shape, scale } => {
                scale * statrs::function::gamma::gamma(1.0 + 1.0 / shape)
            }
        }
    }
}

#[inline]
fn weibull_quantile(u: f64, shape: f64, scale: f64) -> f64 {
    scale * (-(-u).ln_1p()).powf(1.0 / shape)
}

/// Weibull inverse CDF `λ·(-ln(1 - u))^{1/k}`.
pub fn weibull_inverse_cdf(u: f64, shape: f64, scale: f64) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::domain(format!("quantile level {u} outside (0, 1)")));
    }
    IntensityLaw::weibull(shape, scale).validate("weibull")?;
    Ok(weibull_quantile(u, shape, scale))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceConfiguration {
    SinglePoint(LatticePoint),
    EveryPoint,
    PointSet(Vec<LatticePoint>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MediumSpec {
    pub sources: SourceConfiguration,
    pub split_law: IntensityLaw,
    pub death_law: IntensityLaw,
}

impl MediumSpec {
    pub fn new(
        sources: SourceConfiguration,
        split_law: IntensityLaw,
        death_law: IntensityLaw,
    ) -> Self {
        MediumSpec {
            sources,
            split_law,
            death_law,
        }
    }

    /// A medium with no branching anywhere: particles only walk.
    pub fn empty() -> Self {
        MediumSpec::new(
            SourceConfiguration::PointSet(Vec::new()),
            IntensityLaw::constant(0.0),
            IntensityLaw::constant(0.0),
        )
    }

    pub fn is_random(&self) -> bool {
        self.split_law.is_random() || self.death_law.is_random()
    }

    pub fn validate(&self, window: &LatticeWindow) -> Result<()> {
        self.split_law.validate("medium.split_law")?;
        self.death_law.validate("medium.death_law")?;
        let points: &[LatticePoint] = match &self.sources {
            SourceConfiguration::SinglePoint(p) => std::slice::from_ref(p),
            SourceConfiguration::PointSet(ps) => ps,
            SourceConfiguration::EveryPoint => &[],
        };
        let mut seen = std::collections::BTreeSet::new();
        for p in points {
            if !window.contains(p) {
                return Err(Error::domain(format!("source {p} lies outside the window")));
            }
            if !seen.insert(p) {
                return Err(Error::domain(format!("duplicate source {p}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Table {
    /// Finite source set, keyed by site index.
    Sparse(BTreeMap<usize, (f64, f64)>),
    /// Every site is a source; pairs are drawn on lookup.
    Everywhere {
        split: IntensityLaw,
        death: IntensityLaw,
    },
}

/// A fixed assignment of splitting and death intensities to sites.
#[derive(Debug, Clone, PartialEq)]
pub struct MediumRealization {
    window: LatticeWindow,
    table: Table,
    seed: u64,
}

#[inline]
fn draw_pair(split: &IntensityLaw, death: &IntensityLaw, seed: u64, coords: &[i64]) -> (f64, f64) {
    let key = point_key(coords);
    let plus = match *split {
        IntensityLaw::Constant { value } => value,
        law => law.quantile(keyed_uniform(seed, key, SPLIT_STREAM)),
    };
    let minus = match *death {
        IntensityLaw::Constant { value } => value,
        law => law.quantile(keyed_uniform(seed, key, DEATH_STREAM)),
    };
    (plus, minus)
}

#[inline]
fn draw_at_site(
    split: &IntensityLaw,
    death: &IntensityLaw,
    seed: u64,
    window: &LatticeWindow,
    site: usize,
) -> (f64, f64) {
    if let (IntensityLaw::Constant { value: plus }, IntensityLaw::Constant { value: minus }) =
        (split, death)
    {
        return (*plus, *minus);
    }
    let mut coords = [0i64; 8];
    let d = window.dimension();
    if d <= coords.len() {
        window.write_coords(site, &mut coords[..d]);
        draw_pair(split, death, seed, &coords[..d])
    } else {
        let p = window.unindex(site).expect("site inside window");
        draw_pair(split, death, seed, p.coords())
    }
}

/// Samples a realization of `spec` on `window`.
///
/// Deterministic in `(spec, medium_seed, window)`; splitting and death
/// intensities are drawn independently at each source.
pub fn sample_medium(
    spec: &MediumSpec,
    medium_seed: u64,
    window: &LatticeWindow,
) -> Result<MediumRealization> {
    spec.validate(window)?;
    let table = match &spec.sources {
        SourceConfiguration::EveryPoint => Table::Everywhere {
            split: spec.split_law,
            death: spec.death_law,
        },
        SourceConfiguration::SinglePoint(p) => {
            sparse(spec, medium_seed, window, std::slice::from_ref(p))?
        }
        SourceConfiguration::PointSet(ps) => sparse(spec, medium_seed, window, ps)?,
    };
    Ok(MediumRealization {
        window: window.clone(),
        table,
        seed: medium_seed,
    })
}

fn sparse(
    spec: &MediumSpec,
    seed: u64,
    window: &LatticeWindow,
    points: &[LatticePoint],
) -> Result<Table> {
    let mut map = BTreeMap::new();
    for p in points {
        let site = window.index(p)?;
        map.insert(
            site,
            draw_pair(&spec.split_law, &spec.death_law, seed, p.coords()),
        );
    }
    Ok(Table::Sparse(map))
}

impl MediumRealization {
    pub fn window(&self) -> &LatticeWindow {
        &self.window
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// `(ξ⁺, ξ⁻)` at a site index; zero away from sources.
    #[inline]
    pub fn rates(&self, site: usize) -> (f64, f64) {
        match &self.table {
            Table::Sparse(map) => map.get(&site).copied().unwrap_or((0.0, 0.0)),
            Table::Everywhere { split, death } => {
                draw_at_site(split, death, self.seed, &self.window, site)
            }
        }
    }

    /// `(ξ⁺, ξ⁻)` at any lattice point, including points outside the window.
    ///
    /// Finite source sets carry no sources outside the window; a medium with
    /// sources everywhere extends to the whole lattice with the same draws.
    pub fn rates_at_point(&self, p: &LatticePoint) -> (f64, f64) {
        match &self.table {
            Table::Sparse(_) => match self.window.index(p) {
                Ok(site) => self.rates(site),
                Err(_) => (0.0, 0.0),
            },
            Table::Everywhere { split, death } => draw_pair(split, death, self.seed, p.coords()),
        }
    }

    /// Potential `V = ξ⁺ - ξ⁻` at `p`; zero at non-sources.
    pub fn potential(&self, p: &LatticePoint) -> f64 {
        let (plus, minus) = self.rates_at_point(p);
        plus - minus
    }

    pub fn potential_at(&self, site: usize) -> f64 {
        let (plus, minus) = self.rates(site);
        plus - minus
    }

    /// Site indices carrying a source, in increasing order.
    pub fn source_sites(&self) -> Box<dyn Iterator<Item = usize> + '_> {
        match &self.table {
            Table::Sparse(map) => Box::new(map.keys().copied()),
            Table::Everywhere { .. } => Box::new(0..self.window.len()),
        }
    }

    pub fn source_count(&self) -> usize {
        match &self.table {
            Table::Sparse(map) => map.len(),
            Table::Everywhere { .. } => self.window.len(),
        }
    }

    /// Writes `point_index, x_1..x_d, xi_plus, xi_minus` rows for every source.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        let mut header = vec!["point_index".to_string()];
        header.extend((1..=self.window.dimension()).map(|a| format!("x{a}")));
        header.push("xi_plus".into());
        header.push("xi_minus".into());
        w.write_record(&header)?;
        for site in self.source_sites() {
            let p = self.window.unindex(site)?;
            let (plus, minus) = self.rates(site);
            let mut row = vec![site.to_string()];
            row.extend(p.coords().iter().map(|c| c.to_string()));
            row.push(crate::runner::fmt_g(plus));
            row.push(crate::runner::fmt_g(minus));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}
