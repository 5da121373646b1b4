//! Event-driven simulation of a single branching random walk.
//!
//! The state is a set of particle records `(id, t_birth, t_death, site)`.
//! Records with an unknown death time are processed in order of birth time
//! (ties broken by the smaller id). Processing a record draws its holding
//! time, then picks one of three outcomes with probabilities
//! `(κ, ξ⁺, ξ⁻) / D` where `D = κ + ξ⁺ + ξ⁻` at the record's site:
//!
//! - jump: one child record at a uniformly chosen neighbour,
//! - split: two child records at the same site,
//! - die: no children.
//!
//! Births are processed out of time order relative to deaths, so resolved
//! events wait in a second queue and are committed once the birth frontier
//! passes them. The live count `μ(t)` is therefore exact up to the frontier,
//! which is what lets the particle cap stop the run at the right moment.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{BoundaryPolicy, LatticePoint, LatticeWindow};
use crate::medium::MediumRealization;
use crate::rng::{exp_inverse_cdf, trajectory_rng};

/// Live count at which `T_100` is recorded.
pub const T100_THRESHOLD: u32 = 100;

/// How the holding time of a record is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HoldingTimeMode {
    /// `Exp(κ + ξ⁺ + ξ⁻)`: the birth-death-walk Markov chain.
    #[default]
    TotalRate,
    /// `Exp(κ)` regardless of the site's branching intensities.
    WalkRateOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngineParams {
    /// Walk intensity κ.
    pub kappa: f64,
    pub t_max: f64,
    pub particle_cap: u32,
    pub holding_time_mode: HoldingTimeMode,
}

impl Default for EngineParams {
    fn default() -> Self {
        EngineParams {
            kappa: 1.0,
            t_max: 10.0,
            particle_cap: 1000,
            holding_time_mode: HoldingTimeMode::TotalRate,
        }
    }
}

impl EngineParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.kappa.is_finite() && self.kappa > 0.0) {
            return Err(Error::InvalidParameter {
                name: "engine.kappa",
                reason: format!("must be positive, got {}", self.kappa),
            });
        }
        if !(self.t_max.is_finite() && self.t_max > 0.0) {
            return Err(Error::InvalidParameter {
                name: "t_max",
                reason: format!("must be positive, got {}", self.t_max),
            });
        }
        if self.particle_cap == 0 {
            return Err(Error::InvalidParameter {
                name: "engine.particle_cap",
                reason: "must be at least 1".into(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Jump,
    Split,
    Die,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Jump => "jump",
            EventKind::Split => "split",
            EventKind::Die => "die",
        }
    }

    /// Change in the live count.
    pub fn delta(self) -> i64 {
        match self {
            EventKind::Jump => 0,
            EventKind::Split => 1,
            EventKind::Die => -1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
    /// Site index where the event happened.
    pub site: usize,
    /// Destination site of a jump.
    pub target: Option<usize>,
    /// Id of the record whose evolution this is.
    pub particle: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Status {
    Extinct,
    ReachedHorizon,
    Capped { t_stop: f64 },
    BoundaryExit { time: f64 },
}

impl Status {
    pub fn label(&self) -> &'static str {
        match self {
            Status::Extinct => "extinct",
            Status::ReachedHorizon => "horizon",
            Status::Capped { .. } => "capped",
            Status::BoundaryExit { .. } => "boundary_exit",
        }
    }
}

/// One simulated run.
///
/// `events` are sorted by time. When the run is capped, the event that would
/// have pushed the live count above the cap is not recorded, so the largest
/// recorded count equals the cap.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    events: Vec<Event>,
    mu_steps: Vec<(f64, u32)>,
    status: Status,
    t_100: Option<f64>,
    replicate_seed: u64,
    t_max: f64,
    start_site: usize,
    boundary_kills: u32,
}

impl Trajectory {
    pub fn events(&self) -> &[Event] {
        &self.events
    }

    /// `(time, μ after)` pairs, starting with `(0, 1)`.
    pub fn mu_steps(&self) -> &[(f64, u32)] {
        &self.mu_steps
    }

    pub fn status(&self) -> Status {
        self.status
    }

    pub fn t_100(&self) -> Option<f64> {
        self.t_100
    }

    pub fn t_stop(&self) -> Option<f64> {
        match self.status {
            Status::Capped { t_stop } => Some(t_stop),
            _ => None,
        }
    }

    pub fn replicate_seed(&self) -> u64 {
        self.replicate_seed
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn start_site(&self) -> usize {
        self.start_site
    }

    /// Walkers removed at the window edge under [`BoundaryPolicy::KillWithFlag`].
    pub fn boundary_kills(&self) -> u32 {
        self.boundary_kills
    }

    /// End of the interval on which `μ` was observed.
    pub fn observed_until(&self) -> f64 {
        match self.status {
            Status::Capped { t_stop } => t_stop,
            Status::BoundaryExit { time } => time,
            _ => self.t_max,
        }
    }

    pub fn max_mu(&self) -> u32 {
        self.mu_steps.iter().map(|s| s.1).max().unwrap_or(0)
    }

    /// Total live count at `t`, right-continuous at event times.
    pub fn mu_at(&self, t: f64) -> Result<u32> {
        if !(t >= 0.0 && t <= self.observed_until()) {
            return Err(Error::domain(format!(
                "t = {t} outside the observed range [0, {}]",
                self.observed_until()
            )));
        }
        Ok(self.mu_at_unchecked(t))
    }

    #[inline]
    pub(crate) fn mu_at_unchecked(&self, t: f64) -> u32 {
        let i = self.mu_steps.partition_point(|s| s.0 <= t);
        self.mu_steps[i.saturating_sub(1)].1
    }

    /// Site of the initial particle's lineage at `t` when the walk never
    /// branches; `None` once the lineage has split or died.
    pub fn single_walker_site(&self, t: f64) -> Option<usize> {
        let mut site = self.start_site;
        for e in self.events.iter().take_while(|e| e.time <= t) {
            match e.kind {
                EventKind::Jump => site = e.target?,
                _ => return None,
            }
        }
        Some(site)
    }

    /// Writes `time, event, x_1..x_d, mu_after` rows.
    pub fn write_csv<W: Write>(&self, window: &LatticeWindow, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        let mut header = vec!["time".to_string(), "event".to_string()];
        header.extend((1..=window.dimension()).map(|a| format!("x{a}")));
        header.push("mu_after".into());
        w.write_record(&header)?;
        let mut mu: i64 = 1;
        for e in &self.events {
            mu += e.kind.delta();
            let p = window.unindex(e.site)?;
            let mut row = vec![crate::runner::fmt_g(e.time), e.kind.as_str().to_string()];
            row.extend(p.coords().iter().map(|c| c.to_string()));
            row.push(mu.to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Clone, Copy)]
struct Key(f64, u64);

impl PartialEq for Key {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Key {}
impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Key {
    // Reversed so that BinaryHeap pops the smallest (time, id).
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .0
            .total_cmp(&self.0)
            .then_with(|| other.1.cmp(&self.1))
    }
}

struct Pending {
    key: Key,
    site: usize,
}
impl PartialEq for Pending {
    fn eq(&self, o: &Self) -> bool {
        self.key == o.key
    }
}
impl Eq for Pending {}
impl PartialOrd for Pending {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Pending {
    fn cmp(&self, o: &Self) -> Ordering {
        self.key.cmp(&o.key)
    }
}

struct Resolved {
    key: Key,
    event: Event,
    /// Jump leaving the window.
    exits: bool,
}
impl PartialEq for Resolved {
    fn eq(&self, o: &Self) -> bool {
        self.key == o.key
    }
}
impl Eq for Resolved {}
impl PartialOrd for Resolved {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Resolved {
    fn cmp(&self, o: &Self) -> Ordering {
        self.key.cmp(&o.key)
    }
}

enum Stop {
    Capped(f64),
    Exit(f64),
}

struct Recorder {
    events: Vec<Event>,
    mu_steps: Vec<(f64, u32)>,
    live: u32,
    cap: u32,
    t_100: Option<f64>,
    policy: BoundaryPolicy,
    boundary_kills: u32,
}

impl Recorder {
    fn commit(&mut self, r: Resolved) -> Option<Stop> {
        let mut event = r.event;
        if r.exits {
            match self.policy {
                BoundaryPolicy::Error => return Some(Stop::Exit(event.time)),
                BoundaryPolicy::KillWithFlag => {
                    event.kind = EventKind::Die;
                    event.target = None;
                    self.boundary_kills += 1;
                }
            }
        }
        match event.kind {
            EventKind::Split => {
                if self.live >= self.cap {
                    return Some(Stop::Capped(event.time));
                }
                self.live += 1;
            }
            EventKind::Die => self.live -= 1,
            EventKind::Jump => {}
        }
        if event.kind != EventKind::Jump {
            self.mu_steps.push((event.time, self.live));
        }
        if self.t_100.is_none() && self.live >= T100_THRESHOLD {
            self.t_100 = Some(event.time);
        }
        self.events.push(event);
        None
    }
}

/// Simulates one trajectory started by a single particle at `start`.
///
/// Deterministic in `(medium, params, start, replicate_seed)`.
pub fn simulate(
    medium: &MediumRealization,
    params: &EngineParams,
    start: &LatticePoint,
    replicate_seed: u64,
) -> Result<Trajectory> {
    params.validate()?;
    let window = medium.window();
    let start_site = window.index(start)?;
    Ok(simulate_site(medium, params, start_site, replicate_seed))
}

pub(crate) fn simulate_site(
    medium: &MediumRealization,
    params: &EngineParams,
    start_site: usize,
    replicate_seed: u64,
) -> Trajectory {
    let window = medium.window();
    let degree = window.degree();
    let mut rng = trajectory_rng(replicate_seed);
    let mut pending = BinaryHeap::new();
    let mut resolved: BinaryHeap<Resolved> = BinaryHeap::new();
    let mut rec = Recorder {
        events: Vec::new(),
        mu_steps: vec![(0.0, 1)],
        live: 1,
        cap: params.particle_cap,
        t_100: None,
        policy: window.boundary_policy(),
        boundary_kills: 0,
    };
    if rec.live >= T100_THRESHOLD {
        rec.t_100 = Some(0.0);
    }
    pending.push(Pending {
        key: Key(0.0, 1),
        site: start_site,
    });
    let mut next_id: u64 = 2;
    let mut stop = None;

    'outer: while let Some(p) = pending.pop() {
        let frontier = p.key.0;
        while resolved.peek().is_some_and(|r| r.key.0 <= frontier) {
            let r = resolved.pop().expect("peeked");
            if let Some(s) = rec.commit(r) {
                stop = Some(s);
                break 'outer;
            }
        }

        let (plus, minus) = medium.rates(p.site);
        let total = params.kappa + plus + minus;
        let holding_rate = match params.holding_time_mode {
            HoldingTimeMode::TotalRate => total,
            HoldingTimeMode::WalkRateOnly => params.kappa,
        };
        let t_death = frontier + exp_inverse_cdf(rng.random::<f64>(), holding_rate);
        let choice = rng.random::<f64>() * total;
        if t_death > params.t_max {
            // Alive at the horizon; its evolution is never observed.
            continue;
        }
        let id = p.key.1;
        let (kind, target, exits) = if choice < params.kappa {
            let dir = rng.random_range(0..degree);
            match window.neighbor_index(p.site, dir) {
                Some(q) => {
                    pending.push(Pending {
                        key: Key(t_death, next_id),
                        site: q,
                    });
                    next_id += 1;
                    (EventKind::Jump, Some(q), false)
                }
                None => (EventKind::Jump, None, true),
            }
        } else if choice < params.kappa + plus {
            for _ in 0..2 {
                pending.push(Pending {
                    key: Key(t_death, next_id),
                    site: p.site,
                });
                next_id += 1;
            }
            (EventKind::Split, None, false)
        } else {
            (EventKind::Die, None, false)
        };
        resolved.push(Resolved {
            key: Key(t_death, id),
            event: Event {
                time: t_death,
                kind,
                site: p.site,
                target,
                particle: id,
            },
            exits,
        });
    }

    if stop.is_none() {
        while let Some(r) = resolved.pop() {
            if let Some(s) = rec.commit(r) {
                stop = Some(s);
                break;
            }
        }
    }

    let status = match stop {
        Some(Stop::Capped(t)) => Status::Capped { t_stop: t },
        Some(Stop::Exit(t)) => Status::BoundaryExit { time: t },
        None if rec.live == 0 => Status::Extinct,
        None => Status::ReachedHorizon,
    };
    Trajectory {
        events: rec.events,
        mu_steps: rec.mu_steps,
        status,
        t_100: rec.t_100,
        replicate_seed,
        t_max: params.t_max,
        start_site,
        boundary_kills: rec.boundary_kills,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::medium::{sample_medium, IntensityLaw, MediumSpec, SourceConfiguration};

    fn homogeneous(d: usize, side: usize, plus: f64, minus: f64) -> MediumRealization {
        let w = LatticeWindow::new(d, side, BoundaryPolicy::Error).unwrap();
        let spec = MediumSpec::new(
            SourceConfiguration::EveryPoint,
            IntensityLaw::constant(plus),
            IntensityLaw::constant(minus),
        );
        sample_medium(&spec, 0, &w).unwrap()
    }

    fn no_sources(d: usize, side: usize, policy: BoundaryPolicy) -> MediumRealization {
        let w = LatticeWindow::new(d, side, policy).unwrap();
        sample_medium(&MediumSpec::empty(), 0, &w).unwrap()
    }

    fn params(t_max: f64) -> EngineParams {
        EngineParams {
            t_max,
            ..EngineParams::default()
        }
    }

    #[test]
    fn pure_walk_keeps_one_particle() {
        let m = no_sources(1, 101, BoundaryPolicy::Error);
        let traj = simulate(&m, &params(10.0), &LatticePoint::origin(1), 3).unwrap();
        assert_eq!(traj.status(), Status::ReachedHorizon);
        assert!(traj.events().iter().all(|e| e.kind == EventKind::Jump));
        assert!(!traj.events().is_empty());
        for i in 0..=100 {
            assert_eq!(traj.mu_at(i as f64 * 0.1).unwrap(), 1);
        }
        assert_eq!(traj.mu_steps(), &[(0.0, 1)]);
    }

    #[test]
    fn mu_at_bounds_and_extinction() {
        let m = homogeneous(1, 101, 0.0, 3.0);
        let traj = simulate(&m, &params(10.0), &LatticePoint::origin(1), 1).unwrap();
        assert_eq!(traj.status(), Status::Extinct);
        assert_eq!(traj.mu_at(0.0).unwrap(), 1);
        let s = traj.events().last().unwrap().time;
        assert_eq!(traj.mu_at(s).unwrap(), 0);
        assert_eq!(traj.mu_at((s + 10.0) / 2.0).unwrap(), 0);
        assert_eq!(traj.mu_at(10.0).unwrap(), 0);
        assert!(traj.mu_at(10.5).is_err());
        assert!(traj.mu_at(-0.1).is_err());
    }

    #[test]
    fn deterministic_replay() {
        let m = homogeneous(3, 21, 2.0, 1.0);
        let a = simulate(&m, &params(5.0), &LatticePoint::origin(3), 77).unwrap();
        let b = simulate(&m, &params(5.0), &LatticePoint::origin(3), 77).unwrap();
        assert_eq!(a, b);
        let c = simulate(&m, &params(5.0), &LatticePoint::origin(3), 78).unwrap();
        assert_ne!(a.events(), c.events());
    }

    #[test]
    fn cap_invariants() {
        let m = homogeneous(1, 101, 2.0, 1.0);
        let mut capped = 0;
        for seed in 0..200 {
            let traj = simulate(&m, &params(10.0), &LatticePoint::origin(1), seed).unwrap();
            if let Status::Capped { t_stop } = traj.status() {
                capped += 1;
                assert_eq!(traj.max_mu(), 1000);
                let t100 = traj.t_100().unwrap();
                assert!(t100 <= t_stop);
                assert!(traj.mu_at(t100).unwrap() >= 100);
                assert!(traj.mu_at(t_stop).is_ok());
                assert!(traj.mu_at(t_stop + 1e-9).is_err());
                assert!(traj.events().last().unwrap().time <= t_stop);
            }
        }
        assert!(capped > 50, "only {capped} capped");
    }

    #[test]
    fn count_conservation() {
        let m = homogeneous(2, 41, 1.5, 1.0);
        for seed in 0..50 {
            let traj = simulate(&m, &params(6.0), &LatticePoint::origin(2), seed).unwrap();
            let mut mu: i64 = 1;
            for e in traj.events() {
                mu += e.kind.delta();
                assert!(mu >= 0);
                assert_eq!(traj.mu_at(e.time).unwrap() as i64, mu, "seed {seed}");
            }
            let times: Vec<f64> = traj.events().iter().map(|e| e.time).collect();
            assert!(times.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn boundary_exit_error_policy() {
        // side 3 window, pure walk: the walker leaves quickly.
        let m = no_sources(1, 3, BoundaryPolicy::Error);
        let traj = simulate(&m, &params(50.0), &LatticePoint::origin(1), 5).unwrap();
        let Status::BoundaryExit { time } = traj.status() else {
            panic!("expected boundary exit, got {:?}", traj.status());
        };
        assert!(traj.mu_at(time).is_ok());
        assert!(traj.mu_at(time + 1.0).is_err());
    }

    #[test]
    fn boundary_kill_policy() {
        let m = no_sources(1, 3, BoundaryPolicy::KillWithFlag);
        let traj = simulate(&m, &params(50.0), &LatticePoint::origin(1), 5).unwrap();
        assert_eq!(traj.status(), Status::Extinct);
        assert_eq!(traj.boundary_kills(), 1);
        assert_eq!(traj.events().last().unwrap().kind, EventKind::Die);
    }

    #[test]
    fn start_outside_window_rejected() {
        let m = no_sources(1, 11, BoundaryPolicy::Error);
        assert!(simulate(&m, &params(1.0), &LatticePoint::new([6]), 0).is_err());
        let bad = EngineParams {
            kappa: 0.0,
            ..params(1.0)
        };
        assert!(simulate(&m, &bad, &LatticePoint::origin(1), 0).is_err());
    }

    #[test]
    fn csv_export_replays_mu() {
        let m = homogeneous(1, 101, 2.0, 1.0);
        let traj = simulate(&m, &params(3.0), &LatticePoint::origin(1), 9).unwrap();
        let mut buf = Vec::new();
        traj.write_csv(m.window(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("time,event,x1,mu_after"));
        for (line, e) in lines.zip(traj.events()) {
            let cols: Vec<_> = line.split(',').collect();
            assert_eq!(cols[1], e.kind.as_str());
            assert_eq!(cols[3].parse::<u32>().unwrap(), traj.mu_at(e.time).unwrap());
        }
    }

    #[test]
    fn birth_death_mean_matches_exponential() {
        // Homogeneous (1.5, 1) at t = 2: mean μ = e^{1}. Compare within 3 SE.
        let m = homogeneous(1, 101, 1.5, 1.0);
        let n = 4000;
        let xs: Vec<f64> = (0..n)
            .map(|s| {
                simulate(&m, &params(2.0), &LatticePoint::origin(1), s)
                    .unwrap()
                    .mu_at(2.0)
                    .unwrap() as f64
            })
            .collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        let se = (var / n as f64).sqrt();
        let truth = 1f64.exp();
        assert!(
            (mean - truth).abs() < 3.0 * se,
            "mean {mean} truth {truth} se {se}"
        );
    }
}
