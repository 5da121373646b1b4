//! Finite cubic windows of `Z^d` and the simple symmetric random walk on them.
//!
//! A window of side `s` covers `[-⌊s/2⌋, s - 1 - ⌊s/2⌋]` on every axis, so the
//! origin sits at (or next to) the centre. Points are indexed row-major with
//! the first axis most significant.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest number of sites a window may hold.
pub const MAX_SITES: usize = 10_000_000;

/// What happens when a walker tries to leave the window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryPolicy {
    /// Abort the trajectory with a boundary-exit status.
    #[default]
    Error,
    /// The walker dies at the boundary and the trajectory is flagged.
    KillWithFlag,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LatticePoint(pub Vec<i64>);

impl LatticePoint {
    pub fn new(coords: impl Into<Vec<i64>>) -> Self {
        LatticePoint(coords.into())
    }

    pub fn origin(dimension: usize) -> Self {
        LatticePoint(vec![0; dimension])
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    /// L1 distance to `other`.
    pub fn l1_distance(&self, other: &LatticePoint) -> i64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .sum()
    }
}

impl std::fmt::Display for LatticePoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatticeWindow {
    dimension: usize,
    side: usize,
    half: i64,
    strides: Vec<usize>,
    boundary_policy: BoundaryPolicy,
}

impl LatticeWindow {
    pub fn new(dimension: usize, side: usize, boundary_policy: BoundaryPolicy) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::InvalidParameter {
                name: "lattice.dimension",
                reason: "must be at least 1".into(),
            });
        }
        if side < 3 {
            return Err(Error::InvalidParameter {
                name: "lattice.side",
                reason: format!("must be at least 3, got {side}"),
            });
        }
        let sites = (0..dimension).try_fold(1usize, |acc, _| acc.checked_mul(side));
        match sites {
            Some(n) if n <= MAX_SITES => {}
            _ => {
                return Err(Error::InvalidParameter {
                    name: "lattice.side",
                    reason: format!("side^dimension exceeds {MAX_SITES} sites"),
                })
            }
        }
        let mut strides = vec![1usize; dimension];
        for axis in (0..dimension.saturating_sub(1)).rev() {
            strides[axis] = strides[axis + 1] * side;
        }
        Ok(LatticeWindow {
            dimension,
            side,
            half: (side / 2) as i64,
            strides,
            boundary_policy,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn boundary_policy(&self) -> BoundaryPolicy {
        self.boundary_policy
    }

    /// Number of sites, `side^d`.
    pub fn len(&self) -> usize {
        self.strides[0] * self.side
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Offset added to every coordinate so the window starts at zero.
    pub fn origin_offset(&self) -> i64 {
        self.half
    }

    /// Smallest and largest coordinate on each axis.
    pub fn coord_range(&self) -> (i64, i64) {
        (-self.half, self.side as i64 - 1 - self.half)
    }

    pub fn contains(&self, p: &LatticePoint) -> bool {
        let (lo, hi) = self.coord_range();
        p.dimension() == self.dimension && p.0.iter().all(|&c| c >= lo && c <= hi)
    }

    fn check(&self, p: &LatticePoint) -> Result<()> {
        if p.dimension() != self.dimension {
            return Err(Error::domain(format!(
                "point {p} has dimension {}, window has {}",
                p.dimension(),
                self.dimension
            )));
        }
        if !self.contains(p) {
            return Err(Error::domain(format!("point {p} lies outside the window")));
        }
        Ok(())
    }

    pub fn index(&self, p: &LatticePoint) -> Result<usize> {
        self.check(p)?;
        Ok(p.0
            .iter()
            .zip(&self.strides)
            .map(|(&c, &s)| (c + self.half) as usize * s)
            .sum())
    }

    pub fn unindex(&self, index: usize) -> Result<LatticePoint> {
        if index >= self.len() {
            return Err(Error::domain(format!(
                "index {index} outside [0, {})",
                self.len()
            )));
        }
        Ok(LatticePoint(
            (0..self.dimension)
                .map(|axis| self.axis_coord(index, axis))
                .collect(),
        ))
    }

    /// Index of the lattice origin, `⌊side/2⌋ · (side^d - 1)/(side - 1)`.
    pub fn origin_index(&self) -> usize {
        self.strides.iter().map(|s| self.half as usize * s).sum()
    }

    /// All `2d` nearest neighbours of `p`, including points outside the window.
    ///
    /// Order: for each axis, the `-1` neighbour then the `+1` neighbour.
    pub fn neighbors(&self, p: &LatticePoint) -> Result<Vec<LatticePoint>> {
        self.check(p)?;
        let mut out = Vec::with_capacity(2 * self.dimension);
        for axis in 0..self.dimension {
            for step in [-1, 1] {
                let mut q = p.clone();
                q.0[axis] += step;
                out.push(q);
            }
        }
        Ok(out)
    }

    /// Coordinates of `index` written into `out` (length `d`).
    #[inline]
    pub fn write_coords(&self, index: usize, out: &mut [i64]) {
        for (axis, c) in out.iter_mut().enumerate() {
            *c = self.axis_coord(index, axis);
        }
    }

    #[inline]
    fn axis_coord(&self, index: usize, axis: usize) -> i64 {
        ((index / self.strides[axis]) % self.side) as i64 - self.half
    }

    /// Index of the neighbour reached by `direction` in `0..2d`, or `None`
    /// when that neighbour falls outside the window.
    ///
    /// Direction `2a` steps `-1` along axis `a`, `2a + 1` steps `+1`, matching
    /// the order of [`neighbors`](Self::neighbors).
    #[inline]
    pub fn neighbor_index(&self, index: usize, direction: usize) -> Option<usize> {
        let axis = direction / 2;
        let stride = self.strides[axis];
        let local = (index / stride) % self.side;
        if direction.is_multiple_of(2) {
            (local > 0).then(|| index - stride)
        } else {
            (local + 1 < self.side).then(|| index + stride)
        }
    }

    /// Number of walk directions, `2d`.
    pub fn degree(&self) -> usize {
        2 * self.dimension
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn window(d: usize, side: usize) -> LatticeWindow {
        LatticeWindow::new(d, side, BoundaryPolicy::Error).unwrap()
    }

    #[test]
    fn one_dimensional_neighbors() {
        let w = window(1, 5);
        let n = w.neighbors(&LatticePoint::new([0])).unwrap();
        assert_eq!(n, vec![LatticePoint::new([-1]), LatticePoint::new([1])]);
    }

    #[test]
    fn three_dimensional_neighbors_are_unit_vectors() {
        let w = window(3, 5);
        let n = w.neighbors(&LatticePoint::origin(3)).unwrap();
        assert_eq!(n.len(), 6);
        for q in &n {
            assert_eq!(q.l1_distance(&LatticePoint::origin(3)), 1);
        }
        let set: std::collections::BTreeSet<_> = n.into_iter().collect();
        assert_eq!(set.len(), 6);
    }

    #[test]
    fn corner_neighbors_leave_window() {
        // side 3, d 1: coordinates -1, 0, 1
        let w = window(1, 3);
        let corner = LatticePoint::new([1]);
        let n = w.neighbors(&corner).unwrap();
        assert_eq!(n, vec![LatticePoint::new([0]), LatticePoint::new([2])]);
        assert!(w.contains(&n[0]));
        assert!(!w.contains(&n[1]));
        let idx = w.index(&corner).unwrap();
        assert_eq!(w.neighbor_index(idx, 0), Some(w.index(&n[0]).unwrap()));
        assert_eq!(w.neighbor_index(idx, 1), None);
    }

    #[test]
    fn out_of_window_is_domain_error() {
        let w = window(2, 5);
        assert!(matches!(
            w.neighbors(&LatticePoint::new([3, 0])),
            Err(Error::Domain(_))
        ));
        assert!(w.index(&LatticePoint::new([0, -3])).is_err());
        assert!(w.index(&LatticePoint::new([0])).is_err());
        assert!(w.unindex(25).is_err());
    }

    #[test]
    fn window_validation() {
        assert!(LatticeWindow::new(0, 10, BoundaryPolicy::Error).is_err());
        assert!(LatticeWindow::new(1, 2, BoundaryPolicy::Error).is_err());
        assert!(LatticeWindow::new(4, 100, BoundaryPolicy::Error).is_err());
        assert!(LatticeWindow::new(3, 100, BoundaryPolicy::Error).is_ok());
    }

    #[test]
    fn round_trip_side5_d2() {
        let w = window(2, 5);
        let (lo, hi) = w.coord_range();
        assert_eq!((lo, hi), (-2, 2));
        for x in lo..=hi {
            for y in lo..=hi {
                let p = LatticePoint::new([x, y]);
                assert_eq!(w.unindex(w.index(&p).unwrap()).unwrap(), p);
            }
        }
    }

    #[test]
    fn index_injective_side4_d3() {
        let w = window(3, 4);
        let (lo, hi) = w.coord_range();
        assert_eq!((lo, hi), (-2, 1));
        let mut seen = std::collections::HashSet::new();
        for x in lo..=hi {
            for y in lo..=hi {
                for z in lo..=hi {
                    seen.insert(w.index(&LatticePoint::new([x, y, z])).unwrap());
                }
            }
        }
        assert_eq!(seen.len(), 64);
        assert!(seen.iter().all(|&i| i < 64));
    }

    #[test]
    fn origin_index_values() {
        // Row-major with offset 50: 50, 50*100 + 50, 50*(10^4 + 10^2 + 1).
        assert_eq!(window(1, 100).origin_index(), 50);
        assert_eq!(window(2, 100).origin_index(), 5050);
        assert_eq!(window(3, 100).origin_index(), 505_050);
        assert_eq!(window(3, 4).origin_index(), 2 * 16 + 2 * 4 + 2);
        for (d, side) in [(1, 3), (2, 7), (3, 100)] {
            let w = window(d, side);
            assert_eq!(w.index(&LatticePoint::origin(d)).unwrap(), w.origin_index());
        }
    }

    proptest! {
        #[test]
        fn neighbors_symmetric_and_unit(d in 1usize..=3, side in 3usize..=9, seed in any::<u64>()) {
            let w = window(d, side);
            let idx = (seed as usize) % w.len();
            let p = w.unindex(idx).unwrap();
            let ns = w.neighbors(&p).unwrap();
            prop_assert_eq!(ns.len(), 2 * d);
            for (dir, q) in ns.iter().enumerate() {
                let differing = p.0.iter().zip(&q.0).filter(|(a, b)| a != b).count();
                prop_assert_eq!(differing, 1);
                prop_assert_eq!(p.l1_distance(q), 1);
                prop_assert_eq!(w.neighbor_index(idx, dir), w.index(q).ok());
                if w.contains(q) {
                    prop_assert!(w.neighbors(q).unwrap().contains(&p));
                }
            }
        }

        #[test]
        fn index_bijection(d in 1usize..=3, side in 3usize..=30, seed in any::<u64>()) {
            let w = window(d, side);
            let idx = (seed as usize) % w.len();
            let p = w.unindex(idx).unwrap();
            prop_assert!(w.contains(&p));
            prop_assert_eq!(w.index(&p).unwrap(), idx);
        }
    }
}
