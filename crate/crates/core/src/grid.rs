//! Uniform tensor grids in one to three dimensions.
//!
//! Two topologies are supported: `Periodic` (a flat torus, coordinates in
//! `[0, L)` per axis) and `Box` (a truncated slab centered at the origin,
//! coordinates in `[-L/2, L/2]`). Spacing is `L/N` on periodic axes and
//! `L/(N-1)` on box axes.

use serde::Serialize;
use thiserror::Error;

pub const MAX_DIM: usize = 3;
pub const MIN_NODES_PER_AXIS: usize = 8;

/// A point in the ambient space; only the first `dim` components are used.
pub type Point = [f64; MAX_DIM];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Topology {
    Periodic,
    Box,
}

#[derive(Debug, Error)]
pub enum GridError {
    #[error("grid dimension must be 1, 2, or 3, got {0}")]
    BadDimension(usize),
    #[error("axis {axis}: extent must be positive and finite, got {extent}")]
    BadExtent { axis: usize, extent: f64 },
    #[error("axis {axis}: need at least {MIN_NODES_PER_AXIS} nodes, got {count}")]
    TooFewNodes { axis: usize, count: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSpec {
    dim: usize,
    extents: [f64; MAX_DIM],
    counts: [usize; MAX_DIM],
    topology: Topology,
}

impl GridSpec {
    pub fn new(
        dim: usize,
        extents: &[f64],
        counts: &[usize],
        topology: Topology,
    ) -> Result<Self, GridError> {
        if dim == 0 || dim > MAX_DIM {
            return Err(GridError::BadDimension(dim));
        }
        let mut ext = [1.0; MAX_DIM];
        let mut cnt = [1usize; MAX_DIM];
        for axis in 0..dim {
            let extent = extents[axis];
            if !(extent.is_finite() && extent > 0.0) {
                return Err(GridError::BadExtent { axis, extent });
            }
            let count = counts[axis];
            if count < MIN_NODES_PER_AXIS {
                return Err(GridError::TooFewNodes { axis, count });
            }
            ext[axis] = extent;
            cnt[axis] = count;
        }
        Ok(Self { dim, extents: ext, counts: cnt, topology })
    }

    /// Cubic grid: same extent and node count on every axis.
    pub fn cube(dim: usize, extent: f64, count: usize, topology: Topology) -> Result<Self, GridError> {
        if dim == 0 || dim > MAX_DIM {
            return Err(GridError::BadDimension(dim));
        }
        Self::new(dim, &[extent; MAX_DIM][..dim], &[count; MAX_DIM][..dim], topology)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn extent(&self, axis: usize) -> f64 {
        self.extents[axis]
    }

    pub fn count(&self, axis: usize) -> usize {
        self.counts[axis]
    }

    pub fn node_count(&self) -> usize {
        self.counts[..self.dim].iter().product()
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        match self.topology {
            Topology::Periodic => self.extents[axis] / self.counts[axis] as f64,
            Topology::Box => self.extents[axis] / (self.counts[axis] - 1) as f64,
        }
    }

    pub fn min_spacing(&self) -> f64 {
        (0..self.dim).map(|a| self.spacing(a)).fold(f64::INFINITY, f64::min)
    }

    /// Volume of one grid cell.
    pub fn cell_volume(&self) -> f64 {
        (0..self.dim).map(|a| self.spacing(a)).product()
    }

    /// Coordinate of node `index` along `axis`.
    pub fn coord(&self, axis: usize, index: usize) -> f64 {
        match self.topology {
            Topology::Periodic => index as f64 * self.spacing(axis),
            Topology::Box => -0.5 * self.extents[axis] + index as f64 * self.spacing(axis),
        }
    }

    /// Stride of `axis` in the flat node ordering (axis 0 fastest).
    pub fn stride(&self, axis: usize) -> usize {
        self.counts[..axis].iter().product()
    }

    pub fn flat_index(&self, multi: [usize; MAX_DIM]) -> usize {
        let mut idx = 0;
        for axis in (0..self.dim).rev() {
            idx = idx * self.counts[axis] + multi[axis];
        }
        idx
    }

    pub fn multi_index(&self, mut flat: usize) -> [usize; MAX_DIM] {
        let mut multi = [0usize; MAX_DIM];
        for axis in 0..self.dim {
            multi[axis] = flat % self.counts[axis];
            flat /= self.counts[axis];
        }
        multi
    }

    pub fn position(&self, flat: usize) -> Point {
        let multi = self.multi_index(flat);
        let mut p = [0.0; MAX_DIM];
        for axis in 0..self.dim {
            p[axis] = self.coord(axis, multi[axis]);
        }
        p
    }

    /// True when the node sits at least `margin` layers away from every box
    /// face. Periodic grids have no faces; every node is interior.
    pub fn is_interior(&self, flat: usize, margin: usize) -> bool {
        if self.topology == Topology::Periodic {
            return true;
        }
        let multi = self.multi_index(flat);
        (0..self.dim).all(|a| multi[a] >= margin && multi[a] + margin < self.counts[a])
    }

    /// Nearest node to `p` (used to pin sample points onto the lattice).
    pub fn nearest_node(&self, p: &Point) -> usize {
        let mut multi = [0usize; MAX_DIM];
        for axis in 0..self.dim {
            let h = self.spacing(axis);
            let u = match self.topology {
                Topology::Periodic => (p[axis] / h).rem_euclid(self.counts[axis] as f64),
                Topology::Box => (p[axis] + 0.5 * self.extents[axis]) / h,
            };
            let i = u.round() as isize;
            multi[axis] = i.clamp(0, self.counts[axis] as isize - 1) as usize
                % self.counts[axis];
        }
        self.flat_index(multi)
    }

    /// Multilinear interpolation cell for `p` on `axis`: (left node, fraction).
    /// Returns `None` when `p` falls outside a box grid.
    pub(crate) fn cell(&self, axis: usize, x: f64) -> Option<(usize, f64)> {
        let h = self.spacing(axis);
        let n = self.counts[axis];
        match self.topology {
            Topology::Periodic => {
                let u = (x / h).rem_euclid(n as f64);
                let i = u.floor() as usize % n;
                Some((i, u - u.floor()))
            }
            Topology::Box => {
                let half = 0.5 * self.extents[axis];
                let tol = 1e-9 * h;
                if x < -half - tol || x > half + tol {
                    return None;
                }
                let u = ((x + half) / h).clamp(0.0, (n - 1) as f64);
                let i = (u.floor() as usize).min(n - 2);
                Some((i, u - i as f64))
            }
        }
    }
}

pub(crate) fn dot(a: &Point, b: &Point, dim: usize) -> f64 {
    (0..dim).map(|i| a[i] * b[i]).sum()
}

pub(crate) fn norm_sq(a: &Point, dim: usize) -> f64 {
    dot(a, a, dim)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spacing_conventions() {
        let torus = GridSpec::cube(2, 1.0, 10, Topology::Periodic).unwrap();
        assert_eq!(torus.spacing(0), 0.1);
        assert_eq!(torus.coord(0, 0), 0.0);
        assert!((torus.coord(0, 9) - 0.9).abs() < 1e-15);

        let slab = GridSpec::cube(1, 16.0, 9, Topology::Box).unwrap();
        assert_eq!(slab.spacing(0), 2.0);
        assert_eq!(slab.coord(0, 0), -8.0);
        assert_eq!(slab.coord(0, 8), 8.0);
    }

    #[test]
    fn flat_multi_roundtrip() {
        let g = GridSpec::new(3, &[1.0, 2.0, 3.0], &[8, 9, 10], Topology::Box).unwrap();
        for flat in [0usize, 1, 17, 8 * 9 * 10 - 1] {
            assert_eq!(g.flat_index(g.multi_index(flat)), flat);
        }
        assert_eq!(g.node_count(), 720);
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(GridSpec::cube(0, 1.0, 16, Topology::Box).is_err());
        assert!(GridSpec::cube(4, 1.0, 16, Topology::Box).is_err());
        assert!(GridSpec::cube(1, -1.0, 16, Topology::Box).is_err());
        assert!(GridSpec::cube(1, 1.0, 7, Topology::Box).is_err());
    }

    #[test]
    fn interior_margins() {
        let g = GridSpec::cube(2, 1.0, 8, Topology::Box).unwrap();
        assert!(!g.is_interior(g.flat_index([0, 3, 0]), 1));
        assert!(g.is_interior(g.flat_index([2, 3, 0]), 2));
        assert!(!g.is_interior(g.flat_index([6, 3, 0]), 2));
        let t = GridSpec::cube(2, 1.0, 8, Topology::Periodic).unwrap();
        assert!(t.is_interior(0, 3));
    }
}
