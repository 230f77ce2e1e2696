//! Uniform periodic grids on `[0, 2pi)^dim`, `dim` in {1, 2}.

use alloc::vec::Vec;
use core::f64::consts::{PI, TAU};

use num_traits::Float;

use crate::{Error, Result};

/// A coordinate point. One-dimensional grids only use the first entry.
pub type Point = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Grid {
    dim: usize,
    n: usize,
}

impl Grid {
    /// Grids used as simulation domains need `n >= 16` and even.
    pub fn new(dim: usize, n: usize) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(Error::Config("grid dimension must be 1 or 2"));
        }
        if n < 16 || n % 2 != 0 {
            return Err(Error::Resolution { n });
        }
        Ok(Self { dim, n })
    }

    /// Same as [`Grid::new`] without the lower resolution bound; meant for
    /// small internal grids (oracles, coarse convergence levels).
    pub fn unchecked(dim: usize, n: usize) -> Self {
        assert!((1..=2).contains(&dim) && n >= 2 && n % 2 == 0);
        Self { dim, n }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Nodes per axis.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Total number of nodes.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn spacing(&self) -> f64 {
        TAU / self.n as f64
    }

    pub fn coord(&self, i: usize) -> f64 {
        i as f64 * self.spacing()
    }

    /// Row-major: axis 1 is contiguous.
    pub fn index(&self, i0: usize, i1: usize) -> usize {
        if self.dim == 1 {
            i0
        } else {
            i0 * self.n + i1
        }
    }

    pub fn multi_index(&self, idx: usize) -> [usize; 2] {
        if self.dim == 1 {
            [idx, 0]
        } else {
            [idx / self.n, idx % self.n]
        }
    }

    pub fn point(&self, idx: usize) -> Point {
        let [i0, i1] = self.multi_index(idx);
        if self.dim == 1 {
            [self.coord(i0), 0.0]
        } else {
            [self.coord(i0), self.coord(i1)]
        }
    }

    pub fn sample(&self, f: impl Fn(Point) -> f64) -> Vec<f64> {
        (0..self.len()).map(|i| f(self.point(i))).collect()
    }

    /// Index of the node at `p`, if `p` is a node to within `1e-12`.
    pub fn node_at(&self, p: Point) -> Option<usize> {
        let h = self.spacing();
        let mut ids = [0usize; 2];
        for (a, id) in ids.iter_mut().enumerate().take(self.dim) {
            let x = wrap_periodic(p[a]) / h;
            let r = libm_round(x);
            if (x - r).abs() > 1e-9 {
                return None;
            }
            *id = (r as usize) % self.n;
        }
        Some(self.index(ids[0], ids[1]))
    }
}

fn libm_round(x: f64) -> f64 {
    x.round()
}

/// Maps an angle into `[0, 2pi)`.
pub fn wrap_periodic(x: f64) -> f64 {
    let r = x % TAU;
    if r < 0.0 {
        // `r + TAU` can round to TAU for tiny negative r
        let w = r + TAU;
        if w >= TAU {
            0.0
        } else {
            w
        }
    } else {
        r
    }
}

/// Maps an angle into `(-pi, pi]`.
pub fn wrap_centered(x: f64) -> f64 {
    let w = wrap_periodic(x);
    if w > PI {
        w - TAU
    } else {
        w
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_small_or_odd_resolution() {
        assert!(matches!(Grid::new(2, 8), Err(Error::Resolution { n: 8 })));
        assert!(matches!(Grid::new(1, 17), Err(Error::Resolution { .. })));
        assert!(Grid::new(3, 32).is_err());
        assert!(Grid::new(1, 16).is_ok());
    }

    #[test]
    fn node_lookup_round_trips() {
        let g = Grid::new(2, 32).unwrap();
        for idx in [0, 5, 33, 1023] {
            assert_eq!(g.node_at(g.point(idx)), Some(idx));
        }
        assert_eq!(g.node_at([0.01, 0.0]), None);
        assert_eq!(g.node_at([-g.spacing(), 0.0]), Some(g.index(31, 0)));
    }

    #[test]
    fn wrapping() {
        assert!((wrap_centered(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-15);
        assert_eq!(wrap_periodic(-1e-300), 0.0);
        assert!(wrap_periodic(-0.5) > 5.0);
    }
}
