//! Grids: equispaced nodes on the circle S^1 = R/Z and on a truncated cylinder.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Equispaced nodes t_j = j / n_t on the unit-period circle.
///
/// n_t must be even and at least 8 so that spectral differentiation has a
/// symmetric mode range with a well-defined Nyquist mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeGrid {
    n_t: usize,
}

impl TimeGrid {
    pub fn new(n_t: usize) -> Result<Self> {
        if n_t < 8 || n_t % 2 != 0 {
            return Err(Error::InvalidGrid(format!(
                "n_t must be even and >= 8, got {n_t}"
            )));
        }
        Ok(TimeGrid { n_t })
    }

    pub fn len(&self) -> usize {
        self.n_t
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn node(&self, j: usize) -> f64 {
        j as f64 / self.n_t as f64
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.n_t as f64
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_t).map(move |j| self.node(j))
    }
}

/// A truncated cylinder [s_min, s_max] x S^1 with n_s equispaced s-lines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CylinderGrid {
    pub s_min: f64,
    pub s_max: f64,
    pub n_s: usize,
    pub time: TimeGrid,
}

impl CylinderGrid {
    pub fn new(s_min: f64, s_max: f64, n_s: usize, time: TimeGrid) -> Result<Self> {
        if !(s_min.is_finite() && s_max.is_finite()) || s_min >= s_max {
            return Err(Error::InvalidGrid(format!(
                "need s_min < s_max, got [{s_min}, {s_max}]"
            )));
        }
        if n_s < 3 {
            return Err(Error::InvalidGrid(format!("n_s must be >= 3, got {n_s}")));
        }
        Ok(CylinderGrid { s_min, s_max, n_s, time })
    }

    pub fn ds(&self) -> f64 {
        (self.s_max - self.s_min) / (self.n_s - 1) as f64
    }

    pub fn s_node(&self, i: usize) -> f64 {
        self.s_min + i as f64 * self.ds()
    }

    pub fn n_t(&self) -> usize {
        self.time.len()
    }

    /// Total number of (s, t) nodes.
    pub fn node_count(&self) -> usize {
        self.n_s * self.n_t()
    }
}
