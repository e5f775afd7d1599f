//! Sampled maps on the cylinder and on the circle.
//!
//! A `Field` stores u(s, t) s-major so that each s-slice (a loop) is
//! contiguous; every analysis pass (winding, crossings, projections) works on
//! slices.

use crate::error::{Error, Result};
use crate::fourier::Spectral;
use crate::grid::{CylinderGrid, TimeGrid};
use crate::plane::PlanePoint;
use serde::{Deserialize, Serialize};

/// One s-slice u(s, .): S^1 -> R^2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Loop {
    time: TimeGrid,
    values: Vec<PlanePoint>,
}

impl Loop {
    pub fn new(time: TimeGrid, values: Vec<PlanePoint>) -> Result<Self> {
        if values.len() != time.len() {
            return Err(Error::GridMismatch(format!(
                "loop has {} values for n_t = {}",
                values.len(),
                time.len()
            )));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::DegenerateInput("loop contains non-finite values".into()));
        }
        Ok(Loop { time, values })
    }

    pub fn constant(time: TimeGrid, value: PlanePoint) -> Self {
        Loop { time, values: vec![value; time.len()] }
    }

    pub fn from_fn(time: TimeGrid, f: impl Fn(f64) -> PlanePoint) -> Self {
        let values = time.nodes().map(f).collect();
        Loop { time, values }
    }

    pub fn time(&self) -> &TimeGrid {
        &self.time
    }

    pub fn values(&self) -> &[PlanePoint] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Spectral derivative d/dt, 1-periodic.
    pub fn d_t(&self) -> Loop {
        let plan = Spectral::for_grid(&self.time);
        Loop { time: self.time, values: plan.derivative(&self.values) }
    }

    /// Pointwise difference; grids must match.
    pub fn sub(&self, other: &Loop) -> Result<Loop> {
        if self.time != other.time {
            return Err(Error::GridMismatch("loop time grids differ".into()));
        }
        let values = self
            .values
            .iter()
            .zip(other.values.iter())
            .map(|(&a, &b)| a - b)
            .collect();
        Ok(Loop { time: self.time, values })
    }

    pub fn sup_dist(&self, other: &Loop) -> Result<f64> {
        if self.time != other.time {
            return Err(Error::GridMismatch("loop time grids differ".into()));
        }
        Ok(self
            .values
            .iter()
            .zip(other.values.iter())
            .map(|(&a, &b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn min_modulus(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(f64::INFINITY, f64::min)
    }

    /// Value at t in [0, 1), linear interpolation between adjacent nodes.
    pub fn interpolate(&self, t: f64) -> PlanePoint {
        let n = self.values.len();
        let tf = t.rem_euclid(1.0) * n as f64;
        let j0 = (tf.floor() as usize) % n;
        let j1 = (j0 + 1) % n;
        let frac = tf - tf.floor();
        self.values[j0] * (1.0 - frac) + self.values[j1] * frac
    }
}

/// Spectral derivative of a loop (convenience wrapper; builds a plan per call).
pub fn d_t(loop_: &Loop) -> Loop {
    loop_.d_t()
}

/// A sampled map u(s, t) on a truncated cylinder, s-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: CylinderGrid,
    values: Vec<PlanePoint>,
}

impl Field {
    pub fn new(grid: CylinderGrid, values: Vec<PlanePoint>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::GridMismatch(format!(
                "field has {} values for a {}x{} grid",
                values.len(),
                grid.n_s,
                grid.n_t()
            )));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::DegenerateInput("field contains non-finite values".into()));
        }
        Ok(Field { grid, values })
    }

    pub fn constant(grid: CylinderGrid, value: PlanePoint) -> Self {
        let n = grid.node_count();
        Field { grid, values: vec![value; n] }
    }

    pub fn zeros(grid: CylinderGrid) -> Self {
        Field::constant(grid, PlanePoint::ZERO)
    }

    pub fn from_fn(grid: CylinderGrid, f: impl Fn(f64, f64) -> PlanePoint) -> Self {
        let mut values = Vec::with_capacity(grid.node_count());
        for i in 0..grid.n_s {
            let s = grid.s_node(i);
            for t in grid.time.nodes() {
                values.push(f(s, t));
            }
        }
        Field { grid, values }
    }

    pub fn grid(&self) -> &CylinderGrid {
        &self.grid
    }

    pub fn values(&self) -> &[PlanePoint] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [PlanePoint] {
        &mut self.values
    }

    pub fn slice_at(&self, i: usize) -> &[PlanePoint] {
        let n_t = self.grid.n_t();
        &self.values[i * n_t..(i + 1) * n_t]
    }

    pub fn loop_at(&self, i: usize) -> Loop {
        Loop { time: self.grid.time, values: self.slice_at(i).to_vec() }
    }

    pub fn at(&self, i: usize, j: usize) -> PlanePoint {
        self.values[i * self.grid.n_t() + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: PlanePoint) {
        let n_t = self.grid.n_t();
        self.values[i * n_t + j] = v;
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// True when sup |u| <= bound.
    pub fn is_bounded_by(&self, bound: f64) -> bool {
        self.sup_norm() <= bound
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch("field grids differ".into()));
        }
        let values = self
            .values
            .iter()
            .zip(other.values.iter())
            .map(|(&a, &b)| a - b)
            .collect();
        Ok(Field { grid: self.grid, values })
    }

    pub fn sup_dist(&self, other: &Field) -> Result<f64> {
        Ok(self.sub(other)?.sup_norm())
    }

    /// Largest value jump between adjacent nodes, in either grid direction.
    /// Used as the resolution scale for validity thresholds.
    pub fn sup_resolution(&self) -> f64 {
        let n_s = self.grid.n_s;
        let n_t = self.grid.n_t();
        let mut res = 0.0f64;
        for i in 0..n_s {
            let row = self.slice_at(i);
            for j in 0..n_t {
                res = res.max((row[(j + 1) % n_t] - row[j]).norm());
            }
            if i + 1 < n_s {
                let next = self.slice_at(i + 1);
                for j in 0..n_t {
                    res = res.max((next[j] - row[j]).norm());
                }
            }
        }
        res
    }

    /// Tile an s-periodic field (last line equal to first) over `copies`
    /// periods. The result spans [s_min, s_min + copies * (s_max - s_min)].
    pub fn tile_periodic(&self, copies: usize) -> Result<Field> {
        if copies == 0 {
            return Err(Error::InvalidParameter("tile count must be >= 1".into()));
        }
        let n_t = self.grid.n_t();
        let n_s = self.grid.n_s;
        let first = self.slice_at(0);
        let last = self.slice_at(n_s - 1);
        let wrap_gap = first
            .iter()
            .zip(last.iter())
            .map(|(&a, &b)| (a - b).norm())
            .fold(0.0, f64::max);
        let scale = self.sup_norm().max(1.0);
        if wrap_gap > 1e-8 * scale {
            return Err(Error::Precondition(format!(
                "field is not s-periodic: end slices differ by {wrap_gap:.3e}"
            )));
        }
        let period_lines = n_s - 1;
        let total_lines = copies * period_lines + 1;
        let period = self.grid.s_max - self.grid.s_min;
        let grid = CylinderGrid::new(
            self.grid.s_min,
            self.grid.s_min + copies as f64 * period,
            total_lines,
            self.grid.time,
        )?;
        let mut values = Vec::with_capacity(total_lines * n_t);
        for line in 0..total_lines {
            let src = line % period_lines;
            values.extend_from_slice(self.slice_at(src));
        }
        Ok(Field { grid, values })
    }
}
