//! Phase-space mesh: periodic in `x` with `nx + 1` distinct nodes per period,
//! truncated in `v` to `[-vmax, vmax]` with `nv + 1` nodes.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    V,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseGrid {
    length: f64,
    vmax: f64,
    nx: usize,
    nv: usize,
    dx: f64,
    dv: f64,
}

impl PhaseGrid {
    /// `nx` counts x intervals per period (the node set is `0..=nx`, node
    /// `nx + 1` being identified with node 0), `nv` counts v intervals.
    pub fn new(length: f64, vmax: f64, nx: usize, nv: usize) -> Result<Self> {
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::Config(format!("period length must be positive, got {length}")));
        }
        if !(vmax.is_finite() && vmax > 0.0) {
            return Err(Error::Config(format!("velocity half-width must be positive, got {vmax}")));
        }
        if nx < 2 || nv < 2 {
            return Err(Error::Config(format!(
                "need at least 2 intervals per axis, got nx={nx}, nv={nv}"
            )));
        }
        Ok(Self {
            length,
            vmax,
            nx,
            nv,
            dx: length / (nx + 1) as f64,
            dv: 2.0 * vmax / nv as f64,
        })
    }

    /// Builds a grid from the number of distinct x nodes, i.e. `nx = nodes_x - 1`.
    pub fn from_nodes(length: f64, vmax: f64, nodes_x: usize, nv: usize) -> Result<Self> {
        if nodes_x < 3 {
            return Err(Error::Config(format!("need at least 3 x nodes, got {nodes_x}")));
        }
        Self::new(length, vmax, nodes_x - 1, nv)
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn vmax(&self) -> f64 {
        self.vmax
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn nv(&self) -> usize {
        self.nv
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn dv(&self) -> f64 {
        self.dv
    }

    /// `max(dx, dv)`.
    pub fn h(&self) -> f64 {
        self.dx.max(self.dv)
    }

    /// Number of distinct x nodes.
    pub fn x_nodes(&self) -> usize {
        self.nx + 1
    }

    pub fn v_nodes(&self) -> usize {
        self.nv + 1
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.x_nodes(), self.v_nodes())
    }

    pub fn node_count(&self) -> usize {
        self.x_nodes() * self.v_nodes()
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.dx
    }

    #[inline]
    pub fn v(&self, j: usize) -> f64 {
        -self.vmax + j as f64 * self.dv
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.x_nodes()).map(|i| self.x(i)).collect()
    }

    pub fn vs(&self) -> Vec<f64> {
        (0..self.v_nodes()).map(|j| self.v(j)).collect()
    }

    /// Periodic index in x, accepting any signed offset.
    #[inline]
    pub fn wrap_index(&self, i: isize) -> usize {
        i.rem_euclid(self.x_nodes() as isize) as usize
    }

    /// Maps `x` into `[0, L)`.
    #[inline]
    pub fn wrap_x(&self, x: f64) -> f64 {
        let r = x.rem_euclid(self.length);
        // rem_euclid can round up to exactly L for tiny negative inputs
        if r >= self.length {
            0.0
        } else {
            r
        }
    }

    /// Cell index and offset in `[0, 1)` with `u = node_p + alpha * spacing`.
    /// The x coordinate is wrapped first; a v coordinate outside
    /// `[-vmax, vmax]` is an error. `v = vmax` maps to `(nv, 0)`.
    pub fn locate(&self, u: f64, axis: Axis) -> Result<(usize, f64)> {
        match axis {
            Axis::X => Ok(self.locate_x(u)),
            Axis::V => self
                .locate_v(u)
                .ok_or(Error::OutOfDomain { v: u, vmax: self.vmax }),
        }
    }

    #[inline]
    pub(crate) fn locate_x(&self, x: f64) -> (usize, f64) {
        let s = self.wrap_x(x) / self.dx;
        let p = s.floor();
        let alpha = s - p;
        let p = p as usize;
        if p >= self.x_nodes() {
            (p - self.x_nodes(), alpha)
        } else {
            (p, alpha)
        }
    }

    #[inline]
    pub(crate) fn locate_v(&self, v: f64) -> Option<(usize, f64)> {
        if !(v >= -self.vmax && v <= self.vmax) {
            return None;
        }
        let s = (v + self.vmax) / self.dv;
        let p = s.floor();
        let alpha = s - p;
        let p = p as usize;
        if p > self.nv {
            // rounding at the upper boundary
            Some((self.nv, 0.0))
        } else {
            Some((p, alpha))
        }
    }
}

/// Nodal values on the phase grid, stored row-major with one row per `v_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseArray {
    nx_nodes: usize,
    nv_nodes: usize,
    data: Vec<f64>,
}

impl PhaseArray {
    pub fn zeros(grid: &PhaseGrid) -> Self {
        Self::filled(grid, 0.0)
    }

    pub fn filled(grid: &PhaseGrid, value: f64) -> Self {
        let (nx_nodes, nv_nodes) = grid.shape();
        Self {
            nx_nodes,
            nv_nodes,
            data: vec![value; nx_nodes * nv_nodes],
        }
    }

    pub fn from_fn(grid: &PhaseGrid, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let (nx_nodes, nv_nodes) = grid.shape();
        let mut data = Vec::with_capacity(nx_nodes * nv_nodes);
        for j in 0..nv_nodes {
            let v = grid.v(j);
            for i in 0..nx_nodes {
                data.push(f(grid.x(i), v));
            }
        }
        Self {
            nx_nodes,
            nv_nodes,
            data,
        }
    }

    pub fn from_fn_indexed(grid: &PhaseGrid, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let (nx_nodes, nv_nodes) = grid.shape();
        let mut data = Vec::with_capacity(nx_nodes * nv_nodes);
        for j in 0..nv_nodes {
            for i in 0..nx_nodes {
                data.push(f(i, j));
            }
        }
        Self {
            nx_nodes,
            nv_nodes,
            data,
        }
    }

    /// `data` is row-major with `v` rows of `x_nodes` entries.
    pub fn from_vec(grid: &PhaseGrid, data: Vec<f64>) -> Result<Self> {
        let (nx_nodes, nv_nodes) = grid.shape();
        if data.len() != nx_nodes * nv_nodes {
            return Err(Error::Shape {
                expected: (nx_nodes, nv_nodes),
                found: (data.len(), 1),
            });
        }
        Ok(Self {
            nx_nodes,
            nv_nodes,
            data,
        })
    }

    /// `(x nodes, v nodes)`.
    pub fn shape(&self) -> (usize, usize) {
        (self.nx_nodes, self.nv_nodes)
    }

    pub fn check_shape(&self, grid: &PhaseGrid) -> Result<()> {
        if self.shape() != grid.shape() {
            return Err(Error::Shape {
                expected: grid.shape(),
                found: self.shape(),
            });
        }
        Ok(())
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.nx_nodes + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[j * self.nx_nodes + i] = value;
    }

    #[inline]
    pub(crate) fn add(&mut self, i: usize, j: usize, value: f64) {
        self.data[j * self.nx_nodes + i] += value;
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.data[j * self.nx_nodes..(j + 1) * self.nx_nodes]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.data.iter()
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}
