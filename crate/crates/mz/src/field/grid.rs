//! Uniform rectangular grids and multi-component node data.

use crate::error::MzError;
use crate::Result;
use serde::{Deserialize, Serialize};

/// Out-of-domain convention: constant extension by the boundary value, or
/// torus wraparound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Extend,
    Periodic,
}

/// A uniform rectangular grid with spacing `h`, origin, and a boundary
/// convention.  Nodes are indexed row-major with the last axis fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub dim: usize,
    pub shape: Vec<usize>,
    pub spacing: f64,
    pub origin: Vec<f64>,
    pub boundary: Boundary,
}

impl Grid {
    pub fn new(shape: Vec<usize>, spacing: f64, origin: Vec<f64>, boundary: Boundary) -> Result<Self> {
        let grid = Grid { dim: shape.len(), shape, spacing, origin, boundary };
        grid.validate()?;
        Ok(grid)
    }

    /// Convenience: `n^d` nodes on `[0, len]^d` (extend) or `[0, len)` cells
    /// (periodic), origin 0.
    pub fn cube(dim: usize, n: usize, len: f64, boundary: Boundary) -> Result<Self> {
        let spacing = match boundary {
            Boundary::Extend => len / ((n - 1) as f64),
            Boundary::Periodic => len / (n as f64),
        };
        Grid::new(vec![n; dim], spacing, vec![0.0; dim], boundary)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.dim > 5 {
            return Err(MzError::Argument(format!("grid dim {} outside 1..=5", self.dim)));
        }
        if self.shape.len() != self.dim || self.origin.len() != self.dim {
            return Err(MzError::Argument("shape/origin length must equal dim".into()));
        }
        if self.shape.iter().any(|&s| s < 5) {
            return Err(MzError::Argument("every shape entry must be >= 5 (stencil width)".into()));
        }
        if !(self.spacing > 0.0) || !self.spacing.is_finite() {
            return Err(MzError::Argument(format!("spacing {} must be positive", self.spacing)));
        }
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        self.shape.iter().product()
    }

    /// Row-major strides, last axis fastest.
    pub fn strides(&self) -> Vec<usize> {
        let mut s = vec![1usize; self.dim];
        for a in (0..self.dim.saturating_sub(1)).rev() {
            s[a] = s[a + 1] * self.shape[a + 1];
        }
        s
    }

    pub fn lin(&self, idx: &[usize]) -> usize {
        let mut l = 0usize;
        for a in 0..self.dim {
            l = l * self.shape[a] + idx[a];
        }
        l
    }

    pub fn fill_multi(&self, mut lin: usize, idx: &mut [usize]) {
        for a in (0..self.dim).rev() {
            idx[a] = lin % self.shape[a];
            lin /= self.shape[a];
        }
    }

    pub fn coord_of(&self, idx: &[usize], out: &mut [f64]) {
        for a in 0..self.dim {
            out[a] = self.origin[a] + self.spacing * idx[a] as f64;
        }
    }

    pub fn coord(&self, idx: &[usize]) -> Vec<f64> {
        let mut c = vec![0.0; self.dim];
        self.coord_of(idx, &mut c);
        c
    }

    /// Map a possibly out-of-range signed index to a valid linear node index
    /// per the boundary convention.
    pub fn resolve(&self, idx: &[isize]) -> usize {
        let mut l = 0usize;
        for a in 0..self.dim {
            let n = self.shape[a] as isize;
            let i = match self.boundary {
                Boundary::Extend => idx[a].clamp(0, n - 1),
                Boundary::Periodic => idx[a].rem_euclid(n),
            };
            l = l * self.shape[a] + i as usize;
        }
        l
    }

    /// Upper corner of the node box (the last node's coordinates).
    pub fn upper(&self) -> Vec<f64> {
        (0..self.dim)
            .map(|a| self.origin[a] + self.spacing * (self.shape[a] - 1) as f64)
            .collect()
    }

    /// Whether the closed ball `B_r(center)` lies inside the node box.
    pub fn contains_ball(&self, center: &[f64], r: f64) -> bool {
        let upper = self.upper();
        (0..self.dim).all(|a| center[a] - r >= self.origin[a] - 1e-12 && center[a] + r <= upper[a] + 1e-12)
    }

    /// Measure element `h^d`.
    pub fn cell_measure(&self) -> f64 {
        self.spacing.powi(self.dim as i32)
    }

    /// Total measure of the node box (extend) or torus (periodic).
    pub fn domain_measure(&self) -> f64 {
        match self.boundary {
            Boundary::Extend => (0..self.dim)
                .map(|a| self.spacing * (self.shape[a] - 1) as f64)
                .product(),
            Boundary::Periodic => (0..self.dim)
                .map(|a| self.spacing * self.shape[a] as f64)
                .product(),
        }
    }
}

/// Multi-component scalar data on a grid: one `m`-vector per node, row-major
/// node order, component-fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub grid: Grid,
    pub components: usize,
    pub data: Vec<f64>,
}

impl GridField {
    pub fn zeros(grid: Grid, components: usize) -> Self {
        let n = grid.node_count() * components;
        GridField { grid, components, data: vec![0.0; n] }
    }

    pub fn from_fn<F: FnMut(&[f64], &mut [f64])>(grid: Grid, components: usize, mut f: F) -> Self {
        let mut field = GridField::zeros(grid, components);
        let dim = field.grid.dim;
        let mut idx = vec![0usize; dim];
        let mut x = vec![0.0f64; dim];
        for n in 0..field.grid.node_count() {
            field.grid.fill_multi(n, &mut idx);
            field.grid.coord_of(&idx, &mut x);
            let off = n * components;
            f(&x, &mut field.data[off..off + components]);
        }
        field
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if self.components == 0 {
            return Err(MzError::Argument("components must be >= 1".into()));
        }
        let expected = self.grid.node_count() * self.components;
        if self.data.len() != expected {
            return Err(MzError::Format(format!(
                "payload length {} does not match shape/components product {}",
                self.data.len(),
                expected
            )));
        }
        if self.data.iter().any(|v| !v.is_finite()) {
            return Err(MzError::Format("field contains non-finite values".into()));
        }
        Ok(())
    }

    #[inline]
    pub fn value(&self, node: usize, comp: usize) -> f64 {
        self.data[node * self.components + comp]
    }

    #[inline]
    pub fn values(&self, node: usize) -> &[f64] {
        &self.data[node * self.components..(node + 1) * self.components]
    }

    #[inline]
    pub fn set(&mut self, node: usize, comp: usize, v: f64) {
        self.data[node * self.components + comp] = v;
    }

    /// Max Euclidean norm of the component vector over all nodes.
    pub fn sup_norm(&self) -> f64 {
        let m = self.components;
        let mut best = 0.0f64;
        for n in 0..self.grid.node_count() {
            let mut s = 0.0;
            for c in 0..m {
                let v = self.value(n, c);
                s += v * v;
            }
            best = best.max(s);
        }
        best.sqrt()
    }

    /// Nodes whose values differ from `other` (bit comparison), as a measure
    /// `count * h^d` plus the raw count.
    pub fn differing_measure(&self, other: &GridField) -> Result<(f64, usize)> {
        if self.grid != other.grid || self.components != other.components {
            return Err(MzError::GridMismatch("fields live on different grids".into()));
        }
        let m = self.components;
        let mut count = 0usize;
        for n in 0..self.grid.node_count() {
            if self.values(n) != other.values(n) {
                count += 1;
            }
            let _ = m;
        }
        Ok((count as f64 * self.grid.cell_measure(), count))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_round_trip() {
        let g = Grid::new(vec![5, 7, 6], 0.5, vec![0.0; 3], Boundary::Extend).unwrap();
        let mut idx = vec![0usize; 3];
        for n in 0..g.node_count() {
            g.fill_multi(n, &mut idx);
            assert_eq!(g.lin(&idx), n);
        }
    }

    #[test]
    fn resolve_boundary_conventions() {
        let g = Grid::new(vec![5, 5], 1.0, vec![0.0; 2], Boundary::Extend).unwrap();
        assert_eq!(g.resolve(&[-2, 7]), g.lin(&[0, 4]));
        let g = Grid::new(vec![5, 5], 1.0, vec![0.0; 2], Boundary::Periodic).unwrap();
        assert_eq!(g.resolve(&[-2, 7]), g.lin(&[3, 2]));
    }

    #[test]
    fn shape_floor_enforced() {
        assert!(Grid::new(vec![4, 8], 1.0, vec![0.0; 2], Boundary::Extend).is_err());
    }
}
