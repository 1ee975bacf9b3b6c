//! Uniform Cartesian grids on `[-L, L]^d` and centered difference operators.
//!
//! Nodes are stored row-major: in 2D the flat index of node `(i, j)` is
//! `i * n + j`, where `i` indexes the first coordinate. Boundary values are
//! data; the difference operators are only defined at interior nodes.

use arrayvec::ArrayVec;

use crate::error::{Error, Result};

pub const MAX_DIM: usize = 2;

/// Small fixed-capacity vector used for points, gradients and controls.
pub type Vector = ArrayVec<f64, MAX_DIM>;

const DIVISIBILITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    dim: usize,
    half_width: f64,
    h: f64,
    nodes_per_axis: usize,
}

/// Per-axis node index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeIndex {
    idx: [usize; MAX_DIM],
    dim: usize,
}

impl NodeIndex {
    pub fn new(indices: &[usize]) -> Result<Self> {
        if indices.is_empty() || indices.len() > MAX_DIM {
            return Err(Error::UnsupportedDimension(indices.len()));
        }
        let mut idx = [0; MAX_DIM];
        idx[..indices.len()].copy_from_slice(indices);
        Ok(Self {
            idx,
            dim: indices.len(),
        })
    }

    pub fn axis(&self, axis: usize) -> usize {
        self.idx[axis]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.idx[..self.dim]
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

impl Grid {
    /// Builds the grid with nodes `x_i = -L + i h`, `i = 0..=2L/h`.
    ///
    /// `2L/h` must be an integer up to a relative tolerance of 1e-9; the
    /// node count is never rounded silently.
    pub fn new(half_width: f64, h: f64, dim: usize) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::UnsupportedDimension(dim));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "half width must be positive and finite, got {half_width}"
            )));
        }
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "mesh size must be positive and finite, got {h}"
            )));
        }
        let cells = 2.0 * half_width / h;
        let rounded = cells.round();
        if (cells - rounded).abs() > DIVISIBILITY_TOL * rounded.max(1.0) {
            return Err(Error::InvalidGrid(format!(
                "2L/h = {cells} is not an integer (L = {half_width}, h = {h})"
            )));
        }
        let nodes_per_axis = rounded as usize + 1;
        if nodes_per_axis < 3 {
            return Err(Error::InvalidGrid(format!(
                "need at least 3 nodes per axis, got {nodes_per_axis}"
            )));
        }
        Ok(Self {
            dim,
            half_width,
            h,
            nodes_per_axis,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn nodes_per_axis(&self) -> usize {
        self.nodes_per_axis
    }

    pub fn len(&self) -> usize {
        self.nodes_per_axis.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Number of interior nodes per axis.
    pub fn interior_per_axis(&self) -> usize {
        self.nodes_per_axis - 2
    }

    pub fn interior_len(&self) -> usize {
        self.interior_per_axis().pow(self.dim as u32)
    }

    /// Flat-index offset of a unit step along `axis`.
    #[inline]
    pub fn stride(&self, axis: usize) -> usize {
        self.nodes_per_axis.pow((self.dim - 1 - axis) as u32)
    }

    /// Coordinate of axis index `i`.
    #[inline]
    pub fn axis_coord(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.h
    }

    pub fn flat(&self, node: NodeIndex) -> Result<usize> {
        if node.dim() != self.dim {
            return Err(Error::GridMismatch(format!(
                "node has dimension {}, grid has {}",
                node.dim(),
                self.dim
            )));
        }
        let mut flat = 0;
        for axis in 0..self.dim {
            let i = node.axis(axis);
            if i >= self.nodes_per_axis {
                return Err(Error::InvalidGrid(format!(
                    "index {i} out of range on axis {axis}"
                )));
            }
            flat = flat * self.nodes_per_axis + i;
        }
        Ok(flat)
    }

    pub fn node(&self, flat: usize) -> NodeIndex {
        let mut idx = [0; MAX_DIM];
        let mut rest = flat;
        for axis in (0..self.dim).rev() {
            idx[axis] = rest % self.nodes_per_axis;
            rest /= self.nodes_per_axis;
        }
        NodeIndex { idx, dim: self.dim }
    }

    #[inline]
    pub fn coord(&self, flat: usize) -> Vector {
        let node = self.node(flat);
        (0..self.dim)
            .map(|a| self.axis_coord(node.axis(a)))
            .collect()
    }

    #[inline]
    pub fn is_interior(&self, flat: usize) -> bool {
        let node = self.node(flat);
        node.as_slice()
            .iter()
            .all(|&i| i >= 1 && i + 2 <= self.nodes_per_axis)
    }

    /// Interior nodes in row-major (lexicographic) order.
    pub fn interior_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(move |&k| self.is_interior(k))
    }

    pub fn boundary_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(move |&k| !self.is_interior(k))
    }

    /// Flat index of the node nearest to `x`, clamped to the box.
    pub fn nearest_node(&self, x: &[f64]) -> Result<usize> {
        if x.len() != self.dim {
            return Err(Error::GridMismatch(format!(
                "point has dimension {}, grid has {}",
                x.len(),
                self.dim
            )));
        }
        let idx: Vec<usize> = x
            .iter()
            .map(|&xi| {
                let i = ((xi + self.half_width) / self.h).round();
                i.clamp(0.0, (self.nodes_per_axis - 1) as f64) as usize
            })
            .collect();
        self.flat(NodeIndex::new(&idx)?)
    }

    /// Samples `f` at every node.
    pub fn sample<F: Fn(&[f64]) -> f64>(&self, f: F) -> GridField {
        let values = (0..self.len()).map(|k| f(&self.coord(k))).collect();
        GridField {
            grid: *self,
            values,
        }
    }
}

/// Scalar values on every node of a grid, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    grid: Grid,
    values: Vec<f64>,
}

impl GridField {
    pub fn zeros(grid: &Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: &Grid, value: f64) -> Self {
        Self {
            grid: *grid,
            values: vec![value; grid.len()],
        }
    }

    pub fn from_values(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("value at node {k}")));
        }
        Ok(Self {
            grid: *grid,
            values,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, flat: usize) -> f64 {
        self.values[flat]
    }

    pub fn at(&self, node: NodeIndex) -> Result<f64> {
        Ok(self.values[self.grid.flat(node)?])
    }

    pub fn same_grid(&self, other: &GridField) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch(format!(
                "{:?} vs {:?}",
                self.grid, other.grid
            )));
        }
        Ok(())
    }

    /// `a * self + b * other`.
    pub fn combine(&self, a: f64, other: &GridField, b: f64) -> Result<GridField> {
        self.same_grid(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| a * x + b * y)
            .collect();
        Ok(GridField {
            grid: self.grid,
            values,
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_interior(&self) -> f64 {
        self.grid
            .interior_nodes()
            .fold(0.0, |m, k| m.max(self.values[k].abs()))
    }

    pub fn max_abs_boundary(&self) -> f64 {
        self.grid
            .boundary_nodes()
            .fold(0.0, |m, k| m.max(self.values[k].abs()))
    }

    /// Centered gradient at an interior flat index. No bounds check.
    #[inline]
    pub(crate) fn gradient_unchecked(&self, flat: usize) -> Vector {
        let inv_2h = 0.5 / self.grid.h;
        (0..self.grid.dim)
            .map(|axis| {
                let s = self.grid.stride(axis);
                (self.values[flat + s] - self.values[flat - s]) * inv_2h
            })
            .collect()
    }

    /// Centered Laplacian at an interior flat index. No bounds check.
    #[inline]
    pub(crate) fn laplacian_unchecked(&self, flat: usize) -> f64 {
        let h2 = self.grid.h * self.grid.h;
        let center = self.values[flat];
        (0..self.grid.dim)
            .map(|axis| {
                let s = self.grid.stride(axis);
                (self.values[flat + s] - 2.0 * center + self.values[flat - s]) / h2
            })
            .sum()
    }

    /// Centered gradient `(U(x + h e_i) - U(x - h e_i)) / 2h`.
    pub fn discrete_gradient(&self, node: NodeIndex) -> Result<Vector> {
        let flat = self.interior_flat(node)?;
        Ok(self.gradient_unchecked(flat))
    }

    /// Centered Laplacian `sum_i (U(x + h e_i) - 2U(x) + U(x - h e_i)) / h^2`.
    pub fn discrete_laplacian(&self, node: NodeIndex) -> Result<f64> {
        let flat = self.interior_flat(node)?;
        Ok(self.laplacian_unchecked(flat))
    }

    fn interior_flat(&self, node: NodeIndex) -> Result<usize> {
        let flat = self.grid.flat(node)?;
        if !self.grid.is_interior(flat) {
            return Err(Error::NotInterior(node.as_slice().to_vec()));
        }
        Ok(flat)
    }

    /// Copy of `self` with boundary nodes overwritten by `boundary_fn`.
    pub fn apply_dirichlet<F: Fn(&[f64]) -> f64>(&self, boundary_fn: F) -> Result<GridField> {
        let mut out = self.clone();
        for k in self.grid.boundary_nodes() {
            let v = boundary_fn(&self.grid.coord(k));
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("boundary value at node {k}")));
            }
            out.values[k] = v;
        }
        Ok(out)
    }

    /// Copy of `self` whose boundary nodes are taken from `data`.
    pub fn with_boundary_of(&self, data: &GridField) -> Result<GridField> {
        self.same_grid(data)?;
        let mut out = self.clone();
        for k in self.grid.boundary_nodes() {
            out.values[k] = data.values[k];
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn node1(i: usize) -> NodeIndex {
        NodeIndex::new(&[i]).unwrap()
    }

    #[test]
    fn node_counts() {
        assert_eq!(Grid::new(3.0, 0.03, 1).unwrap().nodes_per_axis(), 201);
        assert_eq!(Grid::new(2.0, 0.05, 2).unwrap().nodes_per_axis(), 81);
        let g = Grid::new(1.0, 1.0, 1).unwrap();
        assert_eq!(g.nodes_per_axis(), 3);
        assert_eq!(g.interior_nodes().count(), 1);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(matches!(Grid::new(1.0, 0.3, 1), Err(Error::InvalidGrid(_))));
        assert!(matches!(
            Grid::new(1.0, 0.1, 3),
            Err(Error::UnsupportedDimension(3))
        ));
        assert!(Grid::new(1.0, 0.1, 0).is_err());
        // 2L/h = 1 leaves no interior node
        assert!(Grid::new(1.0, 2.0, 1).is_err());
    }

    #[test]
    fn coordinates_follow_offset_rule() {
        let g = Grid::new(2.0, 0.05, 2).unwrap();
        let k = g.flat(NodeIndex::new(&[56, 24]).unwrap()).unwrap();
        let x = g.coord(k);
        assert_eq!(x[0], -2.0 + 56.0 * 0.05);
        assert_eq!(x[1], -2.0 + 24.0 * 0.05);
        assert_eq!(g.node(k).as_slice(), &[56, 24]);
        assert_eq!(g.interior_len(), 79 * 79);
        assert_eq!(g.interior_nodes().count(), 79 * 79);
    }

    #[test]
    fn gradient_examples() {
        let g = Grid::new(1.0, 0.1, 1).unwrap();
        let c = GridField::constant(&g, 4.2);
        assert_eq!(c.discrete_gradient(node1(5)).unwrap()[0], 0.0);
        let lin = g.sample(|x| x[0]);
        for i in 1..20 {
            let d = lin.discrete_gradient(node1(i)).unwrap()[0];
            assert!((d - 1.0).abs() < 1e-12, "{d}");
        }
        // x = 0.5 is node 15
        let sq = g.sample(|x| x[0] * x[0]);
        let d = sq.discrete_gradient(node1(15)).unwrap()[0];
        assert!((d - 1.0).abs() < 1e-12);
        assert!(matches!(
            sq.discrete_gradient(node1(0)),
            Err(Error::NotInterior(_))
        ));
        assert!(sq.discrete_laplacian(node1(20)).is_err());
    }

    #[test]
    fn laplacian_examples() {
        let g = Grid::new(2.0, 0.1, 1).unwrap();
        assert_eq!(
            GridField::constant(&g, -3.0)
                .discrete_laplacian(node1(7))
                .unwrap(),
            0.0
        );
        let sq = g.sample(|x| x[0] * x[0]);
        for i in 1..40 {
            let l = sq.discrete_laplacian(node1(i)).unwrap();
            assert!((l - 2.0).abs() < 1e-10, "{l}");
        }
        // x = 1 is node 30
        let cube = g.sample(|x| x[0].powi(3));
        let l = cube.discrete_laplacian(node1(30)).unwrap();
        assert!((l - 6.0).abs() < 1e-10, "{l}");
    }

    #[test]
    fn dirichlet_touches_only_boundary() {
        let g = Grid::new(1.0, 0.25, 2).unwrap();
        let f = GridField::constant(&g, 7.0);
        let out = f.apply_dirichlet(|_| 0.0).unwrap();
        for k in 0..g.len() {
            let expect = if g.is_interior(k) { 7.0 } else { 0.0 };
            assert_eq!(out.get(k), expect);
        }
        assert!(f.apply_dirichlet(|_| f64::NAN).is_err());
    }

    #[test]
    fn from_values_rejects_nan_and_size() {
        let g = Grid::new(1.0, 0.5, 1).unwrap();
        assert!(GridField::from_values(&g, vec![0.0; 4]).is_err());
        assert!(GridField::from_values(&g, vec![0.0, f64::NAN, 0.0, 0.0, 0.0]).is_err());
    }

    fn rel_close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
    }

    proptest! {
        #[test]
        fn operators_are_linear(
            seed_u in proptest::collection::vec(-5.0f64..5.0, 121),
            seed_w in proptest::collection::vec(-5.0f64..5.0, 121),
            a in -3.0f64..3.0,
            b in -3.0f64..3.0,
        ) {
            let g = Grid::new(1.0, 0.2, 2).unwrap();
            let u = GridField::from_values(&g, seed_u).unwrap();
            let w = GridField::from_values(&g, seed_w).unwrap();
            let mix = u.combine(a, &w, b).unwrap();
            for k in g.interior_nodes() {
                let gm = mix.gradient_unchecked(k);
                let gu = u.gradient_unchecked(k);
                let gw = w.gradient_unchecked(k);
                for axis in 0..2 {
                    prop_assert!(rel_close(gm[axis], a * gu[axis] + b * gw[axis], 1e-12));
                }
                let lm = mix.laplacian_unchecked(k);
                let lu = u.laplacian_unchecked(k);
                let lw = w.laplacian_unchecked(k);
                // Laplacian magnitudes scale like 1/h^2, compare relative to that scale
                let scale = lu.abs() + lw.abs() + 1.0;
                prop_assert!((lm - (a * lu + b * lw)).abs() <= 1e-12 * scale * 10.0);
            }
        }

        #[test]
        fn exact_on_low_degree_polynomials(
            c0 in -2.0f64..2.0, c1 in -2.0f64..2.0, c2 in -2.0f64..2.0, c3 in -2.0f64..2.0,
        ) {
            let g = Grid::new(1.0, 0.125, 1).unwrap();
            let cubic = g.sample(|x| c0 + c1 * x[0] + c2 * x[0].powi(2) + c3 * x[0].powi(3));
            let quad = g.sample(|x| c0 + c1 * x[0] + c2 * x[0].powi(2));
            for k in g.interior_nodes() {
                let x = g.coord(k)[0];
                let lap = cubic.laplacian_unchecked(k);
                prop_assert!(rel_close(lap, 2.0 * c2 + 6.0 * c3 * x, 1e-12));
                let grad = quad.gradient_unchecked(k)[0];
                prop_assert!(rel_close(grad, c1 + 2.0 * c2 * x, 1e-12));
            }
        }
    }
}
