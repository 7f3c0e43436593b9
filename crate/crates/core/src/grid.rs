use serde::Serialize;

use crate::error::{Error, Result};

/// Uniform box mesh. Nodes are numbered row-major (last axis fastest); the
/// outer shell of nodes carries the homogeneous Dirichlet condition.
#[derive(Debug, Clone, Serialize)]
pub struct Grid {
    bounds: Vec<(f64, f64)>,
    shape: Vec<usize>,
    #[serde(skip)]
    spacing: Vec<f64>,
    #[serde(skip)]
    strides: Vec<usize>,
    #[serde(skip)]
    coords: Vec<f64>,
    #[serde(skip)]
    interior: Vec<bool>,
    #[serde(skip)]
    interior_nodes: Vec<usize>,
    #[serde(skip)]
    node_to_interior: Vec<usize>,
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.bounds == other.bounds && self.shape == other.shape
    }
}

pub(crate) const NOT_INTERIOR: usize = usize::MAX;

impl Grid {
    pub fn new(bounds: Vec<(f64, f64)>, shape: Vec<usize>) -> Result<Self> {
        if bounds.len() != shape.len() {
            return Err(Error::DimensionMismatch { expected: bounds.len(), got: shape.len() });
        }
        if shape.is_empty() {
            return Err(Error::InvalidArgument("grid needs at least one axis".into()));
        }
        for (axis, (&(a, b), &nodes)) in bounds.iter().zip(&shape).enumerate() {
            if nodes < 3 {
                return Err(Error::GridTooSmall { axis, nodes });
            }
            if !(a.is_finite() && b.is_finite() && b > a) {
                return Err(Error::InvalidArgument(format!("axis {axis}: empty interval [{a}, {b}]")));
            }
        }
        let dim = shape.len();
        let spacing: Vec<f64> = bounds.iter().zip(&shape).map(|(&(a, b), &n)| (b - a) / (n - 1) as f64).collect();
        let mut strides = vec![1; dim];
        for d in (0..dim - 1).rev() {
            strides[d] = strides[d + 1] * shape[d + 1];
        }
        let len: usize = shape.iter().product();
        let mut coords = Vec::with_capacity(len * dim);
        let mut interior = Vec::with_capacity(len);
        let mut interior_nodes = Vec::new();
        let mut node_to_interior = vec![NOT_INTERIOR; len];
        let mut idx = vec![0usize; dim];
        for node in 0..len {
            let mut inside = true;
            for d in 0..dim {
                coords.push(bounds[d].0 + idx[d] as f64 * spacing[d]);
                inside &= idx[d] > 0 && idx[d] + 1 < shape[d];
            }
            interior.push(inside);
            if inside {
                node_to_interior[node] = interior_nodes.len();
                interior_nodes.push(node);
            }
            for d in (0..dim).rev() {
                idx[d] += 1;
                if idx[d] < shape[d] {
                    break;
                }
                idx[d] = 0;
            }
        }
        Ok(Self { bounds, shape, spacing, strides, coords, interior, interior_nodes, node_to_interior })
    }

    /// Unit-style cube `[a, b]^dim` with `nodes` points per axis.
    pub fn cube(dim: usize, a: f64, b: f64, nodes: usize) -> Result<Self> {
        Self::new(vec![(a, b); dim], vec![nodes; dim])
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub(crate) fn strides(&self) -> &[usize] {
        &self.strides
    }

    /// Number of nodes.
    pub fn len(&self) -> usize {
        self.interior.len()
    }

    pub fn is_empty(&self) -> bool {
        self.interior.is_empty()
    }

    pub fn n_interior(&self) -> usize {
        self.interior_nodes.len()
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    /// Nodal measure of the box: every node carries one cell volume.
    pub fn measure(&self) -> f64 {
        self.len() as f64 * self.cell_volume()
    }

    pub fn coords(&self, node: usize) -> &[f64] {
        let d = self.dim();
        &self.coords[node * d..(node + 1) * d]
    }

    pub fn index(&self, node: usize, axis: usize) -> usize {
        (node / self.strides[axis]) % self.shape[axis]
    }

    pub fn node_at(&self, index: &[usize]) -> usize {
        index.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    pub fn is_interior(&self, node: usize) -> bool {
        self.interior[node]
    }

    pub fn interior_mask(&self) -> &[bool] {
        &self.interior
    }

    pub fn interior_nodes(&self) -> &[usize] {
        &self.interior_nodes
    }

    pub(crate) fn interior_slot(&self, node: usize) -> usize {
        self.node_to_interior[node]
    }

    /// Distance (in nodes) from `node` to the outer shell.
    pub fn shell_distance(&self, node: usize) -> usize {
        (0..self.dim())
            .map(|d| {
                let i = self.index(node, d);
                i.min(self.shape[d] - 1 - i)
            })
            .min()
            .unwrap_or(0)
    }

    /// Grid with `factor` times as many cells per axis over the same box.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        let shape = self.shape.iter().map(|&n| factor * (n - 1) + 1).collect();
        Self::new(self.bounds.clone(), shape)
    }
}
