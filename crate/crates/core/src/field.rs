use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Nodal scalar samples on a grid.
#[derive(Debug, Clone, Serialize)]
pub struct ScalarField {
    #[serde(skip)]
    grid: Arc<Grid>,
    values: Vec<f64>,
}

/// Nodal samples of an `m`-vector, stored node-major.
#[derive(Debug, Clone, Serialize)]
pub struct HorizontalField {
    #[serde(skip)]
    grid: Arc<Grid>,
    m: usize,
    values: Vec<f64>,
}

pub(crate) fn same_grid(a: &Arc<Grid>, b: &Arc<Grid>) -> Result<()> {
    if Arc::ptr_eq(a, b) || **a == **b {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

fn check_finite(values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::InvalidArgument(format!("non-finite value at index {i}"))),
        None => Ok(()),
    }
}

impl ScalarField {
    pub fn zeros(grid: &Arc<Grid>) -> Self {
        Self { grid: grid.clone(), values: vec![0.0; grid.len()] }
    }

    pub fn constant(grid: &Arc<Grid>, c: f64) -> Self {
        Self { grid: grid.clone(), values: vec![c; grid.len()] }
    }

    pub fn from_values(grid: &Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), got: values.len() });
        }
        check_finite(&values)?;
        Ok(Self { grid: grid.clone(), values })
    }

    pub fn from_fn(grid: &Arc<Grid>, mut f: impl FnMut(&[f64]) -> f64) -> Self {
        let values = (0..grid.len()).map(|k| f(grid.coords(k))).collect();
        Self { grid: grid.clone(), values }
    }

    /// Field taking `values` on the interior nodes and zero on the shell.
    pub fn from_interior(grid: &Arc<Grid>, values: &[f64]) -> Result<Self> {
        if values.len() != grid.n_interior() {
            return Err(Error::DimensionMismatch { expected: grid.n_interior(), got: values.len() });
        }
        let mut out = vec![0.0; grid.len()];
        for (&node, &v) in grid.interior_nodes().iter().zip(values) {
            out[node] = v;
        }
        Ok(Self { grid: grid.clone(), values: out })
    }

    pub fn grid(&self) -> &Arc<Grid> {
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

    pub fn interior_values(&self) -> Vec<f64> {
        self.grid.interior_nodes().iter().map(|&k| self.values[k]).collect()
    }

    /// True when the field vanishes on every shell node.
    pub fn is_dirichlet(&self) -> bool {
        self.values.iter().zip(self.grid.interior_mask()).all(|(&v, &inside)| inside || v == 0.0)
    }

    /// Zeroes the shell values.
    pub fn masked(mut self) -> Self {
        for (v, &inside) in self.values.iter_mut().zip(self.grid.interior_mask()) {
            if !inside {
                *v = 0.0;
            }
        }
        self
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { grid: self.grid.clone(), values: self.values.iter().map(|v| c * v).collect() }
    }

    /// `self + c * other`.
    pub fn axpy(&self, c: f64, other: &ScalarField) -> Result<Self> {
        same_grid(&self.grid, &other.grid)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + c * b).collect();
        Ok(Self { grid: self.grid.clone(), values })
    }

    pub fn sub(&self, other: &ScalarField) -> Result<Self> {
        self.axpy(-1.0, other)
    }

    pub fn max_abs_diff(&self, other: &ScalarField) -> Result<f64> {
        same_grid(&self.grid, &other.grid)?;
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
    }

    /// Euclidean norm of the nodal vector.
    pub fn l2(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

impl HorizontalField {
    pub fn zeros(grid: &Arc<Grid>, m: usize) -> Self {
        Self { grid: grid.clone(), m, values: vec![0.0; grid.len() * m] }
    }

    pub fn from_values(grid: &Arc<Grid>, m: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() * m {
            return Err(Error::DimensionMismatch { expected: grid.len() * m, got: values.len() });
        }
        check_finite(&values)?;
        Ok(Self { grid: grid.clone(), m, values })
    }

    pub fn from_fn(grid: &Arc<Grid>, m: usize, f: impl Fn(&[f64], &mut [f64])) -> Self {
        let mut values = vec![0.0; grid.len() * m];
        for (k, chunk) in values.chunks_mut(m).enumerate() {
            f(grid.coords(k), chunk);
        }
        Self { grid: grid.clone(), m, values }
    }

    /// Constant vector `xi` at every node.
    pub fn constant(grid: &Arc<Grid>, xi: &[f64]) -> Self {
        Self::from_fn(grid, xi.len(), |_, out| out.copy_from_slice(xi))
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn components(&self) -> usize {
        self.m
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn at(&self, node: usize) -> &[f64] {
        &self.values[node * self.m..(node + 1) * self.m]
    }

    pub fn l2(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Componentwise `self * phi`.
    pub fn weighted(&self, phi: &ScalarField) -> Result<Self> {
        same_grid(&self.grid, phi.grid())?;
        let mut values = self.values.clone();
        for (chunk, &w) in values.chunks_mut(self.m).zip(phi.values()) {
            chunk.iter_mut().for_each(|v| *v *= w);
        }
        Ok(Self { grid: self.grid.clone(), m: self.m, values })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interior_roundtrip_is_dirichlet() {
        let g = Arc::new(Grid::cube(2, 0.0, 1.0, 4).unwrap());
        let f = ScalarField::from_interior(&g, &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!(f.is_dirichlet());
        assert_eq!(f.interior_values(), vec![1.0, 2.0, 3.0, 4.0]);
        let c = ScalarField::constant(&g, 1.0);
        assert!(!c.is_dirichlet());
        assert!(c.masked().is_dirichlet());
    }

    #[test]
    fn rejects_non_finite_and_mismatch() {
        let g = Arc::new(Grid::cube(1, 0.0, 1.0, 3).unwrap());
        assert!(ScalarField::from_values(&g, vec![0.0, f64::NAN, 0.0]).is_err());
        assert!(ScalarField::from_values(&g, vec![0.0; 2]).is_err());
        let h = Arc::new(Grid::cube(1, 0.0, 2.0, 3).unwrap());
        assert!(matches!(ScalarField::zeros(&g).sub(&ScalarField::zeros(&h)), Err(Error::GridMismatch)));
    }
}
