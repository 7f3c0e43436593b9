use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::Grid;

/// Minimum ramp width in cells.
pub const MIN_RAMP_CELLS: f64 = 3.0;

/// Tensor-product cutoff: 1 on the window `inner`, 0 beyond `width` from it,
/// with a quintic smoothstep ramp in between.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CutoffSpec {
    pub inner: Vec<(f64, f64)>,
    pub width: Vec<f64>,
}

fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * t * (10.0 - 15.0 * t + 6.0 * t * t)
}

impl CutoffSpec {
    /// Window `inner` with ramp width 1/8 of the box length per axis.
    pub fn with_default_width(grid: &Grid, inner: Vec<(f64, f64)>) -> Self {
        let width = grid.bounds().iter().map(|(a, b)| (b - a) / 8.0).collect();
        Self { inner, width }
    }

    /// Checks that the support stays inside the box and every ramp spans at
    /// least three cells.
    pub fn validate(&self, grid: &Grid) -> Result<()> {
        if self.inner.len() != grid.dim() || self.width.len() != grid.dim() {
            return Err(Error::DimensionMismatch { expected: grid.dim(), got: self.inner.len().min(self.width.len()) });
        }
        for (j, (((lo, hi), w), ((a, b), h))) in
            self.inner.iter().zip(&self.width).zip(grid.bounds().iter().zip(grid.spacing())).enumerate()
        {
            if !(hi > lo) {
                return Err(Error::InvalidArgument(format!("cutoff window is empty on axis {j}")));
            }
            if *w < MIN_RAMP_CELLS * h {
                return Err(Error::InvalidArgument(format!(
                    "cutoff ramp on axis {j} spans {:.2} cells, at least {MIN_RAMP_CELLS} are required",
                    w / h
                )));
            }
            if lo - w < a + h || hi + w > b - h {
                return Err(Error::InvalidArgument(format!("cutoff support reaches the boundary on axis {j}")));
            }
        }
        Ok(())
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(&self.inner)
            .zip(&self.width)
            .map(|((v, (lo, hi)), w)| {
                if v < lo {
                    smoothstep((v - (lo - w)) / w)
                } else if v > hi {
                    smoothstep(((hi + w) - v) / w)
                } else {
                    1.0
                }
            })
            .product()
    }

    pub fn sample(&self, grid: &Arc<Grid>) -> Result<ScalarField> {
        self.validate(grid)?;
        Ok(ScalarField::from_fn(grid, |x| self.eval(x)))
    }

    /// Nodes of the half-open window `[lo, hi)` along every axis.
    pub fn window_nodes(&self, grid: &Grid) -> Vec<usize> {
        let eps = 1e-9;
        (0..grid.len())
            .filter(|&k| {
                grid.coords(k).iter().zip(&self.inner).zip(grid.spacing()).all(|((v, (lo, hi)), h)| *v >= lo - eps * h && *v < hi - eps * h)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plateau_and_support() {
        let g = Arc::new(Grid::cube(2, 0.0, 1.0, 33).unwrap());
        let c = CutoffSpec::with_default_width(&g, vec![(0.25, 0.75); 2]);
        let phi = c.sample(&g).unwrap();
        for k in 0..g.len() {
            let x = g.coords(k);
            let v = phi.values()[k];
            assert!((0.0..=1.0).contains(&v));
            if x.iter().all(|t| (0.25..=0.75).contains(t)) {
                assert_eq!(v, 1.0);
            }
            if x.iter().any(|t| *t <= 0.125 || *t >= 0.875) {
                assert_eq!(v, 0.0);
            }
        }
        assert!(phi.is_dirichlet());
        // 16 x 16 nodes in [0.25, 0.75)
        assert_eq!(c.window_nodes(&g).len(), 256);
    }

    #[test]
    fn thin_ramp_rejected() {
        let g = Grid::cube(2, 0.0, 1.0, 17).unwrap();
        let c = CutoffSpec { inner: vec![(0.3, 0.7); 2], width: vec![0.1; 2] };
        assert!(c.validate(&g).is_err());
        let c = CutoffSpec { inner: vec![(0.1, 0.9); 2], width: vec![0.2; 2] };
        assert!(c.validate(&g).is_err());
    }

    #[test]
    fn ramp_is_c1() {
        let d = 1e-6;
        for t in [0.0, 1.0] {
            let slope = (smoothstep(t + d) - smoothstep(t - d)) / (2.0 * d);
            assert!(slope.abs() < 1e-6);
        }
    }
}
