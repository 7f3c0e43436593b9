//! Independent references for Euclidean experiments: a periodic cell-problem
//! solver for the effective tensor and a sine-transform solver for the
//! homogenized Dirichlet problem on a refined grid.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::linalg::pcg;
use crate::operator::Coefficient;

/// Effective tensor of `-div(a(y) grad)` with `a` periodic on the unit cell
/// of the first `m` coordinates (row-major `m x m`).
///
/// Cell-centered finite volumes on `cells^m` cells with harmonic face
/// coefficients; exact for laminates whose interfaces fall on faces.
pub fn cell_effective_tensor(coefficient: &Coefficient, m: usize, cells: usize) -> Result<Vec<f64>> {
    if m == 0 || cells < 2 {
        return Err(Error::InvalidArgument("cell problem needs m >= 1 and at least 2 cells".into()));
    }
    let periods: Vec<f64> = (0..m).map(|j| coefficient.period(j, m).unwrap_or(1.0)).collect();
    let h: Vec<f64> = periods.iter().map(|p| p / cells as f64).collect();
    let total = cells.pow(m as u32);
    let mut strides = vec![1usize; m];
    for j in (0..m.saturating_sub(1)).rev() {
        strides[j] = strides[j + 1] * cells;
    }
    let idx = |c: usize, j: usize| (c / strides[j]) % cells;
    let shift = |c: usize, j: usize, up: bool| {
        let i = idx(c, j);
        let ni = if up { (i + 1) % cells } else { (i + cells - 1) % cells };
        c - i * strides[j] + ni * strides[j]
    };
    let a: Vec<f64> = (0..total)
        .map(|c| {
            let y: Vec<f64> = (0..m).map(|j| (idx(c, j) as f64 + 0.5) * h[j]).collect();
            coefficient.eval(&y, m)
        })
        .collect();
    // harmonic mean on the face between c and c + e_j
    let faces: Vec<Vec<f64>> = (0..m)
        .map(|j| {
            (0..total)
                .map(|c| {
                    let (a0, a1) = (a[c], a[shift(c, j, true)]);
                    2.0 * a0 * a1 / (a0 + a1)
                })
                .collect()
        })
        .collect();
    // singular but consistent: the data sums to zero, so CG stays in the range
    let apply = |x: &[f64], y: &mut [f64]| {
        for c in 0..total {
            let mut acc = 0.0;
            for j in 0..m {
                let up = shift(c, j, true);
                let dn = shift(c, j, false);
                acc += (faces[j][c] * (x[c] - x[up]) + faces[j][dn] * (x[c] - x[dn])) / (h[j] * h[j]);
            }
            y[c] = acc;
        }
    };
    let mut tensor = vec![0.0; m * m];
    for k in 0..m {
        // rhs: div(a_face e_k)
        let b: Vec<f64> = (0..total).map(|c| (faces[k][c] - faces[k][shift(c, k, false)]) / h[k]).collect();
        let mut chi = vec![0.0; total];
        let diag: Vec<f64> =
            (0..total).map(|c| (0..m).map(|j| (faces[j][c] + faces[j][shift(c, j, false)]) / (h[j] * h[j])).sum()).collect();
        let out = pcg(&apply, |r, z| z.iter_mut().zip(r).zip(&diag).for_each(|((z, r), d)| *z = r / d), &b, &mut chi, 1e-12, 50 * total);
        if !out.converged {
            log::warn!("cell problem {k}: residual {:.2e}", out.residual_history.last().copied().unwrap_or(f64::NAN));
        }
        for j in 0..m {
            let mut acc = 0.0;
            for c in 0..total {
                let up = shift(c, j, true);
                let grad = (chi[up] - chi[c]) / h[j] + if j == k { 1.0 } else { 0.0 };
                acc += faces[j][c] * grad;
            }
            tensor[j * m + k] = acc / total as f64;
        }
    }
    Ok(tensor)
}

/// DST-I of every line along `axis` of a row-major array with the given shape.
fn dst_axis(data: &mut [f64], shape: &[usize], axis: usize, planner: &mut FftPlanner<f64>) {
    let l = shape[axis];
    let n = 2 * (l + 1);
    let fft = planner.plan_fft_forward(n);
    let stride: usize = shape[axis + 1..].iter().product();
    let total: usize = shape.iter().product();
    let mut buf = vec![Complex::new(0.0, 0.0); n];
    let mut scratch = vec![Complex::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    for start in 0..total {
        if (start / stride) % l != 0 {
            continue;
        }
        buf.iter_mut().for_each(|c| *c = Complex::new(0.0, 0.0));
        for i in 0..l {
            let v = data[start + i * stride];
            buf[i + 1] = Complex::new(v, 0.0);
            buf[n - 1 - i] = Complex::new(-v, 0.0);
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        for k in 0..l {
            data[start + k * stride] = -0.5 * buf[k + 1].im;
        }
    }
}

/// Solves `-sum_j a_j D_jj u = f` with the standard three-point stencil and
/// homogeneous Dirichlet data, returning nodal values on `grid`.
pub fn solve_homogenized(grid: &Grid, a_diag: &[f64], f: &[f64]) -> Result<Vec<f64>> {
    let d = grid.dim();
    if a_diag.len() != d || f.len() != grid.len() {
        return Err(Error::DimensionMismatch { expected: d, got: a_diag.len() });
    }
    let shape: Vec<usize> = grid.shape().iter().map(|n| n - 2).collect();
    let mut data: Vec<f64> = grid.interior_nodes().iter().map(|&k| f[k]).collect();
    let mut planner = FftPlanner::new();
    for axis in 0..d {
        dst_axis(&mut data, &shape, axis, &mut planner);
    }
    let eig: Vec<Vec<f64>> = (0..d)
        .map(|j| {
            let l = shape[j];
            let h = grid.spacing()[j];
            (1..=l)
                .map(|k| {
                    let s = (std::f64::consts::PI * k as f64 / (2.0 * (l + 1) as f64)).sin();
                    a_diag[j] * 4.0 * s * s / (h * h)
                })
                .collect()
        })
        .collect();
    let total = data.len();
    for (flat, v) in data.iter_mut().enumerate().take(total) {
        let mut rem = flat;
        let mut lam = 0.0;
        for j in (0..d).rev() {
            lam += eig[j][rem % shape[j]];
            rem /= shape[j];
        }
        *v /= lam;
    }
    for axis in 0..d {
        dst_axis(&mut data, &shape, axis, &mut planner);
        let scale = 2.0 / (shape[axis] + 1) as f64;
        data.iter_mut().for_each(|v| *v *= scale);
    }
    let mut out = vec![0.0; grid.len()];
    for (&k, v) in grid.interior_nodes().iter().zip(data) {
        out[k] = v;
    }
    Ok(out)
}

/// Centered-difference gradient at every node (one-sided on the shell).
pub fn euclidean_gradient(grid: &Grid, u: &[f64]) -> Vec<f64> {
    let d = grid.dim();
    let mut g = vec![0.0; grid.len() * d];
    for node in 0..grid.len() {
        for j in 0..d {
            let i = grid.index(node, j);
            let s = grid.strides()[j];
            let h = grid.spacing()[j];
            let last = grid.shape()[j] - 1;
            g[node * d + j] = if i == 0 {
                (u[node + s] - u[node]) / h
            } else if i == last {
                (u[node] - u[node - s]) / h
            } else {
                (u[node + s] - u[node - s]) / (2.0 * h)
            };
        }
    }
    g
}

/// Refined copy of `grid` for the reference solve.
pub fn refined_grid(grid: &Grid, factor: usize) -> Result<Arc<Grid>> {
    Ok(Arc::new(grid.refined(factor)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn laminate_means() {
        let t = cell_effective_tensor(&Coefficient::Laminate { a1: 1.0, a2: 4.0 }, 2, 32).unwrap();
        assert!((t[0] - 1.6).abs() < 1e-9, "{t:?}");
        assert!((t[3] - 2.5).abs() < 1e-9);
        assert!(t[1].abs() < 1e-9 && t[2].abs() < 1e-9);
    }

    #[test]
    fn constant_cell_is_trivial() {
        let t = cell_effective_tensor(&Coefficient::Constant(3.0), 2, 8).unwrap();
        assert!((t[0] - 3.0).abs() < 1e-12 && (t[3] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn checkerboard_geometric_mean() {
        let t = cell_effective_tensor(&Coefficient::Checkerboard { a1: 1.0, a2: 4.0 }, 2, 64).unwrap();
        assert!((t[0] - 2.0).abs() < 0.05, "{t:?}");
        assert!((t[0] - t[3]).abs() < 1e-8);
    }

    #[test]
    fn dst_solver_matches_manufactured() {
        // discrete eigenfunction: exact up to rounding
        let g = Grid::cube(2, 0.0, 1.0, 33).unwrap();
        let h = g.spacing()[0];
        let lam = 4.0 / (h * h) * (std::f64::consts::PI * h / 2.0).sin().powi(2);
        let pi = std::f64::consts::PI;
        let u: Vec<f64> = (0..g.len()).map(|k| (pi * g.coords(k)[0]).sin() * (pi * g.coords(k)[1]).sin()).collect();
        let a = [2.0, 3.0];
        let f: Vec<f64> = u.iter().map(|v| v * (a[0] + a[1]) * lam).collect();
        let sol = solve_homogenized(&g, &a, &f).unwrap();
        let err = sol.iter().zip(&u).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(err < 1e-12, "{err}");
    }
}
