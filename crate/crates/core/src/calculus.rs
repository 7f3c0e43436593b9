//! Discrete intrinsic calculus on a box grid.
//!
//! The horizontal gradient is an assembled sparse matrix `G` with one row per
//! `(node, component)`. Along each coordinate axis it uses centered
//! differences; on the outer shell the stencil is the centered difference of
//! the zero-extended field, `(u_1 - u_0) / 2h` and `(u_N - u_{N-1}) / 2h`.
//! With that closure the sum of `h * D u` over an axis telescopes to
//! `u_N - u_0`, so constant horizontal fields are exactly divergence free.
//! The divergence is `-G^T`, restricted to interior nodes, which makes the
//! discrete integration by parts exact for Dirichlet fields.

use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};
use crate::field::{same_grid, HorizontalField, ScalarField};
use crate::grid::{Grid, NOT_INTERIOR};
use crate::group::CarnotGroup;
use crate::linalg::{dot, pcg, BandedCholesky, Csr};

/// Largest band storage (in entries) for which the Riesz map is factored.
const DIRECT_LIMIT: usize = 8_000_000;
/// Relative accuracy of Riesz solves used to measure dual norms.
pub(crate) const MEASURE_RTOL: f64 = 1e-12;
/// Relative accuracy of Riesz solves used as a preconditioner.
pub(crate) const PRECOND_RTOL: f64 = 1e-2;

enum Riesz {
    Direct(BandedCholesky),
    Iterative { inv_diag: Vec<f64> },
}

/// Gradient, divergence, norms and pairings for one group on one grid.
pub struct Calculus {
    group: Arc<CarnotGroup>,
    grid: Arc<Grid>,
    grad_full: Csr,
    grad_int: Csr,
    laplacian: OnceLock<Csr>,
    riesz: OnceLock<Riesz>,
}

impl std::fmt::Debug for Calculus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Calculus").field("group", &self.group.name()).field("shape", &self.grid.shape()).finish()
    }
}

fn check_exponent(p: f64) -> Result<()> {
    if !(p >= 2.0) || !p.is_finite() {
        return Err(Error::UnsupportedExponent(p));
    }
    Ok(())
}

impl Calculus {
    pub fn new(group: Arc<CarnotGroup>, grid: Arc<Grid>) -> Result<Self> {
        if grid.dim() != group.dim() {
            return Err(Error::DimensionMismatch { expected: group.dim(), got: grid.dim() });
        }
        let n = group.dim();
        let m = group.horizontal_dim();
        let len = grid.len();
        let mut triplets = Vec::with_capacity(len * m * 4);
        for node in 0..len {
            let x = grid.coords(node);
            for i in 0..m {
                let row = node * m + i;
                for j in 0..n {
                    let poly = group.coefficient(i, j);
                    if poly.is_zero() {
                        continue;
                    }
                    let c = poly.eval(x);
                    if c == 0.0 {
                        continue;
                    }
                    let w = c / (2.0 * grid.spacing()[j]);
                    let k = grid.index(node, j);
                    let s = grid.strides()[j];
                    let last = grid.shape()[j] - 1;
                    let (hi, lo) = if k == 0 {
                        (node + s, node)
                    } else if k == last {
                        (node, node - s)
                    } else {
                        (node + s, node - s)
                    };
                    triplets.push((row, hi, w));
                    triplets.push((row, lo, -w));
                }
            }
        }
        let interior: Vec<(usize, usize, f64)> = triplets
            .iter()
            .filter_map(|&(r, c, v)| {
                let slot = grid.interior_slot(c);
                (slot != NOT_INTERIOR).then_some((r, slot, v))
            })
            .collect();
        let grad_full = Csr::from_triplets(len * m, len, triplets);
        let grad_int = Csr::from_triplets(len * m, grid.n_interior(), interior);
        Ok(Self { group, grid, grad_full, grad_int, laplacian: OnceLock::new(), riesz: OnceLock::new() })
    }

    pub fn group(&self) -> &Arc<CarnotGroup> {
        &self.group
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn horizontal_dim(&self) -> usize {
        self.group.horizontal_dim()
    }

    /// `|Omega|` under the nodal quadrature.
    pub fn measure(&self) -> f64 {
        self.grid.measure()
    }

    /// Gradient matrix acting on all nodal values.
    pub fn gradient_matrix(&self) -> &Csr {
        &self.grad_full
    }

    /// Gradient matrix acting on interior values (Dirichlet fields).
    pub fn interior_gradient_matrix(&self) -> &Csr {
        &self.grad_int
    }

    /// `G_int^T G_int`, the discrete sub-Laplacian on interior unknowns.
    pub fn laplacian(&self) -> &Csr {
        self.laplacian.get_or_init(|| {
            let m = self.horizontal_dim();
            let mut eye = vec![0.0; self.grid.len() * m * m];
            for block in eye.chunks_mut(m * m) {
                for i in 0..m {
                    block[i * m + i] = 1.0;
                }
            }
            self.grad_int.weighted_gram(m, &eye)
        })
    }

    fn riesz(&self) -> &Riesz {
        self.riesz.get_or_init(|| {
            let l0 = self.laplacian();
            let n = l0.nrows();
            if n * (l0.bandwidth() + 1) <= DIRECT_LIMIT {
                if let Ok(chol) = BandedCholesky::factor(l0) {
                    return Riesz::Direct(chol);
                }
            }
            Riesz::Iterative { inv_diag: l0.diagonal().iter().map(|d| 1.0 / d).collect() }
        })
    }

    /// True when the Riesz map is applied by a direct factorization.
    pub fn riesz_is_direct(&self) -> bool {
        matches!(self.riesz(), Riesz::Direct(_))
    }

    /// Solves `L0 w = b` on interior unknowns to relative accuracy `rtol`
    /// (exact when factored).
    pub(crate) fn riesz_solve(&self, b: &[f64], rtol: f64) -> Vec<f64> {
        match self.riesz() {
            Riesz::Direct(chol) => {
                let mut w = b.to_vec();
                chol.solve_in_place(&mut w);
                w
            }
            Riesz::Iterative { inv_diag } => {
                let l0 = self.laplacian();
                let mut w = vec![0.0; b.len()];
                pcg(
                    |x, y| l0.mul_vec(x, y),
                    |r, z| z.iter_mut().zip(r).zip(inv_diag).for_each(|((z, r), d)| *z = r * d),
                    b,
                    &mut w,
                    rtol,
                    100 * b.len().max(100),
                );
                w
            }
        }
    }

    /// Riesz dual norm `sqrt(vol * b^T L0^{-1} b)` of interior data.
    pub(crate) fn riesz_norm(&self, b: &[f64]) -> f64 {
        if b.iter().all(|&v| v == 0.0) {
            return 0.0;
        }
        let w = self.riesz_solve(b, MEASURE_RTOL);
        (self.grid.cell_volume() * dot(b, &w)).max(0.0).sqrt()
    }

    fn check_scalar(&self, u: &ScalarField) -> Result<()> {
        same_grid(&self.grid, u.grid())
    }

    fn check_horizontal(&self, phi: &HorizontalField) -> Result<()> {
        same_grid(&self.grid, phi.grid())?;
        if phi.components() != self.horizontal_dim() {
            return Err(Error::DimensionMismatch { expected: self.horizontal_dim(), got: phi.components() });
        }
        Ok(())
    }

    /// Horizontal gradient of any nodal field.
    pub fn grad(&self, u: &ScalarField) -> Result<HorizontalField> {
        self.check_scalar(u)?;
        let mut out = vec![0.0; self.grad_full.nrows()];
        self.grad_full.mul_vec(u.values(), &mut out);
        HorizontalField::from_values(&self.grid, self.horizontal_dim(), out)
    }

    /// Gradient of the Dirichlet field with the given interior values.
    pub(crate) fn grad_interior(&self, u_int: &[f64], out: &mut [f64]) {
        self.grad_int.mul_vec(u_int, out);
    }

    /// `G_int^T phi`, the weak divergence with the sign flipped.
    pub(crate) fn grad_interior_t(&self, phi: &[f64], out: &mut [f64]) {
        self.grad_int.mul_t_vec(phi, out);
    }

    /// Negative adjoint of [`Calculus::grad`] on Dirichlet fields; zero on the shell.
    pub fn div(&self, phi: &HorizontalField) -> Result<ScalarField> {
        self.check_horizontal(phi)?;
        let mut out = vec![0.0; self.grid.n_interior()];
        self.grad_int.mul_t_vec(phi.values(), &mut out);
        out.iter_mut().for_each(|v| *v = -*v);
        ScalarField::from_interior(&self.grid, &out)
    }

    /// `(sum_nodes |grad u|^p vol)^{1/p}`.
    pub fn v_norm(&self, u: &ScalarField, p: f64) -> Result<f64> {
        check_exponent(p)?;
        let g = self.grad(u)?;
        self.lp_norm(&g, p)
    }

    /// `(sum_nodes |phi|^q vol)^{1/q}` for `q >= 1`.
    pub fn lp_norm(&self, phi: &HorizontalField, q: f64) -> Result<f64> {
        self.check_horizontal(phi)?;
        if !(q >= 1.0) {
            return Err(Error::InvalidArgument(format!("exponent {q} below 1")));
        }
        Ok(lp_norm_raw(phi.values(), self.horizontal_dim(), q, self.grid.cell_volume()))
    }

    /// `sum f u vol`.
    pub fn pairing(&self, f: &ScalarField, u: &ScalarField) -> Result<f64> {
        self.check_scalar(f)?;
        self.check_scalar(u)?;
        Ok(self.grid.cell_volume() * dot(f.values(), u.values()))
    }

    /// `sum <phi, psi> vol`.
    pub fn flux_pairing(&self, phi: &HorizontalField, psi: &HorizontalField) -> Result<f64> {
        self.check_horizontal(phi)?;
        self.check_horizontal(psi)?;
        Ok(self.grid.cell_volume() * dot(phi.values(), psi.values()))
    }

    /// Dual norm of `f` as a functional on Dirichlet fields with the
    /// exponent-`p` norm. For `p = 2` this is the Riesz norm; otherwise the
    /// duality map `-div(|grad w|^{p-2} grad w) = f` is solved and
    /// `<f, w> / ||w||_V` returned.
    pub fn dual_norm(self: &Arc<Self>, f: &ScalarField, p: f64) -> Result<f64> {
        check_exponent(p)?;
        self.check_scalar(f)?;
        let f_int = f.interior_values();
        if f_int.iter().all(|&v| v == 0.0) {
            return Ok(0.0);
        }
        if p == 2.0 {
            return Ok(self.riesz_norm(&f_int));
        }
        let (w, _) = crate::solver::duality_map(self, f, p)?;
        let num = self.pairing(f, &w)?;
        let den = self.v_norm(&w, p)?;
        Ok(if den > 0.0 { num / den } else { 0.0 })
    }
}

pub(crate) fn lp_norm_raw(values: &[f64], m: usize, q: f64, vol: f64) -> f64 {
    let mut acc = 0.0;
    for v in values.chunks(m) {
        let n2: f64 = v.iter().map(|x| x * x).sum();
        acc += if q == 2.0 { n2 } else { n2.sqrt().powf(q) };
    }
    (acc * vol).powf(1.0 / q)
}
