//! Randomized checks of the three a-priori estimates for the operator
//! `u -> -div(A(x, grad u))` and of the a-priori bounds on solutions.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::calculus::{lp_norm_raw, Calculus};
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::linalg::dot;
use crate::operator::OperatorSpec;
use crate::solver::{solve, NodalOperator, SolveOptions, SolveReport, WeakProblem};

/// Relative allowance for (a) and (c), which hold up to rounding.
pub const ROUNDING_RTOL: f64 = 1e-8;
/// Relative allowance for (b), which also carries solver and dual-norm error.
pub const SOLVE_RTOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateStats {
    pub violations: usize,
    /// Smallest `bound side / other side`; at least 1 when the estimate holds.
    pub worst_ratio: f64,
    /// Smallest `bound side - other side`.
    pub worst_slack: f64,
    pub failures: usize,
}

impl EstimateStats {
    fn new() -> Self {
        Self { violations: 0, worst_ratio: f64::INFINITY, worst_slack: f64::INFINITY, failures: 0 }
    }

    /// Records `small <= big`, allowing `rtol` relative rounding.
    fn record(&mut self, small: f64, big: f64, rtol: f64) {
        self.worst_slack = self.worst_slack.min(big - small);
        if small > 0.0 {
            self.worst_ratio = self.worst_ratio.min(big / small);
        }
        if small > big * (1.0 + rtol) + f64::MIN_POSITIVE {
            self.violations += 1;
        }
    }

    fn merge(&mut self, o: &EstimateStats) {
        self.violations += o.violations;
        self.failures += o.failures;
        self.worst_ratio = self.worst_ratio.min(o.worst_ratio);
        self.worst_slack = self.worst_slack.min(o.worst_slack);
    }
}

/// Energy bound `alpha ||u||^p <= <f, u> + 10 tol` and the solution bound
/// `||u|| <= (||f||_* / alpha)^{1/(p-1)}` for one solve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct APrioriCheck {
    /// `<f, u> + 10 tol - alpha ||u||^p`.
    pub energy_slack: f64,
    /// `||u|| / ((||f||_* / alpha)^{1/(p-1)})`.
    pub bound_ratio: f64,
    pub holds: bool,
}

/// Relative allowance of the solution bound.
pub const BOUND_RTOL: f64 = 1e-6;

pub fn a_priori_check(calc: &Arc<Calculus>, spec: &OperatorSpec, f: &ScalarField, report: &SolveReport, tol: f64) -> Result<APrioriCheck> {
    let p = spec.p();
    let alpha = spec.alpha();
    let energy_slack = report.energy_pairing + 10.0 * tol - alpha * report.v_norm_u.powf(p);
    let fd = calc.dual_norm(f, p)?;
    let bound = (fd / alpha).powf(1.0 / (p - 1.0));
    let bound_ratio = if bound > 0.0 {
        report.v_norm_u / bound
    } else if report.v_norm_u == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(APrioriCheck { energy_slack, bound_ratio, holds: energy_slack >= 0.0 && bound_ratio <= 1.0 + BOUND_RTOL })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct APrioriStats {
    pub checked: usize,
    pub violations: usize,
    pub worst_energy_slack: f64,
    pub worst_bound_ratio: f64,
}

impl APrioriStats {
    pub fn new() -> Self {
        Self { checked: 0, violations: 0, worst_energy_slack: f64::INFINITY, worst_bound_ratio: 0.0 }
    }

    pub fn record(&mut self, c: &APrioriCheck) {
        self.checked += 1;
        self.violations += usize::from(!c.holds);
        self.worst_energy_slack = self.worst_energy_slack.min(c.energy_slack);
        self.worst_bound_ratio = self.worst_bound_ratio.max(c.bound_ratio);
    }
}

impl Default for APrioriStats {
    fn default() -> Self {
        Self::new()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimatesReport {
    pub p: f64,
    pub alpha: f64,
    pub beta: f64,
    pub trials: usize,
    pub seed: u64,
    pub measure: f64,
    /// (a) `<Au - Av, u - v> >= alpha ||u - v||^p`.
    pub monotonicity: EstimateStats,
    /// (b) `||A^{-1} f - A^{-1} g||^p <= alpha^{-p'} ||f - g||_*^{p'}`.
    pub stability: EstimateStats,
    /// (c) `||Au - Av||_* <= beta [|Omega| + ||u||^p + ||v||^p]^{(p-2)/p} ||u - v||`.
    pub continuity: EstimateStats,
    pub a_priori: APrioriStats,
}

#[derive(Debug, Clone)]
pub struct EstimateOptions {
    pub trials: usize,
    pub seed: u64,
    pub tol: f64,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        Self { trials: 100, seed: 0, tol: 1e-10 }
    }
}

struct Trial {
    a: EstimateStats,
    b: EstimateStats,
    c: EstimateStats,
    apriori: APrioriStats,
}

fn noise(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// Smoothed random Dirichlet field with `||u||_V` log-uniform in `[0.1, 10]`.
fn random_dirichlet(calc: &Calculus, p: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let w = calc.riesz_solve(&noise(rng, calc.grid().n_interior()), crate::calculus::PRECOND_RTOL);
    let target = 10f64.powf(rng.random_range(-1.0..1.0));
    let nrm = v_norm_int(calc, &w, p);
    w.into_iter().map(|v| v * target / nrm).collect()
}

fn v_norm_int(calc: &Calculus, u: &[f64], p: f64) -> f64 {
    let mut g = vec![0.0; calc.grid().len() * calc.horizontal_dim()];
    calc.grad_interior(u, &mut g);
    lp_norm_raw(&g, calc.horizontal_dim(), p, calc.grid().cell_volume())
}

/// `(G^T A(grad u), grad u)` for interior values `u`.
fn apply(calc: &Calculus, op: &NodalOperator, u: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let m = calc.horizontal_dim();
    let mut g = vec![0.0; calc.grid().len() * m];
    calc.grad_interior(u, &mut g);
    let mut flux = vec![0.0; g.len()];
    op.flux(m, &g, &mut flux);
    let mut r = vec![0.0; u.len()];
    calc.grad_interior_t(&flux, &mut r);
    (r, flux, g)
}

fn run_trial(calc: &Arc<Calculus>, spec: &OperatorSpec, op: &NodalOperator, opts: &EstimateOptions, t: usize) -> Result<Trial> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    rng.set_stream(t as u64);
    let p = spec.p();
    let vol = calc.grid().cell_volume();
    let grid = calc.grid();
    let mut out = Trial { a: EstimateStats::new(), b: EstimateStats::new(), c: EstimateStats::new(), apriori: APrioriStats::new() };

    let u = random_dirichlet(calc, p, &mut rng);
    let v = random_dirichlet(calc, p, &mut rng);
    let (au, fu, gu) = apply(calc, op, &u);
    let (av, fv, gv) = apply(calc, op, &v);
    let diff: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a - b).collect();
    let dflux: Vec<f64> = fu.iter().zip(&fv).map(|(a, b)| a - b).collect();
    let dgrad: Vec<f64> = gu.iter().zip(&gv).map(|(a, b)| a - b).collect();
    let nd = v_norm_int(calc, &diff, p);
    // (a)
    let lhs_a = vol * dot(&dflux, &dgrad);
    out.a.record(spec.alpha() * nd.powf(p), lhs_a, ROUNDING_RTOL);
    // (c)
    let dapply: Vec<f64> = au.iter().zip(&av).map(|(a, b)| a - b).collect();
    let dual = calc.dual_norm(&ScalarField::from_interior(grid, &dapply)?, p)?;
    let nu = v_norm_int(calc, &u, p);
    let nv = v_norm_int(calc, &v, p);
    let rhs_c = spec.beta() * (calc.measure() + nu.powf(p) + nv.powf(p)).powf((p - 2.0) / p) * nd;
    out.c.record(dual, rhs_c, ROUNDING_RTOL);

    // (b)
    let f = ScalarField::from_interior(grid, &noise(&mut rng, grid.n_interior()))?.scaled(10f64.powf(rng.random_range(-1.0..1.0)));
    let g = ScalarField::from_interior(grid, &noise(&mut rng, grid.n_interior()))?.scaled(10f64.powf(rng.random_range(-1.0..1.0)));
    let sopts = SolveOptions { tol: opts.tol, ..Default::default() };
    let mut sols = Vec::new();
    for datum in [&f, &g] {
        let pb = WeakProblem::new(calc.clone(), spec.clone(), datum.clone())?;
        match solve(&pb, &sopts) {
            Ok((sol, rep)) => {
                out.apriori.record(&crate::estimates::a_priori_check(calc, spec, datum, &rep, opts.tol)?);
                sols.push(sol);
            }
            Err(e) if e.is_numerical() => {
                log::warn!("trial {t}: {e}");
                out.b.failures += 1;
            }
            Err(e) => return Err(e),
        }
    }
    if sols.len() == 2 {
        let lhs = calc.v_norm(&sols[0].sub(&sols[1])?, p)?.powf(p);
        let q = spec.conjugate_exponent();
        let fg = calc.dual_norm(&f.sub(&g)?, p)?;
        out.b.record(lhs, (fg / spec.alpha()).powf(q), SOLVE_RTOL);
    }
    Ok(out)
}

/// Runs `trials` independent random trials, deterministic in `seed`.
pub fn verify_estimates(calc: &Arc<Calculus>, spec: &OperatorSpec, opts: &EstimateOptions) -> Result<EstimatesReport> {
    if opts.trials == 0 {
        return Err(Error::InvalidArgument("need at least one trial".into()));
    }
    let op = NodalOperator::new(calc, spec)?;
    let trials: Vec<Result<Trial>> = (0..opts.trials).into_par_iter().map(|t| run_trial(calc, spec, &op, opts, t)).collect();
    let mut report = EstimatesReport {
        p: spec.p(),
        alpha: spec.alpha(),
        beta: spec.beta(),
        trials: opts.trials,
        seed: opts.seed,
        measure: calc.measure(),
        monotonicity: EstimateStats::new(),
        stability: EstimateStats::new(),
        continuity: EstimateStats::new(),
        a_priori: APrioriStats::new(),
    };
    for t in trials {
        let t = t?;
        report.monotonicity.merge(&t.a);
        report.stability.merge(&t.b);
        report.continuity.merge(&t.c);
        report.a_priori.checked += t.apriori.checked;
        report.a_priori.violations += t.apriori.violations;
        report.a_priori.worst_energy_slack = report.a_priori.worst_energy_slack.min(t.apriori.worst_energy_slack);
        report.a_priori.worst_bound_ratio = report.a_priori.worst_bound_ratio.max(t.apriori.worst_bound_ratio);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::group::CarnotGroup;
    use crate::operator::Coefficient;

    fn heis(nodes: usize) -> Arc<Calculus> {
        let grid = Arc::new(Grid::cube(3, -1.0, 1.0, nodes).unwrap());
        Arc::new(Calculus::new(Arc::new(CarnotGroup::heisenberg()), grid).unwrap())
    }

    #[test]
    fn identity_monotonicity_is_equality() {
        let c = heis(6);
        let r = verify_estimates(&c, &OperatorSpec::identity(2), &EstimateOptions { trials: 8, seed: 3, tol: 1e-10 }).unwrap();
        assert_eq!(r.monotonicity.violations + r.stability.violations + r.continuity.violations, 0);
        assert!((r.monotonicity.worst_ratio - 1.0).abs() < 1e-10);
        assert_eq!(r.a_priori.violations, 0);
    }

    #[test]
    fn p4_estimates_hold() {
        let c = heis(6);
        let spec = OperatorSpec::scalar_p_laplacian(4.0, Coefficient::Smooth { amp: 0.5 }).unwrap();
        let r = verify_estimates(&c, &spec, &EstimateOptions { trials: 4, seed: 1, tol: 1e-10 }).unwrap();
        assert_eq!(r.monotonicity.violations, 0);
        assert_eq!(r.continuity.violations, 0);
        assert_eq!(r.stability.violations, 0);
        assert_eq!(r.stability.failures, 0);
        assert_eq!(r.a_priori.violations, 0);
    }

    #[test]
    fn overstated_alpha_is_caught() {
        let c = heis(6);
        let spec = OperatorSpec::identity(2).with_constants(1.5, 2.0).unwrap();
        let r = verify_estimates(&c, &spec, &EstimateOptions { trials: 4, seed: 2, tol: 1e-10 }).unwrap();
        assert_eq!(r.monotonicity.violations, 4);
    }
}
