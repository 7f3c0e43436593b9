//! Dirichlet solvers for `-div(A(x, grad u)) = f`.
//!
//! Linear symmetric operators are solved by Jacobi-preconditioned conjugate
//! gradients on the assembled stiffness matrix. Potential operators use
//! nonlinear conjugate gradients (Polak-Ribiere+) preconditioned by the
//! discrete sub-Laplacian, with an exact line search on the energy. A step is
//! accepted only if the residual does not grow; otherwise a damped
//! fixed-point step `u - tau L0^{-1} r` with backtracking on the residual is
//! taken. Operators without an energy use the fixed-point iteration alone.
//!
//! The monitored residual is the Riesz dual norm of `r = G^T A(grad u) - f`,
//! and a solve succeeds once it drops below `tol * (1 + ||r_0||)`, where `r_0`
//! is the residual of the zero field.

use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;

use crate::calculus::{Calculus, PRECOND_RTOL};
use crate::error::{Error, Result, SolveFailure};
use crate::field::{same_grid, HorizontalField, ScalarField};
use crate::linalg::{dot, pcg, BandedCholesky, Csr};
use crate::operator::{scalar_p_flux, Coefficient, OperatorRule, OperatorSpec};

/// `A(x, .)` frozen at the sample points of one grid.
#[derive(Debug, Clone)]
pub(crate) enum NodalOperator {
    /// Per-node `m x m` blocks.
    Linear {
        blocks: Vec<f64>,
    },
    PLaplacian {
        a: Vec<f64>,
        p: f64,
    },
    Custom {
        spec: OperatorSpec,
        points: Vec<f64>,
        n: usize,
    },
}

impl NodalOperator {
    pub(crate) fn new(calc: &Calculus, spec: &OperatorSpec) -> Result<Self> {
        let grid = calc.grid();
        let group = calc.group();
        let m = group.horizontal_dim();
        let n = group.dim();
        let len = grid.len();
        let mut points = Vec::with_capacity(len * n);
        for node in 0..len {
            points.extend(spec.sample_point(group, grid.coords(node))?);
        }
        let coef = |c: &Coefficient| -> Vec<f64> { points.chunks(n).map(|y| c.eval(y, m)).collect() };
        Ok(match spec.rule() {
            OperatorRule::LinearMatrix { matrix, coefficient, .. } => {
                let a = coef(coefficient);
                let mut blocks = Vec::with_capacity(len * m * m);
                for ak in a {
                    blocks.extend(matrix.iter().map(|v| ak * v));
                }
                NodalOperator::Linear { blocks }
            }
            OperatorRule::ScalarPLaplacian { coefficient } => NodalOperator::PLaplacian { a: coef(coefficient), p: spec.p() },
            OperatorRule::Custom(_) => NodalOperator::Custom { spec: spec.clone(), points, n },
        })
    }

    /// Flux `A(x_k, g_k)` at every node.
    pub(crate) fn flux(&self, m: usize, g: &[f64], out: &mut [f64]) {
        match self {
            NodalOperator::Linear { blocks } => {
                for ((o, gk), b) in out.chunks_mut(m).zip(g.chunks(m)).zip(blocks.chunks(m * m)) {
                    for i in 0..m {
                        o[i] = (0..m).map(|j| b[i * m + j] * gk[j]).sum();
                    }
                }
            }
            NodalOperator::PLaplacian { a, p } => {
                for ((o, gk), &ak) in out.chunks_mut(m).zip(g.chunks(m)).zip(a) {
                    scalar_p_flux(ak, *p, gk, o);
                }
            }
            NodalOperator::Custom { spec, points, n } => {
                for ((o, gk), y) in out.chunks_mut(m).zip(g.chunks(m)).zip(points.chunks(*n)) {
                    spec.eval_at_sample(y, m, gk, o);
                }
            }
        }
    }

    /// `sum_k <A(x_k, g_k + tau d_k), d_k>`.
    fn directional(&self, m: usize, g: &[f64], d: &[f64], tau: f64, scratch: &mut Vec<f64>) -> f64 {
        let mut acc = 0.0;
        match self {
            NodalOperator::PLaplacian { a, p } => {
                let mut e = vec![0.0; m];
                let mut o = vec![0.0; m];
                for ((gk, dk), &ak) in g.chunks(m).zip(d.chunks(m)).zip(a) {
                    for i in 0..m {
                        e[i] = gk[i] + tau * dk[i];
                    }
                    scalar_p_flux(ak, *p, &e, &mut o);
                    acc += dot(&o, dk);
                }
            }
            _ => {
                scratch.clear();
                scratch.extend(g.iter().zip(d).map(|(a, b)| a + tau * b));
                let mut out = vec![0.0; g.len()];
                self.flux(m, scratch, &mut out);
                acc = dot(&out, d);
            }
        }
        acc
    }
}

/// Dirichlet problem `-div(A(x, grad u + lift)) = f` with `u = 0` on the shell.
#[derive(Debug, Clone)]
pub struct WeakProblem {
    calc: Arc<Calculus>,
    spec: OperatorSpec,
    f: ScalarField,
    lift: Option<HorizontalField>,
}

impl WeakProblem {
    pub fn new(calc: Arc<Calculus>, spec: OperatorSpec, f: ScalarField) -> Result<Self> {
        same_grid(calc.grid(), f.grid())?;
        if !f.is_finite() {
            return Err(Error::InvalidArgument("right-hand side is not finite".into()));
        }
        Ok(Self { calc, spec, f, lift: None })
    }

    /// Adds a fixed horizontal field to the gradient of the unknown; a
    /// constant `xi` corresponds to the affine datum `<xi, pi(x)>`.
    pub fn with_lift(mut self, lift: HorizontalField) -> Result<Self> {
        same_grid(self.calc.grid(), lift.grid())?;
        if lift.components() != self.calc.horizontal_dim() {
            return Err(Error::DimensionMismatch { expected: self.calc.horizontal_dim(), got: lift.components() });
        }
        self.lift = Some(lift);
        Ok(self)
    }

    pub fn calculus(&self) -> &Arc<Calculus> {
        &self.calc
    }

    pub fn spec(&self) -> &OperatorSpec {
        &self.spec
    }

    pub fn rhs(&self) -> &ScalarField {
        &self.f
    }

    pub fn lift(&self) -> Option<&HorizontalField> {
        self.lift.as_ref()
    }

    /// `grad u + lift` for the Dirichlet field `u`.
    pub fn total_gradient(&self, u: &ScalarField) -> Result<HorizontalField> {
        same_grid(self.calc.grid(), u.grid())?;
        let mut g = vec![0.0; self.calc.grid().len() * self.calc.horizontal_dim()];
        self.calc.grad_interior(&u.interior_values(), &mut g);
        if let Some(l) = &self.lift {
            g.iter_mut().zip(l.values()).for_each(|(a, b)| *a += b);
        }
        HorizontalField::from_values(self.calc.grid(), self.calc.horizontal_dim(), g)
    }
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub initial: Option<ScalarField>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 10_000, initial: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    ConjugateGradient,
    NonlinearConjugateGradient,
    FixedPoint,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub method: SolveMethod,
    pub iterations: usize,
    /// Dual-norm residual per accepted step; for conjugate gradients the
    /// relative Euclidean residual of the linear system per iteration.
    pub residual_history: Vec<f64>,
    /// Riesz dual norm of the final residual.
    pub final_residual: f64,
    /// Residual norm of the zero field.
    pub initial_residual: f64,
    /// Acceptance threshold `tol * (1 + initial_residual)`.
    pub threshold: f64,
    pub converged: bool,
    pub fixed_point_steps: usize,
    /// `<f, u>`.
    pub energy_pairing: f64,
    /// `<A(x, grad u), grad u>`.
    pub flux_pairing: f64,
    pub v_norm_u: f64,
    #[serde(skip)]
    pub wall_time: f64,
}

struct State {
    u: Vec<f64>,
    g: Vec<f64>,
    flux: Vec<f64>,
    r: Vec<f64>,
}

struct Engine<'a> {
    calc: &'a Calculus,
    op: NodalOperator,
    m: usize,
    f: Vec<f64>,
    lift: Option<&'a [f64]>,
}

impl Engine<'_> {
    fn state(&self, u: Vec<f64>) -> State {
        let len = self.calc.grid().len() * self.m;
        let mut g = vec![0.0; len];
        self.calc.grad_interior(&u, &mut g);
        if let Some(l) = self.lift {
            g.iter_mut().zip(l).for_each(|(a, b)| *a += b);
        }
        let mut flux = vec![0.0; len];
        self.op.flux(self.m, &g, &mut flux);
        let mut r = vec![0.0; u.len()];
        self.calc.grad_interior_t(&flux, &mut r);
        r.iter_mut().zip(&self.f).for_each(|(a, b)| *a -= b);
        State { u, g, flux, r }
    }

    fn is_finite(s: &State) -> bool {
        s.u.iter().chain(&s.r).all(|v| v.is_finite())
    }

    /// Returns `(z, ||r||)` with `z ~ L0^{-1} r`.
    fn precondition(&self, r: &[f64]) -> (Vec<f64>, f64) {
        let vol = self.calc.grid().cell_volume();
        if self.calc.riesz_is_direct() {
            let z = self.calc.riesz_solve(r, 0.0);
            let nrm = (vol * dot(r, &z)).max(0.0).sqrt();
            (z, nrm)
        } else {
            let z = self.calc.riesz_solve(r, PRECOND_RTOL);
            (z, self.calc.riesz_norm(r))
        }
    }
}

fn finish(
    problem: &WeakProblem,
    engine: &Engine,
    state: &State,
    mut report: SolveReport,
    start: Instant,
) -> Result<(ScalarField, SolveReport)> {
    let calc = &problem.calc;
    let u = ScalarField::from_interior(calc.grid(), &state.u)?;
    let vol = calc.grid().cell_volume();
    report.energy_pairing = calc.pairing(&problem.f, &u)?;
    report.flux_pairing = vol * dot(&state.flux, &state.g);
    report.v_norm_u = crate::calculus::lp_norm_raw(
        &{
            let mut g = vec![0.0; state.g.len()];
            calc.grad_interior(&state.u, &mut g);
            g
        },
        engine.m,
        problem.spec.p(),
        vol,
    );
    report.wall_time = start.elapsed().as_secs_f64();
    if !report.converged {
        return Err(Error::NotConverged(Box::new(SolveFailure { report, last_iterate: u })));
    }
    Ok((u, report))
}

fn non_finite(problem: &WeakProblem, last: &[f64], mut report: SolveReport, start: Instant) -> Error {
    report.converged = false;
    report.wall_time = start.elapsed().as_secs_f64();
    let u = ScalarField::from_interior(problem.calc.grid(), last).unwrap_or_else(|_| ScalarField::zeros(problem.calc.grid()));
    Error::NonFiniteIterate(Box::new(SolveFailure { report, last_iterate: u }))
}

/// Solves the problem; see the module docs for the method.
pub fn solve(problem: &WeakProblem, opts: &SolveOptions) -> Result<(ScalarField, SolveReport)> {
    solve_with_floor(problem, opts, 1.0)
}

pub(crate) fn solve_with_floor(problem: &WeakProblem, opts: &SolveOptions, floor: f64) -> Result<(ScalarField, SolveReport)> {
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    let start = Instant::now();
    let calc = problem.calc.as_ref();
    let n_int = calc.grid().n_interior();
    let u0 = match &opts.initial {
        Some(u) => {
            same_grid(calc.grid(), u.grid())?;
            u.interior_values()
        }
        None => vec![0.0; n_int],
    };
    let engine = Engine {
        calc,
        op: NodalOperator::new(calc, &problem.spec)?,
        m: calc.horizontal_dim(),
        f: problem.f.interior_values(),
        lift: problem.lift.as_ref().map(|l| l.values()),
    };
    let zero_state = engine.state(vec![0.0; n_int]);
    if !Engine::is_finite(&zero_state) {
        return Err(Error::InvalidArgument("operator is not finite at the zero field".into()));
    }
    let initial_residual = calc.riesz_norm(&zero_state.r);
    let threshold = opts.tol * (floor + initial_residual);
    let method = if problem.spec.is_linear() && problem.spec.is_potential() {
        SolveMethod::ConjugateGradient
    } else if problem.spec.is_potential() {
        SolveMethod::NonlinearConjugateGradient
    } else {
        SolveMethod::FixedPoint
    };
    let report = SolveReport {
        method,
        iterations: 0,
        residual_history: Vec::new(),
        final_residual: f64::NAN,
        initial_residual,
        threshold,
        converged: false,
        fixed_point_steps: 0,
        energy_pairing: 0.0,
        flux_pairing: 0.0,
        v_norm_u: 0.0,
        wall_time: 0.0,
    };
    if initial_residual == 0.0 && opts.initial.is_none() {
        let mut report = report;
        report.final_residual = 0.0;
        report.residual_history.push(0.0);
        report.converged = true;
        return finish(problem, &engine, &zero_state, report, start);
    }
    match method {
        SolveMethod::ConjugateGradient => solve_linear(problem, &engine, u0, opts, report, start),
        _ => solve_nonlinear(problem, &engine, u0, opts, report, start),
    }
}

/// Stiffness matrix `G_int^T W G_int` of a linear operator.
fn stiffness(calc: &Calculus, op: &NodalOperator) -> Csr {
    match op {
        NodalOperator::Linear { blocks } => calc.interior_gradient_matrix().weighted_gram(calc.horizontal_dim(), blocks),
        NodalOperator::PLaplacian { a, .. } => {
            let m = calc.horizontal_dim();
            let mut blocks = vec![0.0; a.len() * m * m];
            for (b, &ak) in blocks.chunks_mut(m * m).zip(a) {
                for i in 0..m {
                    b[i * m + i] = ak;
                }
            }
            calc.interior_gradient_matrix().weighted_gram(m, &blocks)
        }
        NodalOperator::Custom { .. } => unreachable!("custom operators are never linear"),
    }
}

fn solve_linear(
    problem: &WeakProblem,
    engine: &Engine,
    u0: Vec<f64>,
    opts: &SolveOptions,
    mut report: SolveReport,
    start: Instant,
) -> Result<(ScalarField, SolveReport)> {
    let calc = engine.calc;
    let k = stiffness(calc, &engine.op);
    // right-hand side f - G^T W lift
    let mut b = engine.f.clone();
    if let Some(l) = engine.lift {
        let mut wl = vec![0.0; l.len()];
        engine.op.flux(engine.m, l, &mut wl);
        let mut t = vec![0.0; b.len()];
        calc.grad_interior_t(&wl, &mut t);
        b.iter_mut().zip(&t).for_each(|(a, c)| *a -= c);
    }
    let inv_diag: Vec<f64> = k.diagonal().iter().map(|d| 1.0 / d).collect();
    let mut x = u0;
    let bnorm = crate::linalg::norm2(&b);
    let mut rtol = 0.1 * report.threshold / report.initial_residual.max(f64::MIN_POSITIVE);
    let mut state;
    loop {
        let budget = opts.max_iter.saturating_sub(report.iterations);
        let out = pcg(
            |v, y| k.mul_vec(v, y),
            |r, z| z.iter_mut().zip(r).zip(&inv_diag).for_each(|((z, r), d)| *z = r * d),
            &b,
            &mut x,
            rtol.max(1e-16),
            budget,
        );
        report.iterations += out.iterations;
        let skip = usize::from(!report.residual_history.is_empty());
        report.residual_history.extend(out.residual_history.into_iter().skip(skip));
        if x.iter().any(|v| !v.is_finite()) {
            return Err(non_finite(problem, &x, report, start));
        }
        state = engine.state(x.clone());
        report.final_residual = calc.riesz_norm(&state.r);
        if report.final_residual <= report.threshold {
            report.converged = true;
            break;
        }
        if report.iterations >= opts.max_iter || rtol <= 1e-16 || bnorm == 0.0 {
            break;
        }
        rtol *= 1e-2;
    }
    finish(problem, engine, &state, report, start)
}

/// Root of the monotone slope `s(tau)` on `tau > 0` with `s(0) < 0`.
fn line_search(slope: &mut dyn FnMut(f64) -> f64, s0: f64, guess: f64) -> Option<f64> {
    let (mut lo, mut s_lo) = (0.0, s0);
    let mut hi = guess.max(1e-300);
    let mut s_hi = slope(hi);
    let mut expansions = 0;
    while s_hi < 0.0 {
        if !s_hi.is_finite() || expansions > 200 {
            return None;
        }
        lo = hi;
        s_lo = s_hi;
        hi *= 4.0;
        s_hi = slope(hi);
        expansions += 1;
    }
    if !s_hi.is_finite() {
        // shrink into the finite region
        let mut tries = 0;
        while !s_hi.is_finite() && tries < 200 {
            hi = 0.5 * (lo + hi);
            s_hi = slope(hi);
            tries += 1;
        }
        if !s_hi.is_finite() || s_hi < 0.0 {
            return None;
        }
    }
    // Illinois variant of regula falsi
    let mut side = 0i8;
    for _ in 0..200 {
        let t = (lo * s_hi - hi * s_lo) / (s_hi - s_lo);
        if !(t > lo && t < hi) || (hi - lo) <= 1e-15 * hi {
            break;
        }
        let s = slope(t);
        if s.abs() <= 1e-15 * s0.abs() {
            return Some(t);
        }
        if s < 0.0 {
            lo = t;
            s_lo = s;
            if side == -1 {
                s_hi *= 0.5;
            }
            side = -1;
        } else {
            hi = t;
            s_hi = s;
            if side == 1 {
                s_lo *= 0.5;
            }
            side = 1;
        }
    }
    Some(if s_hi.abs() < s_lo.abs() { hi } else { lo })
}

fn solve_nonlinear(
    problem: &WeakProblem,
    engine: &Engine,
    u0: Vec<f64>,
    opts: &SolveOptions,
    mut report: SolveReport,
    start: Instant,
) -> Result<(ScalarField, SolveReport)> {
    let calc = engine.calc;
    let m = engine.m;
    let potential = report.method == SolveMethod::NonlinearConjugateGradient;
    let mut state = engine.state(u0);
    if !Engine::is_finite(&state) {
        return Err(non_finite(problem, &state.u, report, start));
    }
    let (mut z, mut res) = engine.precondition(&state.r);
    report.residual_history.push(res);
    let mut dir: Option<Vec<f64>> = None;
    let mut prev_rz = 0.0;
    let mut prev_r: Vec<f64> = Vec::new();
    let mut tau_ls = 1.0;
    let mut tau_fp = 1.0;
    let mut scratch = Vec::new();
    let mut gd = vec![0.0; state.g.len()];
    while res > report.threshold && report.iterations < opts.max_iter {
        report.iterations += 1;
        let mut accepted = None;
        if potential {
            let rz = dot(&state.r, &z);
            let mut d: Vec<f64> = z.iter().map(|v| -v).collect();
            if let Some(old) = &dir {
                let num = dot(&z, &state.r) - dot(&z, &prev_r);
                let beta = (num / prev_rz).max(0.0);
                if beta.is_finite() {
                    d.iter_mut().zip(old).for_each(|(a, b)| *a += beta * b);
                }
                if dot(&d, &state.r) >= 0.0 {
                    d = z.iter().map(|v| -v).collect();
                }
            }
            calc.grad_interior(&d, &mut gd);
            let fd = dot(&engine.f, &d);
            let s0 = dot(&state.r, &d);
            if s0 < 0.0 {
                let mut slope = |t: f64| engine.op.directional(m, &state.g, &gd, t, &mut scratch) - fd;
                if let Some(t) = line_search(&mut slope, s0, tau_ls) {
                    let u_new: Vec<f64> = state.u.iter().zip(&d).map(|(a, b)| a + t * b).collect();
                    let cand = engine.state(u_new);
                    if Engine::is_finite(&cand) {
                        let (z_new, res_new) = engine.precondition(&cand.r);
                        if res_new <= res {
                            tau_ls = t;
                            accepted = Some((cand, z_new, res_new));
                            prev_rz = rz;
                            prev_r = state.r.clone();
                            dir = Some(d);
                        }
                    }
                }
            }
        }
        if accepted.is_none() {
            // damped fixed-point step with backtracking on the residual
            dir = None;
            let mut t = tau_fp * 2.0;
            for _ in 0..80 {
                let u_new: Vec<f64> = state.u.iter().zip(&z).map(|(a, b)| a - t * b).collect();
                let cand = engine.state(u_new);
                if Engine::is_finite(&cand) {
                    let (z_new, res_new) = engine.precondition(&cand.r);
                    if res_new < res {
                        tau_fp = t;
                        accepted = Some((cand, z_new, res_new));
                        break;
                    }
                }
                t *= 0.5;
            }
            report.fixed_point_steps += 1;
        }
        match accepted {
            Some((s, z_new, res_new)) => {
                state = s;
                z = z_new;
                res = res_new;
                report.residual_history.push(res);
            }
            None => {
                log::warn!("residual stagnated at {res:.3e} after {} iterations", report.iterations);
                break;
            }
        }
    }
    report.final_residual = if calc.riesz_is_direct() { res } else { calc.riesz_norm(&state.r) };
    report.converged = report.final_residual <= report.threshold;
    finish(problem, engine, &state, report, start)
}

/// Interior residual `G^T A(grad u + lift) - f` as a field.
pub fn residual_field(problem: &WeakProblem, u: &ScalarField) -> Result<ScalarField> {
    same_grid(problem.calc.grid(), u.grid())?;
    let engine = Engine {
        calc: &problem.calc,
        op: NodalOperator::new(&problem.calc, &problem.spec)?,
        m: problem.calc.horizontal_dim(),
        f: problem.f.interior_values(),
        lift: problem.lift.as_ref().map(|l| l.values()),
    };
    let s = engine.state(u.interior_values());
    ScalarField::from_interior(problem.calc.grid(), &s.r)
}

/// Dual norm (exponent `p`) of the residual of `u`.
pub fn residual_dual_norm(problem: &WeakProblem, u: &ScalarField) -> Result<f64> {
    let r = residual_field(problem, u)?;
    problem.calc.dual_norm(&r, problem.spec.p())
}

/// Riesz dual norm of the residual, the quantity monitored by [`solve`].
pub fn residual_riesz_norm(problem: &WeakProblem, u: &ScalarField) -> Result<f64> {
    let r = residual_field(problem, u)?;
    Ok(problem.calc.riesz_norm(&r.interior_values()))
}

/// Flux field `A(x, grad u + lift)`.
pub fn momentum(problem: &WeakProblem, u: &ScalarField) -> Result<HorizontalField> {
    let g = problem.total_gradient(u)?;
    let op = NodalOperator::new(&problem.calc, &problem.spec)?;
    let m = problem.calc.horizontal_dim();
    let mut out = vec![0.0; g.values().len()];
    op.flux(m, g.values(), &mut out);
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("operator produced a non-finite flux".into()));
    }
    HorizontalField::from_values(problem.calc.grid(), m, out)
}

/// Energy `sum W(x, grad u + lift) vol - <f, u>` for potential operators.
pub fn energy(problem: &WeakProblem, u: &ScalarField) -> Result<Option<f64>> {
    let g = problem.total_gradient(u)?;
    let calc = &problem.calc;
    let m = calc.horizontal_dim();
    let mut acc = 0.0;
    for (node, gk) in g.values().chunks(m).enumerate() {
        let y = problem.spec.sample_point(calc.group(), calc.grid().coords(node))?;
        match problem.spec.energy_at_sample(&y, m, gk) {
            Some(w) => acc += w,
            None => return Ok(None),
        }
    }
    Ok(Some(acc * calc.grid().cell_volume() - calc.pairing(&problem.f, u)?))
}

/// Tolerance of the duality-map solve behind [`Calculus::dual_norm`].
pub const DUALITY_TOL: f64 = 1e-10;

/// Solves `-div(|grad w|^{p-2} grad w) = f`, relative tolerance only.
pub fn duality_map(calc: &Arc<Calculus>, f: &ScalarField, p: f64) -> Result<(ScalarField, SolveReport)> {
    let spec = OperatorSpec::scalar_p_laplacian(p, Coefficient::Constant(1.0))?;
    let problem = WeakProblem::new(calc.clone(), spec, f.clone())?;
    solve_with_floor(&problem, &SolveOptions { tol: DUALITY_TOL, max_iter: 100_000, initial: None }, 0.0)
}

/// Direct solution of a linear symmetric problem by banded Cholesky of the
/// stiffness matrix; reference for the iterative path.
pub fn solve_direct(problem: &WeakProblem) -> Result<ScalarField> {
    if !(problem.spec.is_linear() && problem.spec.is_potential()) {
        return Err(Error::InvalidArgument("direct solve needs a linear symmetric operator".into()));
    }
    let calc = problem.calc.as_ref();
    let op = NodalOperator::new(calc, &problem.spec)?;
    let k = stiffness(calc, &op);
    let chol = BandedCholesky::factor(&k)?;
    let mut b = problem.f.interior_values();
    if let Some(l) = &problem.lift {
        let mut wl = vec![0.0; l.values().len()];
        op.flux(calc.horizontal_dim(), l.values(), &mut wl);
        let mut t = vec![0.0; b.len()];
        calc.grad_interior_t(&wl, &mut t);
        b.iter_mut().zip(&t).for_each(|(a, c)| *a -= c);
    }
    chol.solve_in_place(&mut b);
    ScalarField::from_interior(calc.grid(), &b)
}
