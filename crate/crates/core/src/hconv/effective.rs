use rayon::prelude::*;
use serde::Serialize;

use super::lab::{resolution_warnings, SequenceConfig};
use crate::error::{Error, Result};
use crate::field::{HorizontalField, ScalarField};
use crate::solver::{momentum, solve, SolveOptions, WeakProblem};

/// Relative tolerance on the effective-class inequalities.
pub const EFFECTIVE_RTOL: f64 = 1e-6;
/// Exponent bracket of the Richardson fit.
pub const RICHARDSON_EXPONENTS: (f64, f64) = (0.5, 6.0);

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EffectiveEstimate {
    pub xi: Vec<f64>,
    pub scales: Vec<u32>,
    /// Momentum averaged over the window, one vector per scale.
    pub averages: Vec<Option<Vec<f64>>>,
    /// Richardson limit per component (last average when no fit exists).
    pub extrapolated: Vec<f64>,
    /// Fitted convergence exponent per component.
    pub exponents: Vec<Option<f64>>,
    /// Misfit of the model at the fourth-last scale, when there is one.
    pub fit_residual: Option<f64>,
    /// Worst slack of inequality (a) over pairs involving this probe.
    pub slack_a: Option<f64>,
    /// Worst slack of inequality (b) over pairs involving this probe.
    pub slack_b: Option<f64>,
    pub iterations: Vec<Option<usize>>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairSlack {
    pub first: usize,
    pub second: usize,
    /// `<dA, dxi> - alpha |dxi|^p`.
    pub slack_a: f64,
    /// `<dA, dxi> - alpha beta^{-p} [1 + |xi_1|^p + |xi_2|^p]^{2-p} |dA|^p`.
    pub slack_b: f64,
    /// `beta [1 + |xi_1|^p + |xi_2|^p]^{(p-2)/p} |dxi| - |dA|`.
    pub slack_lipschitz: f64,
    pub violated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EffectiveMembershipReport {
    pub p: f64,
    pub alpha: f64,
    pub beta: f64,
    pub pairs: Vec<PairSlack>,
    pub worst_slack_a: f64,
    pub worst_slack_b: f64,
    pub worst_slack_lipschitz: f64,
    pub violations: usize,
    pub rtol: f64,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Limit of `v(n) = L + C n^{-r}` through the last three points.
/// Returns the limit and the exponent, or the last value when the
/// increments do not bracket an exponent in [`RICHARDSON_EXPONENTS`].
pub fn richardson(scales: &[f64], values: &[f64]) -> (f64, Option<f64>) {
    let k = values.len();
    if k < 3 {
        return (values.last().copied().unwrap_or(f64::NAN), None);
    }
    let (n1, n2, n3) = (scales[k - 3], scales[k - 2], scales[k - 1]);
    let (v1, v2, v3) = (values[k - 3], values[k - 2], values[k - 1]);
    let (d1, d2) = (v2 - v1, v3 - v2);
    if d1 == 0.0 || d2 == 0.0 || d2 / d1 <= 0.0 {
        return (v3, None);
    }
    let rho = d2 / d1;
    let model = |r: f64| (n3.powf(-r) - n2.powf(-r)) / (n2.powf(-r) - n1.powf(-r));
    let (mut lo, mut hi) = RICHARDSON_EXPONENTS;
    // model decreases in r
    if rho > model(lo) || rho < model(hi) {
        return (v3, None);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if model(mid) > rho {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let r = 0.5 * (lo + hi);
    let c = d2 / (n3.powf(-r) - n2.powf(-r));
    (v3 - c * n3.powf(-r), Some(r))
}

fn window_average(field: &HorizontalField, nodes: &[usize]) -> Vec<f64> {
    let m = field.components();
    let mut acc = vec![0.0; m];
    for &k in nodes {
        acc.iter_mut().zip(field.at(k)).for_each(|(a, v)| *a += v);
    }
    acc.iter().map(|a| a / nodes.len() as f64).collect()
}

/// Estimates `A^eff(xi)` averaged over the cutoff window: at every scale
/// solves `-div A^n(x, xi + grad w) = 0` with `w = 0` on the boundary (the
/// affine datum `<xi, pi(x)>`), averages the momentum over the window and
/// extrapolates the scale series.
pub fn estimate_effective(cfg: &SequenceConfig, probes: &[Vec<f64>]) -> Result<Vec<EffectiveEstimate>> {
    let calc = &cfg.calc;
    let grid = calc.grid();
    let m = calc.horizontal_dim();
    if probes.is_empty() {
        return Err(Error::InvalidArgument("at least one probe is required".into()));
    }
    if let Some(x) = probes.iter().find(|x| x.len() != m) {
        return Err(Error::DimensionMismatch { expected: m, got: x.len() });
    }
    if probes.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("probe vectors must be finite".into()));
    }
    if cfg.scales.is_empty() || cfg.scales[0] == 0 || cfg.scales.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("scales must be positive and strictly increasing".into()));
    }
    cfg.cutoff.validate(grid)?;
    let nodes = cfg.cutoff.window_nodes(grid);
    if nodes.is_empty() {
        return Err(Error::InvalidArgument("averaging window contains no nodes".into()));
    }
    let mut warnings = Vec::new();
    let mut specs = Vec::new();
    for &n in &cfg.scales {
        warnings.extend(resolution_warnings(calc, &cfg.base, n)?);
        specs.push(cfg.base.oscillate(n)?);
    }
    let zero = ScalarField::zeros(grid);
    let jobs: Vec<(usize, usize)> = (0..probes.len()).flat_map(|i| (0..specs.len()).map(move |s| (i, s))).collect();
    let results: Vec<Result<(Vec<f64>, usize)>> = jobs
        .par_iter()
        .map(|&(i, s)| {
            let lift = HorizontalField::constant(grid, &probes[i]);
            let problem = WeakProblem::new(calc.clone(), specs[s].clone(), zero.clone())?.with_lift(lift)?;
            let (u, report) = solve(&problem, &SolveOptions { tol: cfg.tol, max_iter: cfg.max_iter, initial: None })?;
            let d = momentum(&problem, &u)?;
            Ok((window_average(&d, &nodes), report.iterations))
        })
        .collect();
    let mut out = Vec::new();
    let mut it = results.into_iter();
    let ns: Vec<f64> = cfg.scales.iter().map(|&n| n as f64).collect();
    for xi in probes {
        let mut averages = Vec::new();
        let mut iterations = Vec::new();
        let mut warn = warnings.clone();
        for &n in &cfg.scales {
            match it.next().expect("one result per job") {
                Ok((avg, iters)) => {
                    averages.push(Some(avg));
                    iterations.push(Some(iters));
                }
                Err(e) if e.is_numerical() => {
                    warn.push(format!("scale {n}: {e}"));
                    averages.push(None);
                    iterations.push(None);
                }
                Err(e) => return Err(e),
            }
        }
        let ok: Vec<(f64, &Vec<f64>)> = ns.iter().zip(&averages).filter_map(|(n, a)| a.as_ref().map(|a| (*n, a))).collect();
        if ok.is_empty() {
            return Err(Error::InvalidArgument(format!("no scale converged for probe {xi:?}")));
        }
        let sc: Vec<f64> = ok.iter().map(|(n, _)| *n).collect();
        let mut extrapolated = Vec::with_capacity(m);
        let mut exponents = Vec::with_capacity(m);
        let mut residual: Option<f64> = None;
        for c in 0..m {
            let vals: Vec<f64> = ok.iter().map(|(_, a)| a[c]).collect();
            let (lim, r) = richardson(&sc, &vals);
            extrapolated.push(lim);
            exponents.push(r);
            if let (Some(r), true) = (r, vals.len() >= 4) {
                let k = vals.len();
                let cst = (vals[k - 1] - lim) * sc[k - 1].powf(r);
                let miss = (lim + cst * sc[k - 4].powf(-r) - vals[k - 4]).abs();
                residual = Some(residual.map_or(miss, |x: f64| x.max(miss)));
            }
        }
        out.push(EffectiveEstimate {
            xi: xi.clone(),
            scales: cfg.scales.clone(),
            averages,
            extrapolated,
            exponents,
            fit_residual: residual,
            slack_a: None,
            slack_b: None,
            iterations,
            warnings: warn,
        });
    }
    if out.len() >= 2 {
        let report = effective_membership(&out, cfg.base.alpha(), cfg.base.beta(), cfg.base.p())?;
        for pair in &report.pairs {
            for idx in [pair.first, pair.second] {
                let e = &mut out[idx];
                e.slack_a = Some(e.slack_a.map_or(pair.slack_a, |s| s.min(pair.slack_a)));
                e.slack_b = Some(e.slack_b.map_or(pair.slack_b, |s| s.min(pair.slack_b)));
            }
        }
    }
    Ok(out)
}

/// Checks the two class inequalities and the Lipschitz bound on every pair
/// of extrapolated estimates.
pub fn effective_membership(estimates: &[EffectiveEstimate], alpha: f64, beta: f64, p: f64) -> Result<EffectiveMembershipReport> {
    if estimates.len() < 2 {
        return Err(Error::InvalidArgument("membership of the effective operator needs at least two probes".into()));
    }
    let mut pairs = Vec::new();
    for i in 0..estimates.len() {
        for j in i + 1..estimates.len() {
            let (a, b) = (&estimates[i], &estimates[j]);
            if a.xi.len() != b.xi.len() {
                return Err(Error::DimensionMismatch { expected: a.xi.len(), got: b.xi.len() });
            }
            let dxi: Vec<f64> = b.xi.iter().zip(&a.xi).map(|(x, y)| x - y).collect();
            let da: Vec<f64> = b.extrapolated.iter().zip(&a.extrapolated).map(|(x, y)| x - y).collect();
            let inner: f64 = dxi.iter().zip(&da).map(|(x, y)| x * y).sum();
            let (ndxi, nda) = (norm(&dxi), norm(&da));
            let w = 1.0 + norm(&a.xi).powf(p) + norm(&b.xi).powf(p);
            let rhs_a = alpha * ndxi.powf(p);
            let rhs_b = alpha / beta.powf(p) * w.powf(2.0 - p) * nda.powf(p);
            let lip = beta * w.powf((p - 2.0) / p) * ndxi;
            let slack_a = inner - rhs_a;
            let slack_b = inner - rhs_b;
            let slack_lipschitz = lip - nda;
            let tol_a = EFFECTIVE_RTOL * (inner.abs() + rhs_a);
            let tol_b = EFFECTIVE_RTOL * (inner.abs() + rhs_b);
            let tol_l = EFFECTIVE_RTOL * (lip + nda);
            let violated = slack_a < -tol_a || slack_b < -tol_b || slack_lipschitz < -tol_l;
            pairs.push(PairSlack { first: i, second: j, slack_a, slack_b, slack_lipschitz, violated });
        }
    }
    let worst = |f: fn(&PairSlack) -> f64| pairs.iter().map(f).fold(f64::INFINITY, f64::min);
    Ok(EffectiveMembershipReport {
        p,
        alpha,
        beta,
        worst_slack_a: worst(|s| s.slack_a),
        worst_slack_b: worst(|s| s.slack_b),
        worst_slack_lipschitz: worst(|s| s.slack_lipschitz),
        violations: pairs.iter().filter(|s| s.violated).count(),
        pairs,
        rtol: EFFECTIVE_RTOL,
    })
}
