use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use super::cutoff::CutoffSpec;
use super::reference::{cell_effective_tensor, euclidean_gradient, solve_homogenized};
use crate::calculus::Calculus;
use crate::error::{Error, Result};
use crate::estimates::{a_priori_check, APrioriCheck};
use crate::field::{HorizontalField, ScalarField};
use crate::group::CarnotGroup;
use crate::operator::{OperatorRule, OperatorSpec};
use crate::rules::FieldRule;
use crate::solver::{momentum, solve, SolveOptions, SolveReport, WeakProblem};

/// Fewer nodes per oscillation period than this is an error.
pub const MIN_NODES_PER_PERIOD: f64 = 2.0;
/// Fewer nodes per oscillation period than this draws a warning.
pub const WARN_NODES_PER_PERIOD: f64 = 8.0;
/// Noise floor of the div-curl gap trend, relative to the reference value.
pub const DIVCURL_NOISE_FRACTION: f64 = 0.01;

/// An oscillating sequence `A^n(x, xi) = A(delta_n x, xi)` with its data.
#[derive(Debug, Clone)]
pub struct SequenceConfig {
    pub calc: Arc<Calculus>,
    pub base: OperatorSpec,
    pub scales: Vec<u32>,
    pub rhs: FieldRule,
    /// Interior-supported test functions `g_k`.
    pub test_functions: Vec<FieldRule>,
    /// Constant vectors `xi_k`; the test sections are `xi_k * phi`.
    pub test_sections: Vec<Vec<f64>>,
    pub cutoff: CutoffSpec,
    pub tol: f64,
    pub max_iter: usize,
    /// Cells per axis of the periodic cell oracle.
    pub cell_resolution: usize,
    /// Refinement factor of the homogenized reference grid.
    pub reference_refinement: usize,
}

impl SequenceConfig {
    /// Defaults: one bump test function centered in the cutoff window, the
    /// unit vectors as test sections, solver tolerance 1e-10.
    pub fn new(calc: Arc<Calculus>, base: OperatorSpec, scales: Vec<u32>, rhs: FieldRule, cutoff: CutoffSpec) -> Self {
        let m = calc.horizontal_dim();
        let center: Vec<f64> = cutoff.inner.iter().map(|(a, b)| 0.5 * (a + b)).collect();
        let radius = cutoff.inner.iter().map(|(a, b)| 0.5 * (b - a)).fold(f64::INFINITY, f64::min);
        let test_functions = vec![FieldRule::Bump { center, radius, amp: 1.0 }];
        let test_sections = (0..m).map(|i| (0..m).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
        Self {
            calc,
            base,
            scales,
            rhs,
            test_functions,
            test_sections,
            cutoff,
            tol: 1e-10,
            max_iter: 10_000,
            cell_resolution: Self::default_cell_resolution(m),
            reference_refinement: 4,
        }
    }

    /// Cells per axis of the cell oracle: 256 up to two horizontal
    /// directions, 48 beyond.
    pub fn default_cell_resolution(m: usize) -> usize {
        if m <= 2 {
            256
        } else {
            48
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.scales.is_empty() || self.scales[0] == 0 || self.scales.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument("scales must be positive and strictly increasing".into()));
        }
        let grid = self.calc.grid();
        for g in &self.test_functions {
            if !g.is_interior_supported(grid) {
                return Err(Error::InvalidArgument(format!("test function '{g}' is not supported inside the domain")));
            }
        }
        let m = self.calc.horizontal_dim();
        if let Some(s) = self.test_sections.iter().find(|s| s.len() != m) {
            return Err(Error::DimensionMismatch { expected: m, got: s.len() });
        }
        self.cutoff.validate(grid)?;
        if self.reference_refinement == 0 {
            return Err(Error::InvalidArgument("reference refinement must be positive".into()));
        }
        Ok(())
    }
}

/// Nodes per oscillation period along each axis at scale `n`; errors below
/// [`MIN_NODES_PER_PERIOD`], warns below [`WARN_NODES_PER_PERIOD`].
pub fn resolution_warnings(calc: &Calculus, spec: &OperatorSpec, n: u32) -> Result<Vec<String>> {
    let mut warnings = Vec::new();
    let Some(coef) = spec.coefficient() else {
        return Ok(warnings);
    };
    if coef.is_constant() {
        return Ok(warnings);
    }
    let group = calc.group();
    let m = group.horizontal_dim();
    for (axis, &w) in group.dilation_exponents().iter().enumerate() {
        if let Some(period) = coef.period(axis, m) {
            let nodes = period / (n as f64).powi(w as i32) / calc.grid().spacing()[axis];
            if nodes < MIN_NODES_PER_PERIOD {
                return Err(Error::UnresolvedOscillation { axis, nodes_per_period: nodes });
            }
            if nodes < WARN_NODES_PER_PERIOD {
                warnings.push(format!("scale {n}: axis {axis} has {nodes:.1} nodes per oscillation period"));
            }
        }
    }
    Ok(warnings)
}

pub(crate) struct ScaleSolve {
    pub u: ScalarField,
    pub report: SolveReport,
    pub momentum: HorizontalField,
    pub gradient: HorizontalField,
}

pub(crate) type Ladder = Vec<(u32, std::result::Result<ScaleSolve, String>)>;

fn solve_scale(cfg: &SequenceConfig, spec: OperatorSpec, f: &ScalarField) -> Result<ScaleSolve> {
    let problem = WeakProblem::new(cfg.calc.clone(), spec, f.clone())?;
    let (u, report) = solve(&problem, &SolveOptions { tol: cfg.tol, max_iter: cfg.max_iter, initial: None })?;
    let momentum = momentum(&problem, &u)?;
    let gradient = problem.total_gradient(&u)?;
    Ok(ScaleSolve { u, report, momentum, gradient })
}

/// Solves every scale; numerical failures are kept per scale.
pub(crate) fn solve_ladder(cfg: &SequenceConfig) -> Result<(Ladder, Vec<String>)> {
    cfg.validate()?;
    let mut warnings = Vec::new();
    let mut specs = Vec::new();
    for &n in &cfg.scales {
        warnings.extend(resolution_warnings(&cfg.calc, &cfg.base, n)?);
        specs.push(cfg.base.oscillate(n)?);
    }
    let f = cfg.rhs.sample(cfg.calc.grid());
    let out: Vec<(u32, Result<ScaleSolve>)> = cfg.scales.par_iter().zip(specs).map(|(&n, spec)| (n, solve_scale(cfg, spec, &f))).collect();
    let mut ladder = Vec::new();
    for (n, r) in out {
        match r {
            Ok(s) => ladder.push((n, Ok(s))),
            Err(e) if e.is_numerical() => {
                warnings.push(format!("scale {n}: {e}"));
                ladder.push((n, Err(e.to_string())));
            }
            Err(e) => return Err(e),
        }
    }
    Ok((ladder, warnings))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceKind {
    /// Non-oscillating coefficient: the sequence is constant and the same
    /// discretization gives the limit.
    Homogeneous,
    /// Periodic cell oracle for the effective tensor plus a refined-grid
    /// homogenized solve.
    CellOracle,
    /// Largest experiment scale; gaps at that scale vanish by construction.
    FinestScale,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Reference {
    pub kind: ReferenceKind,
    pub effective_tensor: Option<Vec<f64>>,
    pub grid_shape: Vec<usize>,
    pub solution_pairings: Vec<f64>,
    pub momentum_pairings: Vec<f64>,
    /// `int <D, E> phi` for the weight used by the div-curl check.
    pub divcurl: f64,
}

fn is_euclidean(group: &CarnotGroup) -> bool {
    group.horizontal_dim() == group.dim()
}

/// Effective tensor from the cell oracle when the experiment admits one.
fn oracle_tensor(cfg: &SequenceConfig) -> Result<Option<Vec<f64>>> {
    let spec = &cfg.base;
    if !is_euclidean(cfg.calc.group()) || spec.p() != 2.0 || spec.is_homogeneous() {
        return Ok(None);
    }
    let m = cfg.calc.horizontal_dim();
    let (coef, factor) = match spec.rule() {
        OperatorRule::ScalarPLaplacian { coefficient } => (coefficient, 1.0),
        OperatorRule::LinearMatrix { matrix, coefficient, .. } => {
            let c = matrix[0];
            let scalar = (0..m).all(|i| (0..m).all(|j| matrix[i * m + j] == if i == j { c } else { 0.0 }));
            if !scalar {
                return Ok(None);
            }
            (coefficient, c)
        }
        OperatorRule::Custom(_) => return Ok(None),
    };
    let t = cell_effective_tensor(coef, m, cfg.cell_resolution)?;
    Ok(Some(t.into_iter().map(|v| v * factor).collect()))
}

pub(crate) fn section(grid: &Arc<crate::grid::Grid>, xi: &[f64], weight: &ScalarField) -> HorizontalField {
    let m = xi.len();
    let vals = weight.values().iter().flat_map(|w| xi.iter().map(move |x| x * w)).collect();
    HorizontalField::from_values(grid, m, vals).expect("finite section")
}

fn pairings(
    calc: &Calculus,
    s: &ScaleSolve,
    tests: &[ScalarField],
    sections: &[HorizontalField],
    weight: &ScalarField,
) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    let sol = tests.iter().map(|g| calc.pairing(&s.u, g)).collect::<Result<Vec<_>>>()?;
    let mom = sections.iter().map(|psi| calc.flux_pairing(&s.momentum, psi)).collect::<Result<Vec<_>>>()?;
    let dc = calc.flux_pairing(&s.momentum, &s.gradient.weighted(weight)?)?;
    Ok((sol, mom, dc))
}

pub(crate) fn build_reference(cfg: &SequenceConfig, ladder: &Ladder, weight_spec: &CutoffSpec) -> Result<Reference> {
    let calc = &cfg.calc;
    let grid = calc.grid();
    let m = calc.horizontal_dim();
    if cfg.base.is_homogeneous() {
        let s = solve_scale(cfg, cfg.base.clone(), &cfg.rhs.sample(grid))?;
        let tests: Vec<ScalarField> = cfg.test_functions.iter().map(|g| g.sample(grid)).collect();
        let phi = cfg.cutoff.sample(grid)?;
        let sections: Vec<HorizontalField> = cfg.test_sections.iter().map(|xi| section(grid, xi, &phi)).collect();
        let weight = weight_spec.sample(grid)?;
        let (sol, mom, dc) = pairings(calc, &s, &tests, &sections, &weight)?;
        return Ok(Reference {
            kind: ReferenceKind::Homogeneous,
            effective_tensor: None,
            grid_shape: grid.shape().to_vec(),
            solution_pairings: sol,
            momentum_pairings: mom,
            divcurl: dc,
        });
    }
    if let Some(t) = oracle_tensor(cfg)? {
        let max = t.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let diagonal = (0..m).all(|i| (0..m).all(|j| i == j || t[i * m + j].abs() <= 1e-8 * max));
        if diagonal {
            let fine = Arc::new(grid.refined(cfg.reference_refinement)?);
            let a_diag: Vec<f64> = (0..m).map(|i| t[i * m + i]).collect();
            let f = cfg.rhs.sample(&fine);
            let u = solve_homogenized(&fine, &a_diag, f.values())?;
            let g = euclidean_gradient(&fine, &u);
            let vol = fine.cell_volume();
            let bounds = fine.bounds().to_vec();
            let sol = cfg
                .test_functions
                .iter()
                .map(|rule| vol * (0..fine.len()).map(|k| u[k] * rule.eval(&bounds, fine.coords(k))).sum::<f64>())
                .collect();
            let d: Vec<f64> = g.chunks(m).flat_map(|gk| gk.iter().zip(&a_diag).map(|(g, a)| a * g)).collect();
            let mom = cfg
                .test_sections
                .iter()
                .map(|xi| {
                    vol * (0..fine.len())
                        .map(|k| cfg.cutoff.eval(fine.coords(k)) * (0..m).map(|i| d[k * m + i] * xi[i]).sum::<f64>())
                        .sum::<f64>()
                })
                .collect();
            let dc = vol
                * (0..fine.len())
                    .map(|k| weight_spec.eval(fine.coords(k)) * (0..m).map(|i| d[k * m + i] * g[k * m + i]).sum::<f64>())
                    .sum::<f64>();
            return Ok(Reference {
                kind: ReferenceKind::CellOracle,
                effective_tensor: Some(t),
                grid_shape: fine.shape().to_vec(),
                solution_pairings: sol,
                momentum_pairings: mom,
                divcurl: dc,
            });
        }
    }
    let last = ladder
        .iter()
        .rev()
        .find_map(|(_, r)| r.as_ref().ok())
        .ok_or_else(|| Error::InvalidArgument("no scale converged; no reference available".into()))?;
    let tests: Vec<ScalarField> = cfg.test_functions.iter().map(|g| g.sample(grid)).collect();
    let phi = cfg.cutoff.sample(grid)?;
    let sections: Vec<HorizontalField> = cfg.test_sections.iter().map(|xi| section(grid, xi, &phi)).collect();
    let weight = weight_spec.sample(grid)?;
    let (sol, mom, dc) = pairings(calc, last, &tests, &sections, &weight)?;
    Ok(Reference {
        kind: ReferenceKind::FinestScale,
        effective_tensor: None,
        grid_shape: grid.shape().to_vec(),
        solution_pairings: sol,
        momentum_pairings: mom,
        divcurl: dc,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScaleMetrics {
    pub iterations: usize,
    pub final_residual: f64,
    pub v_norm: f64,
    pub solution_pairings: Vec<f64>,
    pub momentum_pairings: Vec<f64>,
    /// `||D_n||_{L^{p'}}`.
    pub momentum_norm: f64,
    /// `(||f||_* / alpha)^{1/(p-1)}`.
    pub solution_bound: f64,
    pub solution_bound_slack: f64,
    /// `beta alpha^{-1/(p-1)} [|Omega| + alpha^{-p'} ||f||_*^{p'}]^{(p-2)/p} ||f||_*^{1/(p-1)}`.
    pub momentum_bound: f64,
    pub momentum_bound_slack: f64,
    pub divcurl: f64,
    pub a_priori: APrioriCheck,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScaleRow {
    pub scale: u32,
    pub error: Option<String>,
    pub metrics: Option<ScaleMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HConvReport {
    pub group: String,
    pub p: f64,
    pub alpha: f64,
    pub beta: f64,
    pub measure: f64,
    pub rhs_dual_norm: f64,
    pub scales: Vec<u32>,
    pub rows: Vec<ScaleRow>,
    /// `max_k |<u_n - u_N, g_k>|` against the largest converged scale.
    pub tail_deltas: Vec<Option<f64>>,
    /// `max_k |<u_{n_{i+1}} - u_{n_i}, g_k>|` for consecutive scales.
    pub cauchy_increments: Vec<Option<f64>>,
    /// Last Cauchy increment over the first.
    pub cauchy_ratio: Option<f64>,
    /// Increases of the Cauchy increments along the ladder.
    pub cauchy_inversions: usize,
    /// `max_k |<u_n, g_k> - reference_k|`.
    pub reference_deltas: Vec<Option<f64>>,
    /// `max_k |<D_n, Psi_k> - reference_k|`.
    pub momentum_reference_deltas: Vec<Option<f64>>,
    pub reference: Reference,
    pub bounds_hold: bool,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DivCurlReport {
    pub scales: Vec<u32>,
    /// `I_n = int <D_n, grad u_n> phi`.
    pub values: Vec<Option<f64>>,
    pub reference: f64,
    pub reference_kind: ReferenceKind,
    pub gaps: Vec<Option<f64>>,
    pub relative_gaps: Vec<Option<f64>>,
    pub noise_floor: f64,
    /// Increases of the gap along the ladder.
    pub inversions: usize,
    /// Increases larger than the noise floor.
    pub significant_inversions: usize,
    /// Gap non-increasing up to one inversion within the noise floor.
    pub trend_ok: bool,
    pub final_relative_gap: Option<f64>,
    pub warnings: Vec<String>,
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn momentum_bound(p: f64, alpha: f64, beta: f64, measure: f64, fd: f64) -> f64 {
    let q = p / (p - 1.0);
    beta / alpha.powf(1.0 / (p - 1.0)) * (measure + alpha.powf(-q) * fd.powf(q)).powf((p - 2.0) / p) * fd.powf(1.0 / (p - 1.0))
}

/// Solves every scale, records pairings and the uniform bounds, and
/// compares against the reference limit.
pub fn run_hconv(cfg: &SequenceConfig) -> Result<HConvReport> {
    let (ladder, mut warnings) = solve_ladder(cfg)?;
    let reference = build_reference(cfg, &ladder, &cfg.cutoff)?;
    hconv_report(cfg, &ladder, reference, &mut warnings)
}

pub(crate) fn hconv_report(cfg: &SequenceConfig, ladder: &Ladder, reference: Reference, warnings: &mut Vec<String>) -> Result<HConvReport> {
    let calc = &cfg.calc;
    let grid = calc.grid();
    let spec = &cfg.base;
    let (p, alpha, beta) = (spec.p(), spec.alpha(), spec.beta());
    let f = cfg.rhs.sample(grid);
    let fd = calc.dual_norm(&f, p)?;
    let measure = calc.measure();
    let sol_bound = (fd / alpha).powf(1.0 / (p - 1.0));
    let mom_bound = momentum_bound(p, alpha, beta, measure, fd);
    let tests: Vec<ScalarField> = cfg.test_functions.iter().map(|g| g.sample(grid)).collect();
    let phi = cfg.cutoff.sample(grid)?;
    let sections: Vec<HorizontalField> = cfg.test_sections.iter().map(|xi| section(grid, xi, &phi)).collect();
    let mut rows = Vec::new();
    let mut bounds_hold = true;
    for (n, r) in ladder {
        match r {
            Ok(s) => {
                let (sol, mom, dc) = pairings(calc, s, &tests, &sections, &phi)?;
                let momentum_norm = calc.lp_norm(&s.momentum, p / (p - 1.0))?;
                let check = a_priori_check(calc, spec, &f, &s.report, cfg.tol)?;
                let v = s.report.v_norm_u;
                let metrics = ScaleMetrics {
                    iterations: s.report.iterations,
                    final_residual: s.report.final_residual,
                    v_norm: v,
                    solution_pairings: sol,
                    momentum_pairings: mom,
                    momentum_norm,
                    solution_bound: sol_bound,
                    solution_bound_slack: sol_bound - v,
                    momentum_bound: mom_bound,
                    momentum_bound_slack: mom_bound - momentum_norm,
                    divcurl: dc,
                    a_priori: check,
                };
                bounds_hold &= metrics.a_priori.holds && metrics.momentum_bound_slack >= -1e-9 * mom_bound;
                rows.push(ScaleRow { scale: *n, error: None, metrics: Some(metrics) });
            }
            Err(e) => rows.push(ScaleRow { scale: *n, error: Some(e.clone()), metrics: None }),
        }
    }
    let last = rows.iter().rev().find_map(|r| r.metrics.as_ref()).map(|m| m.solution_pairings.clone());
    let tail_deltas = rows.iter().map(|r| Some(max_abs_diff(&r.metrics.as_ref()?.solution_pairings, last.as_ref()?))).collect();
    let cauchy_increments: Vec<Option<f64>> = rows
        .windows(2)
        .map(|w| Some(max_abs_diff(&w[0].metrics.as_ref()?.solution_pairings, &w[1].metrics.as_ref()?.solution_pairings)))
        .collect();
    let cauchy_ratio = match (cauchy_increments.first(), cauchy_increments.last()) {
        (Some(Some(a)), Some(Some(b))) if *a > 0.0 => Some(b / a),
        _ => None,
    };
    let cauchy_inversions = cauchy_increments.windows(2).filter(|w| matches!((w[0], w[1]), (Some(a), Some(b)) if b > a)).count();
    let reference_deltas =
        rows.iter().map(|r| Some(max_abs_diff(&r.metrics.as_ref()?.solution_pairings, &reference.solution_pairings))).collect();
    let momentum_reference_deltas =
        rows.iter().map(|r| Some(max_abs_diff(&r.metrics.as_ref()?.momentum_pairings, &reference.momentum_pairings))).collect();
    if reference.kind == ReferenceKind::FinestScale {
        warnings.push("reference is the finest scale; its deltas vanish by construction".into());
    }
    Ok(HConvReport {
        group: calc.group().name().to_string(),
        p,
        alpha,
        beta,
        measure,
        rhs_dual_norm: fd,
        scales: cfg.scales.clone(),
        rows,
        tail_deltas,
        cauchy_increments,
        cauchy_ratio,
        cauchy_inversions,
        reference_deltas,
        momentum_reference_deltas,
        reference,
        bounds_hold,
        warnings: warnings.clone(),
    })
}

/// Pairing `I_n = int <D_n, E_n> phi` with `E_n = grad u_n` along the ladder,
/// against the reference limit.
pub fn divcurl_check(cfg: &SequenceConfig, weight: &CutoffSpec) -> Result<DivCurlReport> {
    weight.validate(cfg.calc.grid())?;
    let (ladder, mut warnings) = solve_ladder(cfg)?;
    let reference = build_reference(cfg, &ladder, weight)?;
    if reference.kind == ReferenceKind::FinestScale {
        warnings.push("reference is the finest scale; its gap vanishes by construction".into());
    }
    divcurl_report(cfg, &ladder, &reference, weight, warnings)
}

pub(crate) fn divcurl_report(
    cfg: &SequenceConfig,
    ladder: &Ladder,
    reference: &Reference,
    weight: &CutoffSpec,
    warnings: Vec<String>,
) -> Result<DivCurlReport> {
    let calc = &cfg.calc;
    let phi = weight.sample(calc.grid())?;
    let mut values = Vec::new();
    for (_, r) in ladder {
        values.push(match r {
            Ok(s) => Some(calc.flux_pairing(&s.momentum, &s.gradient.weighted(&phi)?)?),
            Err(_) => None,
        });
    }
    let i_inf = reference.divcurl;
    let gaps: Vec<Option<f64>> = values.iter().map(|v| v.map(|v| (v - i_inf).abs())).collect();
    let scale = i_inf.abs();
    let relative_gaps: Vec<Option<f64>> = gaps.iter().map(|g| g.map(|g| if scale > 0.0 { g / scale } else { g })).collect();
    let noise_floor = DIVCURL_NOISE_FRACTION * scale;
    let known: Vec<f64> = gaps.iter().flatten().copied().collect();
    let mut inversions = 0;
    let mut significant = 0;
    for w in known.windows(2) {
        if w[1] > w[0] {
            inversions += 1;
            if w[1] - w[0] > noise_floor {
                significant += 1;
            }
        }
    }
    Ok(DivCurlReport {
        scales: cfg.scales.clone(),
        values,
        reference: i_inf,
        reference_kind: reference.kind,
        gaps,
        final_relative_gap: relative_gaps.iter().rev().find_map(|g| *g),
        relative_gaps,
        noise_floor,
        inversions,
        significant_inversions: significant,
        trend_ok: significant == 0 && inversions <= 1,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::operator::Coefficient;

    fn euclid(nodes: usize) -> Arc<Calculus> {
        let grid = Arc::new(Grid::cube(2, 0.0, 1.0, nodes).unwrap());
        Arc::new(Calculus::new(Arc::new(CarnotGroup::euclidean(2).unwrap()), grid).unwrap())
    }

    fn cfg(calc: Arc<Calculus>, coef: Coefficient, scales: Vec<u32>) -> SequenceConfig {
        let cutoff = CutoffSpec::with_default_width(calc.grid(), vec![(0.25, 0.75); 2]);
        let spec = OperatorSpec::scalar_p_laplacian(2.0, coef).unwrap();
        SequenceConfig::new(calc, spec, scales, FieldRule::Constant(1.0), cutoff)
    }

    #[test]
    fn homogeneous_sequence_is_constant() {
        let c = cfg(euclid(33), Coefficient::Constant(2.0), vec![1, 2, 4]);
        let r = run_hconv(&c).unwrap();
        assert_eq!(r.reference.kind, ReferenceKind::Homogeneous);
        assert!(r.tail_deltas.iter().all(|d| d.unwrap() == 0.0));
        assert!(r.reference_deltas.iter().all(|d| d.unwrap() == 0.0));
        assert!(r.bounds_hold);
        let d = divcurl_check(&c, &c.cutoff).unwrap();
        assert!(d.gaps.iter().all(|g| g.unwrap() == 0.0));
    }

    #[test]
    fn scale_one_matches_solver() {
        let c = cfg(euclid(33), Coefficient::Laminate { a1: 1.0, a2: 4.0 }, vec![1]);
        let r = run_hconv(&c).unwrap();
        let pb = WeakProblem::new(c.calc.clone(), c.base.clone(), c.rhs.sample(c.calc.grid())).unwrap();
        let (u, rep) = solve(&pb, &SolveOptions::default()).unwrap();
        let m = r.rows[0].metrics.as_ref().unwrap();
        assert_eq!(m.v_norm, rep.v_norm_u);
        assert_eq!(m.solution_pairings[0], c.calc.pairing(&u, &c.test_functions[0].sample(c.calc.grid())).unwrap());
    }

    #[test]
    fn unresolved_oscillation_is_rejected() {
        let c = cfg(euclid(33), Coefficient::Laminate { a1: 1.0, a2: 4.0 }, vec![1, 32]);
        assert!(matches!(run_hconv(&c), Err(Error::UnresolvedOscillation { .. })));
        assert!(resolution_warnings(&c.calc, &c.base, 4).unwrap().is_empty());
        let w = resolution_warnings(&c.calc, &c.base, 8).unwrap();
        assert_eq!(w.len(), 1);
    }

    #[test]
    fn bad_scales_rejected() {
        let c = cfg(euclid(17), Coefficient::Constant(1.0), vec![2, 1]);
        assert!(run_hconv(&c).is_err());
    }
}
