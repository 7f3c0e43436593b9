//! Acceptance gate: one line per criterion, nonzero exit if any fails.

use std::io::Write;
use std::sync::Arc;
use std::time::Instant;

use carnot_hconv::estimates::{a_priori_check, verify_estimates, EstimateOptions, EstimatesReport};
use carnot_hconv::hconv::reference::cell_effective_tensor;
use carnot_hconv::hconv::{divcurl_check, estimate_effective, run_hconv, CutoffSpec, EffectiveEstimate, SequenceConfig};
use carnot_hconv::solver::{momentum, solve_direct};
use carnot_hconv::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

const IBP_RTOL: f64 = 1e-12;
const AFFINE_ATOL: f64 = 1e-13;
const MEMBERSHIP_SAMPLES: usize = 1_000_000;
const UNIT_CONSTANT_ATOL: f64 = 1e-12;
const MANUFACTURED_ATOL: f64 = 1e-8;
const DIRECT_ATOL: f64 = 1e-10;
const SOLVE_TOL: f64 = 1e-10;
const TIGHT_TOL: f64 = 1e-12;
const UNIQUENESS_FACTOR: f64 = 10.0;
const ORACLE_RTOL: f64 = 0.01;
const EFFECTIVE_RTOL: f64 = 0.05;
const DIVCURL_FINAL_RTOL: f64 = 0.10;
const TAIL_RATIO: f64 = 0.25;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn heisenberg(nodes: usize) -> Arc<Calculus> {
    let grid = Arc::new(Grid::cube(3, -1.0, 1.0, nodes).unwrap());
    Arc::new(Calculus::new(Arc::new(CarnotGroup::heisenberg()), grid).unwrap())
}

fn euclidean(dim: usize, nodes: usize) -> Arc<Calculus> {
    let grid = Arc::new(Grid::cube(dim, 0.0, 1.0, nodes).unwrap());
    Arc::new(Calculus::new(Arc::new(CarnotGroup::euclidean(dim).unwrap()), grid).unwrap())
}

fn noise(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn weighted_l2(values: &[f64], vol: f64) -> f64 {
    (vol * values.iter().map(|v| v * v).sum::<f64>()).sqrt()
}

fn c1_integration_by_parts() -> Outcome {
    let mut worst = 0.0f64;
    for (calc, seed) in [(heisenberg(9), 11u64), (euclidean(2, 33), 12)] {
        let grid = calc.grid();
        let vol = grid.cell_volume();
        let m = calc.horizontal_dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..100 {
            let u = ScalarField::from_interior(grid, &noise(&mut rng, grid.n_interior())).unwrap();
            let phi = HorizontalField::from_values(grid, m, noise(&mut rng, grid.len() * m)).unwrap();
            let lhs = calc.pairing(&calc.div(&phi).unwrap(), &u).unwrap() + calc.flux_pairing(&phi, &calc.grad(&u).unwrap()).unwrap();
            let scale = weighted_l2(phi.values(), vol) * weighted_l2(u.values(), vol);
            worst = worst.max(lhs.abs() / scale);
        }
    }
    outcome(worst <= IBP_RTOL, format!("worst |<div phi,u> + <phi,grad u>| / (|phi| |u|) = {worst:.2e}"))
}

fn c2_affine_exactness() -> Outcome {
    let mut worst = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for calc in [heisenberg(9), euclidean(2, 33)] {
        let grid = calc.grid();
        let m = calc.horizontal_dim();
        for _ in 0..20 {
            let xi = noise(&mut rng, m);
            let u = ScalarField::from_fn(grid, |x| x[..m].iter().zip(&xi).map(|(a, b)| a * b).sum());
            let g = calc.grad(&u).unwrap();
            for &k in grid.interior_nodes() {
                for (a, b) in g.at(k).iter().zip(&xi) {
                    worst = worst.max((a - b).abs());
                }
            }
        }
    }
    outcome(worst <= AFFINE_ATOL, format!("worst interior |grad <xi, pi(x)> - xi| = {worst:.2e}"))
}

/// Infimum of `<|s|^2 s - |t|^2 t, s - t> / |s - t|^4` over a dense 1-D
/// profile `s = 1`, `t` in [-50, 50].
fn p4_profile_alpha() -> f64 {
    let n = 2_000_001;
    (0..n)
        .map(|i| -50.0 + 100.0 * i as f64 / (n - 1) as f64)
        .filter(|t| (1.0 - t).abs() > 1e-9)
        .map(|t: f64| (1.0 - t.powi(3)) * (1.0 - t) / (1.0 - t).powi(4))
        .fold(f64::INFINITY, f64::min)
}

fn membership_reports(seed: u64) -> (MembershipReport, MembershipReport) {
    let h = CarnotGroup::heisenberg();
    let domain = vec![(-1.0, 1.0); 3];
    let id = verify_membership(&OperatorSpec::identity(2), &h, &domain, MEMBERSHIP_SAMPLES, seed).unwrap();
    let p4 = OperatorSpec::scalar_p_laplacian(4.0, Coefficient::Constant(1.0)).unwrap();
    let deg = verify_membership(&p4, &h, &domain, MEMBERSHIP_SAMPLES, seed + 1).unwrap();
    (id, deg)
}

fn c3_membership() -> Outcome {
    let (id, deg) = membership_reports(31);
    let oracle = p4_profile_alpha();
    let declared = 2f64.powi(2 - 4);
    let id_ok = id.violations == 0
        && (id.empirical_alpha - 1.0).abs() <= UNIT_CONSTANT_ATOL
        && (id.empirical_beta - 1.0).abs() <= UNIT_CONSTANT_ATOL
        && id.sample_count == MEMBERSHIP_SAMPLES;
    let deg_ok = deg.violations == 0
        && deg.declared_alpha == declared
        && (oracle - declared).abs() <= 1e-9
        && deg.empirical_alpha >= declared * (1.0 - 1e-10)
        && deg.empirical_beta <= deg.declared_beta;
    outcome(
        id_ok && deg_ok,
        format!(
            "identity alpha {:.15} beta {:.15} violations {}; p=4 violations {} empirical alpha {:.6} (declared {declared}, profile oracle {oracle:.9})",
            id.empirical_alpha, id.empirical_beta, id.violations, deg.violations, deg.empirical_alpha
        ),
    )
}

struct SolveLog {
    checked: usize,
    violations: usize,
}

impl SolveLog {
    fn record(&mut self, calc: &Arc<Calculus>, spec: &OperatorSpec, f: &ScalarField, rep: &SolveReport, tol: f64) {
        let c = a_priori_check(calc, spec, f, rep, tol).unwrap();
        self.checked += 1;
        self.violations += usize::from(!c.holds);
    }
}

fn c4_manufactured(log: &mut SolveLog) -> Outcome {
    let mut worst = 0.0f64;
    let mut worst_direct = 0.0f64;
    let grid_e = Arc::new(Grid::cube(3, 0.0, 1.0, 17).unwrap());
    let calcs = [Arc::new(Calculus::new(Arc::new(CarnotGroup::euclidean(3).unwrap()), grid_e).unwrap()), heisenberg(17)];
    for calc in calcs {
        let grid = calc.grid();
        let bounds = grid.bounds().to_vec();
        let exact = ScalarField::from_fn(grid, |x| {
            x.iter().zip(&bounds).map(|(v, (a, b))| (std::f64::consts::PI * (v - a) / (b - a)).sin()).product::<f64>() * (1.0 + x[0])
        })
        .masked();
        let spec = OperatorSpec::scalar_p_laplacian(2.0, Coefficient::Smooth { amp: 0.5 }).unwrap();
        let zero = WeakProblem::new(calc.clone(), spec.clone(), ScalarField::zeros(grid)).unwrap();
        let f = calc.div(&momentum(&zero, &exact).unwrap()).unwrap().scaled(-1.0);
        let problem = WeakProblem::new(calc.clone(), spec.clone(), f.clone()).unwrap();
        let (u, rep) = solve(&problem, &SolveOptions { tol: TIGHT_TOL, ..Default::default() }).unwrap();
        log.record(&calc, &spec, &f, &rep, TIGHT_TOL);
        let direct = solve_direct(&problem).unwrap();
        worst = worst.max(u.max_abs_diff(&exact).unwrap());
        worst_direct = worst_direct.max(u.max_abs_diff(&direct).unwrap());
    }
    outcome(
        worst <= MANUFACTURED_ATOL && worst_direct <= DIRECT_ATOL,
        format!("max nodal error {worst:.2e}, iterative vs direct {worst_direct:.2e}"),
    )
}

fn estimate_reports(seed: u64) -> Vec<EstimatesReport> {
    let calc = heisenberg(9);
    [2.0, 4.0]
        .iter()
        .map(|&p| {
            let spec = OperatorSpec::scalar_p_laplacian(p, Coefficient::Smooth { amp: 0.5 }).unwrap();
            verify_estimates(&calc, &spec, &EstimateOptions { trials: 100, seed, tol: SOLVE_TOL }).unwrap()
        })
        .collect()
}

fn c5_estimates(log: &mut SolveLog) -> Outcome {
    let reports = estimate_reports(51);
    let mut pass = true;
    let mut detail = Vec::new();
    for r in &reports {
        pass &= r.monotonicity.violations == 0 && r.continuity.violations == 0 && r.stability.violations == 0 && r.stability.failures == 0;
        log.checked += r.a_priori.checked;
        log.violations += r.a_priori.violations;
        detail.push(format!(
            "p={}: violations a/b/c {}/{}/{}, worst ratios {:.4}/{:.4}/{:.4}",
            r.p,
            r.monotonicity.violations,
            r.stability.violations,
            r.continuity.violations,
            r.monotonicity.worst_ratio,
            r.stability.worst_ratio,
            r.continuity.worst_ratio
        ));
    }
    outcome(pass, detail.join("; "))
}

fn c7_uniqueness(log: &mut SolveLog) -> Outcome {
    let calc = heisenberg(9);
    let grid = calc.grid();
    let spec = OperatorSpec::scalar_p_laplacian(4.0, Coefficient::Smooth { amp: 0.5 }).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(71);
    let mut worst = 0.0f64;
    let mut pass = true;
    for _ in 0..10 {
        let f = ScalarField::from_interior(grid, &noise(&mut rng, grid.n_interior())).unwrap();
        let problem = WeakProblem::new(calc.clone(), spec.clone(), f.clone()).unwrap();
        let mut sols = Vec::new();
        for _ in 0..3 {
            let scale = 10f64.powf(rng.random_range(-1.0..1.0));
            let init = ScalarField::from_interior(grid, &noise(&mut rng, grid.n_interior())).unwrap().scaled(scale);
            let (u, rep) = solve(&problem, &SolveOptions { tol: SOLVE_TOL, initial: Some(init), ..Default::default() }).unwrap();
            log.record(&calc, &spec, &f, &rep, SOLVE_TOL);
            sols.push((u, rep.v_norm_u));
        }
        for i in 0..3 {
            for j in i + 1..3 {
                let d = calc.v_norm(&sols[i].0.sub(&sols[j].0).unwrap(), 4.0).unwrap();
                let allowed = UNIQUENESS_FACTOR * SOLVE_TOL * (1.0 + sols[i].1.max(sols[j].1));
                worst = worst.max(d / allowed);
                pass &= d <= allowed;
            }
        }
    }
    outcome(pass, format!("worst ||u_i - u_j||_V / (10 tol (1 + ||u||_V)) = {worst:.3}"))
}

fn laminate_config() -> SequenceConfig {
    let calc = euclidean(2, 257);
    let spec = OperatorSpec::scalar_p_laplacian(2.0, Coefficient::Laminate { a1: 1.0, a2: 4.0 }).unwrap();
    let cutoff = CutoffSpec::with_default_width(calc.grid(), vec![(0.25, 0.75); 2]);
    SequenceConfig::new(calc, spec, vec![1, 2, 4, 8], FieldRule::Constant(1.0), cutoff)
}

fn effective_estimates() -> Vec<EffectiveEstimate> {
    estimate_effective(&laminate_config(), &[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap()
}

fn c8_homogenization() -> Outcome {
    let cfg = laminate_config();
    let (a1, a2) = (1.0, 4.0);
    let harmonic = 2.0 / (1.0 / a1 + 1.0 / a2);
    let arithmetic = 0.5 * (a1 + a2);
    let oracle = cell_effective_tensor(&Coefficient::Laminate { a1, a2 }, 2, cfg.cell_resolution).unwrap();
    let oracle_ok =
        ((oracle[0] - harmonic) / harmonic).abs() <= ORACLE_RTOL && ((oracle[3] - arithmetic) / arithmetic).abs() <= ORACLE_RTOL;
    let est = effective_estimates();
    let e11 = est[0].extrapolated[0];
    let e22 = est[1].extrapolated[1];
    let r11 = ((e11 - oracle[0]) / oracle[0]).abs();
    let r22 = ((e22 - oracle[3]) / oracle[3]).abs();
    outcome(
        oracle_ok && r11 <= EFFECTIVE_RTOL && r22 <= EFFECTIVE_RTOL,
        format!("oracle diag ({:.6}, {:.6}); extrapolated ({e11:.6}, {e22:.6}); relative gaps {r11:.2e}, {r22:.2e}", oracle[0], oracle[3]),
    )
}

fn c9_divcurl(log: &mut SolveLog) -> Outcome {
    let cfg = laminate_config();
    let r = divcurl_check(&cfg, &cfg.cutoff).unwrap();
    let h = run_hconv(&cfg).unwrap();
    for row in &h.rows {
        if let Some(m) = &row.metrics {
            log.checked += 1;
            log.violations += usize::from(!m.a_priori.holds);
        }
    }
    let fin = r.final_relative_gap.unwrap_or(f64::INFINITY);
    outcome(
        r.trend_ok && fin <= DIVCURL_FINAL_RTOL,
        format!(
            "gaps {:?}, inversions {} (noise floor {:.2e}), final relative gap {fin:.4}",
            r.gaps.iter().map(|g| g.map(|g| format!("{g:.3e}"))).collect::<Vec<_>>(),
            r.inversions,
            r.noise_floor
        ),
    )
}

fn c10_heisenberg(log: &mut SolveLog) -> Outcome {
    let grid = Arc::new(Grid::cube(3, 0.0, 1.0, 33).unwrap());
    let calc = Arc::new(Calculus::new(Arc::new(CarnotGroup::heisenberg()), grid.clone()).unwrap());
    let spec = OperatorSpec::scalar_p_laplacian(2.0, Coefficient::Smooth { amp: 0.5 }).unwrap();
    let cutoff = CutoffSpec::with_default_width(&grid, vec![(0.25, 0.75); 3]);
    let rhs = FieldRule::Bump { center: vec![0.5; 3], radius: 0.35, amp: 1.0 };
    let mut cfg = SequenceConfig::new(calc, spec, vec![1, 2, 4, 8], rhs, cutoff);
    cfg.test_functions = vec![
        FieldRule::Bump { center: vec![0.5; 3], radius: 0.3, amp: 1.0 },
        FieldRule::Bump { center: vec![0.35, 0.6, 0.5], radius: 0.2, amp: 1.0 },
    ];
    let r = run_hconv(&cfg).unwrap();
    let mut mom_ok = true;
    for row in &r.rows {
        match &row.metrics {
            Some(m) => {
                mom_ok &= m.momentum_bound_slack >= 0.0;
                log.checked += 1;
                log.violations += usize::from(!m.a_priori.holds);
            }
            None => mom_ok = false,
        }
    }
    let ratio = r.cauchy_ratio.unwrap_or(f64::INFINITY);
    let tails: Vec<f64> = r.tail_deltas.iter().map(|d| d.unwrap_or(f64::NAN)).collect();
    outcome(
        mom_ok && r.bounds_hold && ratio <= TAIL_RATIO,
        format!(
            "momentum bounds hold: {mom_ok}; Cauchy increments {:?}; final/first {ratio:.3}; tail ratio T(4)/T(1) {:.3}",
            r.cauchy_increments.iter().map(|d| d.map(|d| format!("{d:.3e}"))).collect::<Vec<_>>(),
            tails[2] / tails[0]
        ),
    )
}

fn c11_determinism() -> Outcome {
    let m1 = serde_json::to_string(&membership_reports(31)).unwrap();
    let m2 = serde_json::to_string(&membership_reports(31)).unwrap();
    let e1 = serde_json::to_string(&estimate_reports(51)).unwrap();
    let e2 = serde_json::to_string(&estimate_reports(51)).unwrap();
    let h1 = serde_json::to_string(&effective_estimates()).unwrap();
    let h2 = serde_json::to_string(&effective_estimates()).unwrap();
    let same = [m1 == m2, e1 == e2, h1 == h2];
    outcome(same.iter().all(|s| *s), format!("membership/estimates/effective identical: {same:?}"))
}

fn report(id: u32, name: &str, o: &Outcome, secs: f64) {
    let verdict = if o.pass { "PASS" } else { "FAIL" };
    writeln!(std::io::stdout().lock(), "criterion {id:>2} {verdict} {name} ({secs:.1} s): {}", o.detail).unwrap();
}

fn timed(id: u32, name: &str, f: impl FnOnce() -> Outcome) -> (u32, bool) {
    let t = Instant::now();
    let o = f();
    report(id, name, &o, t.elapsed().as_secs_f64());
    (id, o.pass)
}

fn main() {
    let mut log = SolveLog { checked: 0, violations: 0 };
    let mut results = vec![
        timed(1, "integration by parts", c1_integration_by_parts),
        timed(2, "affine exactness", c2_affine_exactness),
        timed(3, "class membership", c3_membership),
        timed(4, "solver correctness", || c4_manufactured(&mut log)),
        timed(5, "monotonicity, stability, continuity", || c5_estimates(&mut log)),
        timed(7, "uniqueness", || c7_uniqueness(&mut log)),
        timed(8, "homogenization oracle", c8_homogenization),
        timed(9, "div-curl trend", || c9_divcurl(&mut log)),
        timed(10, "Heisenberg H-convergence diagnostics", || c10_heisenberg(&mut log)),
    ];
    let a_priori =
        outcome(log.violations == 0 && log.checked > 0, format!("{} solves checked, {} violations", log.checked, log.violations));
    report(6, "a-priori bounds", &a_priori, 0.0);
    results.push((6, a_priori.pass));
    results.push(timed(11, "determinism", c11_determinism));
    let failed: Vec<u32> = results.iter().filter(|r| !r.1).map(|r| r.0).collect();
    if failed.is_empty() {
        println!("all {} criteria pass", results.len());
    } else {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
