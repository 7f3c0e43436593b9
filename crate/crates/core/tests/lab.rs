use std::sync::Arc;

use carnot_hconv::hconv::*;
use carnot_hconv::*;

fn config(group: CarnotGroup, nodes: usize, coefficient: Coefficient, scales: Vec<u32>) -> SequenceConfig {
    let dim = group.dim();
    let grid = Arc::new(Grid::cube(dim, 0.0, 1.0, nodes).unwrap());
    let calc = Arc::new(Calculus::new(Arc::new(group), grid.clone()).unwrap());
    let spec = OperatorSpec::scalar_p_laplacian(2.0, coefficient).unwrap();
    let cutoff = CutoffSpec::with_default_width(&grid, vec![(0.25, 0.75); dim]);
    SequenceConfig::new(calc, spec, scales, FieldRule::Constant(1.0), cutoff)
}

#[test]
fn heisenberg_constant_medium_has_no_gap() {
    let cfg = config(CarnotGroup::heisenberg(), 25, Coefficient::Constant(2.0), vec![1, 2, 4]);
    let r = run_hconv(&cfg).unwrap();
    assert_eq!(r.reference.kind, ReferenceKind::Homogeneous);
    let first = &r.rows[0].metrics.as_ref().unwrap().solution_pairings;
    for row in &r.rows {
        assert_eq!(&row.metrics.as_ref().unwrap().solution_pairings, first);
    }
    let d = divcurl_check(&cfg, &cfg.cutoff).unwrap();
    assert!(d.gaps.iter().all(|g| *g == Some(0.0)));
    assert!(d.trend_ok);
}

#[test]
fn laminate_ladder_approaches_oracle() {
    let cfg = config(CarnotGroup::euclidean(2).unwrap(), 65, Coefficient::Laminate { a1: 1.0, a2: 4.0 }, vec![1, 2, 4]);
    let r = run_hconv(&cfg).unwrap();
    assert_eq!(r.reference.kind, ReferenceKind::CellOracle);
    let t = r.reference.effective_tensor.as_ref().unwrap();
    assert!((t[0] - 1.6).abs() < 1e-6 && (t[3] - 2.5).abs() < 1e-6);
    let d: Vec<f64> = r.reference_deltas.iter().map(|d| d.unwrap()).collect();
    assert!(d[2] < d[0], "{d:?}");
    assert!(r.bounds_hold);
    for row in &r.rows {
        let m = row.metrics.as_ref().unwrap();
        assert!(m.momentum_bound_slack >= 0.0 && m.solution_bound_slack >= 0.0);
    }
}

#[test]
fn effective_zero_probe_and_duplicates() {
    let cfg = config(CarnotGroup::euclidean(2).unwrap(), 33, Coefficient::Laminate { a1: 1.0, a2: 4.0 }, vec![1, 2]);
    let est = estimate_effective(&cfg, &[vec![0.0, 0.0], vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
    assert!(est[0].averages.iter().flatten().flatten().all(|v| *v == 0.0));
    assert_eq!(est[1].averages, est[2].averages);
    let m = effective_membership(&est, cfg.base.alpha(), cfg.base.beta(), 2.0).unwrap();
    assert_eq!(m.violations, 0);
}

#[test]
fn effective_rejects_thin_ramp() {
    let mut cfg = config(CarnotGroup::euclidean(2).unwrap(), 33, Coefficient::Laminate { a1: 1.0, a2: 4.0 }, vec![1, 2]);
    cfg.cutoff.width = vec![0.04; 2];
    assert!(estimate_effective(&cfg, &[vec![1.0, 0.0]]).is_err());
}

#[test]
fn scale_one_reproduces_solver() {
    let cfg = config(CarnotGroup::heisenberg(), 25, Coefficient::Smooth { amp: 0.5 }, vec![1]);
    let r = run_hconv(&cfg).unwrap();
    let problem = WeakProblem::new(cfg.calc.clone(), cfg.base.clone(), cfg.rhs.sample(cfg.calc.grid())).unwrap();
    let (_, rep) = solve(&problem, &SolveOptions::default()).unwrap();
    let m = r.rows[0].metrics.as_ref().unwrap();
    assert_eq!(m.v_norm, rep.v_norm_u);
    assert_eq!(m.iterations, rep.iterations);
}
