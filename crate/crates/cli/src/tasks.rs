use std::fmt::Write as _;

use carnot_hconv::estimates::{a_priori_check, verify_estimates, EstimateOptions};
use carnot_hconv::hconv::{divcurl_check, effective_membership, estimate_effective, run_hconv, SequenceConfig};
use carnot_hconv::{solve, verify_membership, Error, FieldRule, ScalarField, SolveOptions, WeakProblem};
use serde_json::{json, Value};

use crate::config::{RunConfig, Task};
use crate::CliError;

pub struct TaskOutput {
    pub result: Value,
    pub summary: String,
    /// Plot-ready series.
    pub csv: Option<String>,
    /// Nodal dump of the solution.
    pub field: Option<String>,
    /// Some solve did not converge; the report is still written.
    pub numerical_failure: bool,
}

fn to_json<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("reports serialize")
}

fn field_csv(u: &ScalarField) -> String {
    let grid = u.grid();
    let mut out = String::new();
    let header: Vec<String> = (1..=grid.dim()).map(|j| format!("x{j}")).collect();
    writeln!(out, "{},value", header.join(",")).unwrap();
    for (k, v) in u.values().iter().enumerate() {
        let xs: Vec<String> = grid.coords(k).iter().map(|x| format!("{x}")).collect();
        writeln!(out, "{},{v}", xs.join(",")).unwrap();
    }
    out
}

fn sequence(cfg: &RunConfig) -> Result<SequenceConfig, CliError> {
    let calc = cfg.calculus()?;
    let spec = cfg.operator()?;
    let dim = calc.grid().dim();
    let cutoff = cfg.cutoff(calc.grid())?;
    let mut seq = SequenceConfig::new(calc, spec, cfg.hconv.scales.clone(), cfg.rhs(dim)?, cutoff);
    if !cfg.hconv.test_functions.is_empty() {
        seq.test_functions = cfg
            .hconv
            .test_functions
            .iter()
            .map(|s| FieldRule::parse(s, dim).map_err(|e| CliError::Config(format!("hconv.test_functions: {e}"))))
            .collect::<Result<_, _>>()?;
    }
    if let Some(c) = cfg.hconv.cell_resolution {
        seq.cell_resolution = c;
    }
    seq.reference_refinement = cfg.hconv.reference_refinement;
    seq.tol = cfg.solver.tol;
    seq.max_iter = cfg.solver.max_iter;
    Ok(seq)
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| format!("{v}")).unwrap_or_default()
}

pub fn run(cfg: &RunConfig, dump_field: bool, probes: Option<Vec<Vec<f64>>>) -> Result<TaskOutput, CliError> {
    match cfg.task()? {
        Task::Solve => run_solve(cfg, dump_field),
        Task::CheckClass => {
            let spec = cfg.operator()?;
            let group = cfg.group()?;
            let seed = cfg.seed.expect("validated");
            let r = verify_membership(&spec, &group, &cfg.bounds()?, cfg.membership.samples, seed)?;
            let summary = format!(
                "check-class: {} samples, empirical alpha {:.6e}, empirical beta {:.6e}, {} violations",
                r.sample_count, r.empirical_alpha, r.empirical_beta, r.violations
            );
            Ok(TaskOutput { result: to_json(&r), summary, csv: None, field: None, numerical_failure: false })
        }
        Task::VerifyEstimates => {
            let calc = cfg.calculus()?;
            let spec = cfg.operator()?;
            let opts = EstimateOptions { trials: cfg.estimates.trials, seed: cfg.seed.expect("validated"), tol: cfg.solver.tol };
            let r = verify_estimates(&calc, &spec, &opts)?;
            let summary = format!(
                "verify-estimates: {} trials, violations (a) {} (b) {} (c) {}, a-priori {}, failed solves {}",
                r.trials,
                r.monotonicity.violations,
                r.stability.violations,
                r.continuity.violations,
                r.a_priori.violations,
                r.stability.failures
            );
            let failed = r.stability.failures > 0;
            Ok(TaskOutput { result: to_json(&r), summary, csv: None, field: None, numerical_failure: failed })
        }
        Task::Hconv => {
            let seq = sequence(cfg)?;
            let r = run_hconv(&seq)?;
            let k = seq.test_functions.len();
            let mut csv = String::from("scale");
            for j in 1..=k {
                write!(csv, ",g{j}").unwrap();
            }
            csv.push_str(",tail_delta,reference_delta\n");
            for (i, row) in r.rows.iter().enumerate() {
                write!(csv, "{}", row.scale).unwrap();
                match &row.metrics {
                    Some(m) => m.solution_pairings.iter().for_each(|v| write!(csv, ",{v}").unwrap()),
                    None => (0..k).for_each(|_| csv.push(',')),
                }
                writeln!(csv, ",{},{}", opt(r.tail_deltas[i]), opt(r.reference_deltas[i])).unwrap();
            }
            let failed = r.rows.iter().any(|row| row.error.is_some());
            let summary = format!(
                "hconv: {} scales, bounds hold: {}, Cauchy ratio {}, reference {:?}, {} warnings",
                r.rows.len(),
                r.bounds_hold,
                r.cauchy_ratio.map_or("n/a".into(), |v| format!("{v:.3}")),
                r.reference.kind,
                r.warnings.len()
            );
            Ok(TaskOutput { result: to_json(&r), summary, csv: Some(csv), field: None, numerical_failure: failed })
        }
        Task::Divcurl => {
            let seq = sequence(cfg)?;
            let r = divcurl_check(&seq, &seq.cutoff)?;
            let mut csv = String::from("scale,value,gap,relative_gap\n");
            for (i, n) in r.scales.iter().enumerate() {
                writeln!(csv, "{n},{},{},{}", opt(r.values[i]), opt(r.gaps[i]), opt(r.relative_gaps[i])).unwrap();
            }
            let failed = r.values.iter().any(Option::is_none);
            let summary = format!(
                "divcurl: reference {:.6e}, final relative gap {}, trend ok: {}",
                r.reference,
                r.final_relative_gap.map_or("n/a".into(), |v| format!("{v:.4}")),
                r.trend_ok
            );
            Ok(TaskOutput { result: to_json(&r), summary, csv: Some(csv), field: None, numerical_failure: failed })
        }
        Task::Effective => {
            let seq = sequence(cfg)?;
            let m = seq.calc.horizontal_dim();
            let probes = match probes {
                Some(p) => p,
                None => cfg.probes(m)?,
            };
            let est = estimate_effective(&seq, &probes)?;
            let membership =
                if est.len() >= 2 { Some(effective_membership(&est, seq.base.alpha(), seq.base.beta(), seq.base.p())?) } else { None };
            let mut csv = String::from("probe,scale");
            for i in 1..=m {
                write!(csv, ",a{i}").unwrap();
            }
            csv.push('\n');
            for (j, e) in est.iter().enumerate() {
                for (n, avg) in e.scales.iter().zip(&e.averages) {
                    write!(csv, "{j},{n}").unwrap();
                    match avg {
                        Some(a) => a.iter().for_each(|v| write!(csv, ",{v}").unwrap()),
                        None => (0..m).for_each(|_| csv.push(',')),
                    }
                    csv.push('\n');
                }
                write!(csv, "{j},inf").unwrap();
                e.extrapolated.iter().for_each(|v| write!(csv, ",{v}").unwrap());
                csv.push('\n');
            }
            let failed = est.iter().any(|e| e.averages.iter().any(Option::is_none));
            let summary = format!(
                "effective: {} probes, class violations {}",
                est.len(),
                membership.as_ref().map_or("n/a".into(), |r| r.violations.to_string())
            );
            let result = json!({ "estimates": to_json(&est), "membership": to_json(&membership) });
            Ok(TaskOutput { result, summary, csv: Some(csv), field: None, numerical_failure: failed })
        }
    }
}

fn run_solve(cfg: &RunConfig, dump_field: bool) -> Result<TaskOutput, CliError> {
    let calc = cfg.calculus()?;
    let spec = cfg.operator()?;
    let f = cfg.rhs(calc.grid().dim())?.sample(calc.grid());
    let problem = WeakProblem::new(calc.clone(), spec.clone(), f.clone())?;
    let opts = SolveOptions { tol: cfg.solver.tol, max_iter: cfg.solver.max_iter, initial: None };
    match solve(&problem, &opts) {
        Ok((u, report)) => {
            let check = a_priori_check(&calc, &spec, &f, &report, cfg.solver.tol)?;
            let summary = format!(
                "solve: converged in {} iterations ({:?}), residual {:.3e}, ||u||_V = {:.6e}",
                report.iterations, report.method, report.final_residual, report.v_norm_u
            );
            let result = json!({ "operator": to_json(&spec.summary()), "solve": to_json(&report), "a_priori": to_json(&check) });
            Ok(TaskOutput { result, summary, csv: None, field: dump_field.then(|| field_csv(&u)), numerical_failure: false })
        }
        Err(Error::NotConverged(failure)) | Err(Error::NonFiniteIterate(failure)) => {
            let summary = format!(
                "solve: not converged after {} iterations, residual {:.3e}",
                failure.report.iterations, failure.report.final_residual
            );
            let result = json!({ "operator": to_json(&spec.summary()), "solve": to_json(&failure.report) });
            let field = dump_field.then(|| field_csv(&failure.last_iterate));
            Ok(TaskOutput { result, summary, csv: None, field, numerical_failure: true })
        }
        Err(e) => Err(e.into()),
    }
}
