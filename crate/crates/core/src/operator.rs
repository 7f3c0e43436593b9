//! Caratheodory maps `A(x, xi)` and the membership verifier for the class
//! `M(alpha, beta; Omega)`.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::CarnotGroup;

/// Periodic coefficient tabulated on a box; sample `i` sits at
/// `a + i (b - a) / N` and values wrap around with period `b - a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientTable {
    pub bounds: Vec<(f64, f64)>,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

impl CoefficientTable {
    pub fn validate(&self) -> Result<()> {
        if self.bounds.len() != self.shape.len() || self.shape.is_empty() {
            return Err(Error::Table("bounds and shape must have the same positive length".into()));
        }
        let len: usize = self.shape.iter().product();
        if len != self.values.len() || len == 0 {
            return Err(Error::Table(format!("expected {len} values, found {}", self.values.len())));
        }
        if self.bounds.iter().any(|&(a, b)| !(b > a)) {
            return Err(Error::Table("empty period box".into()));
        }
        if self.values.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::Table("values must be positive and finite".into()));
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let table: Self = serde_json::from_str(&text).map_err(|e| Error::Table(e.to_string()))?;
        table.validate()?;
        Ok(table)
    }

    fn eval(&self, x: &[f64]) -> f64 {
        let d = self.shape.len();
        let mut base = vec![0usize; d];
        let mut frac = vec![0.0; d];
        for j in 0..d {
            let (a, b) = self.bounds[j];
            let n = self.shape[j];
            let t = ((x.get(j).copied().unwrap_or(a) - a) / (b - a)).rem_euclid(1.0) * n as f64;
            let i = (t.floor() as usize).min(n - 1);
            base[j] = i;
            frac[j] = t - i as f64;
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << d) {
            let mut w = 1.0;
            let mut flat = 0;
            for j in 0..d {
                let up = (corner >> j) & 1 == 1;
                w *= if up { frac[j] } else { 1.0 - frac[j] };
                let i = if up { (base[j] + 1) % self.shape[j] } else { base[j] };
                flat = flat * self.shape[j] + i;
            }
            if w != 0.0 {
                acc += w * self.values[flat];
            }
        }
        acc
    }
}

/// Scalar coefficient field, evaluated at the (dilated) point.
#[derive(Debug, Clone, PartialEq)]
pub enum Coefficient {
    Constant(f64),
    /// `a1` where `frac(x_1) < 1/2`, `a2` elsewhere.
    Laminate {
        a1: f64,
        a2: f64,
    },
    /// `a1` on cells of side 1/2 with even index sum over horizontal coordinates.
    Checkerboard {
        a1: f64,
        a2: f64,
    },
    /// `1 + amp * prod_{j < m} sin(2 pi x_j)`.
    Smooth {
        amp: f64,
    },
    Table(Arc<CoefficientTable>),
}

impl Coefficient {
    pub fn eval(&self, x: &[f64], m: usize) -> f64 {
        match self {
            Coefficient::Constant(c) => *c,
            Coefficient::Laminate { a1, a2 } => {
                if x[0].rem_euclid(1.0) < 0.5 {
                    *a1
                } else {
                    *a2
                }
            }
            Coefficient::Checkerboard { a1, a2 } => {
                let s: i64 = x[..m].iter().map(|v| (2.0 * v).floor() as i64).sum();
                if s.rem_euclid(2) == 0 {
                    *a1
                } else {
                    *a2
                }
            }
            Coefficient::Smooth { amp } => {
                let prod: f64 = x[..m].iter().map(|v| (2.0 * std::f64::consts::PI * v).sin()).product();
                1.0 + amp * prod
            }
            Coefficient::Table(t) => t.eval(x),
        }
    }

    /// `(inf a, sup a)`.
    pub fn range(&self) -> (f64, f64) {
        match self {
            Coefficient::Constant(c) => (*c, *c),
            Coefficient::Laminate { a1, a2 } | Coefficient::Checkerboard { a1, a2 } => (a1.min(*a2), a1.max(*a2)),
            Coefficient::Smooth { amp } => (1.0 - amp.abs(), 1.0 + amp.abs()),
            Coefficient::Table(t) => t.values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v))),
        }
    }

    /// Period along coordinate `j` (before dilation), `None` if constant along it.
    pub fn period(&self, j: usize, m: usize) -> Option<f64> {
        match self {
            Coefficient::Constant(_) => None,
            Coefficient::Laminate { .. } => (j == 0).then_some(1.0),
            Coefficient::Checkerboard { .. } | Coefficient::Smooth { .. } => (j < m).then_some(1.0),
            Coefficient::Table(t) => t.bounds.get(j).map(|&(a, b)| b - a),
        }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            Coefficient::Constant(_) => true,
            Coefficient::Smooth { amp } => *amp == 0.0,
            Coefficient::Laminate { a1, a2 } | Coefficient::Checkerboard { a1, a2 } => a1 == a2,
            Coefficient::Table(t) => t.values.iter().all(|&v| v == t.values[0]),
        }
    }

    fn validate(&self) -> Result<()> {
        if let Coefficient::Table(t) = self {
            t.validate()?;
        }
        let (lo, hi) = self.range();
        if !(lo > 0.0) || !hi.is_finite() {
            return Err(Error::InvalidArgument(format!("coefficient range [{lo}, {hi}] must be positive and bounded")));
        }
        Ok(())
    }

    /// Parses `const:c`, `laminate:a1,a2`, `checkerboard:a1,a2`, `smooth:amp`
    /// or `file:<path>` (JSON table).
    pub fn parse(s: &str) -> Result<Self> {
        let (kind, args) = s.split_once(':').unwrap_or((s, ""));
        let nums = |n: usize| -> Result<Vec<f64>> {
            let v: std::result::Result<Vec<f64>, _> = args.split(',').map(|t| t.trim().parse::<f64>()).collect();
            match v {
                Ok(v) if v.len() == n => Ok(v),
                _ => Err(Error::InvalidArgument(format!("coefficient '{s}': expected {n} number(s)"))),
            }
        };
        let c = match kind.trim() {
            "const" => Coefficient::Constant(nums(1)?[0]),
            "laminate" => {
                let v = nums(2)?;
                Coefficient::Laminate { a1: v[0], a2: v[1] }
            }
            "checkerboard" => {
                let v = nums(2)?;
                Coefficient::Checkerboard { a1: v[0], a2: v[1] }
            }
            "smooth" => Coefficient::Smooth { amp: nums(1)?[0] },
            "file" => Coefficient::Table(Arc::new(CoefficientTable::load(Path::new(args.trim()))?)),
            other => return Err(Error::InvalidArgument(format!("unknown coefficient kind '{other}'"))),
        };
        c.validate()?;
        Ok(c)
    }
}

impl fmt::Display for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coefficient::Constant(c) => write!(f, "const:{c}"),
            Coefficient::Laminate { a1, a2 } => write!(f, "laminate:{a1},{a2}"),
            Coefficient::Checkerboard { a1, a2 } => write!(f, "checkerboard:{a1},{a2}"),
            Coefficient::Smooth { amp } => write!(f, "smooth:{amp}"),
            Coefficient::Table(t) => write!(f, "table:{:?}", t.shape),
        }
    }
}

type MapFn = dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync;
type EnergyFn = dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync;

/// User-supplied rule `(x, xi) -> A(x, xi)`, with an optional energy density
/// whose `xi`-gradient is the rule.
#[derive(Clone)]
pub struct CustomRule {
    name: String,
    map: Arc<MapFn>,
    energy: Option<Arc<EnergyFn>>,
}

impl CustomRule {
    pub fn new(name: impl Into<String>, map: impl Fn(&[f64], &[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        Self { name: name.into(), map: Arc::new(map), energy: None }
    }

    pub fn with_energy(mut self, energy: impl Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static) -> Self {
        self.energy = Some(Arc::new(energy));
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }
}

impl fmt::Debug for CustomRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomRule").field("name", &self.name).field("potential", &self.energy.is_some()).finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    LinearMatrix,
    ScalarPLaplacian,
    Custom,
}

impl FromStr for OperatorKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear_matrix" => Ok(Self::LinearMatrix),
            "scalar_p_laplacian" => Ok(Self::ScalarPLaplacian),
            "custom" => Ok(Self::Custom),
            other => Err(Error::InvalidArgument(format!("unknown operator kind '{other}'"))),
        }
    }
}

#[derive(Debug, Clone)]
pub enum OperatorRule {
    /// `A(x, xi) = a(x) M xi`.
    LinearMatrix {
        matrix: Vec<f64>,
        m: usize,
        coefficient: Coefficient,
    },
    /// `A(x, xi) = a(x) |xi|^{p-2} xi`.
    ScalarPLaplacian {
        coefficient: Coefficient,
    },
    Custom(CustomRule),
}

/// A Caratheodory map with its exponent and declared constants.
#[derive(Debug, Clone)]
pub struct OperatorSpec {
    p: f64,
    alpha: f64,
    beta: f64,
    rule: OperatorRule,
    scale: u32,
}

/// Serializable description used in reports.
#[derive(Debug, Clone, Serialize)]
pub struct OperatorSummary {
    pub kind: OperatorKind,
    pub p: f64,
    pub alpha: f64,
    pub beta: f64,
    pub coefficient: Option<String>,
    pub scale: u32,
}

fn check_p(p: f64) -> Result<()> {
    if !(p >= 2.0) || !p.is_finite() {
        return Err(Error::UnsupportedExponent(p));
    }
    Ok(())
}

/// Eigenvalues of a small symmetric matrix (cyclic Jacobi).
pub(crate) fn symmetric_eigenvalues(a: &[f64], m: usize) -> Vec<f64> {
    let mut a = a.to_vec();
    for _sweep in 0..100 {
        let off: f64 = (0..m).flat_map(|i| (0..m).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i * m + j].powi(2)).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..m {
            for q in p + 1..m {
                let apq = a[p * m + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q * m + q] - a[p * m + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..m {
                    let akp = a[k * m + p];
                    let akq = a[k * m + q];
                    a[k * m + p] = c * akp - s * akq;
                    a[k * m + q] = s * akp + c * akq;
                }
                for k in 0..m {
                    let apk = a[p * m + k];
                    let aqk = a[q * m + k];
                    a[p * m + k] = c * apk - s * aqk;
                    a[q * m + k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..m).map(|i| a[i * m + i]).collect()
}

impl OperatorSpec {
    /// Degenerate weighted p-Laplacian with certified constants
    /// `alpha = a_min 2^{2-p}` and `beta = a_max (p-1) 2^{(p-2)(p-1)/p}`.
    pub fn scalar_p_laplacian(p: f64, coefficient: Coefficient) -> Result<Self> {
        check_p(p)?;
        coefficient.validate()?;
        let (lo, hi) = coefficient.range();
        let alpha = lo * 2f64.powf(2.0 - p);
        let beta = hi * (p - 1.0) * 2f64.powf((p - 2.0) * (p - 1.0) / p);
        Ok(Self { p, alpha, beta, rule: OperatorRule::ScalarPLaplacian { coefficient }, scale: 1 })
    }

    /// Linear map `a(x) M`, `p = 2`, with `alpha = a_min lambda_min(sym M)` and
    /// `beta = a_max ||M||_2`.
    pub fn linear_matrix(matrix: Vec<Vec<f64>>, coefficient: Coefficient) -> Result<Self> {
        coefficient.validate()?;
        let m = matrix.len();
        if m == 0 || matrix.iter().any(|r| r.len() != m) {
            return Err(Error::InvalidArgument("matrix must be square and non-empty".into()));
        }
        let flat: Vec<f64> = matrix.into_iter().flatten().collect();
        let sym: Vec<f64> = (0..m * m).map(|k| 0.5 * (flat[k] + flat[(k % m) * m + k / m])).collect();
        let lam_min = symmetric_eigenvalues(&sym, m).into_iter().fold(f64::INFINITY, f64::min);
        if !(lam_min > 0.0) {
            return Err(Error::InvalidArgument("matrix is not uniformly monotone".into()));
        }
        let mtm: Vec<f64> = (0..m * m)
            .map(|k| {
                let (i, j) = (k / m, k % m);
                (0..m).map(|l| flat[l * m + i] * flat[l * m + j]).sum()
            })
            .collect();
        let norm = symmetric_eigenvalues(&mtm, m).into_iter().fold(0.0, f64::max).sqrt();
        let (lo, hi) = coefficient.range();
        Ok(Self {
            p: 2.0,
            alpha: lo * lam_min,
            beta: hi * norm,
            rule: OperatorRule::LinearMatrix { matrix: flat, m, coefficient },
            scale: 1,
        })
    }

    /// `A(x, xi) = xi` on `R^m`.
    pub fn identity(m: usize) -> Self {
        let matrix = (0..m).map(|i| (0..m).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
        Self::linear_matrix(matrix, Coefficient::Constant(1.0)).expect("identity is monotone")
    }

    pub fn custom(rule: CustomRule, p: f64, alpha: f64, beta: f64) -> Result<Self> {
        check_p(p)?;
        Self { p, alpha: 1.0, beta: 1.0, rule: OperatorRule::Custom(rule), scale: 1 }.with_constants(alpha, beta)
    }

    /// Replaces the declared constants.
    pub fn with_constants(mut self, alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && beta.is_finite() && alpha <= beta) {
            return Err(Error::InvalidArgument(format!("constants must satisfy 0 < alpha <= beta (got alpha = {alpha}, beta = {beta})")));
        }
        self.alpha = alpha;
        self.beta = beta;
        Ok(self)
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// `p' = p / (p - 1)`.
    pub fn conjugate_exponent(&self) -> f64 {
        self.p / (self.p - 1.0)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn scale(&self) -> u32 {
        self.scale
    }

    pub fn rule(&self) -> &OperatorRule {
        &self.rule
    }

    pub fn kind(&self) -> OperatorKind {
        match self.rule {
            OperatorRule::LinearMatrix { .. } => OperatorKind::LinearMatrix,
            OperatorRule::ScalarPLaplacian { .. } => OperatorKind::ScalarPLaplacian,
            OperatorRule::Custom(_) => OperatorKind::Custom,
        }
    }

    pub fn coefficient(&self) -> Option<&Coefficient> {
        match &self.rule {
            OperatorRule::LinearMatrix { coefficient, .. } | OperatorRule::ScalarPLaplacian { coefficient } => Some(coefficient),
            OperatorRule::Custom(_) => None,
        }
    }

    /// Linear in `xi` (`p = 2` built-ins).
    pub fn is_linear(&self) -> bool {
        match self.rule {
            OperatorRule::LinearMatrix { .. } => true,
            OperatorRule::ScalarPLaplacian { .. } => self.p == 2.0,
            OperatorRule::Custom(_) => false,
        }
    }

    /// `A(x, .)` is the gradient of a convex energy density.
    pub fn is_potential(&self) -> bool {
        match &self.rule {
            OperatorRule::LinearMatrix { matrix, m, .. } => (0..*m).all(|i| (0..*m).all(|j| matrix[i * m + j] == matrix[j * m + i])),
            OperatorRule::ScalarPLaplacian { .. } => true,
            OperatorRule::Custom(rule) => rule.energy.is_some(),
        }
    }

    /// Coefficient is independent of `x`, so the oscillated sequence is constant.
    pub fn is_homogeneous(&self) -> bool {
        self.coefficient().is_some_and(Coefficient::is_constant)
    }

    /// Same map with the coefficient sampled at `delta_n(x)`.
    pub fn oscillate(&self, n: u32) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("oscillation scale must be positive".into()));
        }
        let mut out = self.clone();
        out.scale = n;
        Ok(out)
    }

    /// Point at which the coefficient is sampled.
    pub fn sample_point(&self, group: &CarnotGroup, x: &[f64]) -> Result<Vec<f64>> {
        group.dilate(self.scale as f64, x)
    }

    /// `A(x, xi)` into `out`, with `x` already dilated.
    pub(crate) fn eval_at_sample(&self, y: &[f64], m: usize, xi: &[f64], out: &mut [f64]) {
        match &self.rule {
            OperatorRule::LinearMatrix { matrix, coefficient, .. } => {
                let a = coefficient.eval(y, m);
                for i in 0..m {
                    out[i] = a * (0..m).map(|j| matrix[i * m + j] * xi[j]).sum::<f64>();
                }
            }
            OperatorRule::ScalarPLaplacian { coefficient } => {
                let a = coefficient.eval(y, m);
                scalar_p_flux(a, self.p, xi, out);
            }
            OperatorRule::Custom(rule) => (rule.map)(y, xi, out),
        }
    }

    /// Energy density `W(x, xi)` with `D_xi W = A`, for potential operators.
    pub(crate) fn energy_at_sample(&self, y: &[f64], m: usize, xi: &[f64]) -> Option<f64> {
        match &self.rule {
            OperatorRule::LinearMatrix { matrix, coefficient, .. } if self.is_potential() => {
                let a = coefficient.eval(y, m);
                let q: f64 = (0..m).map(|i| xi[i] * (0..m).map(|j| matrix[i * m + j] * xi[j]).sum::<f64>()).sum();
                Some(0.5 * a * q)
            }
            OperatorRule::ScalarPLaplacian { coefficient } => {
                let a = coefficient.eval(y, m);
                let n2: f64 = xi.iter().map(|v| v * v).sum();
                Some(a * n2.sqrt().powf(self.p) / self.p)
            }
            OperatorRule::Custom(rule) => rule.energy.as_ref().map(|e| e(y, xi)),
            _ => None,
        }
    }

    /// `A(x, xi)` at a point of the domain.
    pub fn eval(&self, group: &CarnotGroup, x: &[f64], xi: &[f64]) -> Result<Vec<f64>> {
        let m = group.horizontal_dim();
        if xi.len() != m {
            return Err(Error::DimensionMismatch { expected: m, got: xi.len() });
        }
        if xi.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("xi must be finite".into()));
        }
        let y = self.sample_point(group, x)?;
        let mut out = vec![0.0; m];
        self.eval_at_sample(&y, m, xi, &mut out);
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteOperator { x: x.to_vec(), xi: xi.to_vec() });
        }
        Ok(out)
    }

    pub fn summary(&self) -> OperatorSummary {
        OperatorSummary {
            kind: self.kind(),
            p: self.p,
            alpha: self.alpha,
            beta: self.beta,
            coefficient: self.coefficient().map(|c| c.to_string()),
            scale: self.scale,
        }
    }
}

pub(crate) fn scalar_p_flux(a: f64, p: f64, xi: &[f64], out: &mut [f64]) {
    let n2: f64 = xi.iter().map(|v| v * v).sum();
    let w = if p == 2.0 {
        a
    } else if n2 == 0.0 {
        0.0
    } else if p == 4.0 {
        a * n2
    } else {
        a * n2.powf(0.5 * (p - 2.0))
    };
    for (o, &x) in out.iter_mut().zip(xi) {
        *o = w * x;
    }
}

/// Empirical check of the structural conditions on random samples.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MembershipReport {
    /// `inf <A(x,xi) - A(x,eta), xi - eta> / |xi - eta|^p`.
    pub empirical_alpha: f64,
    /// `sup |A(x,xi) - A(x,eta)| / ([1 + |xi|^p + |eta|^p]^{(p-2)/p} |xi - eta|)`.
    pub empirical_beta: f64,
    pub declared_alpha: f64,
    pub declared_beta: f64,
    pub violations: usize,
    pub violations_zero: usize,
    pub violations_monotone: usize,
    pub violations_growth: usize,
    pub sample_count: usize,
    pub rng_seed: u64,
}

/// Relative rounding allowance when comparing against declared constants.
pub const MEMBERSHIP_RTOL: f64 = 1e-10;
const CHUNK: usize = 1 << 14;

fn random_vector(rng: &mut ChaCha8Rng, m: usize, out: &mut [f64]) {
    loop {
        let mut n2 = 0.0;
        for v in out.iter_mut() {
            *v = rng.sample(StandardNormal);
            n2 += *v * *v;
        }
        if n2 > 1e-20 {
            let r = 10f64.powf(rng.random_range(-3.0..3.0)) / n2.sqrt();
            out.iter_mut().for_each(|v| *v *= r);
            debug_assert_eq!(out.len(), m);
            return;
        }
    }
}

#[derive(Clone, Copy)]
struct Tally {
    alpha: f64,
    beta: f64,
    zero: usize,
    mono: usize,
    growth: usize,
    any: usize,
}

/// Samples `x` uniformly in `domain` and `xi`, `eta` isotropically with
/// log-uniform magnitudes in `[1e-3, 1e3]`; deterministic in `seed`.
pub fn verify_membership(
    spec: &OperatorSpec,
    group: &CarnotGroup,
    domain: &[(f64, f64)],
    n_samples: usize,
    seed: u64,
) -> Result<MembershipReport> {
    if n_samples == 0 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    if domain.len() != group.dim() {
        return Err(Error::DimensionMismatch { expected: group.dim(), got: domain.len() });
    }
    let n = group.dim();
    let m = group.horizontal_dim();
    let p = spec.p;
    let chunks = n_samples.div_ceil(CHUNK);
    let tallies: Vec<Tally> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let count = CHUNK.min(n_samples - c * CHUNK);
            let mut t = Tally { alpha: f64::INFINITY, beta: 0.0, zero: 0, mono: 0, growth: 0, any: 0 };
            let mut x = vec![0.0; n];
            let (mut xi, mut eta) = (vec![0.0; m], vec![0.0; m]);
            let (mut a_xi, mut a_eta, mut a0) = (vec![0.0; m], vec![0.0; m], vec![0.0; m]);
            for _ in 0..count {
                for (xj, &(a, b)) in x.iter_mut().zip(domain) {
                    *xj = rng.random_range(a..=b);
                }
                random_vector(&mut rng, m, &mut xi);
                random_vector(&mut rng, m, &mut eta);
                let y = group.dilate(spec.scale as f64, &x).expect("dimension checked");
                spec.eval_at_sample(&y, m, &xi, &mut a_xi);
                spec.eval_at_sample(&y, m, &eta, &mut a_eta);
                spec.eval_at_sample(&y, m, &vec![0.0; m], &mut a0);
                let mut bad = false;
                if a0.iter().any(|&v| v != 0.0) {
                    t.zero += 1;
                    bad = true;
                }
                let mut inner = 0.0;
                let mut d2 = 0.0;
                let mut da2 = 0.0;
                for i in 0..m {
                    let d = xi[i] - eta[i];
                    let da = a_xi[i] - a_eta[i];
                    inner += da * d;
                    d2 += d * d;
                    da2 += da * da;
                }
                let dist = d2.sqrt();
                if dist > 0.0 {
                    let dp = dist.powf(p);
                    t.alpha = t.alpha.min(inner / dp);
                    let nx: f64 = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
                    let ne: f64 = eta.iter().map(|v| v * v).sum::<f64>().sqrt();
                    let weight = (1.0 + nx.powf(p) + ne.powf(p)).powf((p - 2.0) / p);
                    let den = weight * dist;
                    let num = da2.sqrt();
                    t.beta = t.beta.max(num / den);
                    if inner < spec.alpha * dp * (1.0 - MEMBERSHIP_RTOL) {
                        t.mono += 1;
                        bad = true;
                    }
                    if num > spec.beta * den * (1.0 + MEMBERSHIP_RTOL) {
                        t.growth += 1;
                        bad = true;
                    }
                }
                if bad {
                    t.any += 1;
                }
            }
            t
        })
        .collect();
    let total = tallies.iter().fold(Tally { alpha: f64::INFINITY, beta: 0.0, zero: 0, mono: 0, growth: 0, any: 0 }, |acc, t| Tally {
        alpha: acc.alpha.min(t.alpha),
        beta: acc.beta.max(t.beta),
        zero: acc.zero + t.zero,
        mono: acc.mono + t.mono,
        growth: acc.growth + t.growth,
        any: acc.any + t.any,
    });
    Ok(MembershipReport {
        empirical_alpha: total.alpha,
        empirical_beta: total.beta,
        declared_alpha: spec.alpha,
        declared_beta: spec.beta,
        violations: total.any,
        violations_zero: total.zero,
        violations_monotone: total.mono,
        violations_growth: total.growth,
        sample_count: n_samples,
        rng_seed: seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_box(n: usize) -> Vec<(f64, f64)> {
        vec![(0.0, 1.0); n]
    }

    #[test]
    fn eval_examples() {
        let e2 = CarnotGroup::euclidean(2).unwrap();
        let id = OperatorSpec::identity(2);
        assert_eq!(id.eval(&e2, &[0.3, 0.1], &[3.0, 4.0]).unwrap(), vec![3.0, 4.0]);
        let pl = OperatorSpec::scalar_p_laplacian(4.0, Coefficient::Constant(1.0)).unwrap();
        assert_eq!(pl.eval(&e2, &[0.0, 0.0], &[1.0, 0.0]).unwrap(), vec![1.0, 0.0]);
        assert_eq!(pl.eval(&e2, &[0.0, 0.0], &[2.0, 0.0]).unwrap(), vec![8.0, 0.0]);
        let h = CarnotGroup::heisenberg();
        for spec in [
            OperatorSpec::identity(2),
            OperatorSpec::scalar_p_laplacian(3.0, Coefficient::Smooth { amp: 0.5 }).unwrap(),
            OperatorSpec::scalar_p_laplacian(2.0, Coefficient::Laminate { a1: 1.0, a2: 4.0 }).unwrap(),
        ] {
            assert_eq!(spec.eval(&h, &[0.2, 0.7, -0.1], &[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        }
        assert!(id.eval(&e2, &[0.0, 0.0], &[1.0]).is_err());
    }

    #[test]
    fn certified_constants() {
        let pl = OperatorSpec::scalar_p_laplacian(4.0, Coefficient::Laminate { a1: 1.0, a2: 4.0 }).unwrap();
        assert_eq!(pl.alpha(), 0.25);
        assert!((pl.beta() - 4.0 * 3.0 * 2f64.powf(1.5)).abs() < 1e-12);
        assert_eq!(pl.conjugate_exponent(), 4.0 / 3.0);
        let p2 = OperatorSpec::scalar_p_laplacian(2.0, Coefficient::Laminate { a1: 1.0, a2: 4.0 }).unwrap();
        assert_eq!((p2.alpha(), p2.beta()), (1.0, 4.0));
        let id = OperatorSpec::identity(3);
        assert!((id.alpha() - 1.0).abs() < 1e-14 && (id.beta() - 1.0).abs() < 1e-14);
        assert!(OperatorSpec::scalar_p_laplacian(1.5, Coefficient::Constant(1.0)).is_err());
        assert!(pl.clone().with_constants(2.0, 1.0).is_err());
        assert!(OperatorSpec::linear_matrix(vec![vec![0.0, 1.0], vec![-1.0, 0.0]], Coefficient::Constant(1.0)).is_err());
    }

    #[test]
    fn identity_membership() {
        let e2 = CarnotGroup::euclidean(2).unwrap();
        let r = verify_membership(&OperatorSpec::identity(2), &e2, &unit_box(2), 20_000, 7).unwrap();
        assert_eq!(r.violations, 0);
        assert!((r.empirical_alpha - 1.0).abs() < 1e-12);
        assert!((r.empirical_beta - 1.0).abs() < 1e-12);
    }

    #[test]
    fn p_laplacian_membership_sharpness() {
        let e2 = CarnotGroup::euclidean(2).unwrap();
        let spec = OperatorSpec::scalar_p_laplacian(4.0, Coefficient::Constant(1.0)).unwrap();
        let ok = verify_membership(&spec, &e2, &unit_box(2), 50_000, 1).unwrap();
        assert_eq!(ok.violations, 0);
        assert!(ok.empirical_alpha >= 0.25);
        let bad = verify_membership(&spec.with_constants(1.0, 100.0).unwrap(), &e2, &unit_box(2), 50_000, 1).unwrap();
        assert!(bad.violations_monotone > 0);
    }

    #[test]
    fn membership_is_deterministic() {
        let h = CarnotGroup::heisenberg();
        let spec = OperatorSpec::scalar_p_laplacian(3.0, Coefficient::Smooth { amp: 0.4 }).unwrap();
        let dom = vec![(-1.0, 1.0); 3];
        let a = verify_membership(&spec, &h, &dom, 40_000, 99).unwrap();
        let b = verify_membership(&spec, &h, &dom, 40_000, 99).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.violations, 0);
    }

    #[test]
    fn oscillation_keeps_membership() {
        let e2 = CarnotGroup::euclidean(2).unwrap();
        let base = OperatorSpec::scalar_p_laplacian(2.0, Coefficient::Laminate { a1: 1.0, a2: 4.0 }).unwrap();
        assert_eq!(base.oscillate(1).unwrap().summary().scale, 1);
        let r1 = verify_membership(&base, &e2, &unit_box(2), 30_000, 3).unwrap();
        for n in [2, 4, 8] {
            let rn = verify_membership(&base.oscillate(n).unwrap(), &e2, &unit_box(2), 30_000, 3).unwrap();
            assert_eq!(rn.violations, 0);
            // constants stay inside the coefficient range
            assert!(rn.empirical_alpha >= 1.0 - 1e-12 && rn.empirical_beta <= 4.0 + 1e-12);
            assert!((rn.empirical_alpha - r1.empirical_alpha).abs() < 1e-9);
        }
    }

    #[test]
    fn laminate_period_halves() {
        let lam = Coefficient::Laminate { a1: 1.0, a2: 4.0 };
        let e2 = CarnotGroup::euclidean(2).unwrap();
        let spec = OperatorSpec::scalar_p_laplacian(2.0, lam.clone()).unwrap().oscillate(2).unwrap();
        for x1 in [0.1, 0.3, 0.6, 0.8] {
            let a_scaled = spec.eval(&e2, &[x1, 0.5], &[1.0, 0.0]).unwrap()[0];
            assert_eq!(a_scaled, lam.eval(&[2.0 * x1, 1.0], 2));
        }
        // period 1/2 after oscillation
        assert_eq!(spec.eval(&e2, &[0.1, 0.0], &[1.0, 0.0]).unwrap(), spec.eval(&e2, &[0.6, 0.0], &[1.0, 0.0]).unwrap());
        assert_ne!(spec.eval(&e2, &[0.1, 0.0], &[1.0, 0.0]).unwrap(), spec.eval(&e2, &[0.35, 0.0], &[1.0, 0.0]).unwrap());
    }

    #[test]
    fn coefficient_parsing() {
        assert_eq!(Coefficient::parse("laminate:1,4").unwrap(), Coefficient::Laminate { a1: 1.0, a2: 4.0 });
        assert_eq!(Coefficient::parse("smooth:0.5").unwrap(), Coefficient::Smooth { amp: 0.5 });
        assert!(Coefficient::parse("smooth:1.5").is_err());
        assert!(Coefficient::parse("laminate:1").is_err());
        assert!(Coefficient::parse("bogus:1").is_err());
    }

    #[test]
    fn table_coefficient_interpolates_periodically() {
        let t = CoefficientTable { bounds: vec![(0.0, 1.0)], shape: vec![2], values: vec![1.0, 3.0] };
        let c = Coefficient::Table(Arc::new(t));
        assert_eq!(c.eval(&[0.0], 1), 1.0);
        assert_eq!(c.eval(&[0.25], 1), 2.0);
        assert_eq!(c.eval(&[0.75], 1), 2.0);
        assert_eq!(c.eval(&[1.5], 1), 3.0);
        assert_eq!(c.period(0, 1), Some(1.0));
    }

    #[test]
    fn symmetric_eigen() {
        let ev = symmetric_eigenvalues(&[2.0, 1.0, 1.0, 2.0], 2);
        let (lo, hi) = (ev[0].min(ev[1]), ev[0].max(ev[1]));
        assert!((lo - 1.0).abs() < 1e-12 && (hi - 3.0).abs() < 1e-12);
    }
}
