//! Carnot groups given by polynomial coefficient tables.
//!
//! A group of topological dimension `n` with horizontal layer of dimension `m`
//! is described by the horizontal frame `X_i = sum_j c_ij(x) d_j`, `i < m`, with
//! polynomial coefficients. The discrete calculus only ever reads `c_ij(x)`, so
//! any group expressible this way can be fed to it.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};

/// `coeff * prod_j x_j^powers[j]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Monomial {
    pub coeff: f64,
    pub powers: Vec<u32>,
}

/// Sparse polynomial in `n` variables.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Polynomial {
    terms: Vec<Monomial>,
}

impl Polynomial {
    pub fn zero() -> Self {
        Self { terms: Vec::new() }
    }

    pub fn constant(n: usize, c: f64) -> Self {
        let mut p = Self::zero();
        p.push(c, vec![0; n]);
        p
    }

    /// The coordinate function `x_j` scaled by `c`.
    pub fn coordinate(n: usize, j: usize, c: f64) -> Self {
        let mut powers = vec![0; n];
        powers[j] = 1;
        let mut p = Self::zero();
        p.push(c, powers);
        p
    }

    pub fn from_terms(terms: Vec<Monomial>) -> Self {
        let mut p = Self::zero();
        for t in terms {
            p.push(t.coeff, t.powers);
        }
        p
    }

    pub fn terms(&self) -> &[Monomial] {
        &self.terms
    }

    fn push(&mut self, coeff: f64, powers: Vec<u32>) {
        if coeff == 0.0 {
            return;
        }
        if let Some(t) = self.terms.iter_mut().find(|t| t.powers == powers) {
            t.coeff += coeff;
        } else {
            self.terms.push(Monomial { coeff, powers });
        }
        self.terms.retain(|t| t.coeff != 0.0);
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_constant(&self) -> bool {
        self.terms.iter().all(|t| t.powers.iter().all(|&k| k == 0))
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|t| t.powers.iter().zip(x).fold(t.coeff, |acc, (&k, &xi)| acc * xi.powi(k as i32))).sum()
    }

    pub fn derivative(&self, j: usize) -> Polynomial {
        let mut out = Polynomial::zero();
        for t in &self.terms {
            let k = t.powers[j];
            if k == 0 {
                continue;
            }
            let mut powers = t.powers.clone();
            powers[j] = k - 1;
            out.push(t.coeff * k as f64, powers);
        }
        out
    }

    pub fn add(&self, other: &Polynomial) -> Polynomial {
        let mut out = self.clone();
        for t in &other.terms {
            out.push(t.coeff, t.powers.clone());
        }
        out
    }

    pub fn mul(&self, other: &Polynomial) -> Polynomial {
        let mut out = Polynomial::zero();
        for a in &self.terms {
            for b in &other.terms {
                let powers = a.powers.iter().zip(&b.powers).map(|(x, y)| x + y).collect();
                out.push(a.coeff * b.coeff, powers);
            }
        }
        out
    }

    pub fn scale(&self, c: f64) -> Polynomial {
        let mut out = Polynomial::zero();
        for t in &self.terms {
            out.push(t.coeff * c, t.powers.clone());
        }
        out
    }
}

/// Stratified group presented through its horizontal frame.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CarnotGroup {
    name: String,
    layer_dims: Vec<usize>,
    /// `coeff[i][j]` is the coefficient of `d_j` in `X_i`.
    coeff: Vec<Vec<Polynomial>>,
    dilation_exponents: Vec<u32>,
}

impl CarnotGroup {
    /// Builds a group from its layer dimensions and horizontal frame.
    ///
    /// Coordinates are ordered by layer, and the frame must differentiate the
    /// horizontal coordinates directly (`c_ij = delta_ij` for `j < m`).
    pub fn from_parts(name: impl Into<String>, layer_dims: Vec<usize>, coeff: Vec<Vec<Polynomial>>) -> Result<Self> {
        if layer_dims.is_empty() || layer_dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidArgument("layer dimensions must be positive".into()));
        }
        let n: usize = layer_dims.iter().sum();
        let m = layer_dims[0];
        if coeff.len() != m {
            return Err(Error::DimensionMismatch { expected: m, got: coeff.len() });
        }
        for row in &coeff {
            if row.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: row.len() });
            }
            for p in row {
                if p.terms().iter().any(|t| t.powers.len() != n) {
                    return Err(Error::InvalidArgument("monomial arity differs from n".into()));
                }
            }
        }
        for (i, row) in coeff.iter().enumerate() {
            for (j, c) in row.iter().enumerate().take(m) {
                let expected = if i == j { 1.0 } else { 0.0 };
                if !c.is_constant() || c.eval(&vec![0.0; n]) != expected {
                    return Err(Error::InvalidArgument(format!(
                        "X_{} must differentiate horizontal coordinate {} with coefficient {}",
                        i + 1,
                        j + 1,
                        expected
                    )));
                }
            }
        }
        let dilation_exponents = layer_dims.iter().enumerate().flat_map(|(layer, &d)| std::iter::repeat_n(layer as u32 + 1, d)).collect();
        Ok(Self { name: name.into(), layer_dims, coeff, dilation_exponents })
    }

    /// The abelian group `R^n`.
    pub fn euclidean(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("euclidean dimension must be at least 1".into()));
        }
        let coeff =
            (0..n).map(|i| (0..n).map(|j| if i == j { Polynomial::constant(n, 1.0) } else { Polynomial::zero() }).collect()).collect();
        Self::from_parts(format!("euclidean:{n}"), vec![n], coeff)
    }

    /// First Heisenberg group in symmetric coordinates:
    /// `X1 = d_x - (y/2) d_t`, `X2 = d_y + (x/2) d_t`.
    pub fn heisenberg() -> Self {
        let n = 3;
        let one = Polynomial::constant(n, 1.0);
        let x1 = vec![one.clone(), Polynomial::zero(), Polynomial::coordinate(n, 1, -0.5)];
        let x2 = vec![Polynomial::zero(), one, Polynomial::coordinate(n, 0, 0.5)];
        Self::from_parts("heisenberg1", vec![2, 1], vec![x1, x2]).expect("valid frame")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Topological dimension `n`.
    pub fn dim(&self) -> usize {
        self.layer_dims.iter().sum()
    }

    /// Horizontal dimension `m`.
    pub fn horizontal_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    /// Homogeneous dimension `Q = sum_i i m_i`.
    pub fn homogeneous_dim(&self) -> usize {
        self.layer_dims.iter().enumerate().map(|(i, d)| (i + 1) * d).sum()
    }

    pub fn dilation_exponents(&self) -> &[u32] {
        &self.dilation_exponents
    }

    pub fn coefficient(&self, i: usize, j: usize) -> &Polynomial {
        &self.coeff[i][j]
    }

    /// Coefficient row of `X_i` at `x`.
    pub fn coefficient_row(&self, i: usize, x: &[f64]) -> Result<Vec<f64>> {
        self.check_point(x)?;
        if i >= self.horizontal_dim() {
            return Err(Error::InvalidArgument(format!("no horizontal field X_{}", i + 1)));
        }
        Ok(self.coeff[i].iter().map(|c| c.eval(x)).collect())
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        Ok(())
    }

    /// `pi(x) = (x_1, .., x_m)`.
    pub fn horizontal_projection(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_point(x)?;
        Ok(x[..self.horizontal_dim()].to_vec())
    }

    /// Anisotropic dilation `x_j -> lambda^{w_j} x_j`.
    pub fn dilate(&self, lambda: f64, x: &[f64]) -> Result<Vec<f64>> {
        self.check_point(x)?;
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidArgument(format!("dilation factor must be positive, got {lambda}")));
        }
        Ok(x.iter().zip(&self.dilation_exponents).map(|(&xj, &w)| lambda.powi(w as i32) * xj).collect())
    }

    /// Symbolic `X_i g`.
    pub fn apply_field(&self, i: usize, g: &Polynomial) -> Polynomial {
        self.coeff[i].iter().enumerate().fold(Polynomial::zero(), |acc, (j, c)| acc.add(&c.mul(&g.derivative(j))))
    }

    /// Coefficient row of the bracket `[X_i, X_k]`.
    pub fn bracket(&self, i: usize, k: usize) -> Vec<Polynomial> {
        (0..self.dim())
            .map(|j| {
                let a = self.apply_field(i, &self.coeff[k][j]);
                let b = self.apply_field(k, &self.coeff[i][j]);
                a.add(&b.scale(-1.0))
            })
            .collect()
    }
}

impl fmt::Display for CarnotGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

impl FromStr for CarnotGroup {
    type Err = Error;

    /// Parses `euclidean:<n>` or `heisenberg1`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "heisenberg1" {
            return Ok(Self::heisenberg());
        }
        if let Some(rest) = s.strip_prefix("euclidean:") {
            let n = rest.trim().parse::<usize>().map_err(|_| Error::InvalidArgument(format!("bad euclidean dimension '{rest}'")))?;
            return Self::euclidean(n);
        }
        Err(Error::InvalidArgument(format!("unknown group '{s}' (expected 'euclidean:<n>' or 'heisenberg1')")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn euclidean_constructor() {
        let g = CarnotGroup::euclidean(2).unwrap();
        assert_eq!(g.homogeneous_dim(), 2);
        assert_eq!(g.horizontal_dim(), 2);
        let g1 = CarnotGroup::euclidean(1).unwrap();
        assert_eq!(g1.coefficient_row(0, &[0.7]).unwrap(), vec![1.0]);
        let g3 = CarnotGroup::euclidean(3).unwrap();
        for x in [[0.0, 0.0, 0.0], [1.5, -2.0, 3.0]] {
            for i in 0..3 {
                let row = g3.coefficient_row(i, &x).unwrap();
                let e: Vec<f64> = (0..3).map(|j| if i == j { 1.0 } else { 0.0 }).collect();
                assert_eq!(row, e);
            }
        }
        assert!(g3.dilation_exponents().iter().all(|&w| w == 1));
        assert!(CarnotGroup::euclidean(0).is_err());
    }

    #[test]
    fn heisenberg_constructor() {
        let h = CarnotGroup::heisenberg();
        assert_eq!(h.dim(), 3);
        assert_eq!(h.horizontal_dim(), 2);
        assert_eq!(h.layer_dims(), &[2, 1]);
        assert_eq!(h.homogeneous_dim(), 4);
        assert_eq!(h.dilation_exponents(), &[1, 1, 2]);
        assert_eq!(h.coefficient_row(0, &[0.0, 0.0, 0.0]).unwrap(), vec![1.0, 0.0, 0.0]);
        assert_eq!(h.coefficient_row(0, &[0.0, 2.0, 0.0]).unwrap(), vec![1.0, 0.0, -1.0]);
        assert_eq!(h.coefficient_row(1, &[2.0, 0.0, 5.0]).unwrap(), vec![0.0, 1.0, 1.0]);
    }

    #[test]
    fn projection() {
        let h = CarnotGroup::heisenberg();
        assert_eq!(h.horizontal_projection(&[1.0, 2.0, 3.0]).unwrap(), vec![1.0, 2.0]);
        assert_eq!(h.horizontal_projection(&[0.0, 0.0, 9.0]).unwrap(), vec![0.0, 0.0]);
        let e = CarnotGroup::euclidean(2).unwrap();
        assert_eq!(e.horizontal_projection(&[0.3, -0.4]).unwrap(), vec![0.3, -0.4]);
        assert!(matches!(h.horizontal_projection(&[1.0, 2.0]), Err(Error::DimensionMismatch { expected: 3, got: 2 })));
    }

    #[test]
    fn dilation() {
        let e = CarnotGroup::euclidean(2).unwrap();
        assert_eq!(e.dilate(3.0, &[1.0, 1.0]).unwrap(), vec![3.0, 3.0]);
        let h = CarnotGroup::heisenberg();
        assert_eq!(h.dilate(2.0, &[1.0, 1.0, 1.0]).unwrap(), vec![2.0, 2.0, 4.0]);
        let x = [0.3, -1.7, 2.2];
        assert_eq!(h.dilate(1.0, &x).unwrap(), x.to_vec());
        assert!(h.dilate(0.0, &x).is_err());
        assert!(h.dilate(-1.0, &x).is_err());
    }

    #[test]
    fn frame_differentiates_horizontal_coordinates() {
        let samples = [[0.0, 0.0, 0.0], [1.0, -2.0, 0.5], [-3.0, 0.25, 7.0]];
        for g in [CarnotGroup::heisenberg(), CarnotGroup::euclidean(3).unwrap()] {
            let n = g.dim();
            for i in 0..g.horizontal_dim() {
                for j in 0..g.horizontal_dim() {
                    let xij = g.apply_field(i, &Polynomial::coordinate(n, j, 1.0));
                    for x in &samples {
                        let expected = if i == j { 1.0 } else { 0.0 };
                        assert_eq!(xij.eval(&x[..n]), expected);
                    }
                }
            }
        }
    }

    #[test]
    fn heisenberg_bracket_spans_second_layer() {
        let h = CarnotGroup::heisenberg();
        let b = h.bracket(0, 1);
        for x in [[0.0, 0.0, 0.0], [1.0, 2.0, 3.0], [-0.5, 4.0, -1.0]] {
            let row: Vec<f64> = b.iter().map(|c| c.eval(&x)).collect();
            assert_eq!(row, vec![0.0, 0.0, 1.0]);
        }
        let e = CarnotGroup::euclidean(2).unwrap();
        assert!(e.bracket(0, 1).iter().all(Polynomial::is_zero));
    }

    #[test]
    fn homogeneous_dimension_dominates_topological() {
        for g in [CarnotGroup::heisenberg(), CarnotGroup::euclidean(4).unwrap()] {
            let q = g.homogeneous_dim();
            let n = g.dim();
            assert!(q >= n);
            assert_eq!(q == n, g.dilation_exponents().iter().all(|&w| w == 1));
        }
    }

    #[test]
    fn parse_selector() {
        assert_eq!("heisenberg1".parse::<CarnotGroup>().unwrap(), CarnotGroup::heisenberg());
        assert_eq!("euclidean:3".parse::<CarnotGroup>().unwrap().dim(), 3);
        assert!("euclidean:x".parse::<CarnotGroup>().is_err());
        assert!("engel".parse::<CarnotGroup>().is_err());
    }

    #[test]
    fn rejects_frame_not_adapted_to_coordinates() {
        let n = 2;
        let bad = vec![vec![Polynomial::constant(n, 2.0), Polynomial::zero()]];
        assert!(CarnotGroup::from_parts("bad", vec![1, 1], bad).is_err());
    }
}
