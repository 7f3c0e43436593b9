//! Closed-form scalar fields used as data and test functions. Rules are kept
//! symbolic so they can be resampled on refined grids.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::Grid;

#[derive(Debug, Clone, PartialEq)]
pub enum FieldRule {
    Zero,
    Constant(f64),
    /// `amp * prod_j sin(pi (x_j - a_j) / (b_j - a_j))` over the grid box.
    SinProduct {
        amp: f64,
    },
    /// `amp * exp(1 - 1 / (1 - |x - c|^2 / r^2))` inside the ball, 0 outside.
    Bump {
        center: Vec<f64>,
        radius: f64,
        amp: f64,
    },
}

impl FieldRule {
    /// Parses `zero`, `const:c`, `sin:amp` or `bump:c_1,...,c_n,r[,amp]`
    /// (`dim` fixes how many center coordinates a bump takes).
    pub fn parse(s: &str, dim: usize) -> Result<Self> {
        let (kind, args) = s.split_once(':').unwrap_or((s, ""));
        let nums: Vec<f64> = if args.trim().is_empty() {
            Vec::new()
        } else {
            args.split(',')
                .map(|t| t.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::InvalidArgument(format!("field rule '{s}': malformed number")))?
        };
        let bad = || Error::InvalidArgument(format!("field rule '{s}': wrong number of arguments"));
        let rule = match kind.trim() {
            "zero" if nums.is_empty() => FieldRule::Zero,
            "const" if nums.len() == 1 => FieldRule::Constant(nums[0]),
            "sin" if nums.len() == 1 => FieldRule::SinProduct { amp: nums[0] },
            "bump" if nums.len() == dim + 1 || nums.len() == dim + 2 => {
                let radius = nums[dim];
                if !(radius > 0.0) {
                    return Err(Error::InvalidArgument(format!("field rule '{s}': radius must be positive")));
                }
                FieldRule::Bump { center: nums[..dim].to_vec(), radius, amp: nums.get(dim + 1).copied().unwrap_or(1.0) }
            }
            "zero" | "const" | "sin" | "bump" => return Err(bad()),
            other => return Err(Error::InvalidArgument(format!("unknown field rule '{other}'"))),
        };
        if nums.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("field rule '{s}': values must be finite")));
        }
        Ok(rule)
    }

    pub fn eval(&self, bounds: &[(f64, f64)], x: &[f64]) -> f64 {
        match self {
            FieldRule::Zero => 0.0,
            FieldRule::Constant(c) => *c,
            FieldRule::SinProduct { amp } => {
                amp * x.iter().zip(bounds).map(|(v, (a, b))| (std::f64::consts::PI * (v - a) / (b - a)).sin()).product::<f64>()
            }
            FieldRule::Bump { center, radius, amp } => {
                let r2: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / (radius * radius);
                if r2 < 1.0 {
                    amp * (1.0 - 1.0 / (1.0 - r2)).exp()
                } else {
                    0.0
                }
            }
        }
    }

    /// Nodal samples; the shell is zeroed.
    pub fn sample(&self, grid: &Arc<Grid>) -> ScalarField {
        let bounds = grid.bounds().to_vec();
        ScalarField::from_fn(grid, |x| self.eval(&bounds, x)).masked()
    }

    /// Support lies strictly inside the box (at least one cell away from the
    /// boundary along every axis).
    pub fn is_interior_supported(&self, grid: &Grid) -> bool {
        match self {
            FieldRule::Zero => true,
            FieldRule::Bump { center, radius, .. } => {
                center.iter().zip(grid.bounds()).zip(grid.spacing()).all(|((c, (a, b)), h)| c - radius >= a + h && c + radius <= b - h)
            }
            _ => false,
        }
    }
}

impl fmt::Display for FieldRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldRule::Zero => write!(f, "zero"),
            FieldRule::Constant(c) => write!(f, "const:{c}"),
            FieldRule::SinProduct { amp } => write!(f, "sin:{amp}"),
            FieldRule::Bump { center, radius, amp } => {
                write!(f, "bump:")?;
                for c in center {
                    write!(f, "{c},")?;
                }
                write!(f, "{radius},{amp}")
            }
        }
    }
}
