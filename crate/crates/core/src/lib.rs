//! Monotone operators `-div_G(A(x, grad_G u)) = f` on Carnot groups: discrete
//! intrinsic calculus, Dirichlet solvers, a-priori estimate checks and
//! H-convergence experiments with oscillating coefficients.

pub mod calculus;
pub mod error;
pub mod estimates;
pub mod field;
pub mod grid;
pub mod group;
pub mod hconv;
pub mod linalg;
pub mod operator;
pub mod rules;
pub mod solver;

pub use calculus::Calculus;
pub use error::{Error, Result, SolveFailure};
pub use field::{HorizontalField, ScalarField};
pub use grid::Grid;
pub use group::CarnotGroup;
pub use hconv::{CutoffSpec, SequenceConfig};
pub use operator::{verify_membership, Coefficient, CustomRule, MembershipReport, OperatorKind, OperatorSpec};
pub use rules::FieldRule;
pub use solver::{solve, SolveOptions, SolveReport, WeakProblem};
