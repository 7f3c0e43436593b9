//! H-convergence experiments: oscillating sequences, div-curl pairings and
//! effective-operator estimates.

pub mod cutoff;
pub mod effective;
pub mod lab;
pub mod reference;

pub use cutoff::CutoffSpec;
pub use effective::{effective_membership, estimate_effective, EffectiveEstimate, EffectiveMembershipReport};
pub use lab::{divcurl_check, run_hconv, DivCurlReport, HConvReport, ReferenceKind, SequenceConfig};
