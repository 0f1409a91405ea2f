//! Group law, dilations, quasi-metric, frames and the Lie algebra differential.

pub mod algebra;
pub mod bch;
pub mod forms;
pub mod group;

pub use algebra::{BracketEntry, GroupDef, StratifiedAlgebra, ValidationReport, Violation};
pub use forms::{lie_differential_d0, InvariantForm};
pub use group::{
    contact_coframe, dilate, inverse, left_invariant_frame, left_quotient, multiply, quasi_metric,
    CarnotGroup, GroupElement,
};
