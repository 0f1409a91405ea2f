//! Computations on Carnot groups: group law in exponential coordinates,
//! central extensions, horizontal and contact lifting, symplectic rigidity
//! checks and Hölder mollification experiments.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::too_many_arguments)]

pub mod carnot;
pub mod curves;
pub mod error;
pub mod extension;
pub mod hoelder;
pub mod linalg;
pub mod symplectic;

pub use carnot::*;
pub use curves::*;
pub use error::{Error, Result};
pub use hoelder::*;
pub use symplectic::{
    area_preserving_check, lambda_from_det, moser_correct, poincare_primitive, quaternion_right_matrix,
    quaternionic_rigidity_check, quaternionic_structure, symplectic_defect, AreaReport, MoserOptions, MoserResult,
    Primitive, RigidityReport, SymplecticStructure,
};
pub use extension::{
    build_extension, graded_hom_compose, hom_obstruction, homomorphism_defect, potential_form,
    top_wedge_coefficient, CentralExtension, ExtensionDef, GradedMapTriple, HomObstruction,
    PotentialForm,
};
