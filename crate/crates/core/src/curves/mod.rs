//! Horizontal curves, sampled maps and the contact lifting machinery.

pub mod generator;
pub mod lift;
pub mod path;
pub mod sampled;

pub use generator::{box_centers, contact_generator_check, GeneratorReport};
pub use lift::{
    check_lift, closed_loop_defect, default_fiber_probes, fiber_hom_extract, lift_map, pansu_matrix, pullback_loop, pullback_segment,
    pansu_quotient, probe_family, FiberHom, LiftCheck, LiftProblem, Probe, ProbeKind, ProbeOutcome,
    DEFAULT_TOL, RANDOM_PROBES,
};
pub use path::{
    endpoint, horizontal_lift, line_integral, polyline_integral, read_numeric_csv, Control, CoordinateForm,
    HorizontalCurve, LeftInvariantForm, OneForm,
};
pub use sampled::{Chart, Domain, FnMap, MapFile, MapSource, SampledMap};
