//! Group-convolution mollification of maps between Carnot groups, decay of
//! pulled-back horizontal coefficients, Hölder seminorm estimates, the
//! Weierstrass function and Young integration.

mod decay;
mod kernel;
mod seminorm;
mod series;

pub use decay::{
    certified_rate, decay_slope, dyadic_scales, fit_line, pullback_derivative, shear_probes, DecayFit, DecayOptions,
    DecayPoint, ShearLift, ShearProfile, NOISE_FLOOR,
};
pub use kernel::{group_convolve, group_convolve_onto, KernelInfo, MollifiedMap, MollifierKernel, KERNEL_NODES};
pub use seminorm::{hoelder_seminorm, HoelderSample, SeminormEstimate, SeminormOptions};
pub use series::{
    sample_path, weierstrass, weierstrass_primitive, weierstrass_tail_bound, young_integral, StieltjesRule,
    YoungIntegral, YoungLevel,
};
