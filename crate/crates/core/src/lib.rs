//! Dirichlet Green's functions in the unit ball for elliptic operators with
//! singular inward radial drifts.
//!
//! The radial profiles in [`radial`] are the precision engine; [`verify`]
//! certifies their normalization against the weak form, [`bounds`] probes
//! the two-sided estimates, and [`fd`] cross-checks everything with an
//! independent 3-D finite-difference solve.

pub mod bounds;
pub mod drift;
pub mod error;
pub mod experiments;
pub mod fd;
pub mod quad;
pub mod radial;
pub mod verify;

pub use drift::{DriftFamily, DriftSpec, LimitingBound};
pub use error::{Error, Result};
pub use quad::QuadratureConfig;
pub use radial::{build_profile, green_derivative, green_value, RadialGreenProfile};
