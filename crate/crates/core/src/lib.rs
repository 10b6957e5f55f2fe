//! Numerical laboratory for semiclassical scattering off conormal
//! potentials `V = x_+^alpha` and for broken bicharacteristics of the
//! associated singular Hamiltonian.
//!
//! * [`potential`]: the tapered model potential.
//! * [`scatter1d`]: direct ODE solve for the reflection and transmission coefficients.
//! * [`planewave`]: the plane-wave envelope / Wronskian matching route to the same coefficients.
//! * [`asymptotics`]: the leading-order reflection law and `Gamma`.
//! * [`raytrace`]: bicharacteristics, interface crossing and ray splitting.

// Negated comparisons are deliberate: NaN must fail every parameter check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod error;
pub mod ode;
pub mod planewave;
pub mod potential;
pub mod quadrature;
pub mod raytrace;
pub mod scatter1d;

pub use error::{Error, Result};
