//! Exact bicharacteristics of `p = xi^2 + eta^2 - 4|x|^{3/2} - 1` that share
//! their data at `s = s0` yet differ afterwards: the ray can stay on
//! `x = 0` for any time before detaching.

use super::spec::{eval_hamilton_field, HamiltonianSpec, PhasePoint};
use crate::error::Result;

/// `x = (s - s0)_+^4`, `xi = 2 (s - s0)_+^3`, `y = 2s`, `eta = 1`.
/// `s0 = INFINITY` gives the ray that never leaves `x = 0`.
pub fn remark36_family(s0: f64, s: f64) -> PhasePoint {
    let r = (s - s0).max(0.0);
    PhasePoint::new(r.powi(4), vec![2.0 * s], 2.0 * r.powi(3), vec![1.0])
}

/// `d/ds` of [`remark36_family`].
pub fn remark36_velocity(s0: f64, s: f64) -> PhasePoint {
    let r = (s - s0).max(0.0);
    PhasePoint::new(4.0 * r.powi(3), vec![2.0], 6.0 * r * r, vec![0.0])
}

/// Componentwise `max |gamma'(s) - H_p(gamma(s))|` for a member of the family.
pub fn remark36_residual(spec: &HamiltonianSpec, s0: f64, s: f64) -> Result<f64> {
    let field = eval_hamilton_field(spec, &remark36_family(s0, s))?;
    Ok(field.max_abs_diff(&remark36_velocity(s0, s)))
}
