use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("potential derivative is singular at x = {x}")]
    SingularDerivative { x: f64 },

    #[error("step size underflow at t = {t:e} (step {step:e})")]
    StepUnderflow { t: f64, step: f64 },

    #[error("step budget of {max_steps} exhausted at t = {t:e}")]
    StepBudgetExhausted { t: f64, max_steps: usize },

    #[error("energy {energy} does not exceed sup V = {sup_v}; no propagating solution")]
    NonPropagating { energy: f64, sup_v: f64 },

    #[error("incident amplitude |A| = {modulus:e} is too small to normalise")]
    DegenerateIncident { modulus: f64 },

    #[error("quadrature failed to reach tolerance {tol:e} within {max_panels} panels (estimate {estimate:e})")]
    QuadratureFailure {
        tol: f64,
        max_panels: usize,
        estimate: f64,
    },

    #[error("matching exponent eta = {eta} lies outside ({lower}, 1)")]
    EtaOutOfWindow { eta: f64, lower: f64 },

    #[error("normal momentum |xi| = {xi:e} is below the transverse threshold {xi_min:e}")]
    TangentialIncidence { xi: f64, xi_min: f64 },

    #[error("boundary point is not hyperbolic (p~ = {p_tilde:e})")]
    NotHyperbolic { p_tilde: f64 },

    #[error("domain error: {0}")]
    Domain(String),
}

pub type Result<T> = std::result::Result<T, Error>;
