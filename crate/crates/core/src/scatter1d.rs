//! Direct solution of `((hD)^2 + V - E) u = 0` and extraction of the
//! reflection and transmission coefficients.
//!
//! The solution is fixed on the right by the outgoing condition
//! `u = e^{ikx}`, `k = sqrt(E)/h`, integrated leftward to the origin and
//! decomposed there into `A e^{ikx} + B e^{-ikx}`. Dividing by `A` gives the
//! normalisation with unit incident amplitude: `R = B/A`, `T = 1/A`.
//!
//! Internally the state is `(u, h u')`, which keeps both components of
//! order one.

use std::ops::ControlFlow;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::{integrate_through_nodes, OdeOptions};
use crate::potential::{ConormalPotential1D, Potential1D};

/// Step-size and tolerance settings shared by the 1D solvers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Steps never exceed `h / max_step_per_wavelength`.
    pub max_step_per_wavelength: f64,
    /// Extra mesh nodes on top of the potential's own breakpoints.
    pub forced_nodes: Vec<f64>,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-11,
            abs_tol: 1e-11,
            max_step_per_wavelength: 10.0,
            forced_nodes: Vec::new(),
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(Error::InvalidParameter("tolerances must be positive".into()));
        }
        if !(self.max_step_per_wavelength >= 4.0) {
            return Err(Error::InvalidParameter(format!(
                "max_step_per_wavelength must be at least 4, got {}",
                self.max_step_per_wavelength
            )));
        }
        Ok(())
    }

    pub(crate) fn ode_options(&self, max_step: f64) -> OdeOptions {
        OdeOptions {
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            max_step,
            ..OdeOptions::default()
        }
    }
}

/// Which construction produced a [`ScatteringResult`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Direct,
    Appendix,
    SquareBarrierOracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScatteringResult {
    pub h: f64,
    pub r: Complex64,
    pub t: Complex64,
    /// `|R|^2 + |T|^2 - 1`.
    pub flux_defect: f64,
    pub method: Method,
    /// Accumulated embedded-pair error of the solve (zero for closed forms).
    pub error_estimate: f64,
    pub steps: usize,
}

impl ScatteringResult {
    pub(crate) fn new(h: f64, r: Complex64, t: Complex64, method: Method) -> Self {
        Self {
            h,
            r,
            t,
            flux_defect: r.norm_sqr() + t.norm_sqr() - 1.0,
            method,
            error_estimate: 0.0,
            steps: 0,
        }
    }

    /// `h^{-alpha} |R|`.
    pub fn rescaled_modulus(&self, alpha: f64) -> f64 {
        self.r.norm() / self.h.powf(alpha)
    }
}

/// A 1D scattering problem at fixed energy.
#[derive(Debug, Clone)]
pub struct ScatteringProblem<P> {
    pub potential: P,
    pub h: f64,
    pub energy: f64,
    pub x_left: f64,
    pub x_right: f64,
}

pub const DEFAULT_LEFT_MARGIN: f64 = 0.1;
pub const DEFAULT_RIGHT_MARGIN: f64 = 0.1;

impl<P: Potential1D> ScatteringProblem<P> {
    /// Energy 1 and a window extending 0.1 past the support on each side.
    pub fn new(potential: P, h: f64) -> Self {
        let (_, right) = potential.support();
        Self {
            potential,
            h,
            energy: 1.0,
            x_left: -DEFAULT_LEFT_MARGIN,
            x_right: right.max(0.0) + DEFAULT_RIGHT_MARGIN,
        }
    }

    pub fn with_energy(mut self, energy: f64) -> Self {
        self.energy = energy;
        self
    }

    pub fn with_window(mut self, x_left: f64, x_right: f64) -> Self {
        self.x_left = x_left;
        self.x_right = x_right;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(Error::InvalidParameter(format!("h must be positive, got {}", self.h)));
        }
        let sup_v = self.potential.sup();
        if !(self.energy > sup_v) {
            return Err(Error::NonPropagating {
                energy: self.energy,
                sup_v,
            });
        }
        let (lo, hi) = self.potential.support();
        if self.x_left > lo.min(0.0) || self.x_right < hi {
            return Err(Error::InvalidParameter(format!(
                "window [{}, {}] must contain the support [{lo}, {hi}] and the origin",
                self.x_left, self.x_right
            )));
        }
        Ok(())
    }

    /// Effective semiclassical parameter `h / sqrt(E)`: the free waves are `e^{±ix/h_eff}`.
    pub fn h_eff(&self) -> f64 {
        self.h / self.energy.sqrt()
    }
}

/// Value and derivative of the solution at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryTrace {
    pub x: f64,
    pub u: Complex64,
    pub du: Complex64,
    pub error_estimate: f64,
    pub steps: usize,
}

fn pack(u: Complex64, w: Complex64) -> [f64; 4] {
    [u.re, u.im, w.re, w.im]
}

fn unpack(y: &[f64; 4]) -> (Complex64, Complex64) {
    (Complex64::new(y[0], y[1]), Complex64::new(y[2], y[3]))
}

/// Mesh nodes and per-interval step caps for a potential at scale `h`.
pub(crate) struct Mesh {
    nodes: Vec<f64>,
    rough: Vec<(f64, f64)>,
    h: f64,
    base_cap: f64,
}

impl Mesh {
    pub(crate) fn new<P: Potential1D>(pot: &P, h: f64, cfg: &IntegratorConfig) -> Self {
        let mut nodes = pot.breakpoints();
        nodes.extend(cfg.forced_nodes.iter().copied());
        nodes.push(0.0);
        let rough: Vec<(f64, f64)> = pot
            .rough_points()
            .into_iter()
            .filter(|&(_, exponent)| exponent < 1.0)
            .collect();
        for &(p, _) in &rough {
            nodes.push(p - h);
            nodes.push(p + h);
        }
        Self {
            nodes,
            rough,
            h,
            base_cap: h / cfg.max_step_per_wavelength,
        }
    }

    pub(crate) fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Step cap on the interval between consecutive nodes `a` and `b`.
    pub(crate) fn cap(&self, a: f64, b: f64) -> f64 {
        let mid = 0.5 * (a + b);
        let near_rough = self
            .rough
            .iter()
            .any(|&(p, _)| (mid - p).abs() <= self.h);
        if near_rough {
            self.h / 100.0
        } else {
            self.base_cap
        }
    }
}

/// Integrates the outgoing solution from `x_right` leftward to `x_stop`.
pub fn integrate_outgoing_to<P: Potential1D>(
    problem: &ScatteringProblem<P>,
    x_stop: f64,
    cfg: &IntegratorConfig,
) -> Result<BoundaryTrace> {
    problem.validate()?;
    cfg.validate()?;
    let h = problem.h;
    let energy = problem.energy;
    let k = energy.sqrt() / h;
    let x_start = problem.x_right;

    let u_start = Complex64::from_polar(1.0, k * x_start);
    let w_start = Complex64::new(0.0, energy.sqrt()) * u_start;

    let mesh = Mesh::new(&problem.potential, h, cfg);
    let pot = &problem.potential;
    let rhs = |x: f64, y: &[f64; 4]| -> Result<[f64; 4]> {
        let (u, w) = unpack(y);
        let du = w / h;
        let dw = u * ((pot.value(x) - energy) / h);
        Ok(pack(du, dw))
    };
    let out = integrate_through_nodes(
        rhs,
        x_start,
        pack(u_start, w_start),
        x_stop,
        mesh.nodes(),
        |a, b| cfg.ode_options(mesh.cap(a, b)),
        |_| ControlFlow::Continue(()),
    )?;
    let (u, w) = unpack(&out.y);
    Ok(BoundaryTrace {
        x: out.t,
        u,
        du: w / h,
        error_estimate: out.error_sum,
        steps: out.accepted,
    })
}

/// Returns `(u(0), u'(0))` of the outgoing solution with unit amplitude on the right.
pub fn integrate_schrodinger<P: Potential1D>(
    problem: &ScatteringProblem<P>,
    cfg: &IntegratorConfig,
) -> Result<BoundaryTrace> {
    integrate_outgoing_to(problem, 0.0, cfg)
}

/// Splits `(u0, u0')` at a point left of the support into incident and
/// reflected plane waves and renormalises to unit incident amplitude.
pub fn extract_rt(u0: Complex64, du0: Complex64, h: f64) -> Result<(Complex64, Complex64)> {
    let i_h_du = Complex64::new(0.0, h) * du0;
    let a = (u0 - i_h_du) / 2.0;
    let b = (u0 + i_h_du) / 2.0;
    if a.norm() < 1e-12 {
        return Err(Error::DegenerateIncident { modulus: a.norm() });
    }
    Ok((b / a, a.inv()))
}

/// Direct solve: integrate and extract.
pub fn solve<P: Potential1D>(
    problem: &ScatteringProblem<P>,
    cfg: &IntegratorConfig,
) -> Result<ScatteringResult> {
    let trace = integrate_schrodinger(problem, cfg)?;
    let (r, t) = extract_rt(trace.u, trace.du, problem.h_eff())?;
    let mut res = ScatteringResult::new(problem.h, r, t, Method::Direct);
    res.error_estimate = trace.error_estimate;
    res.steps = trace.steps;
    Ok(res)
}

/// Closed-form `(R, T)` for a rectangular barrier of height `v0` on `[0, width]`.
pub fn square_barrier_oracle(v0: f64, width: f64, h: f64, energy: f64) -> Result<(Complex64, Complex64)> {
    if !(v0 >= 0.0 && v0 < energy) {
        return Err(Error::InvalidParameter(format!(
            "barrier height {v0} must lie in [0, E = {energy})"
        )));
    }
    if !(width > 0.0 && h > 0.0) {
        return Err(Error::InvalidParameter("width and h must be positive".into()));
    }
    let k = energy.sqrt() / h;
    let kappa = (energy - v0).sqrt() / h;
    let i = Complex64::i();

    // Columns: (value, derivative) of e^{+iqx} and e^{-iqx} at x.
    let basis = |q: f64, x: f64| -> [[Complex64; 2]; 2] {
        let ep = (i * q * x).exp();
        let em = (-i * q * x).exp();
        [[ep, em], [i * q * ep, -i * q * em]]
    };
    let inv2 = |m: [[Complex64; 2]; 2]| -> [[Complex64; 2]; 2] {
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        [[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]]
    };
    let mul = |a: [[Complex64; 2]; 2], b: [[Complex64; 2]; 2]| -> [[Complex64; 2]; 2] {
        let mut c = [[Complex64::new(0.0, 0.0); 2]; 2];
        for r in 0..2 {
            for col in 0..2 {
                c[r][col] = a[r][0] * b[0][col] + a[r][1] * b[1][col];
            }
        }
        c
    };
    // Amplitudes left -> inside at x = 0, inside -> right at x = width.
    let m0 = mul(inv2(basis(kappa, 0.0)), basis(k, 0.0));
    let m1 = mul(inv2(basis(k, width)), basis(kappa, width));
    let m = mul(m1, m0);
    // (T, 0) = M (1, R)
    let r = -m[1][0] / m[1][1];
    let t = m[0][0] + m[0][1] * r;
    Ok((r, t))
}

/// One entry of a sweep: the solve at `h`, or the error it raised.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub h: f64,
    pub outcome: Result<ScatteringResult>,
}

/// Solves the default-shaped conormal problem at every `h` in parallel.
/// Output is sorted by `h` ascending, independent of input order.
pub fn reflection_sweep(
    potential: &ConormalPotential1D,
    h_grid: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Vec<SweepPoint>> {
    sweep_with(potential, h_grid, cfg)
}

/// [`reflection_sweep`] for an arbitrary potential.
pub fn sweep_with<P: Potential1D + Clone>(
    potential: &P,
    h_grid: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Vec<SweepPoint>> {
    if let Some(bad) = h_grid.iter().find(|h| !(**h > 0.0 && h.is_finite())) {
        return Err(Error::InvalidParameter(format!("h grid entry {bad} is not positive")));
    }
    let mut grid = h_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    let out = grid
        .par_iter()
        .map(|&h| {
            let problem = ScatteringProblem::new(potential.clone(), h);
            SweepPoint {
                h,
                outcome: solve(&problem, cfg),
            }
        })
        .collect();
    Ok(out)
}
