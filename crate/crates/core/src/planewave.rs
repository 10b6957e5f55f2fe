//! Second route to the reflection coefficient: continue the plane waves
//! `e^{±ix/h}` into the potential as `u_± = e^{±ix/h}(1 + b_±)`, build the
//! outgoing solution `v_+` from the right, and read off
//! `v_+ = A u_+ + B u_-` from semiclassical Wronskians at a matching point
//! `x_m = h^eta` that shrinks with `h`.
//!
//! Also provides the first Born term `b_1` in the rescaled variable
//! `y = x/h`, its large-`y` expansion, and the WKB phase.

use std::f64::consts::PI;
use std::ops::ControlFlow;

use num_complex::Complex64;

use crate::asymptotics::{gamma_coefficient, Sign};
use crate::error::{Error, Result};
use crate::ode::integrate_through_nodes;
use crate::potential::{ConormalPotential1D, Potential1D};
use crate::quadrature::{integrate_complex, integrate_real, QuadOptions};
use crate::scatter1d::{
    integrate_outgoing_to, IntegratorConfig, Mesh, Method, ScatteringProblem, ScatteringResult,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeSample {
    pub x: f64,
    pub b: Complex64,
    pub db: Complex64,
}

/// Samples of `b_±` and `b_±'` on `[0, x_end]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeSolution {
    pub sign: Sign,
    pub h: f64,
    pub samples: Vec<EnvelopeSample>,
}

impl EnvelopeSolution {
    /// The `u_-` envelope: pointwise conjugate, valid because `V` is real.
    pub fn conjugate(&self) -> Self {
        let sign = match self.sign {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        };
        Self {
            sign,
            h: self.h,
            samples: self
                .samples
                .iter()
                .map(|s| EnvelopeSample {
                    x: s.x,
                    b: s.b.conj(),
                    db: s.db.conj(),
                })
                .collect(),
        }
    }

    pub fn last(&self) -> &EnvelopeSample {
        self.samples.last().expect("envelope always has its initial sample")
    }

    /// `(u, u')` reconstructed from an envelope sample.
    pub fn plane_wave(&self, s: &EnvelopeSample) -> (Complex64, Complex64) {
        let sg = self.sign.as_f64();
        let phase = Complex64::from_polar(1.0, sg * s.x / self.h);
        let one_b = 1.0 + s.b;
        let u = phase * one_b;
        let du = phase * (Complex64::new(0.0, sg / self.h) * one_b + s.db);
        (u, du)
    }
}

/// Solves `h^2 b'' + 2ih b' = (1 + b) V` with `b(0) = b'(0) = 0` for the
/// `+` envelope.
pub fn solve_envelope_ode<P: Potential1D>(
    pot: &P,
    h: f64,
    x_end: f64,
    cfg: &IntegratorConfig,
) -> Result<EnvelopeSolution> {
    cfg.validate()?;
    if !(h > 0.0) {
        return Err(Error::InvalidParameter(format!("h must be positive, got {h}")));
    }
    let (_, support_end) = pot.support();
    if !(x_end > 0.0) || (support_end > 0.0 && x_end > support_end) {
        return Err(Error::InvalidParameter(format!(
            "x_end = {x_end} must lie in (0, {support_end}]"
        )));
    }

    // State (b, h b').
    let rhs = |x: f64, y: &[f64; 4]| -> Result<[f64; 4]> {
        let b = Complex64::new(y[0], y[1]);
        let c = Complex64::new(y[2], y[3]);
        let db = c / h;
        let dc = ((1.0 + b) * pot.value(x) - Complex64::new(0.0, 2.0) * c) / h;
        Ok([db.re, db.im, dc.re, dc.im])
    };
    let mesh = Mesh::new(pot, h, cfg);
    let mut samples = vec![EnvelopeSample {
        x: 0.0,
        b: Complex64::new(0.0, 0.0),
        db: Complex64::new(0.0, 0.0),
    }];
    integrate_through_nodes(
        rhs,
        0.0,
        [0.0; 4],
        x_end,
        mesh.nodes(),
        |a, b| cfg.ode_options(mesh.cap(a, b)),
        |step| {
            let y = &step.y1;
            samples.push(EnvelopeSample {
                x: step.t1,
                b: Complex64::new(y[0], y[1]),
                db: Complex64::new(y[2], y[3]) / h,
            });
            ControlFlow::Continue(())
        },
    )?;
    Ok(EnvelopeSolution {
        sign: Sign::Plus,
        h,
        samples,
    })
}

/// `sigma(x) = x^{alpha+1} / ((alpha+1) h)`, the Born-series control function
/// on the pure-power region.
pub fn born_sigma(alpha: f64, h: f64, x: f64) -> f64 {
    x.powf(alpha + 1.0) / ((alpha + 1.0) * h)
}

/// `h^{-alpha} b_1` as a function of `y = x/h` (independent of `h`):
/// `e^{-2iy}/(alpha+1) * int_0^y e^{2is} s^{alpha+1} ds`.
pub fn compute_b1(alpha: f64, y: f64) -> Result<Complex64> {
    if !(y >= 0.0) {
        return Err(Error::InvalidParameter(format!("y must be non-negative, got {y}")));
    }
    if y == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let opts = QuadOptions {
        rel_tol: 1e-10,
        // Phase change of at most pi/4 in 2s per panel.
        max_panel_width: PI / 8.0,
        ..QuadOptions::default()
    };
    let integral = integrate_complex(
        |s| Complex64::from_polar(s.powf(alpha + 1.0), 2.0 * s),
        0.0,
        y,
        &opts,
    )?;
    Ok(Complex64::from_polar(1.0, -2.0 * y) * integral.value / (alpha + 1.0))
}

/// The three explicit large-`y` terms of `h^{-alpha} b_1(y)`.
pub fn b1_expansion(alpha: f64, y: f64) -> Complex64 {
    gamma_coefficient(alpha, Sign::Plus) * Complex64::from_polar(1.0, -2.0 * y)
        + y.powf(alpha + 1.0) / Complex64::new(0.0, 2.0 * (alpha + 1.0))
        + y.powf(alpha) / 4.0
}

fn sqrt_f<P: Potential1D>(pot: &P) -> impl Fn(f64) -> f64 + '_ {
    move |s| (1.0 - pot.value(s)).sqrt()
}

/// `phi(x) = int_0^x sqrt(1 - V(s)) ds`.
pub fn wkb_phase<P: Potential1D>(pot: &P, x: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::InvalidParameter(format!("x must be non-negative, got {x}")));
    }
    let opts = QuadOptions {
        rel_tol: 1e-13,
        abs_tol: 1e-15,
        ..QuadOptions::default()
    };
    let mut cuts: Vec<f64> = pot
        .breakpoints()
        .into_iter()
        .filter(|&p| p > 0.0 && p < x)
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.push(x);
    let f = sqrt_f(pot);
    let mut total = 0.0;
    let mut a = 0.0;
    for b in cuts {
        total += integrate_real(&f, a, b, &opts)?.0;
        a = b;
    }
    Ok(total)
}

/// WKB phase shift accumulated across the support: `phi(x1) - x1`.
pub fn wkb_c0<P: Potential1D>(pot: &P) -> Result<f64> {
    let (_, end) = pot.support();
    Ok(wkb_phase(pot, end)? - end)
}

/// Phase and amplitude `f^{-1/4}` of the WKB solution sampled at `xs`.
#[derive(Debug, Clone, PartialEq)]
pub struct WkbData {
    pub xs: Vec<f64>,
    pub phase: Vec<f64>,
    pub amplitude: Vec<f64>,
    pub c0: f64,
}

pub fn wkb_data<P: Potential1D>(pot: &P, xs: &[f64]) -> Result<WkbData> {
    let phase = xs.iter().map(|&x| wkb_phase(pot, x)).collect::<Result<Vec<_>>>()?;
    let amplitude = xs
        .iter()
        .map(|&x| (1.0 - pot.value(x)).powf(-0.25))
        .collect();
    Ok(WkbData {
        xs: xs.to_vec(),
        phase,
        amplitude,
        c0: wkb_c0(pot)?,
    })
}

/// `W_h(u, v) = u (h v') - (h u') v`.
pub fn semiclassical_wronskian(
    u: Complex64,
    du: Complex64,
    v: Complex64,
    dv: Complex64,
    h: f64,
) -> Complex64 {
    h * (u * dv - du * v)
}

/// Lower end `(2 + alpha) / (2 (alpha + 1))` of the admissible matching exponents.
pub fn eta_lower(alpha: f64) -> f64 {
    (2.0 + alpha) / (2.0 * (alpha + 1.0))
}

/// Midpoint of `(eta_lower, 1)`.
pub fn default_eta(alpha: f64) -> f64 {
    0.5 * (1.0 + eta_lower(alpha))
}

/// Result of matching at `x_m`, with the intermediate Wronskians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AppendixMatch {
    pub result: ScatteringResult,
    pub x_match: f64,
    pub w_plus_minus: Complex64,
    pub w_plus_v: Complex64,
    pub w_v_minus: Complex64,
    pub a: Complex64,
    pub b: Complex64,
}

/// Matching at an explicit point `x_match` inside the support.
pub fn connect_at<P: Potential1D + Clone>(
    pot: &P,
    h: f64,
    x_match: f64,
    cfg: &IntegratorConfig,
) -> Result<AppendixMatch> {
    let plus = solve_envelope_ode(pot, h, x_match, cfg)?;
    let minus = plus.conjugate();
    let (up, dup) = plus.plane_wave(plus.last());
    let (um, dum) = minus.plane_wave(minus.last());

    let problem = ScatteringProblem::new(pot.clone(), h);
    let v = integrate_outgoing_to(&problem, x_match, cfg)?;

    let w_pm = semiclassical_wronskian(up, dup, um, dum, h);
    let w_pv = semiclassical_wronskian(up, dup, v.u, v.du, h);
    let w_vm = semiclassical_wronskian(v.u, v.du, um, dum, h);
    let a = w_vm / w_pm;
    let b = w_pv / w_pm;
    if a.norm() < 1e-12 {
        return Err(Error::DegenerateIncident { modulus: a.norm() });
    }
    let mut result = ScatteringResult::new(h, b / a, a.inv(), Method::Appendix);
    result.error_estimate = v.error_estimate;
    result.steps = v.steps + plus.samples.len() - 1;
    Ok(AppendixMatch {
        result,
        x_match,
        w_plus_minus: w_pm,
        w_plus_v: w_pv,
        w_v_minus: w_vm,
        a,
        b,
    })
}

/// Matching at `x_m = h^eta`; `eta` defaults to the window midpoint.
pub fn connect_and_extract_r(
    pot: &ConormalPotential1D,
    h: f64,
    eta: Option<f64>,
    cfg: &IntegratorConfig,
) -> Result<AppendixMatch> {
    let alpha = pot.alpha();
    let lower = eta_lower(alpha);
    let eta = eta.unwrap_or_else(|| default_eta(alpha));
    if !(eta > lower && eta < 1.0) {
        return Err(Error::EtaOutOfWindow { eta, lower });
    }
    let x_match = h.powf(eta);
    if !(x_match < pot.x0()) {
        return Err(Error::InvalidParameter(format!(
            "matching point h^eta = {x_match} must lie below x0 = {}",
            pot.x0()
        )));
    }
    connect_at(pot, h, x_match, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::FreePotential;

    fn tight() -> IntegratorConfig {
        IntegratorConfig {
            rel_tol: 1e-12,
            abs_tol: 1e-13,
            ..Default::default()
        }
    }

    #[test]
    fn free_envelope_vanishes() {
        assert!(solve_envelope_ode(&FreePotential, 0.01, 0.0, &tight()).is_err());
        // Empty support: any x_end > 0 is allowed.
        let env = solve_envelope_ode(&FreePotential, 0.01, 0.2, &tight()).unwrap();
        assert!(env.samples.iter().all(|s| s.b.norm() == 0.0 && s.db.norm() == 0.0));
    }

    #[test]
    fn initial_conditions_hold() {
        let pot = ConormalPotential1D::with_defaults(0.5).unwrap();
        let env = solve_envelope_ode(&pot, 0.01, 0.05, &tight()).unwrap();
        let first = env.samples[0];
        assert_eq!(first.x, 0.0);
        assert_eq!(first.b.norm(), 0.0);
        assert_eq!(first.db.norm(), 0.0);
    }

    #[test]
    fn born_bounds() {
        let (alpha, h) = (0.5, 0.01);
        let pot = ConormalPotential1D::with_defaults(alpha).unwrap();
        let sigma = born_sigma(alpha, h, 0.02);
        assert!((sigma - 0.188_561_808_316_412_7).abs() < 1e-12);
        let env = solve_envelope_ode(&pot, h, 0.12, &tight()).unwrap();
        let mut checked = 0;
        for s in &env.samples {
            let sigma = born_sigma(alpha, h, s.x);
            if s.x == 0.0 || sigma > 2.0 {
                continue;
            }
            assert!(s.b.norm() <= sigma.exp() - 1.0 + 1e-12, "x = {}", s.x);
            let b1 = compute_b1(alpha, s.x / h).unwrap() * h.powf(alpha);
            let bound = sigma.exp() - 1.0 - sigma;
            assert!((s.b - b1).norm() <= bound + 1e-9, "x = {}", s.x);
            checked += 1;
        }
        assert!(checked > 50);
    }

    #[test]
    fn b1_zero_and_closed_form_at_alpha_one() {
        assert_eq!(compute_b1(0.5, 0.0).unwrap(), Complex64::new(0.0, 0.0));
        assert!(compute_b1(0.5, -1.0).is_err());
        // alpha = 1: int_0^y s^2 e^{2is} ds has an elementary antiderivative.
        let y = 37.3f64;
        let i = Complex64::i();
        let anti = |s: f64| {
            (i * 2.0 * s).exp()
                * (s * s / (2.0 * i) - 2.0 * s / ((2.0 * i) * (2.0 * i))
                    + 2.0 / ((2.0 * i) * (2.0 * i) * (2.0 * i)))
        };
        let exact = (-i * 2.0 * y).exp() * (anti(y) - anti(0.0)) / 2.0;
        let got = compute_b1(1.0, y).unwrap();
        assert!((got - exact).norm() <= 1e-10 * exact.norm(), "{got} vs {exact}");
    }

    #[test]
    fn b1_against_brute_force_simpson() {
        let (alpha, y) = (0.5, 100.0);
        let n = 2_000_000usize;
        let dx = y / n as f64;
        let f = |s: f64| Complex64::from_polar(s.powf(alpha + 1.0), 2.0 * s);
        let mut acc = f(0.0) + f(y);
        for k in 1..n {
            let w = if k % 2 == 1 { 4.0 } else { 2.0 };
            acc += f(k as f64 * dx) * w;
        }
        let simpson = Complex64::from_polar(1.0, -2.0 * y) * acc * (dx / 3.0) / (alpha + 1.0);
        let got = compute_b1(alpha, y).unwrap();
        assert!((got - simpson).norm() <= 1e-7 * simpson.norm());
    }

    #[test]
    fn expansion_terms() {
        let (alpha, y) = (0.5, 10.0f64);
        let g = gamma_coefficient(alpha, Sign::Plus);
        let expected = g * Complex64::from_polar(1.0, -20.0)
            + Complex64::new(0.0, -10f64.powf(1.5) / 3.0)
            + 10f64.sqrt() / 4.0;
        assert!((b1_expansion(alpha, y) - expected).norm() < 1e-12);
        // First term has modulus |gamma_+|.
        let first = b1_expansion(alpha, y)
            - y.powf(alpha + 1.0) / Complex64::new(0.0, 2.0 * (alpha + 1.0))
            - y.powf(alpha) / 4.0;
        assert!((first.norm() - g.norm()).abs() < 1e-12);
    }

    #[test]
    fn expansion_remainder_shrinks() {
        for &alpha in &[0.5, 1.2] {
            let d = |y: f64| (compute_b1(alpha, y).unwrap() - b1_expansion(alpha, y)).norm();
            let lead = |y: f64| y.powf(alpha + 1.0);
            // Relative to the leading term the remainder is O(y^-2).
            assert!(d(200.0) / lead(200.0) < d(50.0) / lead(50.0) / 10.0);
        }
    }

    #[test]
    fn wkb_phase_free_and_closed_form() {
        assert!((wkb_phase(&FreePotential, 0.7).unwrap() - 0.7).abs() < 1e-14);
        let pot = ConormalPotential1D::new(0.5, 0.5, 1.0).unwrap();
        // int sqrt(1 - sqrt(s)) ds = F(sqrt(x)) - F(0), F(t) = -4/3 (1-t)^{3/2} + 4/5 (1-t)^{5/2}
        let big_f = |t: f64| -4.0 / 3.0 * (1.0 - t).powf(1.5) + 0.8 * (1.0 - t).powf(2.5);
        let exact = big_f(0.5) - big_f(0.0);
        assert!((wkb_phase(&pot, 0.25).unwrap() - exact).abs() < 1e-12);
        let c0 = wkb_c0(&pot).unwrap();
        assert!(c0 < 0.0);
        let data = wkb_data(&pot, &[0.0, 0.1, 0.4, 0.9, 1.0]).unwrap();
        assert_eq!(data.phase[0], 0.0);
        assert!(data.phase.windows(2).all(|w| w[1] > w[0]));
        assert!((data.phase[4] - 1.0 - c0).abs() < 1e-14);
        assert_eq!(data.amplitude[0], 1.0);
    }

    #[test]
    fn wronskian_examples() {
        let h = 0.05;
        for &x in &[0.0, 0.3, -1.7] {
            let i = Complex64::i();
            let u = (i * x / h).exp();
            let v = (-i * x / h).exp();
            let w = semiclassical_wronskian(u, i / h * u, v, -i / h * v, h);
            assert!((w - Complex64::new(0.0, -2.0)).norm() < 1e-12);
            assert_eq!(semiclassical_wronskian(u, i * u, u, i * u, h), Complex64::new(0.0, 0.0));
            let c = Complex64::new(0.3, -2.0);
            assert!(semiclassical_wronskian(u, i * u, c * u, c * i * u, h).norm() < 1e-15);
        }
    }

    #[test]
    fn wronskian_is_constant_along_envelope() {
        let (alpha, h) = (0.5, 1e-3f64);
        let pot = ConormalPotential1D::with_defaults(alpha).unwrap();
        let xm = h.powf(default_eta(alpha));
        let plus = solve_envelope_ode(&pot, h, xm, &tight()).unwrap();
        let minus = plus.conjugate();
        let n = plus.samples.len();
        let mut ws = Vec::new();
        for k in 0..10 {
            let idx = k * (n - 1) / 9;
            let (u, du) = plus.plane_wave(&plus.samples[idx]);
            let (v, dv) = minus.plane_wave(&minus.samples[idx]);
            ws.push(semiclassical_wronskian(u, du, v, dv, h));
        }
        for w in &ws {
            assert!((w - ws[0]).norm() / ws[0].norm() < 1e-6);
            assert!((w - Complex64::new(0.0, -2.0)).norm() < 1e-6);
        }
    }

    #[test]
    fn conjugation_symmetry() {
        let pot = ConormalPotential1D::with_defaults(0.7).unwrap();
        let h = 0.01;
        let plus = solve_envelope_ode(&pot, h, 0.08, &tight()).unwrap();
        let minus = plus.conjugate();
        for (p, m) in plus.samples.iter().zip(&minus.samples) {
            let (up, _) = plus.plane_wave(p);
            let (um, _) = minus.plane_wave(m);
            assert!((up.conj() - um).norm() < 1e-14);
        }
    }

    #[test]
    fn eta_window_enforced() {
        let pot = ConormalPotential1D::with_defaults(0.5).unwrap();
        let lower = eta_lower(0.5);
        assert!((lower - 2.5 / 3.0).abs() < 1e-15);
        for eta in [lower, 1.0, 0.5, 1.2] {
            assert!(matches!(
                connect_and_extract_r(&pot, 1e-3, Some(eta), &tight()),
                Err(Error::EtaOutOfWindow { .. })
            ));
        }
        // Matching point beyond x0 for large h.
        assert!(connect_and_extract_r(&pot, 0.9, None, &tight()).is_err());
    }

    #[test]
    fn free_potential_matches_trivially() {
        let m = connect_at(&FreePotential, 1e-2, 0.05, &tight()).unwrap();
        assert!(m.result.r.norm() < 1e-10);
        assert!((m.result.t - 1.0).norm() < 1e-8);
        assert!((m.w_plus_minus - Complex64::new(0.0, -2.0)).norm() < 1e-12);
    }

    #[test]
    fn appendix_route_agrees_with_direct_solver() {
        let pot = ConormalPotential1D::with_defaults(0.5).unwrap();
        let h = 1e-3;
        let m = connect_and_extract_r(&pot, h, Some(0.9), &tight()).unwrap();
        let direct =
            crate::scatter1d::solve(&ScatteringProblem::new(pot, h), &tight()).unwrap();
        let gap = (m.result.r.norm() - direct.r.norm()).abs() / direct.r.norm();
        assert!(gap < 0.10, "gap {gap}");
        assert_eq!(m.result.method, Method::Appendix);
        assert!(m.result.flux_defect.abs() < 1e-6);
    }
}
