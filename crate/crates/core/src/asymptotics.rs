//! Closed-form leading-order reflection law and the gamma function it needs.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Direction label for the plane waves `e^{+ix/h}` and `e^{-ix/h}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn as_f64(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

// Lanczos coefficients for g = 7, n = 9.
const LANCZOS_G: f64 = 7.0;
#[allow(clippy::excessive_precision)]
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// `Gamma(z)` for real `z > 0`.
pub fn gamma_fn(z: f64) -> Result<f64> {
    if !(z > 0.0) || !z.is_finite() {
        return Err(Error::Domain(format!("gamma requires z > 0, got {z}")));
    }
    if z < 0.5 {
        // Shift up once; the series is accurate on [0.5, inf).
        return Ok(lanczos(z + 1.0) / z);
    }
    Ok(lanczos(z))
}

fn lanczos(z: f64) -> f64 {
    let x = z - 1.0;
    let mut sum = LANCZOS[0];
    for (k, c) in LANCZOS.iter().enumerate().skip(1) {
        sum += c / (x + k as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    // t^(x+1/2) e^{-t} split in two halves to delay overflow.
    let half = t.powf(0.5 * (x + 0.5));
    (2.0 * PI).sqrt() * half * (half * (-t).exp()) * sum
}

/// `gamma_±(alpha) = -2^{-alpha-2} e^{±i alpha pi/2} Gamma(alpha + 1)`.
pub fn gamma_coefficient(alpha: f64, sign: Sign) -> Complex64 {
    let modulus = modulus_constant(alpha);
    -Complex64::from_polar(modulus, sign.as_f64() * alpha * PI / 2.0)
}

fn modulus_constant(alpha: f64) -> f64 {
    // alpha > 0 keeps the argument in the domain.
    let g = gamma_fn(alpha + 1.0).expect("alpha + 1 > 0");
    (-(alpha + 2.0) * std::f64::consts::LN_2).exp() * g
}

/// Leading-order reflection coefficient `2^{-alpha-2} e^{i alpha pi/2} Gamma(alpha+1) h^alpha`.
pub fn predicted_r(alpha: f64, h: f64) -> Complex64 {
    LeadingOrderR::new(alpha).at(h)
}

/// The constants of the leading-order law for a fixed `alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeadingOrderR {
    pub alpha: f64,
    pub modulus_constant: f64,
    pub phase_constant: f64,
}

impl LeadingOrderR {
    pub fn new(alpha: f64) -> Self {
        Self {
            alpha,
            modulus_constant: modulus_constant(alpha),
            phase_constant: alpha * PI / 2.0,
        }
    }

    /// The law is only established for `alpha` in (0, 1).
    pub fn is_conjectural(&self) -> bool {
        !(self.alpha > 0.0 && self.alpha < 1.0)
    }

    pub fn at(&self, h: f64) -> Complex64 {
        Complex64::from_polar(self.modulus_constant * h.powf(self.alpha), self.phase_constant)
    }
}

/// Least-squares slope of `ln y` against `ln x`. Needs two or more positive pairs.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 || pts.len() != xs.len().min(ys.len()) {
        return Err(Error::Domain("slope fit needs at least two positive pairs".into()));
    }
    let n = pts.len() as f64;
    let (mx, my) = pts
        .iter()
        .fold((0.0, 0.0), |(a, b), (x, y)| (a + x / n, b + y / n));
    let (sxy, sxx) = pts
        .iter()
        .fold((0.0, 0.0), |(a, b), (x, y)| (a + (x - mx) * (y - my), b + (x - mx) * (x - mx)));
    if sxx == 0.0 {
        return Err(Error::Domain("slope fit needs distinct abscissae".into()));
    }
    Ok(sxy / sxx)
}

/// `n` points from `a` to `b` (inclusive) equally spaced in `ln`.
pub fn log_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    let (la, lb) = (a.ln(), b.ln());
    (0..n)
        .map(|i| (la + (lb - la) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factorial_values() {
        assert!((gamma_fn(1.0).unwrap() - 1.0).abs() < 1e-14);
        assert!((gamma_fn(2.0).unwrap() - 1.0).abs() < 1e-14);
        let mut fact = 1.0f64;
        for n in 1..30 {
            fact *= n as f64;
            let g = gamma_fn(n as f64 + 1.0).unwrap();
            assert!(((g - fact) / fact).abs() < 1e-12, "n = {n}");
        }
    }

    #[test]
    fn half_integer() {
        let g = gamma_fn(1.5).unwrap();
        assert!((g - PI.sqrt() / 2.0).abs() < 1e-15);
        assert!((g - 0.8862269255).abs() < 1e-10);
        assert!((gamma_fn(0.5).unwrap() - PI.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn recursion_cross_check() {
        let lhs = gamma_fn(2.2).unwrap();
        let rhs = 1.2 * gamma_fn(1.2).unwrap();
        assert!(((lhs - rhs) / lhs).abs() < 1e-14);
    }

    #[test]
    fn functional_equation_on_grid() {
        for i in 0..=990 {
            let z = 0.1 + i as f64 * 0.01;
            let a = gamma_fn(z + 1.0).unwrap();
            let b = z * gamma_fn(z).unwrap();
            assert!(((a - b) / a).abs() <= 1e-12, "z = {z}");
        }
    }

    #[test]
    fn domain_error() {
        assert!(gamma_fn(0.0).is_err());
        assert!(gamma_fn(-1.5).is_err());
        assert!(gamma_fn(f64::NAN).is_err());
    }

    #[test]
    fn coefficient_values() {
        let g = gamma_coefficient(1.2, Sign::Plus);
        assert!((g.norm() * 1e4).round() == 1199.0, "{}", g.norm());
        let half = gamma_coefficient(0.5, Sign::Plus).norm();
        let exact = PI.sqrt() * 2f64.powf(-3.5);
        assert!((half - exact).abs() < 1e-15);
        assert!((half - 0.1566643).abs() < 1e-7);
        for &a in &[0.2, 0.5, 0.9, 1.7] {
            let p = gamma_coefficient(a, Sign::Plus);
            let m = gamma_coefficient(a, Sign::Minus);
            assert!((p.conj() - m).norm() < 1e-16);
            let lo = LeadingOrderR::new(a);
            assert!((lo.modulus_constant - p.norm()).abs() < 1e-16);
        }
    }

    #[test]
    fn predicted_values() {
        let r = predicted_r(0.5, 1e-4);
        assert!((r.norm() - 1.566643e-3).abs() < 1e-9);
        assert!((r.arg() - PI / 4.0).abs() < 1e-15);
        let r = predicted_r(1.2, 5e-4);
        assert!((r.norm() - 1.311e-5).abs() < 1e-8);
        assert!((0.1199 * 5e-4f64.powf(1.2) - 1.311e-5).abs() < 1e-8);
        assert!(LeadingOrderR::new(1.2).is_conjectural());
        assert!(!LeadingOrderR::new(0.5).is_conjectural());
    }

    #[test]
    fn slope_of_power_law() {
        let xs = log_grid(1e-4, 1e-2, 7);
        assert!((xs[0] - 1e-4).abs() < 1e-18 && (xs[6] - 1e-2).abs() < 1e-16);
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x.powf(0.37)).collect();
        assert!((loglog_slope(&xs, &ys).unwrap() - 0.37).abs() < 1e-12);
        assert!(loglog_slope(&[1.0], &[2.0]).is_err());
        assert!(loglog_slope(&[1.0, 2.0], &[0.0, 2.0]).is_err());
        assert!(loglog_slope(&[2.0, 2.0], &[1.0, 3.0]).is_err());
    }

    #[test]
    fn rescaled_law_is_h_independent() {
        let lo = LeadingOrderR::new(0.7);
        let reference = lo.modulus_constant;
        for &h in &[1e-1, 1e-2, 3e-3, 1e-4] {
            let r = lo.at(h);
            assert!((r.norm() / h.powf(0.7) - reference).abs() <= 1e-15 * reference);
            assert!((r.arg() - lo.phase_constant).abs() < 1e-15);
        }
    }
}
