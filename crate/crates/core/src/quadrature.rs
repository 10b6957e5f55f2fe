//! Globally adaptive Gauss–Kronrod (7/15) quadrature.
//!
//! The interval is first cut into panels no wider than
//! `max_panel_width`, which bounds the phase advance per panel for
//! oscillatory integrands. The panel with the largest error estimate is
//! then bisected until the summed estimate meets the tolerance.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use num_complex::Complex64;

use crate::error::{Error, Result};

#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];

// Gauss weights for XGK[1], XGK[3], XGK[5], XGK[7].
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_panel_width: f64,
    pub max_panels: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-300,
            max_panel_width: f64::INFINITY,
            max_panels: 200_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: Complex64,
    pub error_estimate: f64,
    pub panels: usize,
}

struct Panel {
    a: f64,
    b: f64,
    value: Complex64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15<F: FnMut(f64) -> Complex64>(f: &mut F, a: f64, b: f64) -> Panel {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += pair * WGK[j];
        if j % 2 == 1 {
            gauss += pair * WG[j / 2];
        }
    }
    let value = kronrod * half;
    let error = ((kronrod - gauss) * half).norm();
    Panel { a, b, value, error }
}

/// Adaptive quadrature of a complex integrand over [a, b].
pub fn integrate_complex<F>(mut f: F, a: f64, b: f64, opts: &QuadOptions) -> Result<QuadResult>
where
    F: FnMut(f64) -> Complex64,
{
    if a == b {
        return Ok(QuadResult {
            value: Complex64::new(0.0, 0.0),
            error_estimate: 0.0,
            panels: 0,
        });
    }
    let width = (b - a).abs();
    let initial = if opts.max_panel_width.is_finite() {
        (width / opts.max_panel_width).ceil().max(1.0) as usize
    } else {
        1
    };
    if initial > opts.max_panels {
        return Err(Error::QuadratureFailure {
            tol: opts.rel_tol,
            max_panels: opts.max_panels,
            estimate: f64::INFINITY,
        });
    }

    let mut heap = BinaryHeap::with_capacity(initial * 2);
    let step = (b - a) / initial as f64;
    for i in 0..initial {
        let lo = a + step * i as f64;
        let hi = if i + 1 == initial { b } else { a + step * (i + 1) as f64 };
        heap.push(gk15(&mut f, lo, hi));
    }

    loop {
        // Re-summing keeps the running totals free of cancellation drift.
        let (total, err) = heap
            .iter()
            .fold((Complex64::new(0.0, 0.0), 0.0), |(v, e), p| (v + p.value, e + p.error));
        let target = opts.abs_tol.max(opts.rel_tol * total.norm());
        if err <= target {
            return Ok(QuadResult {
                value: total,
                error_estimate: err,
                panels: heap.len(),
            });
        }
        if heap.len() >= opts.max_panels {
            return Err(Error::QuadratureFailure {
                tol: opts.rel_tol,
                max_panels: opts.max_panels,
                estimate: err,
            });
        }
        // Split a batch of the worst panels per pass.
        let batch = (heap.len() / 8).max(1);
        for _ in 0..batch {
            let Some(worst) = heap.pop() else { break };
            if worst.error <= target / heap.len().max(1) as f64 {
                heap.push(worst);
                break;
            }
            let mid = 0.5 * (worst.a + worst.b);
            if mid == worst.a || mid == worst.b {
                return Err(Error::QuadratureFailure {
                    tol: opts.rel_tol,
                    max_panels: opts.max_panels,
                    estimate: err,
                });
            }
            heap.push(gk15(&mut f, worst.a, mid));
            heap.push(gk15(&mut f, mid, worst.b));
        }
    }
}

/// Adaptive quadrature of a real integrand over [a, b].
pub fn integrate_real<F>(mut f: F, a: f64, b: f64, opts: &QuadOptions) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> f64,
{
    let r = integrate_complex(|x| Complex64::new(f(x), 0.0), a, b, opts)?;
    Ok((r.value.re, r.error_estimate))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let (v, _) = integrate_real(|x| x.powi(5) - 3.0 * x * x, 0.0, 2.0, &QuadOptions::default())
            .unwrap();
        assert!((v - (64.0 / 6.0 - 8.0)).abs() < 1e-13);
    }

    #[test]
    fn sqrt_endpoint_singularity() {
        let (v, _) = integrate_real(|x| x.sqrt(), 0.0, 1.0, &QuadOptions::default()).unwrap();
        assert!((v - 2.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn oscillatory_with_panel_cap() {
        let opts = QuadOptions {
            max_panel_width: std::f64::consts::FRAC_PI_8,
            ..Default::default()
        };
        let r = integrate_complex(|s| Complex64::new(0.0, 2.0 * s).exp(), 0.0, 300.0, &opts)
            .unwrap();
        let exact = (Complex64::new(0.0, 600.0).exp() - 1.0) / Complex64::new(0.0, 2.0);
        assert!((r.value - exact).norm() < 1e-11);
        assert!(r.panels as f64 >= 300.0 / std::f64::consts::FRAC_PI_8);
    }

    #[test]
    fn reversed_interval_changes_sign() {
        let (fwd, _) = integrate_real(|x| x.cos(), 0.0, 1.0, &QuadOptions::default()).unwrap();
        let (bwd, _) = integrate_real(|x| x.cos(), 1.0, 0.0, &QuadOptions::default()).unwrap();
        assert!((fwd + bwd).abs() < 1e-14);
    }

    #[test]
    fn budget_exhaustion_is_an_error() {
        let opts = QuadOptions {
            rel_tol: 1e-15,
            max_panels: 4,
            ..Default::default()
        };
        let r = integrate_real(|x| (1.0 / x.max(1e-300)).sin(), 1e-6, 1.0, &opts);
        assert!(matches!(r, Err(Error::QuadratureFailure { .. })));
    }
}
