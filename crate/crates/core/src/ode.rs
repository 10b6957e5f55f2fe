//! Dormand–Prince 5(4) integrator with continuous extension.
//!
//! The state is a fixed-size real array; complex systems pack real and
//! imaginary parts side by side. Integration runs in either direction of
//! the independent variable. Callers that need breakpoints (kinks of the
//! right-hand side, event surfaces) integrate piecewise and restart at
//! each node so that no step straddles a point of reduced smoothness.

use std::ops::ControlFlow;

use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Step-size control parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Upper bound on |step|.
    pub max_step: f64,
    /// A step smaller than this raises [`Error::StepUnderflow`].
    pub min_step: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_step: f64::INFINITY,
            min_step: 1e-15,
            max_steps: 50_000_000,
        }
    }
}

impl OdeOptions {
    pub fn with_max_step(mut self, max_step: f64) -> Self {
        self.max_step = max_step;
        self
    }
}

/// One accepted step together with its continuous extension.
#[derive(Debug, Clone)]
pub struct DenseStep<const N: usize> {
    pub t0: f64,
    pub t1: f64,
    pub y0: [f64; N],
    pub y1: [f64; N],
    cont: [[f64; N]; 5],
}

impl<const N: usize> DenseStep<N> {
    /// Fourth-order interpolant on [t0, t1] (either orientation).
    pub fn eval(&self, t: f64) -> [f64; N] {
        let dt = self.t1 - self.t0;
        if dt == 0.0 {
            return self.y0;
        }
        let s = (t - self.t0) / dt;
        let s1 = 1.0 - s;
        let c = &self.cont;
        std::array::from_fn(|i| {
            c[0][i] + s * (c[1][i] + s1 * (c[2][i] + s * (c[3][i] + s1 * c[4][i])))
        })
    }

    /// Locates a sign change of `g` along the interpolant by bisection.
    /// Returns `None` when `g` does not change sign over the step.
    pub fn bisect_root<G>(&self, g: G, tol: f64) -> Option<(f64, [f64; N])>
    where
        G: Fn(&[f64; N]) -> f64,
    {
        let g0 = g(&self.y0);
        let g1 = g(&self.y1);
        if g0 == 0.0 {
            return Some((self.t0, self.y0));
        }
        if g0.signum() == g1.signum() && g1 != 0.0 {
            return None;
        }
        let (mut lo, mut hi) = (self.t0, self.t1);
        let mut glo = g0;
        for _ in 0..200 {
            if (hi - lo).abs() <= tol {
                break;
            }
            let mid = 0.5 * (lo + hi);
            let gm = g(&self.eval(mid));
            if gm == 0.0 {
                return Some((mid, self.eval(mid)));
            }
            if gm.signum() == glo.signum() {
                lo = mid;
                glo = gm;
            } else {
                hi = mid;
            }
        }
        Some((hi, self.eval(hi)))
    }
}

/// Outcome of a call to [`integrate`].
#[derive(Debug, Clone)]
pub struct OdeOutcome<const N: usize> {
    pub t: f64,
    pub y: [f64; N],
    pub accepted: usize,
    pub rejected: usize,
    /// Sum over accepted steps of the max-norm of the embedded error vector.
    pub error_sum: f64,
    /// True when the step observer requested an early stop.
    pub interrupted: bool,
}

fn norm_inf<const N: usize>(v: &[f64; N]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// Integrates `y' = rhs(t, y)` from `t0` to `t_end`.
///
/// `observer` sees every accepted step; returning `ControlFlow::Break(())`
/// stops the integration after that step.
pub fn integrate<const N: usize, F, O>(
    mut rhs: F,
    t0: f64,
    y0: [f64; N],
    t_end: f64,
    opts: &OdeOptions,
    mut observer: O,
) -> Result<OdeOutcome<N>>
where
    F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
    O: FnMut(&DenseStep<N>) -> ControlFlow<()>,
{
    let mut out = OdeOutcome {
        t: t0,
        y: y0,
        accepted: 0,
        rejected: 0,
        error_sum: 0.0,
        interrupted: false,
    };
    let span = t_end - t0;
    if span == 0.0 {
        return Ok(out);
    }
    let dir = span.signum();

    let mut t = t0;
    let mut y = y0;
    let mut k1 = rhs(t, &y)?;

    let d0 = norm_inf(&y);
    let d1 = norm_inf(&k1);
    let mut step = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    step = step.min(opts.max_step).min(span.abs());

    let mut steps = 0usize;
    loop {
        let remaining = (t_end - t) * dir;
        if remaining <= 0.0 {
            break;
        }
        if steps >= opts.max_steps {
            return Err(Error::StepBudgetExhausted {
                t,
                max_steps: opts.max_steps,
            });
        }
        steps += 1;

        let mut last = false;
        if step >= remaining * (1.0 - 1e-12) {
            step = remaining;
            last = true;
        }
        if step < opts.min_step || t + dir * step == t {
            return Err(Error::StepUnderflow { t, step });
        }
        let hs = dir * step;

        let stage = |coef: &[(f64, &[f64; N])]| -> [f64; N] {
            std::array::from_fn(|i| {
                y[i] + hs * coef.iter().map(|(a, k)| a * k[i]).sum::<f64>()
            })
        };
        let k2 = rhs(t + C2 * hs, &stage(&[(A21, &k1)]))?;
        let k3 = rhs(t + C3 * hs, &stage(&[(A31, &k1), (A32, &k2)]))?;
        let k4 = rhs(t + C4 * hs, &stage(&[(A41, &k1), (A42, &k2), (A43, &k3)]))?;
        let k5 = rhs(
            t + C5 * hs,
            &stage(&[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
        )?;
        let k6 = rhs(
            t + hs,
            &stage(&[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
        )?;
        let y_new = stage(&[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
        let t_new = if last { t_end } else { t + hs };
        let k7 = rhs(t_new, &y_new)?;

        let err_vec: [f64; N] = std::array::from_fn(|i| {
            hs * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i])
        });
        let mut err = 0.0;
        for i in 0..N {
            let sc = opts.abs_tol + opts.rel_tol * y[i].abs().max(y_new[i].abs());
            err += (err_vec[i] / sc).powi(2);
        }
        let err = (err / N as f64).sqrt();

        if !err.is_finite() {
            out.rejected += 1;
            step *= 0.1;
            continue;
        }

        if err <= 1.0 {
            let ydiff: [f64; N] = std::array::from_fn(|i| y_new[i] - y[i]);
            let bspl: [f64; N] = std::array::from_fn(|i| hs * k1[i] - ydiff[i]);
            let cont = [
                y,
                ydiff,
                bspl,
                std::array::from_fn(|i| ydiff[i] - hs * k7[i] - bspl[i]),
                std::array::from_fn(|i| {
                    hs * (D1 * k1[i]
                        + D3 * k3[i]
                        + D4 * k4[i]
                        + D5 * k5[i]
                        + D6 * k6[i]
                        + D7 * k7[i])
                }),
            ];
            let dense = DenseStep {
                t0: t,
                t1: t_new,
                y0: y,
                y1: y_new,
                cont,
            };
            out.accepted += 1;
            out.error_sum += norm_inf(&err_vec);
            t = t_new;
            y = y_new;
            k1 = k7;
            let flow = observer(&dense);
            if flow.is_break() {
                out.interrupted = true;
                break;
            }
            if last {
                break;
            }
            let fac = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            step = (step * fac).min(opts.max_step);
        } else {
            out.rejected += 1;
            step *= (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
        }
    }
    out.t = t;
    out.y = y;
    Ok(out)
}

/// Integrates across an ordered list of nodes, restarting the method at
/// each one. Nodes outside the open interval are ignored.
pub fn integrate_through_nodes<const N: usize, F, O>(
    mut rhs: F,
    t0: f64,
    y0: [f64; N],
    t_end: f64,
    nodes: &[f64],
    mut opts_for: impl FnMut(f64, f64) -> OdeOptions,
    mut observer: O,
) -> Result<OdeOutcome<N>>
where
    F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
    O: FnMut(&DenseStep<N>) -> ControlFlow<()>,
{
    let dir = (t_end - t0).signum();
    let mut inner: Vec<f64> = nodes
        .iter()
        .copied()
        .filter(|&n| (n - t0) * dir > 0.0 && (t_end - n) * dir > 0.0)
        .collect();
    inner.sort_by(|a, b| (a * dir).total_cmp(&(b * dir)));
    inner.dedup();
    inner.push(t_end);

    let mut total = OdeOutcome {
        t: t0,
        y: y0,
        accepted: 0,
        rejected: 0,
        error_sum: 0.0,
        interrupted: false,
    };
    let mut a = t0;
    for b in inner {
        let opts = opts_for(a, b);
        let piece = integrate(&mut rhs, a, total.y, b, &opts, &mut observer)?;
        total.t = piece.t;
        total.y = piece.y;
        total.accepted += piece.accepted;
        total.rejected += piece.rejected;
        total.error_sum += piece.error_sum;
        if piece.interrupted {
            total.interrupted = true;
            break;
        }
        a = b;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn no_obs<const N: usize>(_: &DenseStep<N>) -> ControlFlow<()> {
        ControlFlow::Continue(())
    }

    #[test]
    fn exponential_decay() {
        let opts = OdeOptions::default();
        let out = integrate(|_, y: &[f64; 1]| Ok([-y[0]]), 0.0, [1.0], 2.0, &opts, no_obs)
            .unwrap();
        assert_eq!(out.t, 2.0);
        assert!((out.y[0] - (-2.0f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn harmonic_oscillator_backwards() {
        let opts = OdeOptions {
            rel_tol: 1e-12,
            abs_tol: 1e-14,
            ..Default::default()
        };
        let rhs = |_: f64, y: &[f64; 2]| Ok([y[1], -y[0]]);
        let out = integrate(rhs, 3.0, [3.0f64.cos(), -3.0f64.sin()], -1.0, &opts, no_obs)
            .unwrap();
        assert!((out.y[0] - (-1.0f64).cos()).abs() < 1e-10);
        assert!((out.y[1] + (-1.0f64).sin()).abs() < 1e-10);
    }

    #[test]
    fn dense_output_is_accurate_inside_steps() {
        let opts = OdeOptions {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            ..Default::default()
        };
        let mut worst = 0.0f64;
        integrate(
            |_, y: &[f64; 2]| Ok([y[1], -y[0]]),
            0.0,
            [0.0, 1.0],
            10.0,
            &opts,
            |s: &DenseStep<2>| {
                for j in 1..4 {
                    let t = s.t0 + (s.t1 - s.t0) * j as f64 / 4.0;
                    worst = worst.max((s.eval(t)[0] - t.sin()).abs());
                }
                ControlFlow::Continue(())
            },
        )
        .unwrap();
        assert!(worst < 1e-7, "dense error {worst}");
    }

    #[test]
    fn root_location_on_dense_step() {
        let opts = OdeOptions {
            rel_tol: 1e-12,
            abs_tol: 1e-14,
            max_step: 0.3,
            ..Default::default()
        };
        let mut root = None;
        integrate(
            |_, y: &[f64; 2]| Ok([y[1], -y[0]]),
            0.0,
            [1.0, 0.0],
            3.0,
            &opts,
            |s: &DenseStep<2>| match s.bisect_root(|y| y[0], 1e-14) {
                Some(r) => {
                    root = Some(r.0);
                    ControlFlow::Break(())
                }
                None => ControlFlow::Continue(()),
            },
        )
        .unwrap();
        let r = root.unwrap();
        assert!((r - std::f64::consts::FRAC_PI_2).abs() < 1e-9, "{r}");
    }

    #[test]
    fn nodes_are_hit_exactly() {
        let mut ends = Vec::new();
        integrate_through_nodes(
            |_, y: &[f64; 1]| Ok([y[0]]),
            0.0,
            [1.0],
            1.0,
            &[0.25, 0.5, 2.0, -1.0],
            |_, _| OdeOptions::default(),
            |s: &DenseStep<1>| {
                ends.push(s.t1);
                ControlFlow::Continue(())
            },
        )
        .unwrap();
        assert!(ends.contains(&0.25));
        assert!(ends.contains(&0.5));
        assert_eq!(*ends.last().unwrap(), 1.0);
    }

    #[test]
    fn underflow_is_reported() {
        let opts = OdeOptions {
            min_step: 1e-3,
            rel_tol: 1e-14,
            abs_tol: 1e-16,
            ..Default::default()
        };
        let res = integrate(
            |t, _: &[f64; 1]| Ok([1.0 / (1.0 - t).max(1e-300).sqrt()]),
            0.0,
            [0.0],
            1.0,
            &opts,
            no_obs,
        );
        assert!(matches!(res, Err(Error::StepUnderflow { .. })));
    }
}
