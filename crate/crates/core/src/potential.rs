//! Model potentials on the line.
//!
//! The central object is [`ConormalPotential1D`], equal to `x_+^alpha` on
//! `(-inf, x0]` and rolled off to zero on `[x0, x1]` by a flat-ended bump,
//! so that the only non-smooth point is the origin.


use crate::error::{Error, Result};

/// A real potential that vanishes outside a compact interval.
pub trait Potential1D: Send + Sync {
    fn value(&self, x: f64) -> f64;

    /// Interval outside of which the potential is identically zero.
    fn support(&self) -> (f64, f64);

    /// Points where the potential is not smooth, or where its formula
    /// changes. Integrators place mesh nodes here.
    fn breakpoints(&self) -> Vec<f64>;

    /// Supremum over the line.
    fn sup(&self) -> f64;

    /// Points of reduced (Hölder) regularity with their exponent.
    fn rough_points(&self) -> Vec<(f64, f64)> {
        Vec::new()
    }
}

/// `V == 0`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FreePotential;

impl Potential1D for FreePotential {
    fn value(&self, _x: f64) -> f64 {
        0.0
    }
    fn support(&self) -> (f64, f64) {
        (0.0, 0.0)
    }
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }
    fn sup(&self) -> f64 {
        0.0
    }
}

/// `V = height` on `[0, width]`, zero elsewhere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SquareBarrier {
    pub height: f64,
    pub width: f64,
}

impl SquareBarrier {
    pub fn new(height: f64, width: f64) -> Result<Self> {
        if !(height.is_finite() && height >= 0.0) {
            return Err(Error::InvalidParameter(format!("barrier height {height}")));
        }
        if !(width.is_finite() && width > 0.0) {
            return Err(Error::InvalidParameter(format!("barrier width {width}")));
        }
        Ok(Self { height, width })
    }
}

impl Potential1D for SquareBarrier {
    fn value(&self, x: f64) -> f64 {
        if (0.0..=self.width).contains(&x) {
            self.height
        } else {
            0.0
        }
    }
    fn support(&self) -> (f64, f64) {
        (0.0, self.width)
    }
    fn breakpoints(&self) -> Vec<f64> {
        vec![0.0, self.width]
    }
    fn sup(&self) -> f64 {
        self.height
    }
}

pub const DEFAULT_X0: f64 = 0.5;
pub const DEFAULT_X1: f64 = 1.0;

/// `x_+^alpha`, tapered smoothly to zero between `x0` and `x1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConormalPotential1D {
    alpha: f64,
    x0: f64,
    x1: f64,
    sup: f64,
}

/// Flat-ended cutoff: 1 at `t <= 0`, 0 at `t >= 1`, all derivatives
/// vanishing at both ends.
pub(crate) fn taper(t: f64) -> f64 {
    if t <= 0.0 {
        1.0
    } else if t >= 1.0 {
        0.0
    } else {
        let g = 1.0 / (1.0 - t) - 1.0 / t;
        1.0 / (1.0 + g.exp())
    }
}

/// d/dt of [`taper`].
pub(crate) fn taper_derivative(t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        return 0.0;
    }
    let g = 1.0 / (1.0 - t) - 1.0 / t;
    let dg = 1.0 / ((1.0 - t) * (1.0 - t)) + 1.0 / (t * t);
    // chi (1 - chi) = e^g / (1 + e^g)^2, evaluated without overflow.
    let e = (-g.abs()).exp();
    let chi_one_minus = e / ((1.0 + e) * (1.0 + e));
    -dg * chi_one_minus
}

impl ConormalPotential1D {
    pub fn new(alpha: f64, x0: f64, x1: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::InvalidParameter(format!("alpha must be positive, got {alpha}")));
        }
        if !(x0 > 0.0 && x0 < 1.0) {
            return Err(Error::InvalidParameter(format!("x0 must lie in (0, 1), got {x0}")));
        }
        if !(x1.is_finite() && x1 > x0) {
            return Err(Error::InvalidParameter(format!("x1 must exceed x0, got {x1}")));
        }
        let mut pot = Self {
            alpha,
            x0,
            x1,
            sup: 0.0,
        };
        pot.sup = pot.compute_sup();
        if pot.sup >= 1.0 {
            return Err(Error::InvalidParameter(format!(
                "sup V = {} must stay below 1; shrink x1",
                pot.sup
            )));
        }
        Ok(pot)
    }

    pub fn with_defaults(alpha: f64) -> Result<Self> {
        Self::new(alpha, DEFAULT_X0, DEFAULT_X1)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn x0(&self) -> f64 {
        self.x0
    }
    pub fn x1(&self) -> f64 {
        self.x1
    }

    fn compute_sup(&self) -> f64 {
        // Past x0 the product x^alpha * chi rises briefly before the taper wins.
        let n = 20_000;
        let mut best = self.x0.powf(self.alpha);
        let mut arg = self.x0;
        for i in 0..=n {
            let x = self.x0 + (self.x1 - self.x0) * i as f64 / n as f64;
            let v = self.eval(x);
            if v > best {
                best = v;
                arg = x;
            }
        }
        // Golden-section polish around the grid maximum.
        let dx = (self.x1 - self.x0) / n as f64;
        let (mut a, mut b) = ((arg - dx).max(self.x0), (arg + dx).min(self.x1));
        let r = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..60 {
            let c = b - r * (b - a);
            let d = a + r * (b - a);
            if self.eval(c) > self.eval(d) {
                b = d;
            } else {
                a = c;
            }
        }
        best.max(self.eval(0.5 * (a + b)))
    }

    /// `V(x)`.
    pub fn eval(&self, x: f64) -> f64 {
        if x <= 0.0 || x >= self.x1 {
            0.0
        } else if x <= self.x0 {
            x.powf(self.alpha)
        } else {
            x.powf(self.alpha) * taper((x - self.x0) / (self.x1 - self.x0))
        }
    }

    /// `V'(x)`. At the origin this is only defined for `alpha > 1`.
    pub fn derivative(&self, x: f64) -> Result<f64> {
        if x == 0.0 {
            return if self.alpha > 1.0 {
                Ok(0.0)
            } else {
                Err(Error::SingularDerivative { x })
            };
        }
        if x < 0.0 || x >= self.x1 {
            return Ok(0.0);
        }
        let power_prime = self.alpha * x.powf(self.alpha - 1.0);
        if x <= self.x0 {
            return Ok(power_prime);
        }
        let len = self.x1 - self.x0;
        let t = (x - self.x0) / len;
        Ok(power_prime * taper(t) + x.powf(self.alpha) * taper_derivative(t) / len)
    }
}

impl Potential1D for ConormalPotential1D {
    fn value(&self, x: f64) -> f64 {
        self.eval(x)
    }
    fn support(&self) -> (f64, f64) {
        (0.0, self.x1)
    }
    fn breakpoints(&self) -> Vec<f64> {
        vec![0.0, self.x0, self.x1]
    }
    fn sup(&self) -> f64 {
        self.sup
    }
    fn rough_points(&self) -> Vec<(f64, f64)> {
        vec![(0.0, holder_exponent(self.alpha))]
    }
}

/// Hölder exponent `min(1, alpha)` of `x_+^alpha` at the origin.
pub fn holder_exponent(alpha: f64) -> f64 {
    alpha.min(1.0)
}
