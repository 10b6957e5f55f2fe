use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::ConormalPotential1D;

/// Largest supported number of tangential coordinates.
pub const MAX_TANGENTIAL: usize = 3;

const FD_STEP: f64 = 1e-5;

/// Inverse metric `k^{ij}(x, y)` on the tangential momenta, row-major `m x m`.
///
/// Derivatives default to fourth-order central differences; implementors
/// with closed forms should override them.
pub trait Metric: Send + Sync + fmt::Debug {
    fn k(&self, x: f64, y: &[f64]) -> Vec<f64>;

    fn dk_dx(&self, x: f64, y: &[f64]) -> Vec<f64> {
        central_difference(|d| self.k(x + d, y))
    }

    fn dk_dy(&self, x: f64, y: &[f64], i: usize) -> Vec<f64> {
        central_difference(|d| {
            let mut yy = y.to_vec();
            yy[i] += d;
            self.k(x, &yy)
        })
    }
}

fn central_difference(f: impl Fn(f64) -> Vec<f64>) -> Vec<f64> {
    let (p2, p1, m1, m2) = (f(2.0 * FD_STEP), f(FD_STEP), f(-FD_STEP), f(-2.0 * FD_STEP));
    (0..p1.len())
        .map(|j| (-p2[j] + 8.0 * p1[j] - 8.0 * m1[j] + m2[j]) / (12.0 * FD_STEP))
        .collect()
}

fn identity(m: usize) -> Vec<f64> {
    let mut k = vec![0.0; m * m];
    for i in 0..m {
        k[i * m + i] = 1.0;
    }
    k
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FlatMetric;

impl Metric for FlatMetric {
    fn k(&self, _x: f64, y: &[f64]) -> Vec<f64> {
        identity(y.len())
    }
    fn dk_dx(&self, _x: f64, y: &[f64]) -> Vec<f64> {
        vec![0.0; y.len() * y.len()]
    }
    fn dk_dy(&self, _x: f64, y: &[f64], _i: usize) -> Vec<f64> {
        vec![0.0; y.len() * y.len()]
    }
}

/// `k^{11} = 1 + x`, all other entries flat. Positive definite for `x > -1`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StretchedMetric;

impl Metric for StretchedMetric {
    fn k(&self, x: f64, y: &[f64]) -> Vec<f64> {
        let mut k = identity(y.len());
        k[0] = 1.0 + x;
        k
    }
    fn dk_dx(&self, _x: f64, y: &[f64]) -> Vec<f64> {
        let mut d = vec![0.0; y.len() * y.len()];
        d[0] = 1.0;
        d
    }
    fn dk_dy(&self, _x: f64, y: &[f64], _i: usize) -> Vec<f64> {
        vec![0.0; y.len() * y.len()]
    }
}

/// Metric given by a closure; derivatives come from finite differences.
pub struct FnMetric<F>(pub F);

impl<F> fmt::Debug for FnMetric<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("FnMetric")
    }
}

impl<F> Metric for FnMetric<F>
where
    F: Fn(f64, &[f64]) -> Vec<f64> + Send + Sync,
{
    fn k(&self, x: f64, y: &[f64]) -> Vec<f64> {
        (self.0)(x, y)
    }
}

/// The normal part `w(x)` of the symbol.
#[derive(Debug, Clone, PartialEq)]
pub enum NormalProfile {
    Zero,
    /// `x_+^alpha` with the smooth roll-off of [`ConormalPotential1D`].
    Conormal(ConormalPotential1D),
    /// `-c |x|^beta`.
    TwoSided { c: f64, beta: f64 },
}

impl NormalProfile {
    pub fn value(&self, x: f64) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::Conormal(v) => v.eval(x),
            Self::TwoSided { c, beta } => -c * x.abs().powf(*beta),
        }
    }

    pub fn derivative(&self, x: f64) -> Result<f64> {
        match self {
            Self::Zero => Ok(0.0),
            Self::Conormal(v) => {
                if x < 0.0 {
                    Ok(0.0)
                } else {
                    v.derivative(x)
                }
            }
            Self::TwoSided { c, beta } => {
                if x == 0.0 {
                    if *beta > 1.0 {
                        Ok(0.0)
                    } else {
                        Err(Error::SingularDerivative { x })
                    }
                } else {
                    Ok(-c * beta * x.signum() * x.abs().powf(beta - 1.0))
                }
            }
        }
    }

    /// Conormal order of the profile at `x = 0`; infinite when smooth.
    pub fn order(&self) -> f64 {
        match self {
            Self::Zero => f64::INFINITY,
            Self::Conormal(v) => v.alpha(),
            Self::TwoSided { beta, .. } => *beta,
        }
    }

    /// Grading exponent `m` of the substitution `x = side * x_patch * t^m`.
    /// For order below one, `m * order = 1` makes the transformed field smooth.
    pub(crate) fn grading(&self) -> f64 {
        let a = self.order();
        if a < 1.0 {
            1.0 / a
        } else {
            1.0
        }
    }

    /// `w'(x(t)) x'(t)` for `x(t) = side * x_patch * t^m`, evaluated without
    /// forming the singular factor separately.
    pub(crate) fn graded_force(&self, side: f64, x_patch: f64, m: f64, t: f64) -> Result<f64> {
        let x = side * x_patch * t.powf(m);
        let dxdt = side * m * x_patch * t.powf(m - 1.0);
        match self {
            Self::Zero => Ok(0.0),
            Self::Conormal(v) => {
                if side < 0.0 {
                    Ok(0.0)
                } else if x <= v.x0() {
                    let a = v.alpha();
                    Ok(a * m * x_patch.powf(a) * t.powf(m * a - 1.0))
                } else {
                    Ok(v.derivative(x)? * dxdt)
                }
            }
            Self::TwoSided { c, beta } => {
                // sign(x) * side = 1
                Ok(-c * beta * m * x_patch.powf(*beta) * t.powf(m * beta - 1.0))
            }
        }
    }
}

/// The symbol `p = xi^2 + eta^T k(x, y) eta + w(x) - E`.
#[derive(Debug, Clone)]
pub struct HamiltonianSpec {
    pub dim: usize,
    pub metric: Arc<dyn Metric>,
    pub profile: NormalProfile,
    pub energy: f64,
}

impl HamiltonianSpec {
    pub fn new(
        dim: usize,
        metric: Arc<dyn Metric>,
        profile: NormalProfile,
        energy: f64,
    ) -> Result<Self> {
        if !(2..=MAX_TANGENTIAL + 1).contains(&dim) {
            return Err(Error::InvalidParameter(format!(
                "dimension must lie in 2..={}, got {dim}",
                MAX_TANGENTIAL + 1
            )));
        }
        if !energy.is_finite() {
            return Err(Error::InvalidParameter(format!("energy must be finite, got {energy}")));
        }
        if let NormalProfile::TwoSided { c, beta } = profile {
            if !(c.is_finite() && beta > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "two-sided profile needs finite c and beta > 0, got c = {c}, beta = {beta}"
                )));
            }
        }
        Ok(Self {
            dim,
            metric,
            profile,
            energy,
        })
    }

    pub fn flat(dim: usize, profile: NormalProfile, energy: f64) -> Result<Self> {
        Self::new(dim, Arc::new(FlatMetric), profile, energy)
    }

    pub fn tangential_dim(&self) -> usize {
        self.dim - 1
    }

    /// `k(x, y)` after checking symmetry and positive definiteness.
    pub fn metric_at(&self, x: f64, y: &[f64]) -> Result<Vec<f64>> {
        let m = y.len();
        let k = self.metric.k(x, y);
        if k.len() != m * m {
            return Err(Error::InvalidParameter(format!(
                "metric returned {} entries, expected {}",
                k.len(),
                m * m
            )));
        }
        for i in 0..m {
            for j in 0..i {
                let (a, b) = (k[i * m + j], k[j * m + i]);
                if (a - b).abs() > 1e-12 * (1.0 + a.abs()) {
                    return Err(Error::InvalidParameter(format!(
                        "metric not symmetric at x = {x}"
                    )));
                }
            }
        }
        // Cholesky succeeds exactly for positive-definite matrices.
        let mut l = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..=i {
                let mut sum = k[i * m + j];
                for p in 0..j {
                    sum -= l[i * m + p] * l[j * m + p];
                }
                if i == j {
                    if !(sum > 0.0) {
                        return Err(Error::InvalidParameter(format!(
                            "metric not positive definite at x = {x}"
                        )));
                    }
                    l[i * m + i] = sum.sqrt();
                } else {
                    l[i * m + j] = sum / l[j * m + j];
                }
            }
        }
        Ok(k)
    }

    /// Built-in demo (i): flat metric, `w = x_+^alpha`, `E = 1`, and the
    /// incident ray through `(x, y, xi, eta) = (-0.2, 0, 0.6, 0.8)`.
    pub fn demo_transverse(alpha: f64) -> Result<(Self, PhasePoint)> {
        let pot = ConormalPotential1D::with_defaults(alpha)?;
        let spec = Self::flat(2, NormalProfile::Conormal(pot), 1.0)?;
        Ok((spec, PhasePoint::new(-0.2, vec![0.0], 0.6, vec![0.8])))
    }

    /// Built-in demo (ii): flat metric, `w = -4|x|^{3/2}`, `E = 1`, seeded
    /// at the glancing point `(0, 0, 0, 1)`.
    pub fn demo_remark36() -> Result<(Self, PhasePoint)> {
        let spec = Self::flat(2, NormalProfile::TwoSided { c: 4.0, beta: 1.5 }, 1.0)?;
        Ok((spec, PhasePoint::new(0.0, vec![0.0], 0.0, vec![1.0])))
    }

    /// Built-in demo (iii): `k^{11} = 1 + x`, `w = x_+^alpha`, `E = 1`.
    /// For `x < 0` the glancing ray is `x = -s^2`, `xi = -s`,
    /// `y = 2 (s - s^3/3)`; the seed is its point at `s = -0.5`.
    pub fn demo_tangent(alpha: f64) -> Result<(Self, PhasePoint)> {
        let pot = ConormalPotential1D::with_defaults(alpha)?;
        let spec = Self::new(2, Arc::new(StretchedMetric), NormalProfile::Conormal(pot), 1.0)?;
        Ok((spec, tangent_ray(-0.5)))
    }
}

/// Closed-form glancing ray of demo (iii) with `eta = 1`, touching `x = 0` at `s = 0`.
pub fn tangent_ray(s: f64) -> PhasePoint {
    PhasePoint::new(-s * s, vec![2.0 * (s - s * s * s / 3.0)], -s, vec![1.0])
}

/// A point `(x, y, xi, eta)` of the cotangent bundle, or a tangent vector there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub x: f64,
    pub y: Vec<f64>,
    pub xi: f64,
    pub eta: Vec<f64>,
}

impl PhasePoint {
    pub fn new(x: f64, y: Vec<f64>, xi: f64, eta: Vec<f64>) -> Self {
        Self { x, y, xi, eta }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite()
            && self.xi.is_finite()
            && self.y.iter().chain(&self.eta).all(|v| v.is_finite())
    }

    /// Flips both momenta; the symbol is even in them, so this reverses the flow.
    pub fn reversed(&self) -> Self {
        Self {
            x: self.x,
            y: self.y.clone(),
            xi: -self.xi,
            eta: self.eta.iter().map(|e| -e).collect(),
        }
    }

    /// Flat list `[x, y.., xi, eta..]`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(2 + 2 * self.y.len());
        v.push(self.x);
        v.extend(&self.y);
        v.push(self.xi);
        v.extend(&self.eta);
        v
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.to_vec()
            .iter()
            .zip(other.to_vec())
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
    }
}

fn quadratic(k: &[f64], eta: &[f64]) -> f64 {
    let m = eta.len();
    let mut q = 0.0;
    for i in 0..m {
        for j in 0..m {
            q += k[i * m + j] * eta[i] * eta[j];
        }
    }
    q
}

fn check_dims(spec: &HamiltonianSpec, pt: &PhasePoint) -> Result<()> {
    let m = spec.tangential_dim();
    if pt.y.len() != m || pt.eta.len() != m {
        return Err(Error::InvalidParameter(format!(
            "phase point has {} / {} tangential components, expected {m}",
            pt.y.len(),
            pt.eta.len()
        )));
    }
    Ok(())
}

/// `p = xi^2 + eta^T k(x, y) eta + w(x) - E`.
pub fn eval_p(spec: &HamiltonianSpec, pt: &PhasePoint) -> f64 {
    let k = spec.metric.k(pt.x, &pt.y);
    pt.xi * pt.xi + quadratic(&k, &pt.eta) + spec.profile.value(pt.x) - spec.energy
}

/// `p~ = eta^T k(0, y) eta + w(0) - E`.
pub fn eval_p_tilde(spec: &HamiltonianSpec, y: &[f64], eta: &[f64]) -> f64 {
    let k = spec.metric.k(0.0, y);
    quadratic(&k, eta) + spec.profile.value(0.0) - spec.energy
}

/// Hamilton field without the `-w'(x)` contribution to `xi'`.
pub(crate) fn smooth_field(spec: &HamiltonianSpec, pt: &PhasePoint) -> PhasePoint {
    let m = pt.eta.len();
    let k = spec.metric.k(pt.x, &pt.y);
    let dkx = spec.metric.dk_dx(pt.x, &pt.y);
    let ydot = (0..m)
        .map(|i| 2.0 * (0..m).map(|j| k[i * m + j] * pt.eta[j]).sum::<f64>())
        .collect();
    let etadot = (0..m)
        .map(|i| -quadratic(&spec.metric.dk_dy(pt.x, &pt.y, i), &pt.eta))
        .collect();
    PhasePoint {
        x: 2.0 * pt.xi,
        y: ydot,
        xi: -quadratic(&dkx, &pt.eta),
        eta: etadot,
    }
}

/// `H_p = (2 xi, 2 k eta, -eta^T d_x k eta - w'(x), -eta^T d_y k eta)`.
pub fn eval_hamilton_field(spec: &HamiltonianSpec, pt: &PhasePoint) -> Result<PhasePoint> {
    check_dims(spec, pt)?;
    let mut f = smooth_field(spec, pt);
    f.xi -= spec.profile.derivative(pt.x)?;
    Ok(f)
}

/// Number of real normal momenta over a boundary point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointClass {
    Elliptic,
    Hyperbolic { xi_plus: f64 },
    Glancing,
}

pub const DEFAULT_CLASSIFY_TOL: f64 = 1e-10;

pub fn classify_boundary_point(
    spec: &HamiltonianSpec,
    y: &[f64],
    eta: &[f64],
    tol: f64,
) -> Result<PointClass> {
    let m = spec.tangential_dim();
    if y.len() != m || eta.len() != m {
        return Err(Error::InvalidParameter(format!(
            "boundary point needs {m} tangential components"
        )));
    }
    spec.metric_at(0.0, y)?;
    let pt = eval_p_tilde(spec, y, eta);
    Ok(if pt > tol {
        PointClass::Elliptic
    } else if pt < -tol {
        PointClass::Hyperbolic {
            xi_plus: (-pt).sqrt(),
        }
    } else {
        PointClass::Glancing
    })
}
