//! Integration of Hamilton's equations in the arclength-like parameter `s`,
//! with an `x`-parametrized patch around the interface.
//!
//! Near `x = 0` the normal force `w'(x)` may blow up like `|x|^{alpha-1}`.
//! Transverse rays are carried across `|x| <= x_patch` with `x` itself as the
//! independent variable, using the substitution `x = side * x_patch * t^m`
//! that turns the integrable singularity into a smooth function of `t`.

use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};

use super::spec::{eval_p, eval_p_tilde, smooth_field, HamiltonianSpec, PhasePoint, MAX_TANGENTIAL};
use crate::error::{Error, Result};
use crate::ode::{integrate, OdeOptions};

// Packed state: [x, y0, y1, y2, xi, eta0, eta1, eta2, s].
const N: usize = 2 * MAX_TANGENTIAL + 3;
const XI: usize = MAX_TANGENTIAL + 1;
const ETA: usize = MAX_TANGENTIAL + 2;
const S: usize = N - 1;

type State = [f64; N];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracerConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Largest step in `s`, and in the patch variable `t`.
    pub max_step: f64,
    /// Below this `|xi|` an interface arrival counts as glancing.
    /// `None` selects `1e-3 * sqrt(E)`.
    pub xi_min: Option<f64>,
    pub x_patch: f64,
    /// Interface crossings are located to this accuracy in `s`.
    pub event_tol: f64,
    pub classify_tol: f64,
}

impl Default for TracerConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-12,
            abs_tol: 1e-13,
            max_step: 0.05,
            xi_min: None,
            x_patch: 1e-3,
            event_tol: 1e-12,
            classify_tol: super::spec::DEFAULT_CLASSIFY_TOL,
        }
    }
}

impl TracerConfig {
    pub fn xi_min(&self, spec: &HamiltonianSpec) -> f64 {
        self.xi_min.unwrap_or_else(|| {
            if spec.energy > 0.0 {
                1e-3 * spec.energy.sqrt()
            } else {
                1e-6
            }
        })
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.rel_tol > 0.0
            && self.abs_tol > 0.0
            && self.max_step > 0.0
            && self.x_patch > 0.0
            && self.event_tol > 0.0
            && self.classify_tol >= 0.0
            && self.xi_min.is_none_or(|v| v >= 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid tracer configuration {self:?}")))
        }
    }

    fn ode(&self) -> OdeOptions {
        OdeOptions {
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            max_step: self.max_step,
            ..OdeOptions::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentStatus {
    Completed,
    HitInterface,
    GlancingNonunique,
    StepUnderflow,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RaySample {
    pub s: f64,
    pub point: PhasePoint,
}

/// A piece of bicharacteristic on which `x` keeps one sign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RaySegment {
    pub samples: Vec<RaySample>,
    pub status: SegmentStatus,
    pub error: Option<String>,
}

impl RaySegment {
    pub fn start(&self) -> &RaySample {
        &self.samples[0]
    }

    pub fn end(&self) -> &RaySample {
        self.samples.last().expect("segments hold their initial sample")
    }

    /// Largest `|p|` over the samples.
    pub fn max_abs_p(&self, spec: &HamiltonianSpec) -> f64 {
        self.samples
            .iter()
            .fold(0.0_f64, |m, smp| m.max(eval_p(spec, &smp.point).abs()))
    }
}

fn pack(pt: &PhasePoint, s: f64) -> State {
    let mut st = [0.0; N];
    st[0] = pt.x;
    st[1..1 + pt.y.len()].copy_from_slice(&pt.y);
    st[XI] = pt.xi;
    st[ETA..ETA + pt.eta.len()].copy_from_slice(&pt.eta);
    st[S] = s;
    st
}

fn unpack(st: &State, m: usize) -> PhasePoint {
    PhasePoint {
        x: st[0],
        y: st[1..1 + m].to_vec(),
        xi: st[XI],
        eta: st[ETA..ETA + m].to_vec(),
    }
}

fn write_tangent(d: &mut State, f: &PhasePoint, scale: f64) {
    for (i, v) in f.y.iter().enumerate() {
        d[1 + i] = scale * v;
    }
    for (i, v) in f.eta.iter().enumerate() {
        d[ETA + i] = scale * v;
    }
}

fn sample(st: &State, m: usize) -> RaySample {
    RaySample {
        s: st[S],
        point: unpack(st, m),
    }
}

/// `xi^2` predicted at `x = 0` from the tangential data of `st`.
fn predicted_xi_sq(spec: &HamiltonianSpec, st: &State, m: usize) -> f64 {
    -eval_p_tilde(spec, &st[1..1 + m], &st[ETA..ETA + m])
}

fn profile_is_smooth_enough(spec: &HamiltonianSpec) -> bool {
    // A C^1 Hamilton field (order above two) has unique integral curves
    // through glancing points.
    spec.profile.order() > 2.0
}

enum SStop {
    Completed,
    Interface,
    Glancing,
    PatchEntry,
}

struct SRun {
    stop: SStop,
    end: State,
}

/// Integrates in `s` until `s_end`, an interface arrival, or (when armed)
/// entry into the patch with enough predicted normal momentum.
fn run_s(
    spec: &HamiltonianSpec,
    start: State,
    s_end: f64,
    cfg: &TracerConfig,
    mut armed: bool,
    samples: &mut Vec<RaySample>,
) -> Result<SRun> {
    let m = spec.tangential_dim();
    let xi_min = cfg.xi_min(spec);
    let xp = cfg.x_patch;
    let continue_glancing = profile_is_smooth_enough(spec);
    // A smooth symbol has no interface to stop at.
    let has_interface = spec.profile.order().is_finite();
    armed &= has_interface;
    let rhs = |_s: f64, st: &State| -> Result<State> {
        let pt = unpack(st, m);
        let mut f = smooth_field(spec, &pt);
        f.xi -= spec.profile.derivative(pt.x)?;
        let mut d = [0.0; N];
        d[0] = f.x;
        d[XI] = f.xi;
        write_tangent(&mut d, &f, 1.0);
        d[S] = 1.0;
        Ok(d)
    };
    let mut event: Option<(SStop, State)> = None;
    let out = integrate(rhs, start[S], start, s_end, &cfg.ode(), |step| {
        let (x0, x1) = (step.y0[0], step.y1[0]);
        let mut best: Option<(f64, SStop, State)> = None;
        if has_interface && x0 != 0.0 && (x1 == 0.0 || x0.signum() != x1.signum()) {
            if let Some((s, mut y)) = step.bisect_root(|y| y[0], cfg.event_tol) {
                y[0] = 0.0;
                y[S] = s;
                if y[XI].abs() >= xi_min {
                    best = Some((s, SStop::Interface, y));
                } else if !continue_glancing {
                    best = Some((s, SStop::Glancing, y));
                }
            }
        }
        if armed && x0.abs() > xp && x1.abs() <= xp {
            if let Some((s, mut y)) = step.bisect_root(|y| y[0].abs() - xp, cfg.event_tol) {
                y[S] = s;
                let earlier = best.as_ref().is_none_or(|(sb, _, _)| (s - step.t0).abs() < (sb - step.t0).abs());
                if earlier && predicted_xi_sq(spec, &y, m) >= 4.0 * xi_min * xi_min {
                    y[0] = xp * x0.signum();
                    best = Some((s, SStop::PatchEntry, y));
                }
            }
        }
        if let Some((_, stop, y)) = best {
            samples.push(sample(&y, m));
            event = Some((stop, y));
            return ControlFlow::Break(());
        }
        if has_interface && !armed && x1.abs() > 2.0 * xp {
            armed = true;
        }
        samples.push(sample(&step.y1, m));
        ControlFlow::Continue(())
    })?;
    Ok(match event {
        Some((stop, end)) => SRun { stop, end },
        None => SRun {
            stop: SStop::Completed,
            end: out.y,
        },
    })
}

struct PatchRun {
    end: State,
    reached: bool,
}

/// Integrates in `t` with `x = side * x_patch * t^m` from `t_from` to `t_to`.
/// Stops early (not reached) once `|xi|` falls below `stop_below`.
#[allow(clippy::too_many_arguments)]
fn run_patch(
    spec: &HamiltonianSpec,
    start: State,
    side: f64,
    t_from: f64,
    t_to: f64,
    stop_below: f64,
    cfg: &TracerConfig,
    samples: &mut Vec<RaySample>,
) -> Result<PatchRun> {
    let m = spec.tangential_dim();
    let xp = cfg.x_patch;
    let grade = spec.profile.grading();
    let x_of = |t: f64| side * xp * t.powf(grade);
    let rhs = |t: f64, st: &State| -> Result<State> {
        let xi = st[XI];
        if xi.abs() < 0.5 * stop_below || xi == 0.0 {
            return Err(Error::TangentialIncidence {
                xi,
                xi_min: stop_below,
            });
        }
        let mut pt = unpack(st, m);
        pt.x = x_of(t);
        let dxdt = side * grade * xp * t.powf(grade - 1.0);
        let f = smooth_field(spec, &pt);
        let force = spec.profile.graded_force(side, xp, grade, t)?;
        let factor = dxdt / (2.0 * xi);
        let mut d = [0.0; N];
        d[0] = dxdt;
        d[XI] = (f.xi * dxdt - force) / (2.0 * xi);
        write_tangent(&mut d, &f, factor);
        d[S] = factor;
        Ok(d)
    };
    let opts = OdeOptions {
        max_step: cfg.max_step.min(0.05),
        ..cfg.ode()
    };
    let out = integrate(rhs, t_from, start, t_to, &opts, |step| {
        let mut y = step.y1;
        y[0] = x_of(step.t1);
        samples.push(sample(&y, m));
        if y[XI].abs() < stop_below {
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        }
    })?;
    let mut end = out.y;
    end[0] = if out.interrupted { x_of(out.t) } else { x_of(t_to) };
    if !out.interrupted && t_to == 0.0 {
        end[0] = 0.0;
        if let Some(last) = samples.last_mut() {
            last.point.x = 0.0;
        }
    }
    Ok(PatchRun {
        end,
        reached: !out.interrupted,
    })
}

fn status_of(err: &Error) -> SegmentStatus {
    match err {
        Error::StepUnderflow { .. } => SegmentStatus::StepUnderflow,
        _ => SegmentStatus::Failed,
    }
}

fn finish(samples: Vec<RaySample>, status: SegmentStatus, error: Option<&Error>) -> RaySegment {
    RaySegment {
        samples,
        status,
        error: error.map(|e| e.to_string()),
    }
}

/// Traces one segment from `pt0` at parameter `s0` up to `s_end`, ending early
/// at the interface. Never fails; solver errors become the segment status.
pub(crate) fn trace_segment(
    spec: &HamiltonianSpec,
    pt0: &PhasePoint,
    s0: f64,
    s_end: f64,
    cfg: &TracerConfig,
) -> RaySegment {
    let m = spec.tangential_dim();
    let xi_min = cfg.xi_min(spec);
    let xp = cfg.x_patch;
    let mut samples = vec![RaySample {
        s: s0,
        point: pt0.clone(),
    }];
    let mut st = pack(pt0, s0);

    let has_interface = spec.profile.order().is_finite();
    if pt0.x == 0.0 && has_interface {
        if pt0.xi.abs() >= xi_min {
            let side = pt0.xi.signum();
            let stop = xi_min.max(0.5 * pt0.xi.abs());
            match run_patch(spec, st, side, 0.0, 1.0, stop, cfg, &mut samples) {
                Ok(run) => st = run.end,
                Err(e) => return finish(samples, status_of(&e), Some(&e)),
            }
        } else if !profile_is_smooth_enough(spec) {
            return finish(samples, SegmentStatus::GlancingNonunique, None);
        }
    } else if has_interface
        && pt0.x.abs() <= xp
        && pt0.x * pt0.xi < 0.0
        && predicted_xi_sq(spec, &st, m) >= 4.0 * xi_min * xi_min
    {
        let t_from = (pt0.x.abs() / xp).powf(1.0 / spec.profile.grading());
        let mark = samples.len();
        match run_patch(spec, st, pt0.x.signum(), t_from, 0.0, xi_min, cfg, &mut samples) {
            Ok(run) if run.reached => return finish(samples, SegmentStatus::HitInterface, None),
            _ => samples.truncate(mark),
        }
    }

    let mut armed = true;
    loop {
        if st[S] >= s_end {
            return finish(samples, SegmentStatus::Completed, None);
        }
        let run = match run_s(spec, st, s_end, cfg, armed, &mut samples) {
            Ok(run) => run,
            Err(e) => return finish(samples, status_of(&e), Some(&e)),
        };
        match run.stop {
            SStop::Completed => return finish(samples, SegmentStatus::Completed, None),
            SStop::Interface => return finish(samples, SegmentStatus::HitInterface, None),
            SStop::Glancing => return finish(samples, SegmentStatus::GlancingNonunique, None),
            SStop::PatchEntry => {
                let mark = samples.len();
                let side = run.end[0].signum();
                match run_patch(spec, run.end, side, 1.0, 0.0, xi_min, cfg, &mut samples) {
                    Ok(p) if p.reached => {
                        return finish(samples, SegmentStatus::HitInterface, None)
                    }
                    _ => {
                        // The ray turns inside the patch: redo this stretch in s.
                        samples.truncate(mark);
                        st = run.end;
                        armed = false;
                    }
                }
            }
        }
    }
}

fn check_point(spec: &HamiltonianSpec, pt: &PhasePoint) -> Result<()> {
    let m = spec.tangential_dim();
    if pt.y.len() != m || pt.eta.len() != m {
        return Err(Error::InvalidParameter(format!(
            "phase point needs {m} tangential components"
        )));
    }
    if !pt.is_finite() {
        return Err(Error::InvalidParameter("phase point must be finite".into()));
    }
    let p = eval_p(spec, pt);
    if p.abs() > 1e-8 * (1.0 + spec.energy.abs()) {
        return Err(Error::InvalidParameter(format!(
            "initial point is not on the characteristic set: p = {p:e}"
        )));
    }
    Ok(())
}

/// Integrates the bicharacteristic through `pt0` over `s in [s_span.0, s_span.1]`,
/// stopping at the first interface arrival.
pub fn integrate_bicharacteristic(
    spec: &HamiltonianSpec,
    pt0: &PhasePoint,
    s_span: (f64, f64),
    cfg: &TracerConfig,
) -> Result<RaySegment> {
    cfg.validate()?;
    check_point(spec, pt0)?;
    if !(s_span.1 >= s_span.0) {
        return Err(Error::InvalidParameter(format!(
            "s_span must be increasing; reverse the momenta to run backwards, got {s_span:?}"
        )));
    }
    if pt0.x == 0.0 && pt0.xi.abs() < cfg.xi_min(spec) && !profile_is_smooth_enough(spec) {
        return Err(Error::SingularDerivative { x: 0.0 });
    }
    let seg = trace_segment(spec, pt0, s_span.0, s_span.1, cfg);
    match seg.status {
        SegmentStatus::StepUnderflow | SegmentStatus::Failed => Err(Error::InvalidParameter(
            seg.error.unwrap_or_else(|| "integration failed".into()),
        )),
        _ => Ok(seg),
    }
}

/// Result of a patch traversal.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchCrossing {
    pub point: PhasePoint,
    pub elapsed_s: f64,
    pub samples: Vec<RaySample>,
}

/// Carries a transverse ray from `x = 0` to `x = sign(xi) * x_patch` with `x`
/// as the independent variable.
pub fn cross_interface_caratheodory(
    spec: &HamiltonianSpec,
    pt: &PhasePoint,
    cfg: &TracerConfig,
) -> Result<PatchCrossing> {
    cfg.validate()?;
    let xi_min = cfg.xi_min(spec);
    if pt.x != 0.0 {
        return Err(Error::InvalidParameter(format!("crossing must start at x = 0, got {}", pt.x)));
    }
    if pt.xi.abs() < xi_min {
        return Err(Error::TangentialIncidence { xi: pt.xi, xi_min });
    }
    let mut samples = vec![RaySample {
        s: 0.0,
        point: pt.clone(),
    }];
    let run = run_patch(spec, pack(pt, 0.0), pt.xi.signum(), 0.0, 1.0, xi_min, cfg, &mut samples)?;
    if !run.reached {
        return Err(Error::TangentialIncidence {
            xi: run.end[XI],
            xi_min,
        });
    }
    Ok(PatchCrossing {
        point: unpack(&run.end, spec.tangential_dim()),
        elapsed_s: run.end[S],
        samples,
    })
}

/// Carries a ray at `0 < |x| <= x_patch`, moving toward the interface, to `x = 0`.
pub fn approach_interface(
    spec: &HamiltonianSpec,
    pt: &PhasePoint,
    cfg: &TracerConfig,
) -> Result<PatchCrossing> {
    cfg.validate()?;
    let xi_min = cfg.xi_min(spec);
    if !(pt.x != 0.0 && pt.x.abs() <= cfg.x_patch && pt.x * pt.xi < 0.0) {
        return Err(Error::InvalidParameter(
            "approach must start inside the patch, moving toward x = 0".into(),
        ));
    }
    let t_from = (pt.x.abs() / cfg.x_patch).powf(1.0 / spec.profile.grading());
    let mut samples = vec![RaySample {
        s: 0.0,
        point: pt.clone(),
    }];
    let run = run_patch(spec, pack(pt, 0.0), pt.x.signum(), t_from, 0.0, xi_min, cfg, &mut samples)?;
    if !run.reached {
        return Err(Error::TangentialIncidence {
            xi: run.end[XI],
            xi_min,
        });
    }
    Ok(PatchCrossing {
        point: unpack(&run.end, spec.tangential_dim()),
        elapsed_s: run.end[S],
        samples,
    })
}
