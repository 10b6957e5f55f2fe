//! Experiment configuration: a flat `key = value` text format, merged with
//! command-line overrides, with per-command defaults filled in.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use conormal_core::raytrace::TracerConfig;
use conormal_core::scatter1d::IntegratorConfig;

use crate::error::{CliError, CliResult};

/// Raw key/value pairs, keyed by the long flag name without the leading `--`.
pub type RawConfig = BTreeMap<String, String>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Reflect,
    AppendixCompare,
    B1Check,
    Ray,
    Classify,
}

impl Command {
    pub const ALL: [Command; 5] = [
        Command::Reflect,
        Command::AppendixCompare,
        Command::B1Check,
        Command::Ray,
        Command::Classify,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Reflect => "reflect",
            Command::AppendixCompare => "appendix-compare",
            Command::B1Check => "b1-check",
            Command::Ray => "ray",
            Command::Classify => "classify",
        }
    }
}

impl FromStr for Command {
    type Err = CliError;
    fn from_str(s: &str) -> CliResult<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| CliError::Config(format!("unknown command `{s}`")))
    }
}

/// The 1D potential used by the scattering commands.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PotentialKind {
    /// `x_+^alpha` with a smooth roll-off on `[x0, x1]`.
    Conormal,
    /// `V = 0`.
    Free,
}

/// A grid of positive values.
#[derive(Debug, Clone, PartialEq)]
pub enum Grid {
    List(Vec<f64>),
    /// `points` values whose reciprocals are uniform in `[min, max]`.
    Inverse { min: f64, max: f64, points: usize },
    /// `points` values log-spaced in `[min, max]`.
    Log { min: f64, max: f64, points: usize },
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        match *self {
            Grid::List(ref v) => v.clone(),
            Grid::Inverse { min, max, points } => (0..points)
                .map(|i| {
                    let t = if points > 1 { i as f64 / (points - 1) as f64 } else { 0.0 };
                    1.0 / (min + (max - min) * t)
                })
                .collect(),
            Grid::Log { min, max, points } => conormal_core::asymptotics::log_grid(min, max, points),
        }
    }

    fn points(&self) -> Option<usize> {
        match *self {
            Grid::List(_) => None,
            Grid::Inverse { points, .. } | Grid::Log { points, .. } => Some(points),
        }
    }
}

/// The ray-tracing scene.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpecName {
    /// Flat metric, `w = x_+^alpha`, transverse splitting.
    Transverse,
    /// Flat metric, `w = -4|x|^{3/2}`, glancing seed.
    TwoSided,
    /// Stretched metric `k^{11} = 1 + x`, ray tangent to the interface.
    Tangent,
    /// Flat metric in `dim` dimensions with `w = x_+^alpha` and a given seed.
    Flat,
}

impl SpecName {
    pub fn name(self) -> &'static str {
        match self {
            SpecName::Transverse => "i",
            SpecName::TwoSided => "ii",
            SpecName::Tangent => "iii",
            SpecName::Flat => "flat",
        }
    }
}

impl FromStr for SpecName {
    type Err = CliError;
    fn from_str(s: &str) -> CliResult<Self> {
        match s {
            "i" | "transverse" => Ok(SpecName::Transverse),
            "ii" | "two-sided" => Ok(SpecName::TwoSided),
            "iii" | "tangent" => Ok(SpecName::Tangent),
            "flat" => Ok(SpecName::Flat),
            _ => Err(CliError::Config(format!(
                "unknown spec `{s}` (expected i, ii, iii or flat)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub command: Command,
    pub alpha: f64,
    pub potential: PotentialKind,
    pub x0: f64,
    pub x1: f64,
    pub h: Grid,
    pub eta: Option<f64>,
    pub conjectural: bool,
    pub y: Grid,
    pub spec: SpecName,
    pub dim: usize,
    pub energy: f64,
    pub seed: Option<Vec<f64>>,
    pub depth: usize,
    pub s_start: f64,
    pub s_max: f64,
    pub root_strength: f64,
    pub max_strength: f64,
    pub boundary_y: Option<Vec<f64>>,
    pub boundary_eta: Option<Vec<Vec<f64>>>,
    pub integrator: IntegratorConfig,
    pub tracer: TracerConfig,
    pub out: Option<PathBuf>,
    /// Worker threads; 0 uses every core. Never affects output.
    pub jobs: usize,
}

const H_KEYS: [&str; 5] = ["h-list", "h-inv-min", "h-inv-max", "h-log-min", "h-log-max"];
const Y_KEYS: [&str; 3] = ["y-list", "y-min", "y-max"];

const KEYS: [&str; 39] = [
    "command",
    "alpha",
    "potential",
    "x0",
    "x1",
    "h-list",
    "h-inv-min",
    "h-inv-max",
    "h-log-min",
    "h-log-max",
    "points",
    "eta",
    "conjectural",
    "y-list",
    "y-min",
    "y-max",
    "spec",
    "dim",
    "energy",
    "seed",
    "depth",
    "s-start",
    "s-max",
    "root-strength",
    "max-strength",
    "boundary-y",
    "boundary-eta",
    "rel-tol",
    "abs-tol",
    "max-step-per-wavelength",
    "ray-rel-tol",
    "ray-abs-tol",
    "ray-max-step",
    "xi-min",
    "x-patch",
    "event-tol",
    "classify-tol",
    "out",
    "jobs",
];

fn is_known(key: &str) -> bool {
    KEYS.contains(&key)
}

/// Parses `key = value` lines; `#` starts a comment, blank lines are skipped.
pub fn parse_text(text: &str) -> CliResult<RawConfig> {
    let mut map = RawConfig::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("line {}: expected `key = value`", n + 1)))?;
        let (k, v) = (k.trim(), v.trim());
        if !is_known(k) {
            return Err(CliError::Config(format!("line {}: unknown key `{k}`", n + 1)));
        }
        if map.insert(k.to_string(), v.to_string()).is_some() {
            return Err(CliError::Config(format!("line {}: duplicate key `{k}`", n + 1)));
        }
    }
    Ok(map)
}

/// Layers `overrides` on top of `base`. A grid given in `overrides`
/// replaces whichever grid form `base` used.
pub fn merge(mut base: RawConfig, overrides: RawConfig) -> CliResult<RawConfig> {
    for group in [&H_KEYS[..], &Y_KEYS[..]] {
        if overrides.keys().any(|k| group.contains(&k.as_str())) {
            base.retain(|k, _| !group.contains(&k.as_str()));
        }
    }
    for (k, v) in overrides {
        if !is_known(&k) {
            return Err(CliError::Config(format!("unknown key `{k}`")));
        }
        base.insert(k, v);
    }
    Ok(base)
}

fn parse_f64(key: &str, v: &str) -> CliResult<f64> {
    match v {
        "inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        _ => v
            .parse()
            .map_err(|_| CliError::Config(format!("`{key}`: `{v}` is not a number"))),
    }
}

fn parse_list(key: &str, v: &str) -> CliResult<Vec<f64>> {
    if v.trim().is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|s| parse_f64(key, s.trim())).collect()
}

fn parse_usize(key: &str, v: &str) -> CliResult<usize> {
    v.parse()
        .map_err(|_| CliError::Config(format!("`{key}`: `{v}` is not a non-negative integer")))
}

fn parse_bool(key: &str, v: &str) -> CliResult<bool> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(CliError::Config(format!("`{key}`: `{v}` is not a boolean"))),
    }
}

pub(crate) fn fmt_f64(v: f64) -> String {
    // Both forms print the shortest string that parses back to `v`.
    if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else if v == 0.0 || (1e-3..1e6).contains(&v.abs()) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(",")
}

struct Reader<'a> {
    map: &'a RawConfig,
}

impl Reader<'_> {
    fn get(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(String::as_str)
    }
    fn f64_or(&self, key: &str, default: f64) -> CliResult<f64> {
        self.get(key).map_or(Ok(default), |v| parse_f64(key, v))
    }
    fn usize_or(&self, key: &str, default: usize) -> CliResult<usize> {
        self.get(key).map_or(Ok(default), |v| parse_usize(key, v))
    }
    /// `None` for a missing key or the literal `default`.
    fn optional<T>(&self, key: &str, f: impl Fn(&str, &str) -> CliResult<T>) -> CliResult<Option<T>> {
        match self.get(key) {
            None | Some("default") => Ok(None),
            Some(v) => f(key, v).map(Some),
        }
    }
    fn grid(
        &self,
        list: &str,
        inv: Option<(&str, &str)>,
        log: (&str, &str),
        points: usize,
        default: Grid,
    ) -> CliResult<Grid> {
        let has = |k: &str| self.get(k).is_some();
        let forms = [
            has(list),
            inv.is_some_and(|(a, b)| has(a) || has(b)),
            has(log.0) || has(log.1),
        ];
        match forms.iter().filter(|f| **f).count() {
            0 => return Ok(default),
            1 => {}
            _ => {
                return Err(CliError::Config(format!(
                    "more than one grid form given for `{list}`"
                )))
            }
        }
        let both = |(a, b): (&str, &str)| -> CliResult<(f64, f64)> {
            match (self.get(a), self.get(b)) {
                (Some(x), Some(y)) => Ok((parse_f64(a, x)?, parse_f64(b, y)?)),
                _ => Err(CliError::Config(format!("`{a}` and `{b}` must be given together"))),
            }
        };
        if forms[0] {
            return Ok(Grid::List(parse_list(list, self.get(list).unwrap_or(""))?));
        }
        if forms[1] {
            let (min, max) = both(inv.expect("checked above"))?;
            return Ok(Grid::Inverse { min, max, points });
        }
        let (min, max) = both(log)?;
        Ok(Grid::Log { min, max, points })
    }
}

fn parse_eta_vectors(key: &str, v: &str) -> CliResult<Vec<Vec<f64>>> {
    v.split(';').map(|s| parse_list(key, s.trim())).collect()
}

impl ExperimentConfig {
    /// Builds a configuration from raw pairs, filling per-command defaults.
    pub fn from_raw(map: &RawConfig) -> CliResult<Self> {
        let r = Reader { map };
        let command: Command = r
            .get("command")
            .ok_or_else(|| CliError::Config("no command given".into()))?
            .parse()?;
        let spec: SpecName = r.get("spec").unwrap_or("i").parse()?;
        let default_alpha = match command {
            Command::Reflect => 1.2,
            Command::Ray | Command::Classify if spec == SpecName::Tangent => 3.0,
            _ => 0.5,
        };
        let potential = match r.get("potential").unwrap_or("conormal") {
            "conormal" => PotentialKind::Conormal,
            "free" => PotentialKind::Free,
            other => {
                return Err(CliError::Config(format!(
                    "`potential`: `{other}` is not conormal or free"
                )))
            }
        };
        let default_points = match command {
            Command::Reflect => 900,
            Command::AppendixCompare => 3,
            _ => 25,
        };
        let points = r.usize_or("points", default_points)?;
        let default_h = match command {
            Command::Reflect => Grid::Inverse {
                min: 1100.0,
                max: 2000.0,
                points,
            },
            _ => Grid::Log {
                min: 1e-4,
                max: 1e-2,
                points,
            },
        };
        let h = r.grid(
            "h-list",
            Some(("h-inv-min", "h-inv-max")),
            ("h-log-min", "h-log-max"),
            points,
            default_h,
        )?;
        let y = r.grid(
            "y-list",
            None,
            ("y-min", "y-max"),
            points,
            Grid::Log {
                min: 50.0,
                max: 500.0,
                points,
            },
        )?;
        let (s_start, s_max) = if spec == SpecName::Tangent { (-0.5, 0.5) } else { (0.0, 2.0) };
        let ic = IntegratorConfig::default();
        let tc = TracerConfig::default();
        let cfg = ExperimentConfig {
            command,
            alpha: r.f64_or("alpha", default_alpha)?,
            potential,
            x0: r.f64_or("x0", 0.5)?,
            x1: r.f64_or("x1", 1.0)?,
            h,
            eta: r.optional("eta", parse_f64)?,
            conjectural: r.optional("conjectural", parse_bool)?.unwrap_or(false),
            y,
            spec,
            dim: r.usize_or("dim", 2)?,
            energy: r.f64_or("energy", 1.0)?,
            seed: r.optional("seed", parse_list)?,
            depth: r.usize_or("depth", 3)?,
            s_start: r.f64_or("s-start", s_start)?,
            s_max: r.f64_or("s-max", s_max)?,
            root_strength: r.f64_or("root-strength", 0.0)?,
            max_strength: r.f64_or("max-strength", f64::INFINITY)?,
            boundary_y: r.optional("boundary-y", parse_list)?,
            boundary_eta: r.optional("boundary-eta", parse_eta_vectors)?,
            integrator: IntegratorConfig {
                rel_tol: r.f64_or("rel-tol", ic.rel_tol)?,
                abs_tol: r.f64_or("abs-tol", ic.abs_tol)?,
                max_step_per_wavelength: r
                    .f64_or("max-step-per-wavelength", ic.max_step_per_wavelength)?,
                forced_nodes: Vec::new(),
            },
            tracer: TracerConfig {
                rel_tol: r.f64_or("ray-rel-tol", tc.rel_tol)?,
                abs_tol: r.f64_or("ray-abs-tol", tc.abs_tol)?,
                max_step: r.f64_or("ray-max-step", tc.max_step)?,
                xi_min: match r.get("xi-min") {
                    None | Some("auto") => None,
                    Some(v) => Some(parse_f64("xi-min", v)?),
                },
                x_patch: r.f64_or("x-patch", tc.x_patch)?,
                event_tol: r.f64_or("event-tol", tc.event_tol)?,
                classify_tol: r.f64_or("classify-tol", tc.classify_tol)?,
            },
            out: r.get("out").map(PathBuf::from),
            jobs: r.usize_or("jobs", 0)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> CliResult<()> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad(format!("alpha must be positive, got {}", self.alpha));
        }
        for (name, grid) in [("h", &self.h), ("y", &self.y)] {
            if grid.points() == Some(0) {
                return bad(format!("the {name} grid needs at least one point"));
            }
            match *grid {
                Grid::List(ref v) if v.is_empty() => {
                    return bad(format!("the {name} list is empty"));
                }
                Grid::Inverse { min, max, .. } | Grid::Log { min, max, .. }
                    if !(min > 0.0 && max >= min && max.is_finite()) =>
                {
                    return bad(format!("the {name} range needs 0 < min <= max, got [{min}, {max}]"));
                }
                _ => {}
            }
        }
        if self.h.values().iter().any(|h| !(*h > 0.0 && h.is_finite())) {
            return bad("every h must be positive and finite".into());
        }
        if self.y.values().iter().any(|y| !(*y >= 0.0 && y.is_finite())) {
            return bad("every y must be non-negative and finite".into());
        }
        if self.command == Command::AppendixCompare
            && !(self.alpha < 1.0 || self.conjectural)
            && self.potential == PotentialKind::Conormal
        {
            return bad(format!(
                "appendix-compare is only established for alpha in (0, 1); pass --conjectural to run alpha = {}",
                self.alpha
            ));
        }
        if self.s_max < self.s_start {
            return bad(format!("s-max {} is below s-start {}", self.s_max, self.s_start));
        }
        Ok(())
    }

    /// Every semantic field as raw pairs; [`ExperimentConfig::from_raw`]
    /// inverts this exactly.
    pub fn to_raw(&self) -> RawConfig {
        let mut m = RawConfig::new();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_string(), v);
        };
        put("command", self.command.name().into());
        put("alpha", fmt_f64(self.alpha));
        put(
            "potential",
            match self.potential {
                PotentialKind::Conormal => "conormal",
                PotentialKind::Free => "free",
            }
            .into(),
        );
        put("x0", fmt_f64(self.x0));
        put("x1", fmt_f64(self.x1));
        let points = self.h.points().or(self.y.points()).unwrap_or(1);
        put("points", points.to_string());
        match self.h {
            Grid::List(ref v) => put("h-list", fmt_list(v)),
            Grid::Inverse { min, max, .. } => {
                put("h-inv-min", fmt_f64(min));
                put("h-inv-max", fmt_f64(max));
            }
            Grid::Log { min, max, .. } => {
                put("h-log-min", fmt_f64(min));
                put("h-log-max", fmt_f64(max));
            }
        }
        match self.y {
            Grid::List(ref v) => put("y-list", fmt_list(v)),
            Grid::Inverse { .. } => unreachable!("y grids are never reciprocal"),
            Grid::Log { min, max, .. } => {
                put("y-min", fmt_f64(min));
                put("y-max", fmt_f64(max));
            }
        }
        put("eta", self.eta.map_or("default".into(), fmt_f64));
        put("conjectural", self.conjectural.to_string());
        put("spec", self.spec.name().into());
        put("dim", self.dim.to_string());
        put("energy", fmt_f64(self.energy));
        put("seed", self.seed.as_deref().map_or("default".into(), fmt_list));
        put("depth", self.depth.to_string());
        put("s-start", fmt_f64(self.s_start));
        put("s-max", fmt_f64(self.s_max));
        put("root-strength", fmt_f64(self.root_strength));
        put("max-strength", fmt_f64(self.max_strength));
        put("boundary-y", self.boundary_y.as_deref().map_or("default".into(), fmt_list));
        put(
            "boundary-eta",
            self.boundary_eta.as_ref().map_or("default".into(), |v| {
                v.iter().map(|e| fmt_list(e)).collect::<Vec<_>>().join(";")
            }),
        );
        put("rel-tol", fmt_f64(self.integrator.rel_tol));
        put("abs-tol", fmt_f64(self.integrator.abs_tol));
        put("max-step-per-wavelength", fmt_f64(self.integrator.max_step_per_wavelength));
        put("ray-rel-tol", fmt_f64(self.tracer.rel_tol));
        put("ray-abs-tol", fmt_f64(self.tracer.abs_tol));
        put("ray-max-step", fmt_f64(self.tracer.max_step));
        put("xi-min", self.tracer.xi_min.map_or("auto".into(), fmt_f64));
        put("x-patch", fmt_f64(self.tracer.x_patch));
        put("event-tol", fmt_f64(self.tracer.event_tol));
        put("classify-tol", fmt_f64(self.tracer.classify_tol));
        if let Some(out) = &self.out {
            put("out", out.display().to_string());
        }
        put("jobs", self.jobs.to_string());
        m
    }

    /// The configuration file text for [`ExperimentConfig::to_raw`].
    pub fn to_text(&self) -> String {
        self.to_raw()
            .iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    /// Comment header for data files: every setting that can change the
    /// numbers, one `# key = value` line each. Output location and worker
    /// count are omitted since they never change the data.
    pub fn header(&self) -> String {
        let mut s = format!("# conormal {}\n", self.command.name());
        for (k, v) in self.to_raw() {
            if k != "out" && k != "jobs" {
                s.push_str(&format!("# {k} = {v}\n"));
            }
        }
        s
    }
}

impl fmt::Display for ExperimentConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}
