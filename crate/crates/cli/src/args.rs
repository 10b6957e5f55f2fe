//! Command-line surface. Flags are folded into the same key/value map as
//! the configuration file, so both routes share one parser.

use std::path::PathBuf;

use clap::{Parser, ValueEnum};

use crate::config::{self, Command, ExperimentConfig, RawConfig};
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum CommandArg {
    Reflect,
    AppendixCompare,
    B1Check,
    Ray,
    Classify,
}

impl From<CommandArg> for Command {
    fn from(c: CommandArg) -> Self {
        match c {
            CommandArg::Reflect => Command::Reflect,
            CommandArg::AppendixCompare => Command::AppendixCompare,
            CommandArg::B1Check => Command::B1Check,
            CommandArg::Ray => Command::Ray,
            CommandArg::Classify => Command::Classify,
        }
    }
}

/// Reflection sweeps, plane-wave checks and ray trees for conormal potentials.
#[derive(Debug, Parser)]
#[command(name = "conormal", version)]
pub struct Args {
    /// Experiment to run.
    #[arg(value_enum)]
    pub command: CommandArg,
    /// Flat `key = value` file; flags given here override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Conormal order of the potential.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// `conormal` or `free`.
    #[arg(long)]
    pub potential: Option<String>,
    /// Start of the roll-off.
    #[arg(long)]
    pub x0: Option<f64>,
    /// End of the roll-off.
    #[arg(long)]
    pub x1: Option<f64>,
    /// Comma-separated explicit h values.
    #[arg(long)]
    pub h_list: Option<String>,
    /// Smallest h^-1 of a grid uniform in h^-1.
    #[arg(long)]
    pub h_inv_min: Option<f64>,
    /// Largest h^-1 of a grid uniform in h^-1.
    #[arg(long)]
    pub h_inv_max: Option<f64>,
    /// Smallest h of a log-spaced grid.
    #[arg(long)]
    pub h_log_min: Option<f64>,
    /// Largest h of a log-spaced grid.
    #[arg(long)]
    pub h_log_max: Option<f64>,
    /// Number of grid points.
    #[arg(long)]
    pub points: Option<usize>,
    /// Matching exponent: the plane-wave solutions are joined at x = h^eta.
    #[arg(long)]
    pub eta: Option<f64>,
    /// Allow appendix-compare outside 0 < alpha < 1.
    #[arg(long)]
    pub conjectural: bool,
    /// Comma-separated explicit y values for b1-check.
    #[arg(long)]
    pub y_list: Option<String>,
    /// Smallest y of the b1-check grid.
    #[arg(long)]
    pub y_min: Option<f64>,
    /// Largest y of the b1-check grid.
    #[arg(long)]
    pub y_max: Option<f64>,
    /// Ray scene: i, ii, iii or flat.
    #[arg(long)]
    pub spec: Option<String>,
    /// Comma-separated seed `x, y.., xi, eta..`.
    #[arg(long, allow_hyphen_values = true)]
    pub seed: Option<String>,
    /// Maximal branch depth of a ray tree.
    #[arg(long)]
    pub depth: Option<usize>,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Any other setting, as `key=value`. May be repeated.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Print the resolved configuration and exit.
    #[arg(long)]
    pub print_config: bool,
}

fn num(v: f64) -> String {
    config::fmt_f64(v)
}

impl Args {
    /// The flags that were actually given, as raw pairs.
    pub fn overrides(&self) -> CliResult<RawConfig> {
        let mut m = RawConfig::new();
        let command: Command = self.command.into();
        m.insert("command".into(), command.name().into());
        let mut put = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                m.insert(k.into(), v);
            }
        };
        put("alpha", self.alpha.map(num));
        put("potential", self.potential.clone());
        put("x0", self.x0.map(num));
        put("x1", self.x1.map(num));
        put("h-list", self.h_list.clone());
        put("h-inv-min", self.h_inv_min.map(num));
        put("h-inv-max", self.h_inv_max.map(num));
        put("h-log-min", self.h_log_min.map(num));
        put("h-log-max", self.h_log_max.map(num));
        put("points", self.points.map(|p| p.to_string()));
        put("eta", self.eta.map(num));
        put("conjectural", self.conjectural.then(|| "true".into()));
        put("y-list", self.y_list.clone());
        put("y-min", self.y_min.map(num));
        put("y-max", self.y_max.map(num));
        put("spec", self.spec.clone());
        put("seed", self.seed.clone());
        put("depth", self.depth.map(|d| d.to_string()));
        put("out", self.out.as_ref().map(|p| p.display().to_string()));
        put("jobs", self.jobs.map(|j| j.to_string()));
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("--set expects key=value, got `{kv}`")))?;
            m.insert(k.trim().into(), v.trim().into());
        }
        Ok(m)
    }

    /// Configuration file (if any) overlaid with the flags.
    pub fn resolve(&self) -> CliResult<ExperimentConfig> {
        let base = match &self.config {
            None => RawConfig::new(),
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
                    path: path.display().to_string(),
                    source,
                })?;
                config::parse_text(&text)?
            }
        };
        ExperimentConfig::from_raw(&config::merge(base, self.overrides()?)?)
    }
}
