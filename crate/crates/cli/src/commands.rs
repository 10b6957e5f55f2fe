//! The five experiment commands. Each returns its data file and its
//! human-readable table as strings; nothing here touches the filesystem.

use conormal_core::asymptotics::{loglog_slope, LeadingOrderR};
use conormal_core::planewave::{
    b1_expansion, compute_b1, connect_and_extract_r, connect_at, default_eta,
};
use conormal_core::potential::{ConormalPotential1D, FreePotential};
use conormal_core::raytrace::{
    classify_boundary_point, eval_p_tilde, trace_gbb_tree, BranchKind, HamiltonianSpec,
    NormalProfile, PhasePoint, PointClass, SegmentStatus, TreeOptions,
};
use conormal_core::scatter1d::{solve, sweep_with, ScatteringProblem, ScatteringResult, SweepPoint};
use rayon::prelude::*;

use crate::config::{Command, ExperimentConfig, PotentialKind, SpecName};
use crate::error::{CliError, CliResult};

/// What a command produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    /// Contents of the data file.
    pub data: String,
    /// Summary table for the terminal.
    pub table: String,
    pub failures: usize,
    pub total: usize,
}

impl Report {
    /// 0 on success, 1 when more than a tenth of the points failed.
    pub fn exit_code(&self) -> i32 {
        if self.failures * 10 > self.total {
            1
        } else {
            0
        }
    }
}

/// Round-trip precision for data files.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Six significant digits for tables.
pub fn fmt6(v: f64) -> String {
    format!("{v:.5e}")
}

/// Runs `cfg` on a pool of `cfg.jobs` workers (all cores for 0).
pub fn run(cfg: &ExperimentConfig) -> CliResult<Report> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {} workers: {e}", cfg.jobs)))?;
    pool.install(|| match cfg.command {
        Command::Reflect => cmd_reflect(cfg),
        Command::AppendixCompare => cmd_appendix_compare(cfg),
        Command::B1Check => cmd_b1_check(cfg),
        Command::Ray => cmd_ray(cfg),
        Command::Classify => cmd_classify(cfg),
    })
}

fn conormal(cfg: &ExperimentConfig) -> CliResult<ConormalPotential1D> {
    Ok(ConormalPotential1D::new(cfg.alpha, cfg.x0, cfg.x1)?)
}

fn sweep(cfg: &ExperimentConfig) -> CliResult<Vec<SweepPoint>> {
    let hs = cfg.h.values();
    let mut pts = match cfg.potential {
        PotentialKind::Conormal => sweep_with(&conormal(cfg)?, &hs, &cfg.integrator)?,
        PotentialKind::Free => sweep_with(&FreePotential, &hs, &cfg.integrator)?,
    };
    // Ascending in h^-1.
    pts.reverse();
    Ok(pts)
}

fn failure_line(h: f64, e: &dyn std::fmt::Display) -> String {
    format!("# h={} error={e}\n", fmt17(h))
}

pub fn cmd_reflect(cfg: &ExperimentConfig) -> CliResult<Report> {
    let pts = sweep(cfg)?;
    let mut data = cfg.header();
    data.push_str("# columns: h_inverse rescaled_modulus\n");
    let mut ok: Vec<(f64, f64)> = Vec::new();
    let mut max_r = 0.0_f64;
    let mut failures = 0;
    for p in &pts {
        match &p.outcome {
            Ok(r) => {
                let row = (1.0 / p.h, r.rescaled_modulus(cfg.alpha));
                data.push_str(&format!("{} {}\n", fmt17(row.0), fmt17(row.1)));
                max_r = max_r.max(r.r.norm());
                ok.push(row);
            }
            Err(e) => {
                failures += 1;
                data.push_str(&failure_line(p.h, e));
            }
        }
    }
    let mut table = format!(
        "reflect: alpha = {}, {} points, {} failed\n",
        cfg.alpha,
        pts.len(),
        failures
    );
    if cfg.potential == PotentialKind::Free {
        table.push_str(&format!(
            "potential: free; max |R| = {}; no reflection expected\n",
            fmt6(max_r)
        ));
    } else if !ok.is_empty() {
        let law = LeadingOrderR::new(cfg.alpha);
        // Top quintile of h^-1, which sits at the end of the ascending list.
        let tail = (ok.len() / 5).max(1);
        let mean = ok[ok.len() - tail..].iter().map(|r| r.1).sum::<f64>() / tail as f64;
        let gap = (mean - law.modulus_constant).abs() / law.modulus_constant;
        table.push_str(&format!(
            "constant {}{}; tail mean over {} largest h^-1 = {}; relative gap = {}\n",
            fmt6(law.modulus_constant),
            if law.is_conjectural() { " (conjectural for this alpha)" } else { "" },
            tail,
            fmt6(mean),
            fmt6(gap)
        ));
    }
    Ok(Report {
        data,
        table,
        failures,
        total: pts.len(),
    })
}

struct CompareRow {
    h: f64,
    direct: f64,
    appendix: f64,
    predicted: f64,
}

fn relative_gap(a: f64, reference: f64) -> f64 {
    (a - reference).abs() / reference
}

fn compare_at(cfg: &ExperimentConfig, h: f64) -> CliResult<CompareRow> {
    let (direct, appendix, predicted): (ScatteringResult, ScatteringResult, f64) =
        match cfg.potential {
            PotentialKind::Conormal => {
                let pot = conormal(cfg)?;
                let d = solve(&ScatteringProblem::new(pot, h), &cfg.integrator)?;
                let a = connect_and_extract_r(&pot, h, cfg.eta, &cfg.integrator)?;
                (d, a.result, LeadingOrderR::new(cfg.alpha).at(h).norm())
            }
            PotentialKind::Free => {
                let d = solve(&ScatteringProblem::new(FreePotential, h), &cfg.integrator)?;
                let eta = cfg.eta.unwrap_or_else(|| default_eta(cfg.alpha));
                let a = connect_at(&FreePotential, h, h.powf(eta), &cfg.integrator)?;
                (d, a.result, 0.0)
            }
        };
    Ok(CompareRow {
        h,
        direct: direct.r.norm(),
        appendix: appendix.r.norm(),
        predicted,
    })
}

pub fn cmd_appendix_compare(cfg: &ExperimentConfig) -> CliResult<Report> {
    let mut hs = cfg.h.values();
    hs.sort_by(|a, b| b.total_cmp(a));
    let rows: Vec<(f64, CliResult<CompareRow>)> =
        hs.par_iter().map(|&h| (h, compare_at(cfg, h))).collect();
    let free = cfg.potential == PotentialKind::Free;
    let mut data = cfg.header();
    data.push_str("h,abs_r_direct,abs_r_appendix,abs_r_predicted,gap_direct_appendix,gap_direct_predicted\n");
    let mut table = format!(
        "appendix-compare: alpha = {}{}\n{:>13} {:>13} {:>13} {:>13} {:>13} {:>13}\n",
        cfg.alpha,
        if cfg.alpha >= 1.0 { " (conjectural)" } else { "" },
        "h",
        "|R_direct|",
        "|R_appendix|",
        "|R_predicted|",
        "gap_app",
        "gap_pred"
    );
    let mut failures = 0;
    for (h, row) in &rows {
        match row {
            Ok(r) => {
                // Relative gaps are meaningless when nothing reflects.
                let (ga, gp) = if free {
                    (f64::NAN, f64::NAN)
                } else {
                    (relative_gap(r.appendix, r.direct), relative_gap(r.predicted, r.direct))
                };
                let vals = [r.h, r.direct, r.appendix, r.predicted, ga, gp];
                data.push_str(&vals.map(fmt17).join(","));
                data.push('\n');
                table.push_str(&vals.map(|v| format!("{:>13}", fmt6(v))).join(" "));
                table.push('\n');
            }
            Err(e) => {
                failures += 1;
                data.push_str(&failure_line(*h, e));
                table.push_str(&failure_line(*h, e));
            }
        }
    }
    Ok(Report {
        data,
        table,
        failures,
        total: rows.len(),
    })
}

/// `|compute_b1 - b1_expansion|`. At `y = 0` the integral is empty and the
/// row compares the quadrature with the exact value 0.
fn b1_defect(alpha: f64, y: f64) -> CliResult<f64> {
    let q = compute_b1(alpha, y)?;
    Ok(if y == 0.0 { q.norm() } else { (q - b1_expansion(alpha, y)).norm() })
}

pub fn cmd_b1_check(cfg: &ExperimentConfig) -> CliResult<Report> {
    let mut ys = cfg.y.values();
    ys.sort_by(f64::total_cmp);
    let rows: Vec<(f64, CliResult<f64>)> =
        ys.par_iter().map(|&y| (y, b1_defect(cfg.alpha, y))).collect();
    // Points usable on a log-log scale.
    let good: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|(y, d)| d.as_ref().ok().map(|d| (*y, *d)))
        .filter(|(y, d)| *y > 0.0 && *d > 0.0)
        .collect();
    let local_slope = |y: f64| -> f64 {
        let Some(i) = good.iter().position(|g| g.0 == y) else {
            return f64::NAN;
        };
        let (a, b) = (i.saturating_sub(1), (i + 1).min(good.len() - 1));
        if a == b {
            return f64::NAN;
        }
        (good[b].1 / good[a].1).ln() / (good[b].0 / good[a].0).ln()
    };
    let mut data = cfg.header();
    data.push_str("# columns: y abs_difference local_slope\n");
    let mut table = format!(
        "b1-check: alpha = {}\n{:>13} {:>13} {:>13}\n",
        cfg.alpha, "y", "|difference|", "local slope"
    );
    let mut failures = 0;
    for (y, d) in &rows {
        match d {
            Ok(d) => {
                let s = local_slope(*y);
                data.push_str(&format!("{} {} {}\n", fmt17(*y), fmt17(*d), fmt17(s)));
                table.push_str(&format!("{:>13} {:>13} {:>13}\n", fmt6(*y), fmt6(*d), fmt6(s)));
            }
            Err(e) => {
                failures += 1;
                let line = format!("# y={} error={e}\n", fmt17(*y));
                data.push_str(&line);
                table.push_str(&line);
            }
        }
    }
    let (xs, ds): (Vec<f64>, Vec<f64>) = good.iter().copied().unzip();
    match loglog_slope(&xs, &ds) {
        Ok(slope) => {
            data.push_str(&format!("# fitted_slope = {}\n", fmt17(slope)));
            table.push_str(&format!(
                "fitted slope {} (remainder law alpha - 1 = {})\n",
                fmt6(slope),
                cfg.alpha - 1.0
            ));
        }
        Err(e) => table.push_str(&format!("no slope fitted: {e}\n")),
    }
    Ok(Report {
        data,
        table,
        failures,
        total: rows.len(),
    })
}

/// The scene and seed named by `cfg`.
pub fn build_scene(cfg: &ExperimentConfig) -> CliResult<(HamiltonianSpec, PhasePoint)> {
    let profile = || -> CliResult<NormalProfile> {
        Ok(match cfg.potential {
            PotentialKind::Conormal => NormalProfile::Conormal(conormal(cfg)?),
            PotentialKind::Free => NormalProfile::Zero,
        })
    };
    let (mut spec, seed) = match cfg.spec {
        SpecName::Transverse => HamiltonianSpec::demo_transverse(cfg.alpha)?,
        SpecName::TwoSided => HamiltonianSpec::demo_remark36()?,
        SpecName::Tangent => HamiltonianSpec::demo_tangent(cfg.alpha)?,
        SpecName::Flat => {
            let spec = HamiltonianSpec::flat(cfg.dim, profile()?, cfg.energy)?;
            let m = spec.tangential_dim();
            let seed = PhasePoint::new(-0.2, vec![0.0; m], 0.6, {
                let mut eta = vec![0.0; m];
                eta[0] = 0.8;
                eta
            });
            (spec, seed)
        }
    };
    if matches!(cfg.spec, SpecName::Transverse | SpecName::Tangent) {
        spec.profile = profile()?;
    }
    spec.energy = cfg.energy;
    let seed = match &cfg.seed {
        None => seed,
        Some(v) => {
            let m = spec.tangential_dim();
            if v.len() != 2 * spec.dim {
                return Err(CliError::Config(format!(
                    "seed needs {} numbers (x, y[{m}], xi, eta[{m}]), got {}",
                    2 * spec.dim,
                    v.len()
                )));
            }
            PhasePoint::new(v[0], v[1..=m].to_vec(), v[m + 1], v[m + 2..].to_vec())
        }
    };
    Ok((spec, seed))
}

fn kind_name(k: BranchKind) -> &'static str {
    match k {
        BranchKind::Incident => "incident",
        BranchKind::Transmitted => "transmitted",
        BranchKind::Reflected => "reflected",
    }
}

fn status_name(s: SegmentStatus) -> &'static str {
    match s {
        SegmentStatus::Completed => "completed",
        SegmentStatus::HitInterface => "hit_interface",
        SegmentStatus::GlancingNonunique => "glancing_nonunique",
        SegmentStatus::StepUnderflow => "step_underflow",
        SegmentStatus::Failed => "failed",
    }
}

pub fn cmd_ray(cfg: &ExperimentConfig) -> CliResult<Report> {
    let (spec, seed) = build_scene(cfg)?;
    let opts = TreeOptions {
        s_start: cfg.s_start,
        s_max: cfg.s_max,
        max_depth: cfg.depth,
        max_strength: cfg.max_strength,
        root_strength: cfg.root_strength,
        parallel: true,
    };
    let tree = trace_gbb_tree(&spec, &seed, &opts, &cfg.tracer)?;
    let mut data = tree.to_json();
    data.push('\n');
    let mut table = cfg.header();
    table.push_str(&format!(
        "{:>4} {:>6} {:>5} {:>12} {:>13} {:>19} {:>13}  endpoint (x, y.., xi, eta..)\n",
        "id", "parent", "depth", "kind", "strength", "status", "s_end"
    ));
    let mut failures = 0;
    for n in &tree.nodes {
        let end = n.segment.end();
        if matches!(n.segment.status, SegmentStatus::Failed | SegmentStatus::StepUnderflow) {
            failures += 1;
        }
        table.push_str(&format!(
            "{:>4} {:>6} {:>5} {:>12} {:>13} {:>19} {:>13}  {}\n",
            n.id,
            n.parent.map_or("-".into(), |p| p.to_string()),
            n.depth,
            kind_name(n.branch_kind),
            fmt6(n.strength),
            status_name(n.segment.status),
            fmt6(end.s),
            end.point.to_vec().iter().map(|v| fmt6(*v)).collect::<Vec<_>>().join(" ")
        ));
    }
    let count = |k| tree.nodes.iter().filter(|n| n.branch_kind == k).count();
    table.push_str(&format!(
        "{} nodes: {} incident, {} transmitted, {} reflected\n",
        tree.nodes.len(),
        count(BranchKind::Incident),
        count(BranchKind::Transmitted),
        count(BranchKind::Reflected)
    ));
    Ok(Report {
        data,
        table,
        failures,
        total: tree.nodes.len(),
    })
}

pub fn cmd_classify(cfg: &ExperimentConfig) -> CliResult<Report> {
    let (spec, _) = build_scene(cfg)?;
    let m = spec.tangential_dim();
    let y = cfg.boundary_y.clone().unwrap_or_else(|| vec![0.0; m]);
    let etas = cfg.boundary_eta.clone().unwrap_or_else(|| {
        (0..7)
            .map(|i| {
                let mut e = vec![0.0; m];
                e[0] = 0.25 * i as f64;
                e
            })
            .collect()
    });
    let mut data = cfg.header();
    data.push_str("# columns: eta.. p_tilde class xi_plus\n");
    let mut table = format!(
        "classify: spec {}, y = {:?}\n{:>27} {:>13} {:>10} {:>13}\n",
        cfg.spec.name(),
        y,
        "eta",
        "p_tilde",
        "class",
        "xi_plus"
    );
    for eta in &etas {
        let class = classify_boundary_point(&spec, &y, eta, cfg.tracer.classify_tol)?;
        let pt = eval_p_tilde(&spec, &y, eta);
        let (name, xi) = match class {
            PointClass::Elliptic => ("elliptic", f64::NAN),
            PointClass::Hyperbolic { xi_plus } => ("hyperbolic", xi_plus),
            PointClass::Glancing => ("glancing", 0.0),
        };
        let eta17: Vec<String> = eta.iter().map(|v| fmt17(*v)).collect();
        data.push_str(&format!("{} {} {name} {}\n", eta17.join(" "), fmt17(pt), fmt17(xi)));
        let eta6: Vec<String> = eta.iter().map(|v| fmt6(*v)).collect();
        table.push_str(&format!(
            "{:>27} {:>13} {:>10} {:>13}\n",
            eta6.join(" "),
            fmt6(pt),
            name,
            fmt6(xi)
        ));
    }
    Ok(Report {
        data,
        table,
        failures: 0,
        total: etas.len(),
    })
}
