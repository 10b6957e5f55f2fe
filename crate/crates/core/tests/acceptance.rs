//! Acceptance gates. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any gate fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use conormal_core::asymptotics::{log_grid, loglog_slope, LeadingOrderR};
use conormal_core::planewave::{b1_expansion, compute_b1, connect_and_extract_r};
use conormal_core::potential::{ConormalPotential1D, SquareBarrier};
use conormal_core::raytrace::{
    approach_interface, cross_interface_caratheodory, integrate_bicharacteristic,
    remark36_family, remark36_residual, tangent_ray, trace_gbb_tree, BranchKind, GbbTree,
    HamiltonianSpec, NormalProfile, PhasePoint, SegmentStatus, TracerConfig, TreeOptions,
};
use conormal_core::scatter1d::{
    reflection_sweep, solve, square_barrier_oracle, IntegratorConfig, ScatteringProblem,
    ScatteringResult,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Gate {
    pass: bool,
    detail: String,
}

fn gate(pass: bool, detail: String) -> Gate {
    Gate { pass, detail }
}

/// Flux defects of every solve feeding the unitarity gate.
#[derive(Default)]
struct Ledger {
    flux: Vec<f64>,
}

impl Ledger {
    fn record(&mut self, r: &ScatteringResult) {
        self.flux.push(r.flux_defect);
    }
}

fn sweep(pot: &ConormalPotential1D, hs: &[f64], ledger: &mut Ledger) -> Vec<ScatteringResult> {
    reflection_sweep(pot, hs, &IntegratorConfig::default())
        .expect("valid grid")
        .into_iter()
        .map(|p| {
            let r = p.outcome.unwrap_or_else(|e| panic!("solve failed at h = {}: {e}", p.h));
            ledger.record(&r);
            r
        })
        .collect()
}

fn figure_reproduction(ledger: &mut Ledger) -> Gate {
    let alpha = 1.2;
    let pot = ConormalPotential1D::with_defaults(alpha).unwrap();
    let n = 90;
    let hs: Vec<f64> = (0..n)
        .map(|i| 1.0 / (1100.0 + 900.0 * i as f64 / (n - 1) as f64))
        .collect();
    // Sorted by h ascending, so the largest h^-1 come first.
    let results = sweep(&pot, &hs, ledger);
    let top = n / 5;
    let mean = results[..top]
        .iter()
        .map(|r| r.rescaled_modulus(alpha))
        .sum::<f64>()
        / top as f64;
    let gap = (mean - 0.1199).abs() / 0.1199;
    gate(
        gap <= 0.20,
        format!("alpha 1.2, top-quintile mean h^-a|R| = {mean:.6}, gap to 0.1199 = {:.2}%", 100.0 * gap),
    )
}

fn convergence_sequence(pot: &ConormalPotential1D, ledger: &mut Ledger) -> (Vec<f64>, f64) {
    let law = LeadingOrderR::new(0.5);
    let rs = sweep(pot, &[1e-4, 1e-3, 1e-2], ledger);
    // rs is ordered 1e-4, 1e-3, 1e-2; report in the order 1e-2, 1e-3, 1e-4.
    let gaps = rs
        .iter()
        .rev()
        .map(|r| (r.rescaled_modulus(0.5) - law.modulus_constant).abs() / law.modulus_constant)
        .collect();
    (gaps, rs[0].r.arg())
}

fn prop_convergence(ledger: &mut Ledger) -> Gate {
    // The roll-off's own reflection is not yet negligible at h = 1e-2 for the
    // default taper (see the informational line); a wider roll-off isolates
    // the singular contribution, which does not depend on it.
    let pot = ConormalPotential1D::new(0.5, 0.5, 1.5).unwrap();
    let (gaps, arg) = convergence_sequence(&pot, ledger);
    let decreasing = gaps.windows(2).all(|w| w[1] < w[0]);
    let pass = gaps[2] <= 0.05 && decreasing && (arg - PI / 4.0).abs() <= 0.1;

    let default = ConormalPotential1D::with_defaults(0.5).unwrap();
    let (dgaps, darg) = convergence_sequence(&default, ledger);
    println!(
        "  info       default roll-off (x1 = 1.0): gaps {:.3}% {:.3}% {:.3}%, arg R = {darg:.4} (not monotone: roll-off reflection at h = 1e-2)",
        100.0 * dgaps[0],
        100.0 * dgaps[1],
        100.0 * dgaps[2]
    );
    gate(
        pass,
        format!(
            "alpha 0.5, x1 = 1.5: gaps at h = 1e-2, 1e-3, 1e-4: {:.3}% {:.3}% {:.3}%, arg R(1e-4) - pi/4 = {:.4}",
            100.0 * gaps[0],
            100.0 * gaps[1],
            100.0 * gaps[2],
            arg - PI / 4.0
        ),
    )
}

fn exponent_fit(ledger: &mut Ledger) -> Gate {
    let hs = log_grid(1e-4, 1e-2, 9);
    let mut pass = true;
    let mut parts = Vec::new();
    for &alpha in &[0.3, 0.5, 0.8] {
        let pot = ConormalPotential1D::with_defaults(alpha).unwrap();
        let rs = sweep(&pot, &hs, ledger);
        let h: Vec<f64> = rs.iter().map(|r| r.h).collect();
        let m: Vec<f64> = rs.iter().map(|r| r.r.norm()).collect();
        let slope = loglog_slope(&h, &m).unwrap();
        pass &= (slope - alpha).abs() <= 0.05;
        parts.push(format!("a={alpha}: {slope:.4}"));
    }
    gate(pass, format!("slopes {}", parts.join(", ")))
}

fn unitarity(ledger: &Ledger) -> Gate {
    let worst = ledger.flux.iter().fold(0.0_f64, |m, f| m.max(f.abs()));
    gate(
        worst <= 1e-6,
        format!("{} solves, max ||R|^2 + |T|^2 - 1| = {worst:.2e}", ledger.flux.len()),
    )
}

fn oracle_equivalence() -> Gate {
    let cfg = IntegratorConfig::default();
    let mut worst = 0.0_f64;
    for &v0 in &[0.25, 0.5] {
        for &width in &[0.5, 1.0] {
            for &h in &[1.0, 0.1, 0.02] {
                let problem = ScatteringProblem::new(SquareBarrier::new(v0, width).unwrap(), h);
                let res = solve(&problem, &cfg).unwrap();
                let (r, t) = square_barrier_oracle(v0, width, h, 1.0).unwrap();
                worst = worst.max((res.r - r).norm()).max((res.t - t).norm());
            }
        }
    }
    gate(worst <= 1e-8, format!("12 barriers, max |dR|, |dT| = {worst:.2e}"))
}

fn appendix_agreement() -> Gate {
    let pot = ConormalPotential1D::with_defaults(0.5).unwrap();
    let h = 1e-3;
    let cfg = IntegratorConfig::default();
    let app = connect_and_extract_r(&pot, h, None, &cfg).unwrap();
    let direct = solve(&ScatteringProblem::new(pot, h), &cfg).unwrap();
    let gap = (app.result.r.norm() - direct.r.norm()).abs() / direct.r.norm();
    gate(
        gap <= 0.10,
        format!(
            "h = 1e-3, default eta: |R_app| = {:.6e}, |R_direct| = {:.6e}, gap {:.3}%",
            app.result.r.norm(),
            direct.r.norm(),
            100.0 * gap
        ),
    )
}

fn b1_remainder() -> Gate {
    let ys = log_grid(50.0, 500.0, 25);
    let mut pass = true;
    let mut parts = Vec::new();
    for &alpha in &[0.5, 0.9] {
        let d: Vec<f64> = ys
            .iter()
            .map(|&y| (compute_b1(alpha, y).unwrap() - b1_expansion(alpha, y)).norm())
            .collect();
        let slope = loglog_slope(&ys, &d).unwrap();
        pass &= (slope - (alpha - 1.0)).abs() <= 0.2;
        parts.push(format!("a={alpha}: {slope:.4} (target {:.1})", alpha - 1.0));
    }
    gate(pass, format!("y in [50, 500]: slopes {}", parts.join(", ")))
}

fn sticking_family_exactness() -> Gate {
    let (spec, _) = HamiltonianSpec::demo_remark36().unwrap();
    let mut worst_res = 0.0_f64;
    let mut worst_p = 0.0_f64;
    for &s0 in &[f64::INFINITY, 0.0, 0.3, 1.0] {
        for k in 0..100 {
            let mut s = -0.5 + 2.5 * (k as f64 + 0.5) / 100.0;
            if s == s0 {
                s += 1e-3;
            }
            worst_res = worst_res.max(remark36_residual(&spec, s0, s).unwrap());
            worst_p = worst_p.max(conormal_core::raytrace::eval_p(&spec, &remark36_family(s0, s)).abs());
        }
    }
    gate(
        worst_res <= 1e-10 && worst_p <= 1e-12,
        format!("s0 in {{inf, 0, 0.3, 1}}: max residual {worst_res:.1e}, max |p| {worst_p:.1e}"),
    )
}

fn same_bits(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
}

fn reversal_error(spec: &HamiltonianSpec, tree: &GbbTree, cfg: &TracerConfig) -> f64 {
    let mut worst = 0.0_f64;
    for node in &tree.nodes {
        let seg = &node.segment;
        if seg.samples.len() < 2 {
            continue;
        }
        let span = seg.end().s - seg.start().s;
        let back = integrate_bicharacteristic(spec, &seg.end().point.reversed(), (0.0, span), cfg)
            .unwrap();
        worst = worst.max(back.end().point.reversed().max_abs_diff(&seg.start().point));
    }
    worst
}

fn conservation() -> Gate {
    let cfg = TracerConfig::default();
    let mut max_p = 0.0_f64;
    let mut max_jump = 0.0_f64;
    let mut copies_ok = true;
    let mut max_rev = 0.0_f64;

    // (i) transverse splitting.
    let (spec, seed) = HamiltonianSpec::demo_transverse(0.5).unwrap();
    let tree = trace_gbb_tree(&spec, &seed, &TreeOptions::default(), &cfg).unwrap();
    for n in &tree.nodes {
        max_p = max_p.max(n.segment.max_abs_p(&spec));
        if let Some(p) = n.parent {
            let arrival = &tree.nodes[p].segment.end().point;
            let start = &n.segment.start().point;
            copies_ok &= same_bits(&arrival.y, &start.y) && same_bits(&arrival.eta, &start.eta);
            if n.branch_kind == BranchKind::Transmitted {
                max_jump = max_jump.max((arrival.xi - start.xi).abs());
            }
        }
    }
    max_rev = max_rev.max(reversal_error(&spec, &tree, &cfg));
    // One-sided limits of xi from both half-lines.
    let left = PhasePoint::new(-1e-3, vec![0.0], 0.6, vec![0.8]);
    let arrive = approach_interface(&spec, &left, &cfg).unwrap();
    let out = cross_interface_caratheodory(&spec, &arrive.point, &cfg).unwrap();
    let back = approach_interface(&spec, &out.point.reversed(), &cfg).unwrap();
    max_jump = max_jump.max((arrive.point.xi + back.point.xi).abs());

    // (ii) two-sided profile: glancing seed and the detached branch.
    let (spec2, seed2) = HamiltonianSpec::demo_remark36().unwrap();
    let tree2 = trace_gbb_tree(&spec2, &seed2, &TreeOptions::default(), &cfg).unwrap();
    let glancing_ok = tree2.nodes.len() == 1
        && tree2.nodes[0].segment.status == SegmentStatus::GlancingNonunique;
    let detached =
        integrate_bicharacteristic(&spec2, &remark36_family(0.0, 0.01), (0.01, 1.0), &cfg).unwrap();
    max_p = max_p.max(detached.max_abs_p(&spec2));
    let span = detached.end().s - detached.start().s;
    let rev = integrate_bicharacteristic(&spec2, &detached.end().point.reversed(), (0.0, span), &cfg)
        .unwrap();
    max_rev = max_rev.max(rev.end().point.reversed().max_abs_diff(&detached.start().point));

    // (iii) tangency with a C^2 profile.
    let (spec3, seed3) = HamiltonianSpec::demo_tangent(3.0).unwrap();
    let opts = TreeOptions {
        s_start: -0.5,
        s_max: 0.5,
        ..TreeOptions::default()
    };
    let tree3 = trace_gbb_tree(&spec3, &seed3, &opts, &cfg).unwrap();
    for n in &tree3.nodes {
        max_p = max_p.max(n.segment.max_abs_p(&spec3));
    }
    max_rev = max_rev.max(reversal_error(&spec3, &tree3, &cfg));

    let pass = max_p <= 1e-8 && max_jump <= 1e-6 && copies_ok && max_rev <= 1e-6 && glancing_ok;
    gate(
        pass,
        format!(
            "max |p| {max_p:.1e}, xi jump {max_jump:.1e}, (y, eta) copied bitwise: {copies_ok}, reversal {max_rev:.1e}, glancing seed refused: {glancing_ok}"
        ),
    )
}

fn strength_ledger() -> Gate {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let cfg = TracerConfig::default();
    let mut nodes = 0;
    let mut reflected = 0;
    let mut pass = true;
    for _ in 0..20 {
        let alpha = rng.gen_range(0.2..0.95);
        let x0 = rng.gen_range(-0.5..-0.05);
        let angle: f64 = rng.gen_range(0.3..1.2);
        let root = rng.gen_range(-1.0..1.0);
        let pot = ConormalPotential1D::with_defaults(alpha).unwrap();
        let spec = HamiltonianSpec::flat(2, NormalProfile::Conormal(pot), 1.0).unwrap();
        let seed = PhasePoint::new(x0, vec![0.0], angle.sin(), vec![angle.cos()]);
        let opts = TreeOptions {
            max_depth: 3,
            s_max: 3.0,
            root_strength: root,
            ..TreeOptions::default()
        };
        let tree = trace_gbb_tree(&spec, &seed, &opts, &cfg).unwrap();
        for n in &tree.nodes {
            let k = tree.reflections_on_path(n.id);
            pass &= n.strength == root + alpha * k as f64;
            nodes += 1;
            reflected += usize::from(n.branch_kind == BranchKind::Reflected);
        }
    }
    gate(
        pass && reflected > 0,
        format!("20 random depth-3 trees, {nodes} nodes ({reflected} reflected): strength = root + a * #reflections exactly"),
    )
}

fn tangency_continuation() -> Gate {
    let cfg = TracerConfig::default();
    let (spec, seed) = HamiltonianSpec::demo_tangent(3.0).unwrap();
    let opts = TreeOptions {
        s_start: -0.5,
        s_max: 0.5,
        ..TreeOptions::default()
    };
    let tree = trace_gbb_tree(&spec, &seed, &opts, &cfg).unwrap();
    let node = &tree.nodes[0];
    let err = node.segment.end().point.max_abs_diff(&tangent_ray(node.segment.end().s));
    let single = tree.nodes.len() == 1 && node.segment.status == SegmentStatus::Completed;
    gate(
        single && err <= 1e-6 && (node.segment.end().s - 0.5).abs() < 1e-12,
        format!("alpha 3: {} node(s), status {:?}, endpoint error vs continued curve {err:.1e}", tree.nodes.len(), node.segment.status),
    )
}

fn main() -> ExitCode {
    let mut ledger = Ledger::default();
    let mut all = true;
    let mut report = |n: usize, name: &str, run: &mut dyn FnMut() -> Gate| {
        let t0 = Instant::now();
        let g = run();
        println!(
            "criterion {n:>2} {} {name}: {} [{:.1}s]",
            if g.pass { "PASS" } else { "FAIL" },
            g.detail,
            t0.elapsed().as_secs_f64()
        );
        all &= g.pass;
    };
    report(1, "figure reproduction", &mut || figure_reproduction(&mut ledger));
    report(2, "leading-order convergence", &mut || prop_convergence(&mut ledger));
    report(3, "scaling exponent", &mut || exponent_fit(&mut ledger));
    report(4, "unitarity", &mut || unitarity(&ledger));
    report(5, "square-barrier oracle", &mut oracle_equivalence);
    report(6, "plane-wave route agreement", &mut appendix_agreement);
    report(7, "b1 remainder decay", &mut b1_remainder);
    report(8, "non-unique family exactness", &mut sticking_family_exactness);
    report(9, "ray conservation", &mut conservation);
    report(10, "strength ledger", &mut strength_ledger);
    report(11, "tangency continuation", &mut tangency_continuation);
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
