use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::flow::{trace_segment, RaySegment, SegmentStatus, TracerConfig};
use super::spec::{classify_boundary_point, eval_p, HamiltonianSpec, PhasePoint, PointClass};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchKind {
    Incident,
    Transmitted,
    Reflected,
}

/// One continuation leaving a hyperbolic interface point.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub point: PhasePoint,
    pub kind: BranchKind,
    pub strength: f64,
}

/// Splits a transverse arrival at `x = 0` into its transmitted and
/// reflected continuations. The reflected one is weaker by `alpha`.
pub fn branch_gbb(
    spec: &HamiltonianSpec,
    crossing: &PhasePoint,
    parent_strength: f64,
    alpha: f64,
    cfg: &TracerConfig,
) -> Result<Vec<Branch>> {
    if crossing.x != 0.0 {
        return Err(Error::InvalidParameter(format!(
            "branching needs a point on x = 0, got x = {}",
            crossing.x
        )));
    }
    let xi_plus = match classify_boundary_point(spec, &crossing.y, &crossing.eta, cfg.classify_tol)? {
        PointClass::Hyperbolic { xi_plus } => xi_plus,
        _ => {
            return Err(Error::NotHyperbolic {
                p_tilde: super::spec::eval_p_tilde(spec, &crossing.y, &crossing.eta),
            })
        }
    };
    let sign = if crossing.xi < 0.0 { -1.0 } else { 1.0 };
    let child = |xi: f64| PhasePoint {
        x: 0.0,
        y: crossing.y.clone(),
        xi,
        eta: crossing.eta.clone(),
    };
    Ok(vec![
        Branch {
            point: child(sign * xi_plus),
            kind: BranchKind::Transmitted,
            strength: parent_strength,
        },
        Branch {
            point: child(-sign * xi_plus),
            kind: BranchKind::Reflected,
            strength: parent_strength + alpha,
        },
    ])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbbNode {
    pub id: usize,
    pub parent: Option<usize>,
    pub depth: usize,
    pub branch_kind: BranchKind,
    /// Number of reflected edges on the path from the root.
    pub reflections: usize,
    pub strength: f64,
    pub segment: RaySegment,
}

/// Generalized broken bicharacteristics through one seed, as a tree of segments.
#[derive(Debug, Clone, PartialEq)]
pub struct GbbTree {
    pub dim: usize,
    pub energy: f64,
    /// Strength increment per reflection.
    pub alpha: f64,
    pub root_strength: f64,
    pub nodes: Vec<GbbNode>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeOptions {
    pub s_start: f64,
    pub s_max: f64,
    /// Nodes at this depth are not split further.
    pub max_depth: usize,
    /// Children weaker than this strength exponent are pruned.
    pub max_strength: f64,
    pub root_strength: f64,
    /// Trace the branches of one generation concurrently.
    pub parallel: bool,
}

impl Default for TreeOptions {
    fn default() -> Self {
        Self {
            s_start: 0.0,
            s_max: 2.0,
            max_depth: 3,
            max_strength: f64::INFINITY,
            root_strength: 0.0,
            parallel: true,
        }
    }
}

struct Pending {
    parent: Option<usize>,
    depth: usize,
    kind: BranchKind,
    reflections: usize,
    point: PhasePoint,
    s: f64,
}

/// Breadth-first expansion of the broken bicharacteristics through `pt0`.
/// Branch-level failures are recorded in node statuses.
pub fn trace_gbb_tree(
    spec: &HamiltonianSpec,
    pt0: &PhasePoint,
    opts: &TreeOptions,
    cfg: &TracerConfig,
) -> Result<GbbTree> {
    cfg.validate()?;
    let m = spec.tangential_dim();
    if pt0.y.len() != m || pt0.eta.len() != m || !pt0.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "seed must be finite with {m} tangential components"
        )));
    }
    let p = eval_p(spec, pt0);
    if p.abs() > 1e-8 * (1.0 + spec.energy.abs()) {
        return Err(Error::InvalidParameter(format!(
            "seed is not on the characteristic set: p = {p:e}"
        )));
    }
    if !(opts.s_max >= opts.s_start) {
        return Err(Error::InvalidParameter("s_max must not precede s_start".into()));
    }
    let alpha = spec.profile.order();
    let strength_of = |reflections: usize| opts.root_strength + alpha * reflections as f64;

    let mut nodes: Vec<GbbNode> = Vec::new();
    let mut level = vec![Pending {
        parent: None,
        depth: 0,
        kind: BranchKind::Incident,
        reflections: 0,
        point: pt0.clone(),
        s: opts.s_start,
    }];
    while !level.is_empty() {
        let trace = |p: &Pending| trace_segment(spec, &p.point, p.s, opts.s_max, cfg);
        let segments: Vec<RaySegment> = if opts.parallel {
            level.par_iter().map(trace).collect()
        } else {
            level.iter().map(trace).collect()
        };
        let mut next = Vec::new();
        for (pending, mut segment) in level.into_iter().zip(segments) {
            let id = nodes.len();
            let strength = strength_of(pending.reflections);
            if segment.status == SegmentStatus::HitInterface && pending.depth < opts.max_depth {
                let end = segment.end().clone();
                match branch_gbb(spec, &end.point, strength, alpha, cfg) {
                    Ok(children) => {
                        for child in children {
                            let reflections = pending.reflections
                                + usize::from(child.kind == BranchKind::Reflected);
                            if strength_of(reflections) > opts.max_strength {
                                continue;
                            }
                            next.push(Pending {
                                parent: Some(id),
                                depth: pending.depth + 1,
                                kind: child.kind,
                                reflections,
                                point: child.point,
                                s: end.s,
                            });
                        }
                    }
                    Err(e) => segment.error = Some(e.to_string()),
                }
            }
            nodes.push(GbbNode {
                id,
                parent: pending.parent,
                depth: pending.depth,
                branch_kind: pending.kind,
                reflections: pending.reflections,
                strength,
                segment,
            });
        }
        level = next;
    }
    Ok(GbbTree {
        dim: spec.dim,
        energy: spec.energy,
        alpha,
        root_strength: opts.root_strength,
        nodes,
    })
}

#[derive(Serialize, Deserialize)]
struct NodeJson {
    id: usize,
    parent: Option<usize>,
    depth: usize,
    branch_kind: BranchKind,
    strength: f64,
    status: SegmentStatus,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    error: Option<String>,
    samples: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct TreeJson {
    dim: usize,
    energy: f64,
    alpha: Option<f64>,
    root_strength: f64,
    nodes: Vec<NodeJson>,
}

impl GbbTree {
    pub fn children(&self, id: usize) -> impl Iterator<Item = &GbbNode> {
        self.nodes.iter().filter(move |n| n.parent == Some(id))
    }

    /// Reflected edges on the path from the root to `id`, counted by walking parents.
    pub fn reflections_on_path(&self, id: usize) -> usize {
        let mut count = 0;
        let mut cur = Some(id);
        while let Some(i) = cur {
            let node = &self.nodes[i];
            if node.branch_kind == BranchKind::Reflected {
                count += 1;
            }
            cur = node.parent;
        }
        count
    }

    /// JSON document: `{dim, energy, alpha, root_strength, nodes: [...]}`
    /// with one `[s, x, y.., xi, eta..]` row per sample.
    pub fn to_json(&self) -> String {
        let doc = TreeJson {
            dim: self.dim,
            energy: self.energy,
            alpha: self.alpha.is_finite().then_some(self.alpha),
            root_strength: self.root_strength,
            nodes: self
                .nodes
                .iter()
                .map(|n| NodeJson {
                    id: n.id,
                    parent: n.parent,
                    depth: n.depth,
                    branch_kind: n.branch_kind,
                    strength: n.strength,
                    status: n.segment.status,
                    error: n.segment.error.clone(),
                    samples: n
                        .segment
                        .samples
                        .iter()
                        .map(|smp| {
                            let mut row = vec![smp.s];
                            row.extend(smp.point.to_vec());
                            row
                        })
                        .collect(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("tree serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: TreeJson =
            serde_json::from_str(text).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        let m = doc.dim.saturating_sub(1);
        let mut nodes = Vec::with_capacity(doc.nodes.len());
        let mut reflections = Vec::with_capacity(doc.nodes.len());
        for n in doc.nodes {
            let samples = n
                .samples
                .iter()
                .map(|row| {
                    if row.len() != 2 * m + 3 {
                        return Err(Error::InvalidParameter(format!(
                            "sample row of length {} in a dimension-{} tree",
                            row.len(),
                            doc.dim
                        )));
                    }
                    Ok(super::flow::RaySample {
                        s: row[0],
                        point: PhasePoint {
                            x: row[1],
                            y: row[2..2 + m].to_vec(),
                            xi: row[2 + m],
                            eta: row[3 + m..].to_vec(),
                        },
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let refl = n.parent.map_or(0, |p: usize| reflections.get(p).copied().unwrap_or(0))
                + usize::from(n.branch_kind == BranchKind::Reflected);
            reflections.push(refl);
            nodes.push(GbbNode {
                id: n.id,
                parent: n.parent,
                depth: n.depth,
                branch_kind: n.branch_kind,
                reflections: refl,
                strength: n.strength,
                segment: RaySegment {
                    samples,
                    status: n.status,
                    error: n.error,
                },
            });
        }
        Ok(Self {
            dim: doc.dim,
            energy: doc.energy,
            alpha: doc.alpha.unwrap_or(f64::INFINITY),
            root_strength: doc.root_strength,
            nodes,
        })
    }
}
