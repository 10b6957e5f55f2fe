//! Rays for `p = xi^2 + eta^T k(x, y) eta + w(x) - E` with a conormal
//! interface at `x = 0`: classification of boundary points, integration
//! with transverse crossings, splitting into transmitted and reflected
//! branches, and the glancing policy.
//!
//! Glancing arrivals (`|xi| < xi_min`) continue through when the profile
//! has order above two, where the Hamilton field is `C^1`; otherwise the
//! branch stops with status `glancing_nonunique`.

mod flow;
mod remark;
mod spec;
mod tree;

pub use flow::{
    approach_interface, cross_interface_caratheodory, integrate_bicharacteristic, PatchCrossing,
    RaySample, RaySegment, SegmentStatus, TracerConfig,
};
pub use remark::{remark36_family, remark36_residual, remark36_velocity};
pub use spec::{
    classify_boundary_point, eval_hamilton_field, eval_p, eval_p_tilde, tangent_ray, FlatMetric,
    FnMetric, HamiltonianSpec, Metric, NormalProfile, PhasePoint, PointClass, StretchedMetric,
    DEFAULT_CLASSIFY_TOL, MAX_TANGENTIAL,
};
pub use tree::{branch_gbb, trace_gbb_tree, Branch, BranchKind, GbbNode, GbbTree, TreeOptions};
