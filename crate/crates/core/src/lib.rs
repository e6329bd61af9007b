//! Provable repair of feed-forward neural networks.
//!
//! A network is first decoupled into an activation channel, which fixes the
//! linear region (and hence the linearization) used at every input, and a
//! value channel, which computes the output. Editing one value-channel layer
//! changes the output affinely while leaving the regions alone, so finding
//! the smallest edit that satisfies a pointwise or polytope specification
//! is a linear program.

pub mod ddnn;
pub mod error;
pub mod fixtures;
pub mod io;
pub mod jacobian;
pub mod lp;
pub mod metrics;
pub mod network;
pub mod regions;
pub mod repair;

pub use ddnn::{Ddnn, Linearization, Network};
pub use error::{Error, Result};
pub use jacobian::{param_jacobian, ParamJacobian, ParamLayout};
pub use lp::{LinearProgram, LpOutcome, NormObjective};
pub use metrics::{accuracy, check_polytope_spec_sampled, drawdown, generalization, LabeledSet, MetricsReport};
pub use network::{ActivationKind, ActivationPattern, Dnn, Layer, Sign};
pub use regions::{exactline, key_points, plane_transfer, KeyPoint, Piece, Polygon2D, Polytope, RegionPartition, Segment};
pub use repair::{
    point_repair, polytope_repair, repair_all_layers, satisfies_points, OutputConstraint, PointConstraint, PointSpec,
    PolytopeConstraint, PolytopeSpec, RepairMask, RepairOptions, RepairResult, RepairSpec, RepairStatus,
};
