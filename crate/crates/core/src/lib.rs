//! Partition-based relaxed ADMM (R-ADMM) for distributed convex optimization
//! over networks with i.i.d. packet loss.
//!
//! Each node `i` of an undirected graph owns a convex cost
//! `f_i(x_i, {x_j}_{j in N_i})` that depends on its own variable and on its
//! neighbors' variables. The node keeps local copies of every variable its
//! cost touches and reaches consensus on them by exchanging two vectors per
//! neighbor per round. Lost packets simply leave the receiver's auxiliary
//! variables untouched.
//!
//! Module map:
//!
//! * [`graph`]: topologies, random geometric graphs, adjacency-list text format.
//! * [`problem`]: quadratic local costs, random instances, centralized optimum.
//! * [`radmm`]: node-local state, x-update, messages, gated z-update, rounds.
//! * [`reference`]: stacked four-iterate R-ADMM with explicit `A` and `P`,
//!   used as an equivalence oracle for the distributed algorithm.
//! * [`lossy`]: Bernoulli loss model and counter-based loss schedules.
//! * [`experiments`]: relative error, Monte Carlo averaging, stability sweeps.

pub mod error;
pub mod experiments;
pub mod graph;
pub mod lossy;
pub mod problem;
pub mod radmm;
pub mod reference;
pub mod seed;

pub use error::{Error, Result};
pub use experiments::{
    consensus_residual, detect_convergence, monte_carlo, relative_error, stability_sweep, Convergence, McOptions,
    McTrace, RunTrace, SweepCell, SweepConfig, SweepResult,
};
pub use graph::Graph;
pub use lossy::{DeliveryMask, LossModel, LossSchedule};
pub use problem::{LocalCost, LocalSolver, PartitionProblem, QuadraticLocalCost, Solution};
pub use radmm::{AlgorithmParams, DistributedSolver, Message, NodeState, RunOptions, StopRule};
pub use reference::{check_equivalence, ConstraintMatrices, ReferenceSolver, ReferenceState};
