//! Schedules and throughput analysis for shared channels where concurrent
//! transmissions destroy each other and transmitters get no feedback.
//!
//! The crate is organized around four pieces:
//!
//! - [`collision_graph`]: who interferes with whom ([`CollisionGraph`]).
//! - [`protocol`]: deterministic periodic schedules, the radix construction
//!   with exact per-link duty factors, slot expansion for unsynchronized
//!   operation, and offset bookkeeping.
//! - [`simulator`]: exact per-link throughput under integer or fractional
//!   time offsets, plus exhaustive worst-case and average sweeps.
//! - [`region`]: the achievable-throughput region: exact throughput points,
//!   membership, the outer-boundary eigenvalue test, projection, and the
//!   constrained throughput maximization solver.
//!
//! Throughput and duty-factor algebra is exact rational arithmetic; only
//! the eigenvalue and optimization routines use floating point, with
//! explicit tolerances.

pub mod collision_graph;
mod linalg;
mod opt;
pub mod protocol;
pub mod rational;
pub mod region;
pub mod simulator;

pub use collision_graph::{CollisionGraph, GraphError};
pub use protocol::{
    duty_factor, observed_submatrix, verify_shift_invariance, DutyFactorSpec, OffsetAssignment,
    ProtocolError, ProtocolMatrix, RadixMatrix, ShiftInvarianceReport, VerifyOptions,
    DEFAULT_MAX_SPACE,
};
pub use rational::{format_rational, parse_rational, Rat};
pub use region::{
    exact_unit_eigenvalue, is_on_outer_boundary, kkt_residual, membership, project_to_boundary,
    solve_op2, spectral_radius, symmetric_sum_throughput, throughput_point, throughput_point_f64,
    BoundaryCertificate, BoundaryVerdict, KktResiduals, Membership, Op2Solution, Projection,
    RegionError, SpectralRadius, SymmetricSum, DEFAULT_KKT_TOL, DEFAULT_RHO_TOL,
};
pub use simulator::{
    average_throughput_over_offsets, nonsync_throughput, sweep_nonsync_worstcase,
    sweep_sync_worstcase, sync_throughput, LinkWitness, SimError, SweepOptions, SweepResult,
    ThroughputVector,
};
