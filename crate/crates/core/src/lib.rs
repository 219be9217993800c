//! Projected push-pull: a round-based simulator and analysis toolkit for
//! distributed constrained optimization over time-varying directed graphs.
//!
//! Agents hold private strongly convex quadratic costs and share one closed
//! convex constraint set. Each round they pull decision variables through a
//! row-stochastic matrix, push gradient-tracker mass through a
//! column-stochastic matrix, and apply a lazy projected-gradient update.
//! The crate provides:
//!
//! - [`problem`]: cost functions, constraint projections, and a centralized
//!   oracle for the constrained optimum;
//! - [`graph`]: digraph generators and the connectivity functionals that
//!   drive the contraction bounds;
//! - [`mixing`]: the per-round stochastic matrices and their weight
//!   sequences;
//! - [`protocol`]: the synchronized round engine;
//! - [`analysis`]: error metrics, contraction coefficients, the composite
//!   error matrix with its spectral-radius certificate, and executable
//!   counterexample constructions.

// negated range guards like `!(eta > 0.0)` reject NaN, which the suggested
// rewrite would silently accept
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod graph;
pub mod linalg;
pub mod mixing;
pub mod problem;
pub mod protocol;

pub use analysis::{
    check_composite, composite_matrix, consensus_error, contraction_sigma, contraction_tau,
    lambda_bound, optimality_gap, reproduce_impossibility_consensus, reproduce_impossibility_pgd,
    spectral_radius, tracking_error, AnalysisError, CertificateSuprema, ConvergenceCertificate,
    ErrorTriple,
};
pub use graph::{Digraph, DigraphSequence, GraphError};
pub use mixing::{
    min_positive_entry, phi_sequence_periodic, pi_sequence, MixingError, MixingPair,
    StochasticVector,
};
pub use problem::{ConstraintSet, ProblemError, ProblemInstance, QuadraticCost};
pub use protocol::{
    init, run, step, Execution, PhiMode, ProtocolError, RoundRecord, StepSizes, SwarmState,
    Trajectory,
};
