//! The projected push-pull round engine.
//!
//! Each synchronized round applies three sub-steps to the swarm: a consensus
//! pull of the decision variables through the row-stochastic matrix, a
//! gradient-tracking push through the column-stochastic matrix, and a lazy
//! projected update that blends the pulled point with its projected gradient
//! step. Feasibility of `x` and `z` is preserved by convexity, and the
//! column-stochastic push conserves the tracker sum.

use crate::analysis::{self, ErrorTriple};
use crate::graph::DigraphSequence;
use crate::mixing::{phi_sequence_periodic, MixingError, MixingPair, StochasticVector};
use crate::problem::{ProblemError, ProblemInstance};
use rayon::prelude::*;
use thiserror::Error;

/// Numbers beyond this magnitude abort a run as divergent.
pub const DIVERGENCE_NORM_CAP: f64 = 1e12;

const FEASIBILITY_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("step sizes invalid: eta {eta} must be positive, lambda {lambda} must lie in (0, 1]")]
    InvalidStepSizes { eta: f64, lambda: f64 },
    #[error("initial point of agent {agent} is infeasible (residual {residual:e})")]
    InfeasibleStart { agent: usize, residual: f64 },
    #[error("run needs at least one round")]
    ZeroRounds,
    #[error("agent count mismatch: problem has {expected}, got {got}")]
    AgentCountMismatch { expected: usize, got: usize },
    #[error("state diverged at round {round}")]
    Diverged { round: usize },
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Mixing(#[from] MixingError),
}

/// The two step sizes: `eta` scales the gradient, `lambda` blends the lazy
/// update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSizes {
    pub eta: f64,
    pub lambda: f64,
}

impl StepSizes {
    pub fn new(eta: f64, lambda: f64) -> Result<Self, ProtocolError> {
        if !(eta > 0.0) || !(lambda > 0.0 && lambda <= 1.0) {
            return Err(ProtocolError::InvalidStepSizes { eta, lambda });
        }
        Ok(Self { eta, lambda })
    }
}

/// Which decision-weight sequence the recorded metrics use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhiMode {
    /// The exact periodic fixed-point family of the round products.
    Periodic,
    /// The uniform substitute `1/n`, for plotting parity.
    Uniform,
}

/// Per-agent updates inside a round may run in parallel; the sub-steps only
/// read values from the previous sub-step, so the result is identical to the
/// sequential schedule bit for bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    #[default]
    Sequential,
    Parallel,
}

/// Stacked per-agent state at one round.
#[derive(Debug, Clone, PartialEq)]
pub struct SwarmState {
    round: usize,
    x: Vec<Vec<f64>>,
    y: Vec<Vec<f64>>,
    z: Vec<Vec<f64>>,
}

impl SwarmState {
    pub fn round(&self) -> usize {
        self.round
    }

    pub fn agent_count(&self) -> usize {
        self.x.len()
    }

    pub fn x(&self) -> &[Vec<f64>] {
        &self.x
    }

    pub fn y(&self) -> &[Vec<f64>] {
        &self.y
    }

    pub fn z(&self) -> &[Vec<f64>] {
        &self.z
    }

    /// Worst constraint-membership residual over all `x_i` and `z_i`.
    pub fn feasibility_residual(&self, problem: &ProblemInstance) -> f64 {
        let set = problem.constraint();
        self.x
            .iter()
            .chain(self.z.iter())
            .map(|v| set.membership_residual(v))
            .fold(0.0, f64::max)
    }

    /// Relative defect of the tracker-sum identity
    /// `sum_i y_i = sum_i grad f_i(x_i)`, with a unit floor on the
    /// denominator so the measure stays meaningful near a vanishing global
    /// gradient.
    pub fn tracking_identity_error(&self, problem: &ProblemInstance) -> f64 {
        let d = problem.dimension();
        let mut y_sum = vec![0.0; d];
        let mut g_sum = vec![0.0; d];
        for (i, y) in self.y.iter().enumerate() {
            let g = problem
                .cost_gradient(i, &self.x[i])
                .expect("state dimensions match the problem");
            for k in 0..d {
                y_sum[k] += y[k];
                g_sum[k] += g[k];
            }
        }
        let diff = crate::linalg::dist(&y_sum, &g_sum);
        diff / crate::linalg::norm(&g_sum).max(1.0)
    }

    fn max_abs(&self) -> f64 {
        self.x
            .iter()
            .chain(self.y.iter())
            .chain(self.z.iter())
            .flat_map(|v| v.iter())
            .fold(0.0_f64, |acc, &v| acc.max(v.abs()))
    }

    fn is_finite(&self) -> bool {
        self.x
            .iter()
            .chain(self.y.iter())
            .chain(self.z.iter())
            .flat_map(|v| v.iter())
            .all(|v| v.is_finite())
    }
}

/// Initial state: `x = z = x0` (which must be feasible) and `y_i` set to the
/// local gradient at `x0_i`.
pub fn init(problem: &ProblemInstance, x0: &[Vec<f64>]) -> Result<SwarmState, ProtocolError> {
    if x0.len() != problem.agent_count() {
        return Err(ProtocolError::AgentCountMismatch {
            expected: problem.agent_count(),
            got: x0.len(),
        });
    }
    for (agent, point) in x0.iter().enumerate() {
        let residual = problem.constraint().membership_residual(point);
        if residual > FEASIBILITY_TOL {
            return Err(ProtocolError::InfeasibleStart { agent, residual });
        }
    }
    let y = x0
        .iter()
        .enumerate()
        .map(|(i, point)| problem.cost_gradient(i, point))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SwarmState {
        round: 0,
        x: x0.to_vec(),
        y,
        z: x0.to_vec(),
    })
}

/// One synchronized round.
pub fn step(
    state: &SwarmState,
    pair: &MixingPair,
    sizes: StepSizes,
    problem: &ProblemInstance,
    execution: Execution,
) -> SwarmState {
    let n = state.agent_count();
    let mix_rows = |m: &crate::linalg::Matrix, values: &[Vec<f64>]| -> Vec<Vec<f64>> {
        let one = |i: usize| -> Vec<f64> {
            let row = m.row(i);
            let d = values[0].len();
            let mut acc = vec![0.0; d];
            for (w, v) in row.iter().zip(values) {
                if *w == 0.0 {
                    continue;
                }
                for k in 0..d {
                    acc[k] += w * v[k];
                }
            }
            acc
        };
        match execution {
            Execution::Sequential => (0..n).map(one).collect(),
            Execution::Parallel => (0..n).into_par_iter().map(one).collect(),
        }
    };

    // consensus pull
    let x_next = mix_rows(pair.r(), &state.z);

    // gradient tracking push; the old local gradient is subtracted from the
    // mixed mass before the new one is added, which keeps the single-agent
    // case bit-exact against plain projected gradient descent
    let mixed_y = mix_rows(pair.c(), &state.y);
    let track_one = |i: usize| -> Vec<f64> {
        let g_old = problem
            .cost_gradient(i, &state.x[i])
            .expect("dimensions fixed at init");
        let g_new = problem
            .cost_gradient(i, &x_next[i])
            .expect("dimensions fixed at init");
        mixed_y[i]
            .iter()
            .zip(&g_old)
            .zip(&g_new)
            .map(|((m, o), n)| (m - o) + n)
            .collect()
    };
    let y_next: Vec<Vec<f64>> = match execution {
        Execution::Sequential => (0..n).map(track_one).collect(),
        Execution::Parallel => (0..n).into_par_iter().map(track_one).collect(),
    };

    // lazy projected update
    let lazy_one = |i: usize| -> Vec<f64> {
        let moved: Vec<f64> = x_next[i]
            .iter()
            .zip(&y_next[i])
            .map(|(x, y)| x - sizes.eta * y)
            .collect();
        let projected = problem.constraint().project(&moved);
        x_next[i]
            .iter()
            .zip(&projected)
            .map(|(x, p)| (1.0 - sizes.lambda) * x + sizes.lambda * p)
            .collect()
    };
    let z_next: Vec<Vec<f64>> = match execution {
        Execution::Sequential => (0..n).map(lazy_one).collect(),
        Execution::Parallel => (0..n).into_par_iter().map(lazy_one).collect(),
    };

    SwarmState {
        round: state.round + 1,
        x: x_next,
        y: y_next,
        z: z_next,
    }
}

/// Per-round snapshot of the three error metrics and the invariants.
#[derive(Debug, Clone)]
pub struct RoundRecord {
    pub round: usize,
    pub errors: ErrorTriple,
    pub feasibility_residual: f64,
    pub tracking_identity_error: f64,
}

/// Output of a full run: one record per round including the initial state,
/// the oracle optimum, and the final swarm state.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub records: Vec<RoundRecord>,
    pub xstar: Vec<f64>,
    pub phi_mode: PhiMode,
    /// Whether every round's R was also column stochastic; metric checks
    /// that substitute the uniform weights are only meaningful when true.
    pub r_doubly_stochastic: bool,
    pub final_state: SwarmState,
}

impl Trajectory {
    pub fn rounds(&self) -> usize {
        self.records.len().saturating_sub(1)
    }

    pub fn final_errors(&self) -> ErrorTriple {
        self.records
            .last()
            .expect("a run always records at least the initial round")
            .errors
    }

    /// First round at which the optimality gap drops below `threshold`.
    pub fn first_round_below(&self, threshold: f64) -> Option<usize> {
        self.records
            .iter()
            .find(|r| r.errors.optimality < threshold)
            .map(|r| r.round)
    }
}

/// Runs the protocol for `rounds` rounds over the periodic graph sequence,
/// recording the error metrics at every round (including round zero). The
/// reference optimum comes from the centralized oracle.
pub fn run(
    problem: &ProblemInstance,
    graphs: &DigraphSequence,
    sizes: StepSizes,
    x0: &[Vec<f64>],
    rounds: usize,
    phi_mode: PhiMode,
    execution: Execution,
) -> Result<Trajectory, ProtocolError> {
    if rounds == 0 {
        return Err(ProtocolError::ZeroRounds);
    }
    if graphs.node_count() != problem.agent_count() {
        return Err(ProtocolError::AgentCountMismatch {
            expected: problem.agent_count(),
            got: graphs.node_count(),
        });
    }
    let n = problem.agent_count();
    let pairs: Vec<MixingPair> = graphs
        .graphs()
        .iter()
        .map(MixingPair::build)
        .collect::<Result<_, _>>()?;
    let r_doubly_stochastic = pairs
        .iter()
        .all(|p| p.r().col_sums().iter().all(|s| (s - 1.0).abs() <= 1e-12));
    let phi_seq: Vec<StochasticVector> = match phi_mode {
        PhiMode::Periodic => phi_sequence_periodic(&pairs)?,
        PhiMode::Uniform => vec![StochasticVector::uniform(n)],
    };
    let phi_at = |round: usize| &phi_seq[round % phi_seq.len()];

    let xstar = problem.solve_reference()?;
    let mut state = init(problem, x0)?;
    let mut pi = StochasticVector::uniform(n);
    let mut records = Vec::with_capacity(rounds + 1);
    let record = |state: &SwarmState, pi: &StochasticVector, phi: &StochasticVector| RoundRecord {
        round: state.round(),
        errors: ErrorTriple {
            optimality: analysis::optimality_gap(state.x(), phi, &xstar),
            consensus: analysis::consensus_error(state.x(), phi),
            tracking: analysis::tracking_error(state.y(), pi),
        },
        feasibility_residual: state.feasibility_residual(problem),
        tracking_identity_error: state.tracking_identity_error(problem),
    };
    records.push(record(&state, &pi, phi_at(0)));

    for k in 0..rounds {
        let pair = &pairs[k % pairs.len()];
        state = step(&state, pair, sizes, problem, execution);
        if !state.is_finite() || state.max_abs() > DIVERGENCE_NORM_CAP {
            return Err(ProtocolError::Diverged { round: k });
        }
        let next_pi = pair.c().matvec(pi.entries());
        pi = StochasticVector::normalized(next_pi)?;
        records.push(record(&state, &pi, phi_at(k + 1)));
    }

    Ok(Trajectory {
        records,
        xstar,
        phi_mode,
        r_doubly_stochastic,
        final_state: state,
    })
}
