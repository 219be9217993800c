//! Per-round mixing matrices and the stochastic weight sequences they induce.
//!
//! Each round builds a row-stochastic matrix R (averaging decision variables
//! over in-neighbors) and a column-stochastic matrix C (spreading gradient
//! tracker mass over out-neighbors) from the round's graph, with uniform
//! weights over neighborhood-plus-self. The weight sequences are the left
//! fixed-point family of the R product (phi) and the forward C recursion
//! started from the uniform vector (pi).

use crate::graph::Digraph;
use crate::linalg::Matrix;
use thiserror::Error;

/// Power-iteration cap and tolerance for the periodic fixed-point vectors.
pub const PERRON_ITERATION_CAP: usize = 100_000;
pub const PERRON_TOLERANCE: f64 = 1e-13;

const STOCHASTIC_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum MixingError {
    #[error("mixing matrices need a strongly connected graph")]
    NotStronglyConnected,
    #[error("matrix has no positive entry")]
    AllZeroMatrix,
    #[error("matrix is not {kind} stochastic: worst sum deviation {deviation:e}")]
    NotStochastic { kind: &'static str, deviation: f64 },
    #[error("matrix sparsity does not match the graph at entry ({i}, {j})")]
    SparsityMismatch { i: usize, j: usize },
    #[error("stochastic vector invalid: {0}")]
    InvalidVector(String),
    #[error("power iteration did not converge: residual {residual:e} after {iterations} steps")]
    PerronDidNotConverge { iterations: usize, residual: f64 },
}

/// Positive vector summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticVector(Vec<f64>);

impl StochasticVector {
    pub fn new(entries: Vec<f64>) -> Result<Self, MixingError> {
        if entries.is_empty() {
            return Err(MixingError::InvalidVector("empty vector".into()));
        }
        if let Some(bad) = entries.iter().find(|&&v| !(v > 0.0)) {
            return Err(MixingError::InvalidVector(format!(
                "entries must be strictly positive, found {bad}"
            )));
        }
        let sum: f64 = entries.iter().sum();
        if (sum - 1.0).abs() > STOCHASTIC_TOL {
            return Err(MixingError::InvalidVector(format!(
                "entries sum to {sum}, expected 1"
            )));
        }
        Ok(Self(entries))
    }

    /// `(1/n, ..., 1/n)`.
    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n])
    }

    /// Normalizes a positive vector to sum one.
    pub fn normalized(entries: Vec<f64>) -> Result<Self, MixingError> {
        let sum: f64 = entries.iter().sum();
        if !(sum > 0.0) {
            return Err(MixingError::InvalidVector("nonpositive sum".into()));
        }
        Self::new(entries.iter().map(|v| v / sum).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn entries(&self) -> &[f64] {
        &self.0
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Smallest strictly positive entry of a nonnegative matrix.
pub fn min_positive_entry(m: &Matrix) -> Result<f64, MixingError> {
    let mut best = f64::INFINITY;
    for i in 0..m.rows() {
        for &v in m.row(i) {
            if v > 0.0 {
                best = best.min(v);
            }
        }
    }
    if best.is_finite() {
        Ok(best)
    } else {
        Err(MixingError::AllZeroMatrix)
    }
}

/// The round's pair of mixing matrices.
#[derive(Debug, Clone)]
pub struct MixingPair {
    r: Matrix,
    c: Matrix,
}

impl MixingPair {
    /// Uniform-weight recipe: row i of R gives weight 1/(in-degree+1) to each
    /// in-neighbor and to i itself; column i of C gives 1/(out-degree+1) to
    /// each out-neighbor and to i itself.
    pub fn build(g: &Digraph) -> Result<Self, MixingError> {
        if !g.is_strongly_connected() {
            return Err(MixingError::NotStronglyConnected);
        }
        let n = g.node_count();
        let mut r = Matrix::zeros(n, n);
        let mut c = Matrix::zeros(n, n);
        for i in 0..n {
            let w = 1.0 / (g.in_degree(i) as f64 + 1.0);
            r.set(i, i, w);
            for &j in g.in_neighbors(i) {
                r.set(i, j, w);
            }
            let w = 1.0 / (g.out_degree(i) as f64 + 1.0);
            c.set(i, i, w);
            for &j in g.out_neighbors(i) {
                c.set(j, i, w);
            }
        }
        Ok(Self { r, c })
    }

    /// Wraps externally supplied matrices after validating stochasticity and
    /// graph compatibility.
    pub fn from_matrices(g: &Digraph, r: Matrix, c: Matrix) -> Result<Self, MixingError> {
        let n = g.node_count();
        for (sum, kind) in [(r.row_sums(), "row"), (c.col_sums(), "column")] {
            let deviation = sum.iter().map(|s| (s - 1.0).abs()).fold(0.0_f64, f64::max);
            if deviation > STOCHASTIC_TOL {
                return Err(MixingError::NotStochastic { kind, deviation });
            }
        }
        for m in [&r, &c] {
            for i in 0..n {
                for j in 0..n {
                    let compatible = i == j || g.has_edge(j, i);
                    if (m.get(i, j) > 0.0) != compatible {
                        return Err(MixingError::SparsityMismatch { i, j });
                    }
                }
            }
        }
        Ok(Self { r, c })
    }

    pub fn r(&self) -> &Matrix {
        &self.r
    }

    pub fn c(&self) -> &Matrix {
        &self.c
    }

    /// Realized floor of R's positive entries.
    pub fn r_min(&self) -> f64 {
        min_positive_entry(&self.r).expect("mixing matrices have a positive diagonal")
    }

    /// Realized floor of C's positive entries.
    pub fn c_min(&self) -> f64 {
        min_positive_entry(&self.c).expect("mixing matrices have a positive diagonal")
    }
}

/// Forward tracker-weight recursion `pi_0 = uniform`, `pi_{k+1} = C_k pi_k`,
/// returned for rounds `0..=horizon`. Each vector is renormalized to guard
/// against sum drift over long horizons.
pub fn pi_sequence(pairs: &[MixingPair], horizon: usize) -> Vec<StochasticVector> {
    assert!(!pairs.is_empty(), "need at least one mixing pair");
    let n = pairs[0].c.rows();
    let mut out = Vec::with_capacity(horizon + 1);
    let mut pi = StochasticVector::uniform(n);
    out.push(pi.clone());
    for k in 0..horizon {
        let next = pairs[k % pairs.len()].c.matvec(pi.entries());
        pi = StochasticVector::normalized(next).expect("C keeps positive vectors positive");
        out.push(pi.clone());
    }
    out
}

/// The T-periodic family of decision-weight vectors for a T-periodic graph
/// sequence: `phi_0` is the left fixed-point vector of the round product
/// `R_{T-1} ... R_0`, and earlier vectors are recovered backwards through
/// `phi_k^T = phi_{k+1}^T R_k`.
pub fn phi_sequence_periodic(pairs: &[MixingPair]) -> Result<Vec<StochasticVector>, MixingError> {
    assert!(!pairs.is_empty(), "need at least one mixing pair");
    let mut product = pairs[0].r.clone();
    for pair in &pairs[1..] {
        product = pair.r.matmul(&product);
    }
    let phi0 = left_perron(&product)?;
    let t = pairs.len();
    let mut seq = vec![StochasticVector::uniform(phi0.len()); t];
    seq[0] = StochasticVector::normalized(phi0)?;
    // phi_{T-1} = phi_T^T R_{T-1} with phi_T = phi_0, then walk backwards.
    for k in (1..t).rev() {
        let next = if k == t - 1 { &seq[0] } else { &seq[k + 1] };
        let prev = pairs[k].r.vecmat(next.entries());
        seq[k] = StochasticVector::normalized(prev)?;
    }
    Ok(seq)
}

/// Left fixed-point vector `v^T M = v^T` of a row-stochastic matrix with
/// positive diagonal, by power iteration normalized to sum one.
pub fn left_perron(m: &Matrix) -> Result<Vec<f64>, MixingError> {
    perron_iterate(m, true)
}

/// Right fixed-point vector `M v = v` of a column-stochastic matrix with
/// positive diagonal.
pub fn right_perron(m: &Matrix) -> Result<Vec<f64>, MixingError> {
    perron_iterate(m, false)
}

fn perron_iterate(m: &Matrix, left: bool) -> Result<Vec<f64>, MixingError> {
    let n = m.rows();
    let mut v = vec![1.0 / n as f64; n];
    for it in 0..PERRON_ITERATION_CAP {
        let mut next = if left { m.vecmat(&v) } else { m.matvec(&v) };
        let sum: f64 = next.iter().sum();
        if !(sum > 0.0) {
            return Err(MixingError::AllZeroMatrix);
        }
        for x in &mut next {
            *x /= sum;
        }
        let step = v
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0_f64, f64::max);
        v = next;
        if step <= PERRON_TOLERANCE {
            let image = if left { m.vecmat(&v) } else { m.matvec(&v) };
            let residual = v
                .iter()
                .zip(&image)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0_f64, f64::max);
            if residual <= 10.0 * PERRON_TOLERANCE {
                return Ok(v);
            }
        }
        if it + 1 == PERRON_ITERATION_CAP {
            let image = if left { m.vecmat(&v) } else { m.matvec(&v) };
            let residual = v
                .iter()
                .zip(&image)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0_f64, f64::max);
            return Err(MixingError::PerronDidNotConverge {
                iterations: PERRON_ITERATION_CAP,
                residual,
            });
        }
    }
    unreachable!("loop either returns or errors at the cap")
}
