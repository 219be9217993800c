//! Per-agent quadratic costs, the shared constraint set, and the centralized
//! projected-gradient oracle used as the ground truth for every error metric.

use crate::linalg::{self, Matrix};
use thiserror::Error;

/// Iteration cap for the centralized oracle. Far beyond what any bundled
/// scenario needs; hitting it is surfaced as an error, never truncated.
pub const ORACLE_ITERATION_CAP: usize = 1_000_000;

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("curvature matrix must be square and symmetric")]
    NotSymmetric,
    #[error("curvature matrix must be positive definite (smallest eigenvalue {0:e})")]
    NotPositiveDefinite(f64),
    #[error("a problem needs at least one cost")]
    NoCosts,
    #[error("invalid constraint: {0}")]
    InvalidConstraint(String),
    #[error("step size {eta} out of range, must lie in (0, {limit})")]
    StepOutOfRange { eta: f64, limit: f64 },
    #[error(
        "centralized oracle did not converge: residual {residual:e} after {iterations} iterations"
    )]
    OracleDidNotConverge {
        iterations: usize,
        residual: f64,
        last: Vec<f64>,
    },
}

/// Quadratic cost `(x - center)^T P (x - center)` with symmetric
/// positive-definite curvature `P`.
#[derive(Debug, Clone)]
pub struct QuadraticCost {
    center: Vec<f64>,
    curvature: Matrix,
    min_eig: f64,
    max_eig: f64,
}

impl QuadraticCost {
    pub fn new(center: Vec<f64>, curvature: Matrix) -> Result<Self, ProblemError> {
        if curvature.rows() != curvature.cols() || !curvature.is_symmetric(1e-12) {
            return Err(ProblemError::NotSymmetric);
        }
        if curvature.rows() != center.len() {
            return Err(ProblemError::DimensionMismatch {
                expected: center.len(),
                got: curvature.rows(),
            });
        }
        let eigs = linalg::symmetric_eigenvalues(&curvature);
        let min_eig = eigs[0];
        let max_eig = eigs[eigs.len() - 1];
        if min_eig <= 0.0 {
            return Err(ProblemError::NotPositiveDefinite(min_eig));
        }
        Ok(Self {
            center,
            curvature,
            min_eig,
            max_eig,
        })
    }

    /// Convenience constructor for a diagonal curvature.
    pub fn diagonal(center: Vec<f64>, diag: &[f64]) -> Result<Self, ProblemError> {
        let d = center.len();
        if diag.len() != d {
            return Err(ProblemError::DimensionMismatch {
                expected: d,
                got: diag.len(),
            });
        }
        let mut m = Matrix::zeros(d, d);
        for (i, &v) in diag.iter().enumerate() {
            m.set(i, i, v);
        }
        Self::new(center, m)
    }

    pub fn dimension(&self) -> usize {
        self.center.len()
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn curvature(&self) -> &Matrix {
        &self.curvature
    }

    /// Smallest and largest eigenvalues of the curvature matrix.
    pub fn eigen_bounds(&self) -> (f64, f64) {
        (self.min_eig, self.max_eig)
    }

    pub fn value(&self, point: &[f64]) -> Result<f64, ProblemError> {
        self.check_dim(point)?;
        let diff = linalg::sub(point, &self.center);
        Ok(linalg::dot(&diff, &self.curvature.matvec(&diff)))
    }

    /// Closed-form gradient `2 P (x - center)`.
    pub fn gradient(&self, point: &[f64]) -> Result<Vec<f64>, ProblemError> {
        self.check_dim(point)?;
        let diff = linalg::sub(point, &self.center);
        Ok(linalg::scale(&self.curvature.matvec(&diff), 2.0))
    }

    fn check_dim(&self, point: &[f64]) -> Result<(), ProblemError> {
        if point.len() != self.center.len() {
            return Err(ProblemError::DimensionMismatch {
                expected: self.center.len(),
                got: point.len(),
            });
        }
        Ok(())
    }
}

/// Closed convex constraint set with a closed-form Euclidean projection.
#[derive(Debug, Clone)]
pub enum ConstraintSet {
    /// No constraint; projection is the identity.
    WholeSpace { dimension: usize },
    /// Closed ball around `center` with positive `radius`.
    Ball { center: Vec<f64>, radius: f64 },
    /// `{ x : <normal, x> >= offset }` with a nonzero normal.
    Halfspace { normal: Vec<f64>, offset: f64 },
    /// Axis-aligned box `lower <= x <= upper` componentwise.
    Box { lower: Vec<f64>, upper: Vec<f64> },
}

impl ConstraintSet {
    pub fn whole_space(dimension: usize) -> Self {
        ConstraintSet::WholeSpace { dimension }
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self, ProblemError> {
        if !(radius > 0.0) {
            return Err(ProblemError::InvalidConstraint(format!(
                "ball radius must be positive, got {radius}"
            )));
        }
        Ok(ConstraintSet::Ball { center, radius })
    }

    pub fn halfspace(normal: Vec<f64>, offset: f64) -> Result<Self, ProblemError> {
        if linalg::norm(&normal) == 0.0 {
            return Err(ProblemError::InvalidConstraint(
                "halfspace normal must be nonzero".into(),
            ));
        }
        Ok(ConstraintSet::Halfspace { normal, offset })
    }

    pub fn bounding_box(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, ProblemError> {
        if lower.len() != upper.len() {
            return Err(ProblemError::DimensionMismatch {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        if lower.iter().zip(&upper).any(|(l, u)| l > u) {
            return Err(ProblemError::InvalidConstraint(
                "box needs lower <= upper componentwise".into(),
            ));
        }
        Ok(ConstraintSet::Box { lower, upper })
    }

    pub fn dimension(&self) -> usize {
        match self {
            ConstraintSet::WholeSpace { dimension } => *dimension,
            ConstraintSet::Ball { center, .. } => center.len(),
            ConstraintSet::Halfspace { normal, .. } => normal.len(),
            ConstraintSet::Box { lower, .. } => lower.len(),
        }
    }

    /// Euclidean projection onto the set. Total on points of the right
    /// dimension.
    pub fn project(&self, point: &[f64]) -> Vec<f64> {
        debug_assert_eq!(point.len(), self.dimension());
        match self {
            ConstraintSet::WholeSpace { .. } => point.to_vec(),
            ConstraintSet::Ball { center, radius } => {
                let diff = linalg::sub(point, center);
                let d = linalg::norm(&diff);
                if d <= *radius {
                    point.to_vec()
                } else {
                    let s = radius / d;
                    center.iter().zip(&diff).map(|(c, v)| c + s * v).collect()
                }
            }
            ConstraintSet::Halfspace { normal, offset } => {
                let g = linalg::dot(normal, point);
                if g >= *offset {
                    point.to_vec()
                } else {
                    let shift = (offset - g) / linalg::dot(normal, normal);
                    point
                        .iter()
                        .zip(normal)
                        .map(|(p, a)| p + shift * a)
                        .collect()
                }
            }
            ConstraintSet::Box { lower, upper } => point
                .iter()
                .zip(lower)
                .zip(upper)
                .map(|((p, l), u)| p.clamp(*l, *u))
                .collect(),
        }
    }

    /// `|| x - project(x) ||`, zero exactly on members of the set.
    pub fn membership_residual(&self, point: &[f64]) -> f64 {
        linalg::dist(point, &self.project(point))
    }
}

/// Global strong-convexity and smoothness constants induced by a cost list:
/// `mu = 2 min_i lambda_min(P_i)` and `lipschitz = 2 max_i lambda_max(P_i)`.
pub fn global_constants(costs: &[QuadraticCost]) -> Result<(f64, f64), ProblemError> {
    if costs.is_empty() {
        return Err(ProblemError::NoCosts);
    }
    let mut mu = f64::INFINITY;
    let mut lipschitz = 0.0_f64;
    for c in costs {
        let (lo, hi) = c.eigen_bounds();
        mu = mu.min(2.0 * lo);
        lipschitz = lipschitz.max(2.0 * hi);
    }
    Ok((mu, lipschitz))
}

/// A full problem instance: per-agent quadratic costs, one shared constraint
/// set, and the induced global constants.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    dimension: usize,
    costs: Vec<QuadraticCost>,
    constraint: ConstraintSet,
    mu: f64,
    lipschitz: f64,
}

impl ProblemInstance {
    pub fn new(costs: Vec<QuadraticCost>, constraint: ConstraintSet) -> Result<Self, ProblemError> {
        let (mu, lipschitz) = global_constants(&costs)?;
        let dimension = costs[0].dimension();
        for c in &costs {
            if c.dimension() != dimension {
                return Err(ProblemError::DimensionMismatch {
                    expected: dimension,
                    got: c.dimension(),
                });
            }
        }
        if constraint.dimension() != dimension {
            return Err(ProblemError::DimensionMismatch {
                expected: dimension,
                got: constraint.dimension(),
            });
        }
        Ok(Self {
            dimension,
            costs,
            constraint,
            mu,
            lipschitz,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn agent_count(&self) -> usize {
        self.costs.len()
    }

    pub fn costs(&self) -> &[QuadraticCost] {
        &self.costs
    }

    pub fn constraint(&self) -> &ConstraintSet {
        &self.constraint
    }

    /// Strong-convexity modulus shared by every agent cost.
    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// Gradient Lipschitz constant shared by every agent cost.
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn cost_gradient(&self, agent: usize, point: &[f64]) -> Result<Vec<f64>, ProblemError> {
        self.costs[agent].gradient(point)
    }

    /// Gradient of the averaged objective `f = (1/n) sum_i f_i`.
    pub fn mean_gradient(&self, point: &[f64]) -> Result<Vec<f64>, ProblemError> {
        let mut g = vec![0.0; self.dimension];
        for c in &self.costs {
            for (acc, v) in g.iter_mut().zip(c.gradient(point)?) {
                *acc += v;
            }
        }
        let n = self.costs.len() as f64;
        Ok(linalg::scale(&g, 1.0 / n))
    }

    /// One centralized projected-gradient step `x <- P(x - eta grad f(x))`.
    pub fn pgd_step(&self, eta: f64, point: &[f64]) -> Result<Vec<f64>, ProblemError> {
        let g = self.mean_gradient(point)?;
        let moved: Vec<f64> = point.iter().zip(&g).map(|(x, gi)| x - eta * gi).collect();
        Ok(self.constraint.project(&moved))
    }

    /// High-precision oracle for the constrained optimum: iterates the
    /// projected-gradient map until the fixed-point residual drops below
    /// `tolerance`. Requires `eta < 2 / (mu + lipschitz)` so the map
    /// contracts.
    pub fn centralized_solve(&self, eta: f64, tolerance: f64) -> Result<Vec<f64>, ProblemError> {
        let limit = 2.0 / (self.mu + self.lipschitz);
        if !(eta > 0.0 && eta < limit) {
            return Err(ProblemError::StepOutOfRange { eta, limit });
        }
        assert!(tolerance > 0.0, "tolerance must be positive");
        // Start from the projected average of the cost centers.
        let mut start = vec![0.0; self.dimension];
        for c in &self.costs {
            for (s, v) in start.iter_mut().zip(c.center()) {
                *s += v;
            }
        }
        let n = self.costs.len() as f64;
        let mut x = self.constraint.project(&linalg::scale(&start, 1.0 / n));
        let mut residual = f64::INFINITY;
        for _ in 0..ORACLE_ITERATION_CAP {
            let next = self.pgd_step(eta, &x)?;
            residual = linalg::dist(&x, &next);
            x = next;
            if residual <= tolerance {
                // The map contracts, so the returned point satisfies the
                // same residual bound.
                return Ok(x);
            }
        }
        Err(ProblemError::OracleDidNotConverge {
            iterations: ORACLE_ITERATION_CAP,
            residual,
            last: x,
        })
    }

    /// Default-accuracy oracle (`tolerance = 1e-12`).
    pub fn solve_reference(&self) -> Result<Vec<f64>, ProblemError> {
        let eta = 0.9 * 2.0 / (self.mu + self.lipschitz);
        self.centralized_solve(eta, 1e-12)
    }
}
