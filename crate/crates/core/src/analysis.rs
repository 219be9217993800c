//! Error metrics, per-round contraction coefficients, the composite error
//! matrix with its spectral-radius certificate, and executable reproductions
//! of the two counterexample constructions that motivate the lazy update.

use crate::graph::{Digraph, DigraphSequence, GraphError};
use crate::linalg::{self, Matrix};
use crate::mixing::{
    phi_sequence_periodic, right_perron, MixingError, MixingPair, StochasticVector,
};
use crate::problem::{ConstraintSet, ProblemError, ProblemInstance, QuadraticCost};
use crate::protocol::{self, PhiMode, Trajectory};
use num_complex::Complex64;
use thiserror::Error;

/// Absolute slack applied to the per-round composite inequality check.
pub const COMPOSITE_SLACK: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("weight vectors are not consistent with the mixing matrix: residual {residual:e}")]
    InconsistentWeights { residual: f64 },
    #[error("step size {eta} out of range, must lie in (0, {limit})")]
    StepOutOfRange { eta: f64, limit: f64 },
    #[error("composite check needs the exact weight sequence unless every R is doubly stochastic")]
    UniformWeightsNotDoublyStochastic,
    #[error("counterexample construction invalid: {0}")]
    InvalidConstruction(String),
    #[error("iteration cap {0} reached before the contraction window was entered")]
    WindowNotReached(usize),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Mixing(#[from] MixingError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Protocol(#[from] Box<protocol::ProtocolError>),
}

/// The three per-round error metrics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorTriple {
    pub optimality: f64,
    pub consensus: f64,
    pub tracking: f64,
}

impl ErrorTriple {
    pub fn as_array(&self) -> [f64; 3] {
        [self.optimality, self.consensus, self.tracking]
    }
}

/// Weighted root-sum-square distance of the stacked decision variables to
/// the optimum: `sqrt(sum_i phi_i ||x_i - xstar||^2)`.
pub fn optimality_gap(xs: &[Vec<f64>], phi: &StochasticVector, xstar: &[f64]) -> f64 {
    debug_assert_eq!(xs.len(), phi.len());
    xs.iter()
        .zip(phi.entries())
        .map(|(x, w)| {
            let d = linalg::dist(x, xstar);
            w * d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// Pairwise weighted disagreement:
/// `sqrt(sum_i sum_j phi_i phi_j ||x_i - x_j||^2)`.
pub fn consensus_error(xs: &[Vec<f64>], phi: &StochasticVector) -> f64 {
    debug_assert_eq!(xs.len(), phi.len());
    let w = phi.entries();
    let mut total = 0.0;
    for i in 0..xs.len() {
        for j in 0..xs.len() {
            if i == j {
                continue;
            }
            let d = linalg::dist(&xs[i], &xs[j]);
            total += w[i] * w[j] * d * d;
        }
    }
    total.sqrt()
}

/// Algebraically equal route for the consensus error:
/// `sqrt(2) * sqrt(sum_i phi_i ||x_i - xbar||^2)` with the weighted mean
/// `xbar = sum_i phi_i x_i`. Kept as an independent cross-check of the
/// pairwise form.
pub fn consensus_error_deviation_form(xs: &[Vec<f64>], phi: &StochasticVector) -> f64 {
    debug_assert_eq!(xs.len(), phi.len());
    let d = xs[0].len();
    let w = phi.entries();
    let mut mean = vec![0.0; d];
    for (x, &wi) in xs.iter().zip(w) {
        for k in 0..d {
            mean[k] += wi * x[k];
        }
    }
    let dev: f64 = xs
        .iter()
        .zip(w)
        .map(|(x, &wi)| {
            let dist = linalg::dist(x, &mean);
            wi * dist * dist
        })
        .sum();
    (2.0 * dev).sqrt()
}

/// Tracker disagreement:
/// `sqrt(sum_i pi_i ||y_i / pi_i - sum_l y_l||^2)`; zero exactly when every
/// tracker holds its weight's share of the total mass.
pub fn tracking_error(ys: &[Vec<f64>], pi: &StochasticVector) -> f64 {
    debug_assert_eq!(ys.len(), pi.len());
    let d = ys[0].len();
    let mut total_mass = vec![0.0; d];
    for y in ys {
        for k in 0..d {
            total_mass[k] += y[k];
        }
    }
    ys.iter()
        .zip(pi.entries())
        .map(|(y, &wi)| {
            let dev: f64 = y
                .iter()
                .zip(&total_mass)
                .map(|(yi, t)| {
                    let e = yi / wi - t;
                    e * e
                })
                .sum();
            wi * dev
        })
        .sum::<f64>()
        .sqrt()
}

const WEIGHT_CONSISTENCY_TOL: f64 = 1e-10;

/// Contraction coefficient of the row-stochastic pull for one round:
/// `sqrt(1 - min(phi') (min R+)^2 / (max(phi)^2 D K))` where `phi'` is the
/// next round's weight vector, `D` the diameter and `K` the maximum edge
/// utility of the round's graph.
pub fn contraction_sigma(
    g: &Digraph,
    pair: &MixingPair,
    phi_now: &StochasticVector,
    phi_next: &StochasticVector,
) -> Result<f64, AnalysisError> {
    let image = pair.r().vecmat(phi_next.entries());
    let residual = image
        .iter()
        .zip(phi_now.entries())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0_f64, f64::max);
    if residual > WEIGHT_CONSISTENCY_TOL {
        return Err(AnalysisError::InconsistentWeights { residual });
    }
    let d = g.diameter()? as f64;
    let k = g.max_edge_utility()? as f64;
    let r_min = pair.r_min();
    let frac = phi_next.min() * r_min * r_min / (phi_now.max() * phi_now.max() * d * k);
    Ok((1.0 - frac).sqrt())
}

/// Contraction coefficient of the column-stochastic push for one round:
/// `sqrt(1 - min(pi)^2 (min C+)^2 / (max(pi)^2 max(pi') D K))` with
/// `pi' = C pi`.
pub fn contraction_tau(
    g: &Digraph,
    pair: &MixingPair,
    pi_now: &StochasticVector,
    pi_next: &StochasticVector,
) -> Result<f64, AnalysisError> {
    let image = pair.c().matvec(pi_now.entries());
    let residual = image
        .iter()
        .zip(pi_next.entries())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0_f64, f64::max);
    if residual > WEIGHT_CONSISTENCY_TOL {
        return Err(AnalysisError::InconsistentWeights { residual });
    }
    let d = g.diameter()? as f64;
    let k = g.max_edge_utility()? as f64;
    let c_min = pair.c_min();
    let frac = pi_now.min() * pi_now.min() * c_min * c_min
        / (pi_now.max() * pi_now.max() * pi_next.max() * d * k);
    Ok((1.0 - frac).sqrt())
}

/// 3x3 composite matrix, row major.
pub type Mat3 = [[f64; 3]; 3];

/// Uniform-over-time bounds entering the composite matrix: the worst-case
/// contraction coefficients and weight extremes over one period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertificateSuprema {
    /// Supremum of the per-round row-mixing contraction coefficients.
    pub sigma: f64,
    /// Supremum of the per-round column-mixing contraction coefficients.
    pub tau: f64,
    /// Supremum of `sqrt(1 / min pi_k) + sqrt(n)`.
    pub r: f64,
    /// Supremum of `sqrt(1 / min phi_k)`.
    pub varphi: f64,
    /// Infimum of `min pi_k`.
    pub psi: f64,
}

impl CertificateSuprema {
    /// Evaluates the per-round quantities over one period of the graph
    /// sequence, using the periodic weight families.
    pub fn compute(graphs: &DigraphSequence) -> Result<Self, AnalysisError> {
        let pairs: Vec<MixingPair> = graphs
            .graphs()
            .iter()
            .map(MixingPair::build)
            .collect::<Result<_, _>>()?;
        let n = graphs.node_count();
        let t = pairs.len();
        let phi = phi_sequence_periodic(&pairs)?;
        // periodic tracker weights: fixed point of the period product of C,
        // then forward through the period
        let mut product = pairs[0].c().clone();
        for pair in &pairs[1..] {
            product = pair.c().matmul(&product);
        }
        let mut pi = vec![StochasticVector::normalized(right_perron(&product)?)?];
        for pair in pairs.iter().take(t - 1) {
            let next = pair.c().matvec(pi.last().unwrap().entries());
            pi.push(StochasticVector::normalized(next)?);
        }

        let mut sigma = 0.0_f64;
        let mut tau = 0.0_f64;
        let mut r = 0.0_f64;
        let mut varphi = 0.0_f64;
        let mut psi = f64::INFINITY;
        let sqrt_n = (n as f64).sqrt();
        for k in 0..t {
            let g = &graphs.graphs()[k];
            let phi_next = &phi[(k + 1) % t];
            let pi_next = &pi[(k + 1) % t];
            sigma = sigma.max(contraction_sigma(g, &pairs[k], &phi[k], phi_next)?);
            tau = tau.max(contraction_tau(g, &pairs[k], &pi[k], pi_next)?);
            r = r.max((1.0 / pi[k].min()).sqrt() + sqrt_n);
            varphi = varphi.max((1.0 / phi[k].min()).sqrt());
            psi = psi.min(pi[k].min());
        }
        Ok(Self {
            sigma,
            tau,
            r,
            varphi,
            psi,
        })
    }
}

/// The composite error matrix `M(eta, lambda)`. Requires
/// `eta < 1 / lipschitz`.
pub fn composite_matrix(
    sup: &CertificateSuprema,
    mu: f64,
    lipschitz: f64,
    agents: usize,
    eta: f64,
    lambda: f64,
) -> Result<Mat3, AnalysisError> {
    let limit = 1.0 / lipschitz;
    if !(eta > 0.0 && eta < limit) {
        return Err(AnalysisError::StepOutOfRange { eta, limit });
    }
    let CertificateSuprema {
        sigma,
        tau,
        r,
        varphi,
        psi,
    } = *sup;
    let n = agents as f64;
    let sqrt_n = n.sqrt();
    Ok([
        [
            1.0 - eta * lambda * n * psi * mu,
            lambda * varphi * sqrt_n,
            lambda / lipschitz,
        ],
        [
            2.0 * lambda,
            sigma + 2.0 * lambda * sqrt_n * varphi,
            2.0 * lambda / lipschitz,
        ],
        [
            2.0 * lambda * lipschitz * r * varphi,
            lipschitz * r * varphi * (1.0 + sigma)
                + lambda * lipschitz * r * varphi * varphi * sqrt_n,
            tau + lambda * r * varphi,
        ],
    ])
}

/// Largest step `lambda` for which the composite matrix is guaranteed
/// contractive: the minimum of the two diagonal bounds and the determinant
/// bound. Requires `eta < 1 / (n lipschitz)`.
///
/// Expanding `det(M - I)` by cofactors gives exactly
/// `-lambda (A - lambda D)` with `A = c (1-sigma)(1-tau)`,
/// `D = (1+c) B + r varphi (1-sigma)`,
/// `B = varphi (2 sqrt(n)(1-tau) + r(1-sigma) + 2r(1+sigma))` and the
/// coupling `c = eta n psi mu`; the cubic terms cancel. The determinant
/// bound is therefore `A / D`, and any lambda below it keeps the
/// determinant strictly negative and the matrix contractive.
pub fn lambda_bound(
    sup: &CertificateSuprema,
    mu: f64,
    lipschitz: f64,
    agents: usize,
    eta: f64,
) -> Result<f64, AnalysisError> {
    let n = agents as f64;
    let limit = 1.0 / (n * lipschitz);
    if !(eta > 0.0 && eta < limit) {
        return Err(AnalysisError::StepOutOfRange { eta, limit });
    }
    let CertificateSuprema {
        sigma,
        tau,
        r,
        varphi,
        psi,
    } = *sup;
    let sqrt_n = n.sqrt();
    let coupling = eta * n * psi * mu;
    let b1 = (1.0 - sigma) / (2.0 * varphi * sqrt_n);
    let b2 = (1.0 - tau) / (r * varphi);
    let bracket =
        varphi * (2.0 * sqrt_n * (1.0 - tau) + r * (1.0 - sigma) + 2.0 * r * (1.0 + sigma));
    let denominator = (1.0 + coupling) * bracket + r * varphi * (1.0 - sigma);
    let b3 = coupling * (1.0 - sigma) * (1.0 - tau) / denominator;
    Ok(b1.min(b2).min(b3))
}

// ---------------------------------------------------------------------------
// spectral radius: closed-form cubic roots plus a power-iteration oracle
// ---------------------------------------------------------------------------

/// Spectral radius of a nonnegative 3x3 matrix via the characteristic
/// cubic's roots, polished by a couple of Newton steps.
pub fn spectral_radius(m: &Mat3) -> f64 {
    let trace = m[0][0] + m[1][1] + m[2][2];
    let minors = m[0][0] * m[1][1] - m[0][1] * m[1][0] + m[0][0] * m[2][2] - m[0][2] * m[2][0]
        + m[1][1] * m[2][2]
        - m[1][2] * m[2][1];
    let det = det3(m);
    // characteristic polynomial x^3 + a x^2 + b x + c
    let a = -trace;
    let b = minors;
    let c = -det;
    let roots = cubic_roots(a, b, c);
    roots
        .iter()
        .map(|r| polish_root(*r, a, b, c).norm())
        .fold(0.0, f64::max)
}

fn det3(m: &Mat3) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

fn cubic_roots(a: f64, b: f64, c: f64) -> [Complex64; 3] {
    // depressed form t^3 + p t + q with x = t - a/3
    let shift = a / 3.0;
    let p = b - a * a / 3.0;
    let q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
    let disc = (q / 2.0) * (q / 2.0) + (p / 3.0) * (p / 3.0) * (p / 3.0);
    let ts: [Complex64; 3] = if p == 0.0 && q == 0.0 {
        [Complex64::new(0.0, 0.0); 3]
    } else if disc > 0.0 {
        // one real root and a conjugate pair
        let sd = disc.sqrt();
        let u = (-q / 2.0 + sd).cbrt();
        let v = (-q / 2.0 - sd).cbrt();
        let real = u + v;
        let re = -real / 2.0;
        let im = (u - v) * 3.0_f64.sqrt() / 2.0;
        [
            Complex64::new(real, 0.0),
            Complex64::new(re, im),
            Complex64::new(re, -im),
        ]
    } else {
        // three real roots, trigonometric form
        let m = 2.0 * (-p / 3.0).sqrt();
        let arg = (3.0 * q / (p * m)).clamp(-1.0, 1.0);
        let theta = arg.acos() / 3.0;
        let tau = 2.0 * std::f64::consts::PI / 3.0;
        [
            Complex64::new(m * theta.cos(), 0.0),
            Complex64::new(m * (theta - tau).cos(), 0.0),
            Complex64::new(m * (theta + tau).cos(), 0.0),
        ]
    };
    ts.map(|t| t - Complex64::new(shift, 0.0))
}

fn polish_root(mut x: Complex64, a: f64, b: f64, c: f64) -> Complex64 {
    for _ in 0..3 {
        let f = ((x + a) * x + b) * x + c;
        let df = (x * 3.0 + 2.0 * a) * x + b;
        if df.norm() < 1e-300 {
            break;
        }
        x -= f / df;
    }
    x
}

/// Power-iteration estimate of the dominant eigenvalue modulus of a
/// nonnegative 3x3 matrix. Independent route used to cross-check the
/// closed-form cubic.
pub fn spectral_radius_power_iteration(m: &Mat3) -> f64 {
    let mv = |v: &[f64; 3]| -> [f64; 3] {
        [
            m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
            m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
            m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
        ]
    };
    let mut v = [1.0 / 3.0_f64.sqrt(); 3];
    let mut lambda = 0.0_f64;
    for _ in 0..200_000 {
        let w = mv(&v);
        let norm = (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]).sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        let next = [w[0] / norm, w[1] / norm, w[2] / norm];
        let rayleigh = w[0] * v[0] + w[1] * v[1] + w[2] * v[2];
        let done = (rayleigh - lambda).abs() <= 1e-14 * rayleigh.abs().max(1.0)
            && next.iter().zip(&v).all(|(a, b)| (a - b).abs() <= 1e-14);
        lambda = rayleigh;
        v = next;
        if done {
            break;
        }
    }
    lambda.abs()
}

// ---------------------------------------------------------------------------
// exact sign tests in double-double arithmetic
//
// At step sizes just below the guaranteed bound the margin of
// det(M - I) < 0 shrinks quadratically and falls under plain f64 noise, so
// the determinant and the leading principal minors are evaluated in
// double-double precision.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
struct Dd {
    hi: f64,
    lo: f64,
}

impl Dd {
    fn from(a: f64) -> Self {
        Dd { hi: a, lo: 0.0 }
    }

    fn two_sum(a: f64, b: f64) -> Self {
        let s = a + b;
        let bb = s - a;
        Dd {
            hi: s,
            lo: (a - (s - bb)) + (b - bb),
        }
    }

    fn quick_renorm(hi: f64, lo: f64) -> Self {
        let s = hi + lo;
        Dd {
            hi: s,
            lo: lo - (s - hi),
        }
    }

    fn two_prod(a: f64, b: f64) -> Self {
        let p = a * b;
        Dd {
            hi: p,
            lo: a.mul_add(b, -p),
        }
    }

    fn add(self, o: Dd) -> Self {
        let s = Self::two_sum(self.hi, o.hi);
        Self::quick_renorm(s.hi, s.lo + self.lo + o.lo)
    }

    fn sub(self, o: Dd) -> Self {
        self.add(Dd {
            hi: -o.hi,
            lo: -o.lo,
        })
    }

    fn mul(self, o: Dd) -> Self {
        let p = Self::two_prod(self.hi, o.hi);
        Self::quick_renorm(p.hi, p.lo + self.hi * o.lo + self.lo * o.hi)
    }

    fn value(self) -> f64 {
        self.hi + self.lo
    }

    fn is_positive(self) -> bool {
        self.hi > 0.0 || (self.hi == 0.0 && self.lo > 0.0)
    }
}

fn det3_dd(m: &[[Dd; 3]; 3]) -> Dd {
    let minor = |a: Dd, b: Dd, c: Dd, d: Dd| a.mul(d).sub(b.mul(c));
    let m0 = minor(m[1][1], m[1][2], m[2][1], m[2][2]);
    let m1 = minor(m[1][0], m[1][2], m[2][0], m[2][2]);
    let m2 = minor(m[1][0], m[1][1], m[2][0], m[2][1]);
    m[0][0].mul(m0).sub(m[0][1].mul(m1)).add(m[0][2].mul(m2))
}

fn identity_minus(m: &Mat3) -> [[Dd; 3]; 3] {
    let mut out = [[Dd::from(0.0); 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = if i == j {
                Dd::two_sum(1.0, -m[i][j])
            } else {
                Dd::from(-m[i][j])
            };
        }
    }
    out
}

/// `det(M - I)`, evaluated in double-double precision so the sign survives
/// the near-singular regime at step sizes close to the bound.
pub fn det_minus_identity(m: &Mat3) -> f64 {
    let a = identity_minus(m);
    // det(M - I) = -det(I - M) for odd dimension
    let d = det3_dd(&a);
    -d.value()
}

/// Exact contractivity test for a nonnegative matrix: `rho(M) < 1` holds if
/// and only if every leading principal minor of `I - M` is positive. The
/// minors are evaluated in double-double precision.
pub fn is_contractive(m: &Mat3) -> bool {
    let a = identity_minus(m);
    let d1 = a[0][0];
    let d2 = a[0][0].mul(a[1][1]).sub(a[0][1].mul(a[1][0]));
    let d3 = det3_dd(&a);
    d1.is_positive() && d2.is_positive() && d3.is_positive()
}

// ---------------------------------------------------------------------------
// convergence certificate and the per-round composite check
// ---------------------------------------------------------------------------

/// Everything needed to certify geometric convergence for a configured run:
/// the period suprema, the composite matrix at the configured step sizes,
/// its spectral radius, and the guaranteed-safe lambda bound.
#[derive(Debug, Clone)]
pub struct ConvergenceCertificate {
    pub suprema: CertificateSuprema,
    pub mu: f64,
    pub lipschitz: f64,
    pub agents: usize,
    pub eta: f64,
    pub lambda: f64,
    pub m_matrix: Mat3,
    pub rho: f64,
    pub lambda_max: f64,
    /// Exact sign test `rho(M) < 1` in double-double arithmetic.
    pub contractive: bool,
}

impl ConvergenceCertificate {
    pub fn compute(
        problem: &ProblemInstance,
        graphs: &DigraphSequence,
        eta: f64,
        lambda: f64,
    ) -> Result<Self, AnalysisError> {
        let suprema = CertificateSuprema::compute(graphs)?;
        let mu = problem.mu();
        let lipschitz = problem.lipschitz();
        let agents = problem.agent_count();
        let lambda_max = lambda_bound(&suprema, mu, lipschitz, agents, eta)?;
        let m_matrix = composite_matrix(&suprema, mu, lipschitz, agents, eta, lambda)?;
        let rho = spectral_radius(&m_matrix);
        let contractive = is_contractive(&m_matrix);
        Ok(Self {
            suprema,
            mu,
            lipschitz,
            agents,
            eta,
            lambda,
            m_matrix,
            rho,
            lambda_max,
            contractive,
        })
    }
}

/// Checks `e[k+1] <= M e[k]` elementwise with absolute slack for every
/// consecutive pair of recorded rounds. Rejects trajectories recorded with
/// the uniform weight substitute unless every round's R was doubly
/// stochastic, since the inequality is only meaningful for the exact weight
/// family.
pub fn check_composite(
    trajectory: &Trajectory,
    certificate: &ConvergenceCertificate,
) -> Result<Vec<bool>, AnalysisError> {
    if trajectory.phi_mode == PhiMode::Uniform && !trajectory.r_doubly_stochastic {
        return Err(AnalysisError::UniformWeightsNotDoublyStochastic);
    }
    let m = &certificate.m_matrix;
    let mut out = Vec::with_capacity(trajectory.records.len().saturating_sub(1));
    for pair in trajectory.records.windows(2) {
        let e = pair[0].errors.as_array();
        let e_next = pair[1].errors.as_array();
        let ok = (0..3).all(|i| {
            let bound: f64 = (0..3).map(|j| m[i][j] * e[j]).sum();
            e_next[i] <= bound + COMPOSITE_SLACK
        });
        out.push(ok);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// counterexample reproductions
// ---------------------------------------------------------------------------

const PGD_WINDOW_CAP: usize = 10_000_000;

/// Centralized projected-gradient counterexample on `(L/2) x^2` over
/// `x >= 1`: runs until an iterate enters the window `(1, 1/(1 - eta L)]`
/// (immediately when `eta >= 1/L`) and returns the realized single-step
/// ratio `|x[k+1] - x[k]| / |x[k] - xstar|` there. The construction forces
/// the ratio to be at least one no matter how small `eta` is.
pub fn reproduce_impossibility_pgd(
    lipschitz: f64,
    eta: f64,
    x0: f64,
) -> Result<f64, AnalysisError> {
    if !(x0 > 1.0) {
        return Err(AnalysisError::InvalidConstruction(format!(
            "start {x0} must lie strictly above the boundary 1"
        )));
    }
    if !(eta > 0.0 && lipschitz > 0.0) {
        return Err(AnalysisError::InvalidConstruction(
            "eta and lipschitz must be positive".into(),
        ));
    }
    let cost = QuadraticCost::diagonal(vec![0.0], &[lipschitz / 2.0])?;
    let set = ConstraintSet::halfspace(vec![1.0], 1.0)?;
    let problem = ProblemInstance::new(vec![cost], set)?;
    let step = |x: f64| -> f64 { problem.pgd_step(eta, &[x]).expect("1-d step is total")[0] };

    let mut x = x0;
    if eta * lipschitz < 1.0 {
        let window_top = 1.0 / (1.0 - eta * lipschitz);
        let mut fuel = PGD_WINDOW_CAP;
        while !(x > 1.0 && x <= window_top) {
            x = step(x);
            fuel -= 1;
            if fuel == 0 {
                return Err(AnalysisError::WindowNotReached(PGD_WINDOW_CAP));
            }
        }
    }
    let next = step(x);
    Ok((next - x).abs() / (x - 1.0).abs())
}

/// Measured and closed-form quantities of the two-agent consensus
/// counterexample.
#[derive(Debug, Clone, Copy)]
pub struct ConsensusCounterexample {
    /// Weighted consensus error of the decision values after one round.
    pub measured_consensus: f64,
    /// Weighted optimality gap of the shared initial point.
    pub measured_optimality: f64,
    /// Closed form of the consensus error produced by the construction:
    /// `(1/sqrt(2)) eta L (pi1 - pi2) / (1 - eta L pi1)`.
    pub consensus_closed_form: f64,
    /// Closed form of the initial optimality gap:
    /// `eta L pi1 / (1 - eta L pi1)`.
    pub optimality_closed_form: f64,
    /// The step-size-free lower bound on the ratio of the two:
    /// `(1/sqrt(2)) (1 - pi2/pi1)`.
    pub ratio_lower_bound: f64,
}

impl ConsensusCounterexample {
    pub fn measured_ratio(&self) -> f64 {
        self.measured_consensus / self.measured_optimality
    }
}

/// Two-agent construction showing that with the lazy update disabled the
/// consensus error after one round cannot be bounded by a multiple of the
/// optimality gap that vanishes with the step size. Splits `(L/2) x^2` as
/// `pi_i (L/2) x^2` over `x >= 1`, uses a doubly stochastic R and a column
/// stochastic C with fixed-point vector `(pi1, pi2)`, and starts both agents
/// at `1 / (1 - eta L pi1)`.
pub fn reproduce_impossibility_consensus(
    lipschitz: f64,
    eta: f64,
    pi1: f64,
    pi2: f64,
) -> Result<ConsensusCounterexample, AnalysisError> {
    if !(pi1 > pi2 && pi2 > 0.0) || (pi1 + pi2 - 1.0).abs() > 1e-12 {
        return Err(AnalysisError::InvalidConstruction(format!(
            "weights ({pi1}, {pi2}) must be positive, ordered, and sum to one"
        )));
    }
    if !(eta > 0.0 && eta < 1.0 / (lipschitz * pi2)) {
        return Err(AnalysisError::InvalidConstruction(format!(
            "eta {eta} must lie in (0, {})",
            1.0 / (lipschitz * pi2)
        )));
    }
    if eta * lipschitz * pi1 >= 1.0 {
        return Err(AnalysisError::InvalidConstruction(format!(
            "eta {eta} too large for a feasible start: need eta L pi1 < 1"
        )));
    }
    let costs = vec![
        QuadraticCost::diagonal(vec![0.0], &[pi1 * lipschitz / 2.0])?,
        QuadraticCost::diagonal(vec![0.0], &[pi2 * lipschitz / 2.0])?,
    ];
    let set = ConstraintSet::halfspace(vec![1.0], 1.0)?;
    let problem = ProblemInstance::new(costs, set)?;
    let graph = Digraph::complete(2);
    let r = Matrix::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]]);
    // column stochastic with fixed point (pi1, pi2)
    let c = Matrix::from_rows(&[vec![1.0 - pi2, pi1], vec![pi2, 1.0 - pi1]]);
    let pair = MixingPair::from_matrices(&graph, r, c)?;

    let x0 = 1.0 / (1.0 - eta * lipschitz * pi1);
    let sizes = protocol::StepSizes::new(eta, 1.0).map_err(Box::new)?;
    let state = protocol::init(&problem, &[vec![x0], vec![x0]]).map_err(Box::new)?;
    let phi = StochasticVector::uniform(2);
    let measured_optimality = optimality_gap(state.x(), &phi, &[1.0]);
    let next = protocol::step(
        &state,
        &pair,
        sizes,
        &problem,
        protocol::Execution::Sequential,
    );
    let measured_consensus = consensus_error(next.z(), &phi);

    let scale = eta * lipschitz / (1.0 - eta * lipschitz * pi1);
    Ok(ConsensusCounterexample {
        measured_consensus,
        measured_optimality,
        consensus_closed_form: (pi1 - pi2) * scale / 2.0_f64.sqrt(),
        optimality_closed_form: pi1 * scale,
        ratio_lower_bound: (1.0 - pi2 / pi1) / 2.0_f64.sqrt(),
    })
}
