//! The three subcommands as library functions so the binary stays a thin
//! shell and tests can drive everything in process.

use crate::config::Scenario;
use pushpull::analysis::{
    composite_matrix, lambda_bound, reproduce_impossibility_consensus, reproduce_impossibility_pgd,
    spectral_radius, CertificateSuprema, ConvergenceCertificate,
};
use pushpull::mixing::MixingPair;
use pushpull::protocol::{run, Execution, PhiMode, ProtocolError, Trajectory};
use std::fmt::Write as _;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CommandError {
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{0}")]
    Analysis(#[from] pushpull::analysis::AnalysisError),
    #[error("{0}")]
    Protocol(#[from] ProtocolError),
}

/// Result of `run`: either a completed trajectory or the round at which the
/// state blew up.
pub enum RunOutcome {
    Completed(Box<Trajectory>),
    Diverged { round: usize },
}

pub fn run_scenario(
    scenario: &Scenario,
    execution: Execution,
    out_dir: &Path,
    dump_mixing: bool,
) -> Result<RunOutcome, CommandError> {
    let trajectory = match run(
        &scenario.problem,
        &scenario.graphs,
        scenario.sizes,
        &scenario.x0,
        scenario.rounds,
        scenario.phi_mode,
        execution,
    ) {
        Ok(t) => t,
        Err(ProtocolError::Diverged { round }) => return Ok(RunOutcome::Diverged { round }),
        Err(other) => return Err(other.into()),
    };

    write_file(
        &out_dir.join("trajectory.csv"),
        &trajectory_csv(&trajectory),
    )?;
    write_file(
        &out_dir.join("certificate.csv"),
        &certificate_csv(scenario)?,
    )?;
    if dump_mixing {
        dump_mixing_matrices(scenario, out_dir)?;
    }
    Ok(RunOutcome::Completed(Box::new(trajectory)))
}

pub fn trajectory_csv(trajectory: &Trajectory) -> String {
    let mode = match trajectory.phi_mode {
        PhiMode::Periodic => "true",
        PhiMode::Uniform => "uniform",
    };
    let mut out = String::from("round,optimality,consensus,tracking,phi_mode\n");
    for rec in &trajectory.records {
        writeln!(
            out,
            "{},{},{},{},{}",
            rec.round, rec.errors.optimality, rec.errors.consensus, rec.errors.tracking, mode
        )
        .expect("string writes cannot fail");
    }
    out
}

/// Certificate row for a scenario. The suprema are always computable; the
/// spectral radius needs `eta < 1/L` and the lambda bound needs
/// `eta < 1/(nL)`, so out-of-range step sizes leave `nan` in those fields.
pub fn certificate_csv(scenario: &Scenario) -> Result<String, CommandError> {
    let sup = CertificateSuprema::compute(&scenario.graphs)?;
    let mu = scenario.problem.mu();
    let lipschitz = scenario.problem.lipschitz();
    let agents = scenario.problem.agent_count();
    let eta = scenario.sizes.eta;
    let rho = composite_matrix(&sup, mu, lipschitz, agents, eta, scenario.sizes.lambda)
        .map(|m| spectral_radius(&m))
        .unwrap_or(f64::NAN);
    let lambda_max = lambda_bound(&sup, mu, lipschitz, agents, eta).unwrap_or(f64::NAN);
    let mut out = String::from("sigma,tau,r,varphi,psi,rho,lambda_max,lambda_used\n");
    writeln!(
        out,
        "{},{},{},{},{},{},{},{}",
        sup.sigma, sup.tau, sup.r, sup.varphi, sup.psi, rho, lambda_max, scenario.sizes.lambda
    )
    .expect("string writes cannot fail");
    Ok(out)
}

fn dump_mixing_matrices(scenario: &Scenario, out_dir: &Path) -> Result<(), CommandError> {
    for (k, graph) in scenario.graphs.graphs().iter().enumerate() {
        let pair = MixingPair::build(graph).map_err(pushpull::analysis::AnalysisError::from)?;
        for (name, m) in [("r", pair.r()), ("c", pair.c())] {
            let mut text = String::new();
            for i in 0..m.rows() {
                let row: Vec<String> = m.row(i).iter().map(f64::to_string).collect();
                writeln!(text, "{}", row.join(",")).expect("string writes cannot fail");
            }
            write_file(&out_dir.join(format!("mixing-{name}-{k}.csv")), &text)?;
        }
    }
    Ok(())
}

/// Result of `certify`: the certificate plus whether the configured lambda
/// sits inside the guaranteed range.
pub struct CertifyOutcome {
    pub certificate: ConvergenceCertificate,
    pub guaranteed: bool,
}

pub fn certify(scenario: &Scenario, out_dir: &Path) -> Result<CertifyOutcome, CommandError> {
    let certificate = ConvergenceCertificate::compute(
        &scenario.problem,
        &scenario.graphs,
        scenario.sizes.eta,
        scenario.sizes.lambda,
    )?;
    write_file(
        &out_dir.join("certificate.csv"),
        &certificate_csv(scenario)?,
    )?;
    let guaranteed = certificate.lambda < certificate.lambda_max && certificate.contractive;
    Ok(CertifyOutcome {
        certificate,
        guaranteed,
    })
}

/// One line of the counterexample verification table.
pub struct CounterexampleCheck {
    pub label: String,
    pub eta: f64,
    pub value: f64,
    pub bound: f64,
    pub pass: bool,
}

pub const COUNTEREXAMPLE_ETA_GRID: [f64; 4] = [1.0, 0.1, 0.01, 0.001];

/// Runs both counterexample constructions over the step-size grid, checking
/// the step-free lower bounds and the closed forms.
pub fn counterexample_checks() -> Result<Vec<CounterexampleCheck>, CommandError> {
    let mut checks = Vec::new();
    let lipschitz = 1.0;
    for &eta in &COUNTEREXAMPLE_ETA_GRID {
        let ratio = reproduce_impossibility_pgd(lipschitz, eta, 3.0)?;
        checks.push(CounterexampleCheck {
            label: "pgd step ratio".into(),
            eta,
            value: ratio,
            bound: 1.0,
            pass: ratio >= 1.0 - 1e-12,
        });
    }
    for (pi1, pi2) in [(0.75, 0.25), (0.6, 0.4)] {
        for &eta in &COUNTEREXAMPLE_ETA_GRID {
            let out = reproduce_impossibility_consensus(lipschitz, eta, pi1, pi2)?;
            let consensus_gap = (out.measured_consensus - out.consensus_closed_form).abs();
            checks.push(CounterexampleCheck {
                label: format!("consensus closed form pi=({pi1},{pi2})"),
                eta,
                value: consensus_gap,
                bound: 1e-12,
                pass: consensus_gap <= 1e-12,
            });
            let optimality_gap = (out.measured_optimality - out.optimality_closed_form).abs();
            checks.push(CounterexampleCheck {
                label: format!("optimality closed form pi=({pi1},{pi2})"),
                eta,
                value: optimality_gap,
                bound: 1e-12,
                pass: optimality_gap <= 1e-12,
            });
            checks.push(CounterexampleCheck {
                label: format!("consensus/optimality ratio pi=({pi1},{pi2})"),
                eta,
                value: out.measured_ratio(),
                bound: out.ratio_lower_bound,
                pass: out.measured_ratio() >= out.ratio_lower_bound - 1e-12,
            });
        }
    }
    Ok(checks)
}

fn write_file(path: &Path, content: &str) -> Result<(), CommandError> {
    std::fs::write(path, content).map_err(|source| CommandError::Io {
        path: path.display().to_string(),
        source,
    })
}
