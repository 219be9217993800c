use clap::{Args, Parser, Subcommand};
use pushpull::protocol::{Execution, PhiMode};
use pushpull_cli::{
    certify, counterexample_checks, exit_code, load_scenario, run_scenario, Overrides, RunOutcome,
};
use std::path::PathBuf;
use std::process::ExitCode;

/// Round-based simulator and convergence certifier for projected push-pull
/// distributed constrained optimization over time-varying digraphs.
#[derive(Parser)]
#[command(name = "pushpull", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write trajectory.csv and certificate.csv.
    Run {
        /// Scenario file (TOML).
        config: String,
        #[command(flatten)]
        common: CommonArgs,
        /// Override the configured round count.
        #[arg(long)]
        rounds: Option<usize>,
        /// Replace every seed in the scenario (costs: S, graphs: S+1,
        /// starting points: S+2).
        #[arg(long)]
        seed: Option<u64>,
        /// Weight sequence for the recorded metrics: `true` (exact periodic
        /// family) or `uniform`.
        #[arg(long, value_parser = parse_phi_mode)]
        phi_mode: Option<PhiMode>,
        /// Force strictly sequential per-agent updates (bitwise
        /// reproducible; parallel evaluation is observationally identical).
        #[arg(long)]
        sequential: bool,
        /// Also write the per-round mixing matrices.
        #[arg(long)]
        dump_mixing: bool,
    },
    /// Compute the convergence certificate without running the protocol.
    Certify {
        /// Scenario file (TOML).
        config: String,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Verify the counterexample constructions over a step-size grid.
    Counterexamples,
}

#[derive(Args)]
struct CommonArgs {
    /// Output directory for CSV files.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

fn parse_phi_mode(s: &str) -> Result<PhiMode, String> {
    match s {
        "true" => Ok(PhiMode::Periodic),
        "uniform" => Ok(PhiMode::Uniform),
        other => Err(format!("expected `true` or `uniform`, got `{other}`")),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run {
            config,
            common,
            rounds,
            seed,
            phi_mode,
            sequential,
            dump_mixing,
        } => cmd_run(
            &config,
            Overrides {
                rounds,
                seed,
                phi_mode,
            },
            if sequential {
                Execution::Sequential
            } else {
                Execution::Parallel
            },
            &common.out,
            dump_mixing,
        ),
        Command::Certify { config, common } => cmd_certify(&config, &common.out),
        Command::Counterexamples => cmd_counterexamples(),
    };
    ExitCode::from(code)
}

fn cmd_run(
    config: &str,
    overrides: Overrides,
    execution: Execution,
    out: &std::path::Path,
    dump_mixing: bool,
) -> u8 {
    let scenario = match load_scenario(config, overrides) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("config error: {e}");
            return exit_code::CONFIG;
        }
    };
    match run_scenario(&scenario, execution, out, dump_mixing) {
        Ok(RunOutcome::Completed(trajectory)) => {
            let last = trajectory.final_errors();
            println!(
                "completed {} rounds: optimality {:e}, consensus {:e}, tracking {:e}",
                trajectory.rounds(),
                last.optimality,
                last.consensus,
                last.tracking
            );
            match trajectory.first_round_below(1e-6) {
                Some(round) => println!("optimality gap fell below 1e-6 at round {round}"),
                None => println!("optimality gap stayed above 1e-6"),
            }
            println!(
                "wrote {} and {}",
                out.join("trajectory.csv").display(),
                out.join("certificate.csv").display()
            );
            exit_code::OK
        }
        Ok(RunOutcome::Diverged { round }) => {
            eprintln!("state diverged at round {round}; consider smaller step sizes");
            exit_code::DIVERGED
        }
        Err(e) => {
            eprintln!("run failed: {e}");
            exit_code::CONFIG
        }
    }
}

fn cmd_certify(config: &str, out: &std::path::Path) -> u8 {
    let scenario = match load_scenario(config, Overrides::default()) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("config error: {e}");
            return exit_code::CONFIG;
        }
    };
    match certify(&scenario, out) {
        Ok(outcome) => {
            let c = &outcome.certificate;
            println!(
                "sigma {:.6}, tau {:.6}, r {:.6}, varphi {:.6}, psi {:.6}",
                c.suprema.sigma, c.suprema.tau, c.suprema.r, c.suprema.varphi, c.suprema.psi
            );
            println!(
                "rho {:.12}, lambda_max {:e}, lambda_used {:e}",
                c.rho, c.lambda_max, c.lambda
            );
            if outcome.guaranteed {
                println!("convergence guaranteed at the configured step sizes");
                exit_code::OK
            } else {
                println!(
                    "not guaranteed: lambda must stay below {:e} (the run may still converge)",
                    c.lambda_max
                );
                exit_code::NOT_CERTIFIED
            }
        }
        Err(e) => {
            eprintln!("certify failed: {e}");
            exit_code::CONFIG
        }
    }
}

fn cmd_counterexamples() -> u8 {
    match counterexample_checks() {
        Ok(checks) => {
            let mut all_pass = true;
            for c in &checks {
                println!(
                    "{} eta={:<6} value={:.12e} bound={:.12e} {}",
                    if c.pass { "PASS" } else { "FAIL" },
                    c.eta,
                    c.value,
                    c.bound,
                    c.label
                );
                all_pass &= c.pass;
            }
            if all_pass {
                exit_code::OK
            } else {
                let failing = checks.iter().find(|c| !c.pass).expect("some check failed");
                eprintln!("violated: {} at eta {}", failing.label, failing.eta);
                exit_code::COUNTEREXAMPLE
            }
        }
        Err(e) => {
            eprintln!("counterexample run failed: {e}");
            exit_code::CONFIG
        }
    }
}
