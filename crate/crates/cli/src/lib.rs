//! Library side of the command-line front end: scenario files, the three
//! subcommands, and the CSV writers. The binary in `main.rs` only parses
//! arguments and maps outcomes to exit codes.

// negated range guards like `!(lo < hi)` reject NaN, which the suggested
// rewrite would silently accept
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;

pub use commands::{
    certify, counterexample_checks, run_scenario, CertifyOutcome, CommandError,
    CounterexampleCheck, RunOutcome,
};
pub use config::{load_scenario, scenario_from_str, ConfigError, Overrides, Scenario};

/// Stable exit-code contract of the binary.
pub mod exit_code {
    /// Run completed, checks passed.
    pub const OK: u8 = 0;
    /// Configuration or precondition failure.
    pub const CONFIG: u8 = 1;
    /// The protocol state diverged during a run.
    pub const DIVERGED: u8 = 2;
    /// The certificate does not guarantee convergence for the configured
    /// step sizes.
    pub const NOT_CERTIFIED: u8 = 3;
    /// A counterexample check failed.
    pub const COUNTEREXAMPLE: u8 = 4;
}
