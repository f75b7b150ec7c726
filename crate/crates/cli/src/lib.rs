//! Config-driven front end for `degsl-core`: an expression language for
//! weights and loads, JSON run configurations, command dispatch and CSV
//! reports.

pub mod config;
pub mod error;
pub mod expr;
pub mod report;
pub mod run;

pub use config::{Command, RunConfig};
pub use error::CliError;
pub use expr::{parse_expression, Expr, Vars};
pub use run::{execute, run, RunOptions, RunOutcome};
