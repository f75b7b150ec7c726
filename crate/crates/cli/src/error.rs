use thiserror::Error;

use crate::expr::{EvalError, ParseError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("in `{field}`: {source}")]
    Expression {
        field: String,
        #[source]
        source: ParseError,
    },
    #[error("evaluating `{field}`: {source}")]
    Evaluation {
        field: String,
        #[source]
        source: EvalError,
    },
    #[error("inadmissible density: {0}")]
    Admissibility(String),
    #[error("solver failure: {0}")]
    Solver(#[from] degsl_core::Error),
    #[error("cannot write {path}: {message}")]
    Output { path: String, message: String },
}

impl CliError {
    /// 1 admissibility, 2 solver or output, 3 configuration.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Admissibility(_) => 1,
            CliError::Solver(degsl_core::Error::NegativeWeight { .. }) => 1,
            CliError::Solver(_) | CliError::Output { .. } => 2,
            CliError::Config(_) | CliError::Expression { .. } | CliError::Evaluation { .. } => 3,
        }
    }
}
