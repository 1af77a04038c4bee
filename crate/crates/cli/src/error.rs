use std::process::ExitCode;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error {0}")]
    Config(String),
    #[error("parse error in {0}")]
    Parse(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Parse(_) => 3,
            CliError::Numerical(_) => 4,
        })
    }
}

impl From<varlab_core::Error> for CliError {
    fn from(e: varlab_core::Error) -> Self {
        use varlab_core::Error as E;
        match e {
            E::Parse(p) => CliError::Parse(format!("expression: {p}")),
            E::Eval(v) => CliError::Numerical(v.to_string()),
            E::Precondition(m) | E::Mismatch(m) | E::Input(m) => CliError::Config(m),
        }
    }
}

impl From<varlab_core::dsl::EvalError> for CliError {
    fn from(e: varlab_core::dsl::EvalError) -> Self {
        CliError::Numerical(e.to_string())
    }
}
