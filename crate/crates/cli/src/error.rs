use std::process::ExitCode;

use psl_core::context_engine::ContextError;
use psl_core::corpus_dedup::DedupError;
use psl_core::evalkit::EvalError;
use psl_core::go_graph::GoError;
use psl_core::jsonl::JsonlError;
use psl_core::llm_gateway::GatewayError;
use psl_core::protein::ProteinError;
use psl_core::qa_forge::QaError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Gateway(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Gateway(_) => 3,
        })
    }

    pub fn data(e: impl std::fmt::Display) -> CliError {
        CliError::Data(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(format!("i/o error: {e}"))
    }
}

macro_rules! data_errors {
    ($($t:ty),*) => {
        $(impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Data(e.to_string())
            }
        })*
    };
}

data_errors!(JsonlError, ProteinError, GoError, DedupError, QaError);

impl From<GatewayError> for CliError {
    fn from(e: GatewayError) -> Self {
        CliError::Gateway(e.to_string())
    }
}

impl From<ContextError> for CliError {
    fn from(e: ContextError) -> Self {
        match e {
            ContextError::InvalidConfig(m) => CliError::Usage(format!("invalid retrieval config: {m}")),
            ContextError::Gateway { error, .. } => CliError::Gateway(error.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Context(c) => c.into(),
            EvalError::Item { id, source } => match CliError::from(source) {
                CliError::Usage(m) => CliError::Usage(m),
                CliError::Data(m) => CliError::Data(format!("item {id}: {m}")),
                CliError::Gateway(m) => CliError::Gateway(format!("item {id}: {m}")),
            },
            other => CliError::Data(other.to_string()),
        }
    }
}
