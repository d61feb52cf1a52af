use std::path::PathBuf;

use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("config {}: {message}", path.display())]
    Config { path: PathBuf, message: String },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: line {line}: {message}", path.display())]
    Input {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error(transparent)]
    Core(#[from] metasql_core::Error),
    #[error(transparent)]
    Eval(#[from] metasql_eval::EvalError),
}

macro_rules! core_from {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Core(e.into())
            }
        }
    )*};
}

core_from!(
    metasql_core::catalog::CatalogError,
    metasql_core::template::TemplateError,
    metasql_core::sql::SqlError,
    metasql_core::schema::SchemaError,
    metasql_core::diversify::DiversifyError,
    metasql_core::knowledge::KnowledgeError,
    metasql_core::prompt::PromptError,
    metasql_core::manifest::ManifestCollision,
    metasql_core::corpus::CorpusError
);

impl From<metasql_eval::DbError> for CliError {
    fn from(e: metasql_eval::DbError) -> Self {
        CliError::Eval(e.into())
    }
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Config { .. } => "config",
            CliError::Io { .. } => "io",
            CliError::Input { .. } => "input",
            CliError::Core(e) => e.kind(),
            CliError::Eval(e) if e.is_environment() => "environment",
            CliError::Eval(_) => "eval",
        }
    }

    /// 2 for usage, 3 for a missing or unusable environment, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self.kind() {
            "usage" => 2,
            "environment" => 3,
            _ => 1,
        }
    }

    pub fn to_json(&self) -> String {
        json!({
            "error": self.kind(),
            "exit_code": self.exit_code(),
            "message": self.to_string(),
        })
        .to_string()
    }
}
