use thiserror::Error;

use crate::catalog::CatalogError;
use crate::corpus::CorpusError;
use crate::diversify::DiversifyError;
use crate::knowledge::KnowledgeError;
use crate::manifest::ManifestCollision;
use crate::prompt::PromptError;
use crate::schema::SchemaError;
use crate::sql::SqlError;
use crate::template::TemplateError;

/// Any error raised by the generation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error(transparent)]
    Sql(#[from] SqlError),
    #[error(transparent)]
    Diversify(#[from] DiversifyError),
    #[error(transparent)]
    Knowledge(#[from] KnowledgeError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Manifest(#[from] ManifestCollision),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

impl Error {
    /// Short machine-readable class name.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Catalog(_) => "catalog",
            Error::Template(_) => "template",
            Error::Schema(_) => "schema",
            Error::Sql(_) => "sql",
            Error::Diversify(_) => "diversify",
            Error::Knowledge(_) => "knowledge",
            Error::Prompt(_) => "prompt",
            Error::Manifest(_) => "manifest",
            Error::Corpus(_) => "corpus",
        }
    }
}
