//! Corpus generation for meta-aware text-to-SQL fine-tuning.
//!
//! The pipeline starts from a [`Catalog`] of tables, columns and join
//! relationships and produces three families of training samples:
//!
//! * schema samples, expanded from golden question/SQL templates over metric
//!   and filter sets ([`template`]) with a `CREATE TABLE` schema context
//!   ([`schema`]);
//! * chain-of-thought samples whose answers are derived mechanically from the
//!   gold SQL ([`sql`], [`cot`]);
//! * domain-knowledge samples covering seven catalog lookup subtasks
//!   ([`knowledge`]).
//!
//! Samples are rendered into fixed tagged prompt layouts ([`prompt`]),
//! assembled and split into corpora ([`corpus`]), and accompanied by a
//! tokenizer-extension manifest ([`manifest`]).

pub mod catalog;
pub mod corpus;
pub mod cot;
pub mod ddl;
pub mod diversify;
pub mod error;
pub mod knowledge;
pub mod manifest;
pub mod prompt;
pub mod schema;
pub mod seed;
pub mod sql;
pub mod template;

pub use catalog::{Catalog, ColumnDef, ColumnRef, DataType, Relationship, TableDef};
pub use corpus::{Corpus, Split};
pub use cot::CotAnswer;
pub use diversify::InstructionPool;
pub use error::Error;
pub use knowledge::{KnowledgeSample, Subtask};
pub use manifest::TokenManifest;
pub use prompt::{PromptSample, PromptStructure, SampleMeta, TaskType};
pub use schema::SchemaMode;
pub use sql::SqlAnalysis;
pub use template::{FilterValue, MetricDef, QaPair, TemplatePair};
