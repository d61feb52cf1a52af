//! Execution accuracy: predicted and gold SQL run on the same fixture
//! database and their result sets are compared.
//!
//! ```
//! use metasql_eval::{evaluate, Database, EvalCase, EvalSettings};
//!
//! let db = Database::from_seed_script(
//!     "CREATE TABLE t (y INTEGER); INSERT INTO t VALUES (1), (2);",
//!     "demo",
//! )
//! .unwrap();
//! let case = EvalCase::new("c1", "SELECT y AS total FROM t", "SELECT y FROM t", "demo");
//! let report = evaluate(&[case], &db, &EvalSettings::default()).unwrap();
//! assert_eq!(report.execution_accuracy, 1.0);
//! ```

mod db;
mod extract;
mod rows;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use metasql_core::{SchemaMode, TaskType};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use db::{Database, DbError, EvalSettings, ExecError};
pub use extract::extract_sql;
pub use rows::{cells_equal, rows_equivalent, rows_equivalent_with, Cell, ResultSet, Row, DEFAULT_TOLERANCE};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Database(#[from] DbError),
    #[error("case {id}: gold query failed: {detail}")]
    GoldFailed { id: String, detail: String },
    #[error("case {id} targets database `{wanted}`, loaded `{loaded}`")]
    WrongDatabase { id: String, wanted: String, loaded: String },
    #[error("duplicate case id `{0}`")]
    DuplicateCase(String),
}

impl EvalError {
    /// Whether the failure comes from the environment rather than the inputs.
    pub fn is_environment(&self) -> bool {
        matches!(self, EvalError::Database(_) | EvalError::WrongDatabase { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalCase {
    pub id: String,
    pub predicted_sql: String,
    pub gold_sql: String,
    pub database_ref: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task_type: Option<TaskType>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema_mode: Option<SchemaMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<String>,
}

impl EvalCase {
    pub fn new(
        id: impl Into<String>,
        predicted_sql: impl Into<String>,
        gold_sql: impl Into<String>,
        database_ref: impl Into<String>,
    ) -> Self {
        EvalCase {
            id: id.into(),
            predicted_sql: predicted_sql.into(),
            gold_sql: gold_sql.into(),
            database_ref: database_ref.into(),
            task_type: None,
            schema_mode: None,
            table: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Match,
    Mismatch,
    PredictedError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub id: String,
    pub outcome: Outcome,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_detail: Option<String>,
    pub gold_rows: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicted_rows: Option<usize>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Bucket {
    pub total: usize,
    pub matched: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub cases: Vec<Verdict>,
    pub execution_accuracy: f64,
    /// Dimension (`task_type`, `schema_mode`, `table`) to key to bucket.
    pub breakdown: BTreeMap<String, BTreeMap<String, Bucket>>,
}

fn accuracy(matched: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        matched as f64 / total as f64
    }
}

/// Runs every case. Gold queries are all executed first; one failure halts
/// the run.
pub fn evaluate(cases: &[EvalCase], db: &Database, settings: &EvalSettings) -> Result<EvalReport, EvalError> {
    let mut sorted: Vec<&EvalCase> = cases.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    if let Some(w) = sorted.windows(2).find(|w| w[0].id == w[1].id) {
        return Err(EvalError::DuplicateCase(w[0].id.clone()));
    }

    let mut gold = Vec::with_capacity(sorted.len());
    for case in &sorted {
        if case.database_ref != db.name() {
            return Err(EvalError::WrongDatabase {
                id: case.id.clone(),
                wanted: case.database_ref.clone(),
                loaded: db.name().to_string(),
            });
        }
        let rs = db.query(&case.gold_sql, settings).map_err(|e| EvalError::GoldFailed {
            id: case.id.clone(),
            detail: e.to_string(),
        })?;
        gold.push(rs);
    }

    let mut verdicts = Vec::with_capacity(sorted.len());
    let mut breakdown: BTreeMap<String, BTreeMap<String, Bucket>> = BTreeMap::new();
    for (case, gold_rs) in sorted.iter().zip(&gold) {
        let ordered = metasql_core::sql::has_outer_order_by(&case.gold_sql).unwrap_or_else(|e| {
            log::warn!(
                "case {}: cannot parse gold for ORDER BY detection ({e}); comparing unordered",
                case.id
            );
            false
        });
        let predicted = extract_sql(&case.predicted_sql);
        let verdict = match db.query(&predicted, settings) {
            Ok(rs) => Verdict {
                id: case.id.clone(),
                outcome: if rows_equivalent_with(&rs, gold_rs, ordered, settings.tolerance) {
                    Outcome::Match
                } else {
                    Outcome::Mismatch
                },
                error_detail: None,
                gold_rows: gold_rs.rows.len(),
                predicted_rows: Some(rs.rows.len()),
            },
            Err(e) => Verdict {
                id: case.id.clone(),
                outcome: Outcome::PredictedError,
                error_detail: Some(e.to_string()),
                gold_rows: gold_rs.rows.len(),
                predicted_rows: None,
            },
        };
        let keys = [
            ("task_type", case.task_type.map(|t| t.to_string())),
            ("schema_mode", case.schema_mode.map(|m| m.to_string())),
            ("table", case.table.clone()),
        ];
        for (dimension, key) in keys {
            if let Some(key) = key {
                let bucket = breakdown
                    .entry(dimension.to_string())
                    .or_default()
                    .entry(key)
                    .or_default();
                bucket.total += 1;
                bucket.matched += usize::from(verdict.outcome == Outcome::Match);
            }
        }
        verdicts.push(verdict);
    }
    for bucket in breakdown.values_mut().flat_map(|m| m.values_mut()) {
        bucket.accuracy = accuracy(bucket.matched, bucket.total);
    }
    let matched = verdicts.iter().filter(|v| v.outcome == Outcome::Match).count();
    Ok(EvalReport {
        execution_accuracy: accuracy(matched, verdicts.len()),
        cases: verdicts,
        breakdown,
    })
}

impl EvalReport {
    pub fn count(&self, outcome: Outcome) -> usize {
        self.cases.iter().filter(|v| v.outcome == outcome).count()
    }

    /// Plain-text table for terminals.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "cases {}  match {}  mismatch {}  error {}  accuracy {:.4}",
            self.cases.len(),
            self.count(Outcome::Match),
            self.count(Outcome::Mismatch),
            self.count(Outcome::PredictedError),
            self.execution_accuracy
        );
        for (dimension, buckets) in &self.breakdown {
            let _ = writeln!(out, "{dimension}:");
            for (key, b) in buckets {
                let _ = writeln!(out, "  {key:<16} {:>5}/{:<5} {:.4}", b.matched, b.total, b.accuracy);
            }
        }
        out
    }
}
