//! Fixture database access with timeout, row cap and read-only checks.

use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rusqlite::types::ValueRef;
use rusqlite::{Connection, OpenFlags};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rows::{Cell, ResultSet, DEFAULT_TOLERANCE};

#[derive(Debug, Error)]
pub enum DbError {
    #[error("fixture database `{0}` not found")]
    Missing(String),
    #[error("cannot open fixture database: {0}")]
    Open(String),
    #[error("seed script failed: {0}")]
    Seed(String),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExecError {
    #[error("empty statement")]
    Empty,
    #[error("statement is not a read-only query")]
    Mutating,
    #[error("query exceeded the {0} ms timeout")]
    Timeout(u128),
    #[error("query returned more than {0} rows")]
    RowCap(usize),
    #[error("{0}")]
    Sqlite(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalSettings {
    pub timeout_ms: u64,
    pub row_cap: usize,
    pub tolerance: f64,
}

impl Default for EvalSettings {
    fn default() -> Self {
        EvalSettings {
            timeout_ms: 10_000,
            row_cap: 100_000,
            tolerance: DEFAULT_TOLERANCE,
        }
    }
}

impl EvalSettings {
    pub fn timeout(&self) -> Duration {
        Duration::from_millis(self.timeout_ms)
    }
}

/// A fixture database held open for the duration of an evaluation.
pub struct Database {
    name: String,
    conn: Connection,
    deadline: Arc<AtomicU64>,
    epoch: Instant,
}

impl Database {
    /// Opens an existing database file read-only.
    pub fn open(path: &Path, name: impl Into<String>) -> Result<Self, DbError> {
        if !path.is_file() {
            return Err(DbError::Missing(path.display().to_string()));
        }
        let conn =
            Connection::open_with_flags(path, OpenFlags::SQLITE_OPEN_READ_ONLY | OpenFlags::SQLITE_OPEN_NO_MUTEX)
                .map_err(|e| DbError::Open(e.to_string()))?;
        Database::wrap(conn, name.into())
    }

    /// Builds an in-memory database from a seed script, then locks it.
    pub fn from_seed_script(script: &str, name: impl Into<String>) -> Result<Self, DbError> {
        let conn = Connection::open_in_memory().map_err(|e| DbError::Open(e.to_string()))?;
        conn.execute_batch(script).map_err(|e| DbError::Seed(e.to_string()))?;
        Database::wrap(conn, name.into())
    }

    fn wrap(conn: Connection, name: String) -> Result<Self, DbError> {
        conn.execute_batch("PRAGMA query_only = ON;")
            .map_err(|e| DbError::Open(e.to_string()))?;
        let deadline = Arc::new(AtomicU64::new(u64::MAX));
        let epoch = Instant::now();
        let watch = Arc::clone(&deadline);
        conn.progress_handler(
            1_000,
            Some(move || epoch.elapsed().as_millis() as u64 > watch.load(Ordering::Relaxed)),
        )
        .map_err(|e| DbError::Open(e.to_string()))?;
        Ok(Database {
            name,
            conn,
            deadline,
            epoch,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Runs one read-only query and materializes its rows.
    pub fn query(&self, sql: &str, settings: &EvalSettings) -> Result<ResultSet, ExecError> {
        let sql = sql.trim().trim_end_matches(';').trim();
        if sql.is_empty() {
            return Err(ExecError::Empty);
        }
        let mut stmt = self.conn.prepare(sql).map_err(|e| ExecError::Sqlite(e.to_string()))?;
        if !stmt.readonly() || stmt.column_count() == 0 {
            return Err(ExecError::Mutating);
        }
        let column_count = stmt.column_count();
        let start = self.epoch.elapsed().as_millis() as u64;
        self.deadline
            .store(start.saturating_add(settings.timeout_ms), Ordering::Relaxed);
        let result = collect(&mut stmt, column_count, settings.row_cap);
        self.deadline.store(u64::MAX, Ordering::Relaxed);
        result.map_err(|e| match e {
            ExecError::Sqlite(msg) if msg.contains("interrupted") => ExecError::Timeout(settings.timeout_ms as u128),
            other => other,
        })
    }
}

fn collect(stmt: &mut rusqlite::Statement<'_>, column_count: usize, row_cap: usize) -> Result<ResultSet, ExecError> {
    let sqlite = |e: rusqlite::Error| ExecError::Sqlite(e.to_string());
    let mut rows = stmt.query([]).map_err(sqlite)?;
    let mut out = Vec::new();
    while let Some(row) = rows.next().map_err(sqlite)? {
        if out.len() == row_cap {
            return Err(ExecError::RowCap(row_cap));
        }
        let mut cells = Vec::with_capacity(column_count);
        for i in 0..column_count {
            cells.push(match row.get_ref(i).map_err(sqlite)? {
                ValueRef::Null => Cell::Null,
                ValueRef::Integer(v) => Cell::Integer(v),
                ValueRef::Real(v) => Cell::Real(v),
                ValueRef::Text(t) => Cell::Text(String::from_utf8_lossy(t).into_owned()),
                ValueRef::Blob(b) => Cell::Blob(b.to_vec()),
            });
        }
        out.push(cells);
    }
    Ok(ResultSet::new(column_count, out))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn db() -> Database {
        Database::from_seed_script("CREATE TABLE t (x INTEGER); INSERT INTO t VALUES (1), (2), (3);", "t").unwrap()
    }

    #[test]
    fn reads_rows() {
        let rs = db()
            .query("SELECT x FROM t ORDER BY x;", &EvalSettings::default())
            .unwrap();
        assert_eq!(rs.rows.len(), 3);
    }

    #[test]
    fn rejects_writes() {
        let d = db();
        for sql in [
            "DELETE FROM t",
            "INSERT INTO t VALUES (4)",
            "DROP TABLE t",
            "ATTACH ':memory:' AS other",
        ] {
            assert!(d.query(sql, &EvalSettings::default()).is_err(), "{sql}");
        }
        assert_eq!(
            d.query("SELECT COUNT(*) FROM t", &EvalSettings::default())
                .unwrap()
                .rows[0][0],
            Cell::Integer(3)
        );
    }

    #[test]
    fn row_cap() {
        let settings = EvalSettings {
            row_cap: 2,
            ..EvalSettings::default()
        };
        assert_eq!(db().query("SELECT x FROM t", &settings), Err(ExecError::RowCap(2)));
    }

    #[test]
    fn timeout_interrupts() {
        let settings = EvalSettings {
            timeout_ms: 50,
            ..EvalSettings::default()
        };
        let sql = "WITH RECURSIVE n(i) AS (SELECT 1 UNION ALL SELECT i + 1 FROM n) SELECT COUNT(*) FROM n";
        assert_eq!(db().query(sql, &settings), Err(ExecError::Timeout(50)));
    }

    #[test]
    fn missing_file() {
        assert!(matches!(
            Database::open(Path::new("/nonexistent/x.db"), "x"),
            Err(DbError::Missing(_))
        ));
    }
}
