//! `CREATE TABLE` schema context blocks for prompts.
//!
//! A block lists tables in catalog order, one column per line as
//! `name datatype description`:
//!
//! ```text
//! CREATE TABLE sales (
//! store_id integer store identifier
//! amount float daily sales amount
//! )
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{Catalog, ColumnRef, DataType};
use crate::seed;

#[derive(Debug, Error)]
pub enum SchemaError {
    #[error("anchor references unknown column `{0}`")]
    UnknownColumn(ColumnRef),
    #[error("{0} schema mode requires a non-empty anchor")]
    EmptyAnchor(SchemaMode),
    #[error("malformed schema block at line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("unknown schema mode `{0}` (expected exact, full or dynamic)")]
    UnknownMode(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemaMode {
    /// Only the tables and columns the gold query references.
    Exact,
    /// Every table and column in the catalog.
    Full,
    /// A seeded random superset of the exact set.
    Dynamic,
}

impl SchemaMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SchemaMode::Exact => "exact",
            SchemaMode::Full => "full",
            SchemaMode::Dynamic => "dynamic",
        }
    }
}

impl fmt::Display for SchemaMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SchemaMode {
    type Err = SchemaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exact" => Ok(SchemaMode::Exact),
            "full" => Ok(SchemaMode::Full),
            "dynamic" => Ok(SchemaMode::Dynamic),
            other => Err(SchemaError::UnknownMode(other.to_string())),
        }
    }
}

/// Column budget for dynamic mode when none is configured: three times the
/// anchor size, clamped to the catalog.
pub fn default_dynamic_budget(anchor_len: usize, catalog: &Catalog) -> usize {
    (3 * anchor_len).min(catalog.column_count())
}

/// Selects the columns a schema block shows under `mode`.
pub fn select_columns(
    catalog: &Catalog,
    mode: SchemaMode,
    anchor: &BTreeSet<ColumnRef>,
    seed: u64,
    budget: Option<usize>,
) -> Result<BTreeSet<ColumnRef>, SchemaError> {
    if let Some(missing) = anchor.iter().find(|c| !catalog.contains(c)) {
        return Err(SchemaError::UnknownColumn(missing.clone()));
    }
    if anchor.is_empty() && mode != SchemaMode::Full {
        return Err(SchemaError::EmptyAnchor(mode));
    }
    match mode {
        SchemaMode::Exact => Ok(anchor.clone()),
        SchemaMode::Full => Ok(catalog.column_refs().collect()),
        SchemaMode::Dynamic => {
            let budget = budget
                .unwrap_or_else(|| default_dynamic_budget(anchor.len(), catalog))
                .clamp(anchor.len(), catalog.column_count());
            let mut extra: Vec<ColumnRef> = catalog.column_refs().filter(|c| !anchor.contains(c)).collect();
            extra.shuffle(&mut seed::rng(seed));
            let mut chosen = anchor.clone();
            chosen.extend(extra.into_iter().take(budget - anchor.len()));
            Ok(chosen)
        }
    }
}

/// Renders the `CREATE TABLE` block for the selected columns, keeping catalog
/// order for tables and columns.
pub fn render_block(catalog: &Catalog, columns: &BTreeSet<ColumnRef>) -> String {
    let mut blocks = Vec::new();
    for table in catalog.tables() {
        let lines: Vec<String> = table
            .columns
            .iter()
            .filter(|c| columns.contains(&ColumnRef::new(&table.name, &c.name)))
            .map(|c| {
                if c.description.is_empty() {
                    format!("{} {}", c.name, c.data_type)
                } else {
                    format!("{} {} {}", c.name, c.data_type, c.description)
                }
            })
            .collect();
        if !lines.is_empty() {
            blocks.push(format!("CREATE TABLE {} (\n{}\n)", table.name, lines.join("\n")));
        }
    }
    blocks.join("\n")
}

/// Schema context for a prompt: exact, full or dynamic.
pub fn schema_context(
    catalog: &Catalog,
    mode: SchemaMode,
    anchor: &BTreeSet<ColumnRef>,
    seed: u64,
    budget: Option<usize>,
) -> Result<String, SchemaError> {
    let columns = select_columns(catalog, mode, anchor, seed, budget)?;
    Ok(render_block(catalog, &columns))
}

/// One column line recovered from a schema block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockColumn {
    pub name: String,
    pub data_type: DataType,
    pub description: String,
}

/// Parses a block produced by [`render_block`] back into table → columns.
pub fn parse_block(text: &str) -> Result<BTreeMap<String, Vec<BlockColumn>>, SchemaError> {
    let mut tables = BTreeMap::new();
    let mut current: Option<(String, Vec<BlockColumn>)> = None;
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let malformed = |message: &str| SchemaError::Malformed {
            line: line_no,
            message: message.to_string(),
        };
        match &mut current {
            None => {
                let name = line
                    .strip_prefix("CREATE TABLE ")
                    .and_then(|rest| rest.strip_suffix(" ("))
                    .ok_or_else(|| malformed("expected `CREATE TABLE <name> (`"))?;
                current = Some((name.to_string(), Vec::new()));
            }
            Some(_) if line == ")" => {
                let (name, columns) = current.take().expect("open table");
                tables.insert(name, columns);
            }
            Some((_, columns)) => {
                let mut parts = line.splitn(3, ' ');
                let name = parts.next().filter(|s| !s.is_empty());
                let ty = parts.next();
                let (Some(name), Some(ty)) = (name, ty) else {
                    return Err(malformed("expected `<column> <type> [description]`"));
                };
                let data_type = DataType::from_keyword(ty).map_err(|_| malformed("unknown column type"))?;
                columns.push(BlockColumn {
                    name: name.to_string(),
                    data_type,
                    description: parts.next().unwrap_or("").to_string(),
                });
            }
        }
    }
    if current.is_some() {
        return Err(SchemaError::Malformed {
            line: text.lines().count(),
            message: "unterminated CREATE TABLE".into(),
        });
    }
    Ok(tables)
}

/// The `(table, column)` set a block mentions.
pub fn block_columns(text: &str) -> Result<BTreeSet<ColumnRef>, SchemaError> {
    Ok(parse_block(text)?
        .into_iter()
        .flat_map(|(t, cols)| cols.into_iter().map(move |c| ColumnRef::new(&t, c.name)))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ddl::parse_ddl;

    fn fixture() -> Catalog {
        parse_ddl(
            "CREATE TABLE a (x INTEGER COMMENT 'the x', y TEXT, z FLOAT);
             CREATE TABLE b (id INTEGER, w DATE COMMENT 'when');
             CREATE TABLE c (q BOOLEAN);",
        )
        .unwrap()
    }

    fn anchor(cols: &[(&str, &str)]) -> BTreeSet<ColumnRef> {
        cols.iter().map(|(t, c)| ColumnRef::new(*t, *c)).collect()
    }

    #[test]
    fn exact_block_layout() {
        let block = schema_context(&fixture(), SchemaMode::Exact, &anchor(&[("a", "x")]), 0, None).unwrap();
        assert_eq!(block, "CREATE TABLE a (\nx integer the x\n)");
    }

    #[test]
    fn full_mentions_every_table() {
        let block = schema_context(&fixture(), SchemaMode::Full, &BTreeSet::new(), 0, None).unwrap();
        for name in ["a", "b", "c"] {
            assert!(block.contains(&format!("CREATE TABLE {name} (")));
        }
        assert_eq!(block_columns(&block).unwrap().len(), 6);
    }

    #[test]
    fn dynamic_budget_defaults_to_three_times_anchor() {
        let cat = fixture();
        let a = anchor(&[("a", "x")]);
        let cols = select_columns(&cat, SchemaMode::Dynamic, &a, 9, None).unwrap();
        assert_eq!(cols.len(), 3);
        assert!(a.is_subset(&cols));
        let all = select_columns(&cat, SchemaMode::Dynamic, &a, 9, Some(100)).unwrap();
        assert_eq!(all.len(), 6);
    }

    #[test]
    fn unknown_anchor_column() {
        let err = schema_context(&fixture(), SchemaMode::Exact, &anchor(&[("a", "nope")]), 0, None).unwrap_err();
        assert!(matches!(err, SchemaError::UnknownColumn(_)));
    }

    #[test]
    fn empty_anchor_rejected_outside_full() {
        let err = schema_context(&fixture(), SchemaMode::Dynamic, &BTreeSet::new(), 0, None).unwrap_err();
        assert!(matches!(err, SchemaError::EmptyAnchor(SchemaMode::Dynamic)));
    }

    #[test]
    fn parse_block_recovers_descriptions() {
        let block = schema_context(&fixture(), SchemaMode::Full, &BTreeSet::new(), 0, None).unwrap();
        let parsed = parse_block(&block).unwrap();
        assert_eq!(parsed["b"][1].description, "when");
        assert_eq!(parsed["a"][1].description, "");
    }
}
