//! Database metadata: tables, typed columns with descriptions, and the join
//! relationships between tables.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("duplicate table name `{0}`")]
    DuplicateTable(String),
    #[error("duplicate column `{column}` in table `{table}`")]
    DuplicateColumn { table: String, column: String },
    #[error("table `{0}` has no columns")]
    EmptyTable(String),
    #[error("empty identifier in {0}")]
    EmptyName(String),
    #[error("{what} contains a line break; descriptions must be single-line")]
    MultilineText { what: String },
    #[error("relationship {relationship}: {reason}")]
    Referential { relationship: String, reason: String },
    #[error("unsupported data type `{token}` (supported: integer, float, text, date, boolean, timestamp)")]
    UnsupportedType { token: String },
    #[error("DDL syntax error at line {line}: {message}")]
    Ddl { line: usize, message: String },
    #[error("invalid catalog document: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataType {
    Integer,
    Float,
    Text,
    Date,
    Boolean,
    Timestamp,
}

impl DataType {
    pub const ALL: [DataType; 6] = [
        DataType::Integer,
        DataType::Float,
        DataType::Text,
        DataType::Date,
        DataType::Boolean,
        DataType::Timestamp,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DataType::Integer => "integer",
            DataType::Float => "float",
            DataType::Text => "text",
            DataType::Date => "date",
            DataType::Boolean => "boolean",
            DataType::Timestamp => "timestamp",
        }
    }

    /// Maps a DDL type keyword (case-insensitive, common aliases included) to
    /// the supported enumeration.
    pub fn from_keyword(token: &str) -> Result<Self, CatalogError> {
        let ty = match token.to_ascii_lowercase().as_str() {
            "integer" | "int" | "int64" | "bigint" | "smallint" | "tinyint" => DataType::Integer,
            "float" | "float64" | "double" | "real" | "numeric" | "decimal" | "bignumeric" => DataType::Float,
            "text" | "string" | "varchar" | "char" => DataType::Text,
            "date" => DataType::Date,
            "boolean" | "bool" => DataType::Boolean,
            "timestamp" | "datetime" => DataType::Timestamp,
            _ => {
                return Err(CatalogError::UnsupportedType {
                    token: token.to_string(),
                })
            }
        };
        Ok(ty)
    }
}

impl fmt::Display for DataType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnDef {
    pub name: String,
    pub data_type: DataType,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub is_filter: bool,
    #[serde(default)]
    pub is_metric_component: bool,
}

impl ColumnDef {
    pub fn new(name: impl Into<String>, data_type: DataType) -> Self {
        ColumnDef {
            name: name.into(),
            data_type,
            description: String::new(),
            is_filter: false,
            is_metric_component: false,
        }
    }

    pub fn with_description(mut self, description: impl Into<String>) -> Self {
        self.description = description.into();
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableDef {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub columns: Vec<ColumnDef>,
}

impl TableDef {
    pub fn column(&self, name: &str) -> Option<&ColumnDef> {
        self.columns.iter().find(|c| c.name == name)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum RelationshipKind {
    #[default]
    #[serde(rename = "equi-join")]
    EquiJoin,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Relationship {
    pub left_table: String,
    pub left_column: String,
    pub right_table: String,
    pub right_column: String,
    #[serde(default)]
    pub kind: RelationshipKind,
}

impl Relationship {
    pub fn left(&self) -> ColumnRef {
        ColumnRef::new(&self.left_table, &self.left_column)
    }

    pub fn right(&self) -> ColumnRef {
        ColumnRef::new(&self.right_table, &self.right_column)
    }

    /// The join condition as SQL text, `left.col = right.col`.
    pub fn condition(&self) -> String {
        format!("{} = {}", self.left(), self.right())
    }
}

impl fmt::Display for Relationship {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.condition())
    }
}

/// A qualified `(table, column)` reference.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ColumnRef {
    pub table: String,
    pub column: String,
}

impl ColumnRef {
    pub fn new(table: impl Into<String>, column: impl Into<String>) -> Self {
        ColumnRef {
            table: table.into(),
            column: column.into(),
        }
    }
}

impl fmt::Display for ColumnRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.table, self.column)
    }
}

#[derive(Deserialize)]
struct CatalogDoc {
    tables: Vec<TableDef>,
    #[serde(default)]
    relationships: Vec<Relationship>,
}

/// Validated, immutable database metadata.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "CatalogDoc")]
pub struct Catalog {
    tables: Vec<TableDef>,
    relationships: Vec<Relationship>,
}

impl TryFrom<CatalogDoc> for Catalog {
    type Error = CatalogError;

    fn try_from(doc: CatalogDoc) -> Result<Self, Self::Error> {
        Catalog::new(doc.tables, doc.relationships)
    }
}

impl Catalog {
    pub fn new(tables: Vec<TableDef>, relationships: Vec<Relationship>) -> Result<Self, CatalogError> {
        let mut seen = BTreeSet::new();
        for table in &tables {
            if table.name.trim().is_empty() {
                return Err(CatalogError::EmptyName("table name".into()));
            }
            if !seen.insert(table.name.as_str()) {
                return Err(CatalogError::DuplicateTable(table.name.clone()));
            }
            if table.columns.is_empty() {
                return Err(CatalogError::EmptyTable(table.name.clone()));
            }
            check_single_line(&table.description, || format!("description of table `{}`", table.name))?;
            let mut columns = BTreeSet::new();
            for column in &table.columns {
                if column.name.trim().is_empty() {
                    return Err(CatalogError::EmptyName(format!("column of table `{}`", table.name)));
                }
                if !columns.insert(column.name.as_str()) {
                    return Err(CatalogError::DuplicateColumn {
                        table: table.name.clone(),
                        column: column.name.clone(),
                    });
                }
                check_single_line(&column.description, || {
                    format!("description of column `{}.{}`", table.name, column.name)
                })?;
            }
        }

        let catalog = Catalog { tables, relationships };
        for rel in &catalog.relationships {
            let referential = |reason: String| CatalogError::Referential {
                relationship: rel.condition(),
                reason,
            };
            if rel.left_table == rel.right_table {
                return Err(referential("both sides name the same table".into()));
            }
            for side in [rel.left(), rel.right()] {
                match catalog.table(&side.table) {
                    None => return Err(referential(format!("unknown table `{}`", side.table))),
                    Some(t) if t.column(&side.column).is_none() => {
                        return Err(referential(format!("unknown column `{side}`")))
                    }
                    Some(_) => {}
                }
            }
        }
        Ok(catalog)
    }

    pub fn from_json(text: &str) -> Result<Self, CatalogError> {
        let doc: CatalogDoc = serde_json::from_str(text)?;
        Catalog::new(doc.tables, doc.relationships)
    }

    /// Canonical catalog document: pretty JSON with fields in declaration order.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("catalog serializes")
    }

    /// Compact canonical serialization used for hashing.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("catalog serializes")
    }

    pub fn tables(&self) -> &[TableDef] {
        &self.tables
    }

    pub fn relationships(&self) -> &[Relationship] {
        &self.relationships
    }

    pub fn table(&self, name: &str) -> Option<&TableDef> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn column(&self, table: &str, column: &str) -> Option<&ColumnDef> {
        self.table(table)?.column(column)
    }

    pub fn contains(&self, col: &ColumnRef) -> bool {
        self.column(&col.table, &col.column).is_some()
    }

    pub fn column_count(&self) -> usize {
        self.tables.iter().map(|t| t.columns.len()).sum()
    }

    /// Every `(table, column)` pair in catalog order.
    pub fn column_refs(&self) -> impl Iterator<Item = ColumnRef> + '_ {
        self.tables
            .iter()
            .flat_map(|t| t.columns.iter().map(move |c| ColumnRef::new(&t.name, &c.name)))
    }

    /// Distinct column names mapped to the tables owning them (alphabetical).
    pub fn column_owners(&self) -> BTreeMap<&str, BTreeSet<&str>> {
        let mut owners: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
        for table in &self.tables {
            for column in &table.columns {
                owners
                    .entry(column.name.as_str())
                    .or_default()
                    .insert(table.name.as_str());
            }
        }
        owners
    }
}

fn check_single_line(text: &str, what: impl FnOnce() -> String) -> Result<(), CatalogError> {
    if text.contains(['\n', '\r']) {
        Err(CatalogError::MultilineText { what: what() })
    } else {
        Ok(())
    }
}
