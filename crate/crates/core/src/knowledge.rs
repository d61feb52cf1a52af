//! Domain-knowledge samples: seven lookup subtasks over the catalog.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::Catalog;
use crate::seed;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum KnowledgeError {
    #[error("no subtasks requested")]
    NoSubtasks,
    #[error("unknown knowledge subtask `{0}`")]
    UnknownSubtask(String),
    #[error("phrasing pool for {subtask} is empty")]
    EmptyPhrasings { subtask: Subtask },
    #[error("phrasing `{phrasing}` for {subtask} lacks placeholder {placeholder}")]
    MissingPlaceholder {
        subtask: Subtask,
        phrasing: String,
        placeholder: &'static str,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subtask {
    ColumnsOfTable,
    TableFromDescription,
    TableOfColumn,
    DescribeTable,
    DescribeColumn,
    ColumnDatatype,
    JoinRelationship,
}

impl Subtask {
    pub const ALL: [Subtask; 7] = [
        Subtask::ColumnsOfTable,
        Subtask::TableFromDescription,
        Subtask::TableOfColumn,
        Subtask::DescribeTable,
        Subtask::DescribeColumn,
        Subtask::ColumnDatatype,
        Subtask::JoinRelationship,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Subtask::ColumnsOfTable => "columns_of_table",
            Subtask::TableFromDescription => "table_from_description",
            Subtask::TableOfColumn => "table_of_column",
            Subtask::DescribeTable => "describe_table",
            Subtask::DescribeColumn => "describe_column",
            Subtask::ColumnDatatype => "column_datatype",
            Subtask::JoinRelationship => "join_relationship",
        }
    }

    /// Placeholders every phrasing of this subtask must contain.
    pub fn placeholders(self) -> &'static [&'static str] {
        match self {
            Subtask::ColumnsOfTable | Subtask::DescribeTable => &["{table}"],
            Subtask::TableFromDescription => &["{description}"],
            Subtask::TableOfColumn => &["{column}"],
            Subtask::DescribeColumn | Subtask::ColumnDatatype => &["{table}", "{column}"],
            Subtask::JoinRelationship => &["{table1}", "{table2}"],
        }
    }

    fn builtin_phrasings(self) -> &'static str {
        match self {
            Subtask::ColumnsOfTable => include_str!("../assets/phrasings/columns_of_table.txt"),
            Subtask::TableFromDescription => {
                include_str!("../assets/phrasings/table_from_description.txt")
            }
            Subtask::TableOfColumn => include_str!("../assets/phrasings/table_of_column.txt"),
            Subtask::DescribeTable => include_str!("../assets/phrasings/describe_table.txt"),
            Subtask::DescribeColumn => include_str!("../assets/phrasings/describe_column.txt"),
            Subtask::ColumnDatatype => include_str!("../assets/phrasings/column_datatype.txt"),
            Subtask::JoinRelationship => include_str!("../assets/phrasings/join_relationship.txt"),
        }
    }
}

impl fmt::Display for Subtask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Subtask {
    type Err = KnowledgeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Subtask::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| KnowledgeError::UnknownSubtask(s.to_string()))
    }
}

/// Catalog element a knowledge answer was read from.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct KnowledgeRef {
    pub table: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub column: Option<String>,
}

impl KnowledgeRef {
    fn table(table: &str) -> Self {
        KnowledgeRef {
            table: table.to_string(),
            column: None,
        }
    }

    fn column(table: &str, column: &str) -> Self {
        KnowledgeRef {
            table: table.to_string(),
            column: Some(column.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnowledgeSample {
    pub subtask: Subtask,
    pub question: String,
    pub answer: String,
    pub provenance: Vec<KnowledgeRef>,
}

impl KnowledgeSample {
    /// Distinct provenance tables in first-seen order.
    pub fn tables(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for r in &self.provenance {
            if !out.contains(&r.table) {
                out.push(r.table.clone());
            }
        }
        out
    }
}

/// Question phrasing pools, one per subtask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Phrasings {
    pools: BTreeMap<Subtask, Vec<String>>,
}

impl Default for Phrasings {
    fn default() -> Self {
        let pools = Subtask::ALL
            .into_iter()
            .map(|t| (t, crate::diversify::parse_variant_file(t.builtin_phrasings())))
            .collect();
        Phrasings { pools }
    }
}

impl Phrasings {
    /// Replaces one subtask's pool after checking its placeholders.
    pub fn set(&mut self, subtask: Subtask, lines: Vec<String>) -> Result<(), KnowledgeError> {
        if lines.is_empty() {
            return Err(KnowledgeError::EmptyPhrasings { subtask });
        }
        for line in &lines {
            if let Some(p) = subtask.placeholders().iter().find(|p| !line.contains(*p)) {
                return Err(KnowledgeError::MissingPlaceholder {
                    subtask,
                    phrasing: line.clone(),
                    placeholder: p,
                });
            }
        }
        self.pools.insert(subtask, lines);
        Ok(())
    }

    pub fn pool(&self, subtask: Subtask) -> &[String] {
        &self.pools[&subtask]
    }
}

fn fill(template: &str, values: &[(&str, &str)]) -> String {
    values
        .iter()
        .fold(template.to_string(), |acc, (k, v)| acc.replace(k, v))
}

struct Emitter<'a, R: Rng> {
    subtask: Subtask,
    pool: &'a [String],
    rng: R,
    out: Vec<KnowledgeSample>,
}

impl<R: Rng> Emitter<'_, R> {
    fn push(&mut self, values: &[(&str, &str)], answer: String, provenance: Vec<KnowledgeRef>) {
        let phrasing = &self.pool[self.rng.random_range(0..self.pool.len())];
        self.out.push(KnowledgeSample {
            subtask: self.subtask,
            question: fill(phrasing, values),
            answer,
            provenance,
        });
    }
}

pub fn generate_knowledge(
    catalog: &Catalog,
    subtasks: &[Subtask],
    phrasings: &Phrasings,
    seed: u64,
) -> Result<Vec<KnowledgeSample>, KnowledgeError> {
    if subtasks.is_empty() {
        return Err(KnowledgeError::NoSubtasks);
    }
    let mut requested = subtasks.to_vec();
    requested.sort();
    requested.dedup();

    let mut samples = Vec::new();
    for subtask in requested {
        let mut e = Emitter {
            subtask,
            pool: phrasings.pool(subtask),
            rng: seed::rng(seed::derive(seed, subtask.as_str())),
            out: Vec::new(),
        };
        match subtask {
            Subtask::ColumnsOfTable => {
                for t in catalog.tables() {
                    let names: Vec<&str> = t.columns.iter().map(|c| c.name.as_str()).collect();
                    e.push(
                        &[("{table}", &t.name)],
                        names.join(", "),
                        vec![KnowledgeRef::table(&t.name)],
                    );
                }
            }
            Subtask::TableFromDescription => {
                for t in catalog.tables().iter().filter(|t| !t.description.is_empty()) {
                    e.push(
                        &[("{description}", &t.description)],
                        t.name.clone(),
                        vec![KnowledgeRef::table(&t.name)],
                    );
                }
            }
            Subtask::TableOfColumn => {
                for (column, owners) in catalog.column_owners() {
                    let owners: Vec<&str> = owners.into_iter().collect();
                    let provenance = owners.iter().map(|t| KnowledgeRef::column(t, column)).collect();
                    e.push(&[("{column}", column)], owners.join(", "), provenance);
                }
            }
            Subtask::DescribeTable => {
                for t in catalog.tables().iter().filter(|t| !t.description.is_empty()) {
                    e.push(
                        &[("{table}", &t.name)],
                        t.description.clone(),
                        vec![KnowledgeRef::table(&t.name)],
                    );
                }
            }
            Subtask::DescribeColumn => {
                for t in catalog.tables() {
                    for c in t.columns.iter().filter(|c| !c.description.is_empty()) {
                        e.push(
                            &[("{table}", &t.name), ("{column}", &c.name)],
                            c.description.clone(),
                            vec![KnowledgeRef::column(&t.name, &c.name)],
                        );
                    }
                }
            }
            Subtask::ColumnDatatype => {
                for t in catalog.tables() {
                    for c in &t.columns {
                        e.push(
                            &[("{table}", &t.name), ("{column}", &c.name)],
                            c.data_type.as_str().to_string(),
                            vec![KnowledgeRef::column(&t.name, &c.name)],
                        );
                    }
                }
            }
            Subtask::JoinRelationship => {
                for r in catalog.relationships() {
                    e.push(
                        &[("{table1}", &r.left_table), ("{table2}", &r.right_table)],
                        r.condition(),
                        vec![
                            KnowledgeRef::column(&r.left_table, &r.left_column),
                            KnowledgeRef::column(&r.right_table, &r.right_column),
                        ],
                    );
                }
            }
        }
        if e.out.is_empty() {
            log::warn!("knowledge subtask {subtask} produced no samples for this catalog");
        }
        samples.append(&mut e.out);
    }
    Ok(samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ddl::parse_ddl;

    #[test]
    fn builtin_pools_have_placeholders() {
        let p = Phrasings::default();
        for t in Subtask::ALL {
            let pool = p.pool(t).to_vec();
            assert!((3..=5).contains(&pool.len()), "{t}");
            Phrasings::default().set(t, pool).unwrap();
        }
    }

    #[test]
    fn datatype_answer_is_lowercase() {
        let catalog = parse_ddl("CREATE TABLE t (c INTEGER COMMENT 'daily sales amount')").unwrap();
        let out = generate_knowledge(&catalog, &[Subtask::ColumnDatatype], &Phrasings::default(), 1).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].answer, "integer");
        assert!(out[0].question.contains('c'));
    }

    #[test]
    fn no_relationships_no_join_samples() {
        let catalog = parse_ddl("CREATE TABLE t (c INTEGER)").unwrap();
        let out = generate_knowledge(&catalog, &[Subtask::JoinRelationship], &Phrasings::default(), 1).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn rejects_phrasing_without_placeholder() {
        let err = Phrasings::default()
            .set(Subtask::DescribeColumn, vec!["What is {column}?".into()])
            .unwrap_err();
        assert!(matches!(
            err,
            KnowledgeError::MissingPlaceholder {
                placeholder: "{table}",
                ..
            }
        ));
    }
}
