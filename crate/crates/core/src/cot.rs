//! Chain-of-thought answers derived from gold SQL.
//!
//! An answer lists four numbered steps: the tables involved, the columns
//! used, the join columns (or `none`), and the final SQL in a fenced block.

use serde::{Deserialize, Serialize};

use crate::sql::SqlAnalysis;
use crate::template::QaPair;

/// The fixed instruction for chain-of-thought prompts.
pub const COT_INSTRUCTION: &str = "1. identify the related tables\n\
2. identify the columns used to solve the question\n\
3. identify the columns to join the tables\n\
4. generate SQL to solve the question";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CotAnswer {
    pub step_tables: String,
    pub step_columns: String,
    pub step_joins: String,
    pub final_sql: String,
}

impl CotAnswer {
    /// The answer text used as the prompt's answer block.
    pub fn render(&self) -> String {
        format!(
            "1. Tables: {}\n2. Columns: {}\n3. Join columns: {}\n4. SQL:\n```sql\n{}\n```",
            self.step_tables, self.step_columns, self.step_joins, self.final_sql
        )
    }
}

pub fn build_cot_answer(qa: &QaPair, analysis: &SqlAnalysis) -> CotAnswer {
    let columns: Vec<String> = analysis.columns.iter().map(ToString::to_string).collect();
    let joins: Vec<String> = analysis
        .join_pairs
        .iter()
        .map(|p| format!("{} = {}", p.left, p.right))
        .collect();
    CotAnswer {
        step_tables: analysis.tables.join(", "),
        step_columns: columns.join(", "),
        step_joins: if joins.is_empty() {
            "none".to_string()
        } else {
            joins.join("; ")
        },
        final_sql: qa.answer_sql.trim().to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::ColumnRef;
    use crate::ddl::parse_ddl;
    use crate::sql::analyze_sql;

    fn qa(sql: &str) -> QaPair {
        QaPair {
            question: "q".into(),
            answer_sql: sql.into(),
            template_id: "t".into(),
            metric_id: "m".into(),
            filter_id: "f".into(),
            anchor: vec![ColumnRef::new("a", "x")],
        }
    }

    #[test]
    fn single_table_has_no_joins() {
        let catalog = parse_ddl("CREATE TABLE a (x INTEGER)").unwrap();
        let pair = qa("SELECT x FROM a");
        let analysis = analyze_sql(&pair.answer_sql, &catalog).unwrap();
        let answer = build_cot_answer(&pair, &analysis);
        assert_eq!(answer.step_joins, "none");
        assert_eq!(answer.final_sql, "SELECT x FROM a");
        assert_eq!(
            answer.render(),
            "1. Tables: a\n2. Columns: a.x\n3. Join columns: none\n4. SQL:\n```sql\nSELECT x FROM a\n```"
        );
    }
}
