//! Golden question/SQL templates expanded over metric and filter sets.
//!
//! Templates use three placeholders: `{metric}` (the metric's question
//! phrase in the question, its SQL fragment in the SQL), `{filter}` (the
//! filter's question phrase / SQL literal) and `{filter_column}` (the
//! filter's column name). Every template is expanded over the cross product
//! of its applicable metrics and filters; with no restrictions the output has
//! `templates × metrics × filters` pairs.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{Catalog, ColumnRef};
use crate::sql;

pub const METRIC: &str = "{metric}";
pub const FILTER: &str = "{filter}";
pub const FILTER_COLUMN: &str = "{filter_column}";

#[derive(Debug, Error)]
pub enum TemplateError {
    #[error("template `{template}`: {message}")]
    Invalid { template: String, message: String },
    #[error("template `{template}` uses {placeholder} but has no {set} to substitute")]
    MissingSubstitution {
        template: String,
        placeholder: &'static str,
        set: &'static str,
    },
    #[error("template `{template}` with metric `{metric}` and filter `{filter}` yields unparseable SQL: {source}")]
    UnparseableSql {
        template: String,
        metric: String,
        filter: String,
        source: sql::SqlError,
    },
    #[error("duplicate {kind} id `{id}`")]
    DuplicateId { kind: &'static str, id: String },
    #[error("{kind} `{id}`: {message}")]
    InvalidDefinition {
        kind: &'static str,
        id: String,
        message: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricDef {
    pub id: String,
    pub question_phrase: String,
    pub sql_fragment: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterValue {
    pub id: String,
    pub column_ref: ColumnRef,
    pub question_phrase: String,
    pub sql_literal: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplatePair {
    pub template_id: String,
    pub question_template: String,
    pub sql_template: String,
    /// Metric ids this template accepts; empty means all.
    #[serde(default)]
    pub applicable_metrics: Vec<String>,
    /// Filter ids this template accepts; empty means all.
    #[serde(default)]
    pub applicable_filters: Vec<String>,
    /// Columns the SQL references. The first table listed is the template's
    /// primary table.
    pub anchor: Vec<ColumnRef>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaPair {
    pub question: String,
    pub answer_sql: String,
    pub template_id: String,
    pub metric_id: String,
    pub filter_id: String,
    pub anchor: Vec<ColumnRef>,
}

impl QaPair {
    /// Distinct anchor tables in anchor order.
    pub fn anchor_tables(&self) -> Vec<String> {
        let mut tables: Vec<String> = Vec::new();
        for col in &self.anchor {
            if !tables.contains(&col.table) {
                tables.push(col.table.clone());
            }
        }
        tables
    }

    pub fn anchor_set(&self) -> BTreeSet<ColumnRef> {
        self.anchor.iter().cloned().collect()
    }
}

fn uses_metric(text: &str) -> bool {
    text.contains(METRIC)
}

fn uses_filter(text: &str) -> bool {
    text.contains(FILTER) || text.contains(FILTER_COLUMN)
}

/// Any `{word}` that is not one of the three known placeholders.
fn unknown_placeholder(text: &str) -> Option<String> {
    let mut rest = text;
    while let Some(start) = rest.find('{') {
        let after = &rest[start + 1..];
        let Some(end) = after.find('}') else { break };
        let word = &after[..end];
        let candidate = format!("{{{word}}}");
        if !word.is_empty()
            && word.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
            && ![METRIC, FILTER, FILTER_COLUMN].contains(&candidate.as_str())
        {
            return Some(candidate);
        }
        rest = &after[end + 1..];
    }
    None
}

fn invalid(template: &TemplatePair, message: impl Into<String>) -> TemplateError {
    TemplateError::Invalid {
        template: template.template_id.clone(),
        message: message.into(),
    }
}

/// Checks a template set against the catalog and the metric/filter sets.
pub fn validate(
    catalog: &Catalog,
    templates: &[TemplatePair],
    metrics: &[MetricDef],
    filters: &[FilterValue],
) -> Result<(), TemplateError> {
    let mut metric_ids = BTreeSet::new();
    for m in metrics {
        if !metric_ids.insert(m.id.as_str()) {
            return Err(TemplateError::DuplicateId {
                kind: "metric",
                id: m.id.clone(),
            });
        }
        if m.question_phrase.trim().is_empty() || m.sql_fragment.trim().is_empty() {
            return Err(TemplateError::InvalidDefinition {
                kind: "metric",
                id: m.id.clone(),
                message: "question_phrase and sql_fragment must be non-empty".into(),
            });
        }
    }
    let mut filter_ids = BTreeSet::new();
    for f in filters {
        if !filter_ids.insert(f.id.as_str()) {
            return Err(TemplateError::DuplicateId {
                kind: "filter",
                id: f.id.clone(),
            });
        }
        if !catalog.contains(&f.column_ref) {
            return Err(TemplateError::InvalidDefinition {
                kind: "filter",
                id: f.id.clone(),
                message: format!("column `{}` is not in the catalog", f.column_ref),
            });
        }
    }
    let mut template_ids = BTreeSet::new();
    for t in templates {
        if !template_ids.insert(t.template_id.as_str()) {
            return Err(TemplateError::DuplicateId {
                kind: "template",
                id: t.template_id.clone(),
            });
        }
        check_placeholders(t)?;
        if t.anchor.is_empty() {
            return Err(invalid(t, "anchor is empty"));
        }
        if let Some(col) = t.anchor.iter().find(|c| !catalog.contains(c)) {
            return Err(invalid(t, format!("anchor column `{col}` is not in the catalog")));
        }
        if let Some(id) = t.applicable_metrics.iter().find(|id| !metric_ids.contains(id.as_str())) {
            return Err(invalid(t, format!("unknown applicable metric `{id}`")));
        }
        if let Some(id) = t.applicable_filters.iter().find(|id| !filter_ids.contains(id.as_str())) {
            return Err(invalid(t, format!("unknown applicable filter `{id}`")));
        }
    }
    Ok(())
}

/// Placeholder families must agree between question and SQL; `{filter_column}`
/// counts as part of the filter family.
fn check_placeholders(t: &TemplatePair) -> Result<(), TemplateError> {
    for text in [&t.question_template, &t.sql_template] {
        if let Some(p) = unknown_placeholder(text) {
            return Err(invalid(t, format!("unknown placeholder {p}")));
        }
    }
    if uses_metric(&t.question_template) != uses_metric(&t.sql_template) {
        return Err(invalid(t, "{metric} must appear in both question and SQL or neither"));
    }
    if uses_filter(&t.question_template) != uses_filter(&t.sql_template) {
        return Err(invalid(t, "{filter} must appear in both question and SQL or neither"));
    }
    Ok(())
}

fn applicable<'a, T>(wanted: &[String], all: &'a BTreeMap<&'a str, &'a T>) -> Vec<(&'a str, &'a T)> {
    if wanted.is_empty() {
        all.iter().map(|(k, v)| (*k, *v)).collect()
    } else {
        let wanted: BTreeSet<&str> = wanted.iter().map(String::as_str).collect();
        all.iter()
            .filter(|(k, _)| wanted.contains(*k))
            .map(|(k, v)| (*k, *v))
            .collect()
    }
}

/// Expands every template over its applicable metric × filter product.
///
/// Output order is template id, then metric id, then filter id. Each
/// expanded SQL must parse.
pub fn expand(
    templates: &[TemplatePair],
    metrics: &[MetricDef],
    filters: &[FilterValue],
) -> Result<Vec<QaPair>, TemplateError> {
    let metric_map: BTreeMap<&str, &MetricDef> = metrics.iter().map(|m| (m.id.as_str(), m)).collect();
    let filter_map: BTreeMap<&str, &FilterValue> = filters.iter().map(|f| (f.id.as_str(), f)).collect();
    let mut ordered: Vec<&TemplatePair> = templates.iter().collect();
    ordered.sort_by(|a, b| a.template_id.cmp(&b.template_id));

    let mut out = Vec::new();
    for t in ordered {
        check_placeholders(t)?;
        let ms = applicable(&t.applicable_metrics, &metric_map);
        let fs = applicable(&t.applicable_filters, &filter_map);
        if ms.is_empty() {
            return Err(TemplateError::MissingSubstitution {
                template: t.template_id.clone(),
                placeholder: METRIC,
                set: "metric",
            });
        }
        if fs.is_empty() {
            return Err(TemplateError::MissingSubstitution {
                template: t.template_id.clone(),
                placeholder: FILTER,
                set: "filter",
            });
        }
        for (metric_id, metric) in &ms {
            for (filter_id, filter) in &fs {
                let question = t
                    .question_template
                    .replace(METRIC, &metric.question_phrase)
                    .replace(FILTER_COLUMN, &filter.column_ref.column)
                    .replace(FILTER, &filter.question_phrase);
                let answer_sql = t
                    .sql_template
                    .replace(METRIC, &metric.sql_fragment)
                    .replace(FILTER_COLUMN, &filter.column_ref.column)
                    .replace(FILTER, &filter.sql_literal);
                sql::parse_statement(&answer_sql).map_err(|source| TemplateError::UnparseableSql {
                    template: t.template_id.clone(),
                    metric: metric_id.to_string(),
                    filter: filter_id.to_string(),
                    source,
                })?;
                let mut anchor: Vec<ColumnRef> = Vec::new();
                for col in &t.anchor {
                    if !anchor.contains(col) {
                        anchor.push(col.clone());
                    }
                }
                if uses_filter(&t.sql_template) && !anchor.contains(&filter.column_ref) {
                    anchor.push(filter.column_ref.clone());
                }
                out.push(QaPair {
                    question,
                    answer_sql,
                    template_id: t.template_id.clone(),
                    metric_id: metric_id.to_string(),
                    filter_id: filter_id.to_string(),
                    anchor,
                });
            }
        }
    }
    Ok(out)
}
