//! wasm-bindgen entry points for the static demo page in `www/`.
//!
//! Each export wraps an `*_json` function that returns `Result<String, String>`
//! so the logic can be tested natively.

use std::collections::BTreeSet;

use metasql_core::prompt::{self, PromptFields};
use metasql_core::{cot, schema, sql, Catalog, ColumnRef, PromptStructure, QaPair, SchemaMode};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Catalog used when the page passes an empty catalog.
pub const DEMO_CATALOG: &str = include_str!("../../../fixtures/retail/catalog.json");

fn load_catalog(text: &str) -> Result<Catalog, String> {
    let text = if text.trim().is_empty() { DEMO_CATALOG } else { text };
    Catalog::from_json(text).map_err(|e| e.to_string())
}

fn parse_anchor(text: &str) -> Result<BTreeSet<ColumnRef>, String> {
    text.split([',', '\n'])
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.split_once('.')
                .map(|(t, c)| ColumnRef::new(t.trim(), c.trim()))
                .ok_or_else(|| format!("expected table.column, got `{s}`"))
        })
        .collect()
}

#[derive(Serialize)]
struct ContextView {
    block: String,
    tables: usize,
    columns: usize,
}

/// Schema block for `anchor` (comma-separated `table.column`) in one mode.
pub fn schema_context_json(catalog: &str, mode: &str, anchor: &str, seed: u64) -> Result<String, String> {
    let catalog = load_catalog(catalog)?;
    let mode: SchemaMode = mode.parse().map_err(|e| format!("{e}"))?;
    let anchor = parse_anchor(anchor)?;
    let block = schema::schema_context(&catalog, mode, &anchor, seed, None).map_err(|e| e.to_string())?;
    let shown = schema::block_columns(&block).map_err(|e| e.to_string())?;
    let tables: BTreeSet<&str> = shown.iter().map(|c| c.table.as_str()).collect();
    let view = ContextView {
        tables: tables.len(),
        columns: shown.len(),
        block,
    };
    Ok(serde_json::to_string(&view).expect("view serializes"))
}

#[derive(Serialize)]
struct AnalysisView {
    tables: Vec<String>,
    columns: Vec<String>,
    joins: Vec<String>,
    ordered: bool,
    cot_answer: String,
}

/// Tables, columns and join pairs of a query, plus its four-step answer.
pub fn analyze_json(catalog: &str, query: &str) -> Result<String, String> {
    let catalog = load_catalog(catalog)?;
    let analysis = sql::analyze_sql(query, &catalog).map_err(|e| e.to_string())?;
    let qa = QaPair {
        question: String::new(),
        answer_sql: query.to_string(),
        template_id: String::new(),
        metric_id: String::new(),
        filter_id: String::new(),
        anchor: Vec::new(),
    };
    let view = AnalysisView {
        tables: analysis.tables.clone(),
        columns: analysis.columns.iter().map(ToString::to_string).collect(),
        joins: analysis
            .join_pairs
            .iter()
            .map(|p| format!("{} = {}", p.left, p.right))
            .collect(),
        ordered: sql::has_outer_order_by(query).unwrap_or(false),
        cot_answer: cot::build_cot_answer(&qa, &analysis).render(),
    };
    Ok(serde_json::to_string(&view).expect("view serializes"))
}

/// Renders `{system, instruction, question, answer}` into one structure.
pub fn render_prompt_text(structure: &str, fields: &str) -> Result<String, String> {
    let structure: PromptStructure = structure.parse().map_err(|e| format!("{e}"))?;
    let fields: PromptFields = serde_json::from_str(fields).map_err(|e| e.to_string())?;
    prompt::render_fields(&fields, structure).map_err(|e| e.to_string())
}

pub fn structures() -> Vec<&'static str> {
    PromptStructure::ALL.iter().map(|s| s.as_str()).collect()
}

#[wasm_bindgen]
pub fn schema_context(catalog: &str, mode: &str, anchor: &str, seed: u64) -> Result<String, JsError> {
    schema_context_json(catalog, mode, anchor, seed).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn analyze(catalog: &str, query: &str) -> Result<String, JsError> {
    analyze_json(catalog, query).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn render_prompt(structure: &str, fields: &str) -> Result<String, JsError> {
    render_prompt_text(structure, fields).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn demo_catalog() -> String {
    DEMO_CATALOG.to_string()
}
