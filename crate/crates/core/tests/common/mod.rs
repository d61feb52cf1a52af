#![allow(dead_code)]

use std::path::PathBuf;

use metasql_core::{Catalog, FilterValue, MetricDef, TemplatePair};

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn read(rel: &str) -> String {
    let path = fixtures().join(rel);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

pub fn catalog() -> Catalog {
    Catalog::from_json(&read("retail/catalog.json")).unwrap()
}

pub fn templates() -> Vec<TemplatePair> {
    serde_json::from_str(&read("retail/templates.json")).unwrap()
}

pub fn metrics() -> Vec<MetricDef> {
    serde_json::from_str(&read("retail/metrics.json")).unwrap()
}

pub fn filters() -> Vec<FilterValue> {
    serde_json::from_str(&read("retail/filters.json")).unwrap()
}

pub fn qa() -> Vec<metasql_core::QaPair> {
    metasql_core::template::expand(&templates(), &metrics(), &filters()).unwrap()
}

pub fn cot_answers(catalog: &Catalog, qa: &[metasql_core::QaPair]) -> Vec<metasql_core::CotAnswer> {
    qa.iter()
        .map(|q| {
            let analysis = metasql_core::sql::analyze_sql(&q.answer_sql, catalog).unwrap();
            metasql_core::cot::build_cot_answer(q, &analysis)
        })
        .collect()
}

pub fn pool(k: usize) -> metasql_core::InstructionPool {
    let config: serde_json::Value = serde_json::from_str(&read("retail/config.json")).unwrap();
    let base = config["base_instruction"].as_str().unwrap();
    let lines = metasql_core::diversify::parse_variant_file(&read("retail/instruction_variants.txt"));
    metasql_core::diversify::build_pool(base, k, metasql_core::diversify::PoolSource::Static(lines)).unwrap()
}
