mod common;

use std::collections::BTreeSet;

use metasql_core::manifest::{build_manifest, catalog_hash};
use metasql_core::prompt::STRUCTURAL_TAGS;
use metasql_core::{Catalog, ColumnDef, DataType, PromptStructure, TableDef};
use proptest::prelude::*;

#[test]
fn fixture_manifest_counts() {
    let catalog = common::catalog();
    let m = build_manifest(&catalog, true).unwrap();
    let distinct: BTreeSet<&str> = catalog
        .tables()
        .iter()
        .flat_map(|t| t.columns.iter().map(|c| c.name.as_str()))
        .collect();
    assert_eq!(m.structural_tags.len(), 7);
    assert_eq!(m.metadata_tokens.len(), catalog.tables().len() + distinct.len());
    let unique: BTreeSet<&String> = m.structural_tags.iter().chain(&m.metadata_tokens).collect();
    assert_eq!(unique.len(), m.structural_tags.len() + m.metadata_tokens.len());
    assert_eq!(m.source_catalog_hash, catalog_hash(&catalog));
    assert_eq!(m.source_catalog_hash.len(), 64);
}

#[test]
fn renderer_tags_are_in_manifest() {
    let m = build_manifest(&common::catalog(), false).unwrap();
    for s in PromptStructure::ALL.into_iter().filter(|s| s.is_tagged()) {
        for tag in s.tags() {
            assert!(m.structural_tags.iter().any(|t| t == tag), "{s}: {tag}");
        }
    }
    assert!(m.metadata_tokens.is_empty());
}

#[test]
fn json_keys() {
    let m = build_manifest(&common::catalog(), true).unwrap();
    let v: serde_json::Value = serde_json::from_str(&m.to_json()).unwrap();
    assert!(v["special_tokens"].is_array());
    assert!(v["added_tokens"].is_array());
}

fn ident() -> impl Strategy<Value = String> {
    "[a-z]{1,4}"
}

proptest! {
    #[test]
    fn count_law_with_shared_names(tables in prop::collection::btree_map(ident(), prop::collection::btree_set(ident(), 1..5), 1..5)) {
        let defs: Vec<TableDef> = tables
            .iter()
            .map(|(t, cols)| TableDef {
                name: t.clone(),
                description: String::new(),
                columns: cols.iter().map(|c| ColumnDef::new(c.clone(), DataType::Text)).collect(),
            })
            .collect();
        let catalog = Catalog::new(defs, vec![]).unwrap();
        let m = build_manifest(&catalog, true).unwrap();
        let names: BTreeSet<&String> = tables.keys().chain(tables.values().flatten()).collect();
        prop_assert_eq!(m.metadata_tokens.len(), names.len());
        prop_assert!(m.metadata_tokens.iter().all(|t| !STRUCTURAL_TAGS.contains(&t.as_str())));
    }
}
