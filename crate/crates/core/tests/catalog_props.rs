mod common;

use std::collections::BTreeSet;

use metasql_core::catalog::{Catalog, ColumnDef, DataType, Relationship, RelationshipKind, TableDef};
use metasql_core::ddl::parse_ddl;
use metasql_core::schema::{self, block_columns, parse_block, schema_context, SchemaMode};
use metasql_core::ColumnRef;
use proptest::prelude::*;

fn ident() -> impl Strategy<Value = String> {
    "[a-z]{1,3}_[a-z0-9]{1,5}"
}

fn description() -> impl Strategy<Value = String> {
    prop_oneof![Just(String::new()), "[a-zA-Z][a-zA-Z0-9 ]{0,20}[a-zA-Z0-9]"]
}

fn column() -> impl Strategy<Value = ColumnDef> {
    (
        ident(),
        prop::sample::select(DataType::ALL.to_vec()),
        description(),
        any::<bool>(),
        any::<bool>(),
    )
        .prop_map(
            |(name, data_type, description, is_filter, is_metric_component)| ColumnDef {
                name,
                data_type,
                description,
                is_filter,
                is_metric_component,
            },
        )
}

fn catalog() -> impl Strategy<Value = Catalog> {
    prop::collection::vec((ident(), description(), prop::collection::vec(column(), 1..6)), 1..5).prop_map(|raw| {
        let mut names = BTreeSet::new();
        let tables: Vec<TableDef> = raw
            .into_iter()
            .filter(|(name, _, _)| names.insert(name.clone()))
            .map(|(name, description, cols)| {
                let mut seen = BTreeSet::new();
                let columns = cols.into_iter().filter(|c| seen.insert(c.name.clone())).collect();
                TableDef {
                    name,
                    description,
                    columns,
                }
            })
            .collect();
        let relationships = tables
            .windows(2)
            .map(|w| Relationship {
                left_table: w[0].name.clone(),
                left_column: w[0].columns[0].name.clone(),
                right_table: w[1].name.clone(),
                right_column: w[1].columns[0].name.clone(),
                kind: RelationshipKind::EquiJoin,
            })
            .collect();
        Catalog::new(tables, relationships).unwrap()
    })
}

/// Test-side DDL writer, independent of the parser under test.
fn to_ddl(catalog: &Catalog) -> String {
    let mut out = String::new();
    for t in catalog.tables() {
        if !t.description.is_empty() {
            out.push_str(&format!("-- {}\n", t.description));
        }
        let cols: Vec<String> = t
            .columns
            .iter()
            .map(|c| {
                let ty = c.data_type.as_str().to_uppercase();
                if c.description.is_empty() {
                    format!("  {} {}", c.name, ty)
                } else {
                    format!("  {} {} COMMENT '{}'", c.name, ty, c.description)
                }
            })
            .collect();
        out.push_str(&format!("CREATE TABLE {} (\n{}\n);\n\n", t.name, cols.join(",\n")));
    }
    out
}

fn anchor_from(catalog: &Catalog, picks: &[usize]) -> BTreeSet<ColumnRef> {
    let all: Vec<ColumnRef> = catalog.column_refs().collect();
    picks.iter().map(|i| all[i % all.len()].clone()).collect()
}

proptest! {
    #[test]
    fn json_roundtrip(c in catalog()) {
        prop_assert_eq!(Catalog::from_json(&c.to_json()).unwrap(), c);
    }

    #[test]
    fn ddl_roundtrip_preserves_tables(c in catalog()) {
        let parsed = parse_ddl(&to_ddl(&c)).unwrap();
        let strip = |cat: &Catalog| -> Vec<TableDef> {
            cat.tables()
                .iter()
                .map(|t| TableDef {
                    columns: t
                        .columns
                        .iter()
                        .map(|col| ColumnDef::new(&col.name, col.data_type).with_description(&col.description))
                        .collect(),
                    ..t.clone()
                })
                .collect()
        };
        prop_assert_eq!(strip(&parsed), strip(&c));
    }

    #[test]
    fn exact_block_is_the_anchor(c in catalog(), picks in prop::collection::vec(any::<usize>(), 1..6), seed in any::<u64>()) {
        let anchor = anchor_from(&c, &picks);
        let block = schema_context(&c, SchemaMode::Exact, &anchor, seed, None).unwrap();
        prop_assert_eq!(block_columns(&block).unwrap(), anchor);
    }

    #[test]
    fn dynamic_block_is_bounded(
        c in catalog(),
        picks in prop::collection::vec(any::<usize>(), 1..6),
        seed in any::<u64>(),
        budget in prop::option::of(0usize..40),
    ) {
        let anchor = anchor_from(&c, &picks);
        let block = schema_context(&c, SchemaMode::Dynamic, &anchor, seed, budget).unwrap();
        let shown = block_columns(&block).unwrap();
        let all: BTreeSet<ColumnRef> = c.column_refs().collect();
        prop_assert!(anchor.is_subset(&shown));
        prop_assert!(shown.is_subset(&all));
        let cap = budget.unwrap_or_else(|| schema::default_dynamic_budget(anchor.len(), &c));
        prop_assert_eq!(shown.len(), cap.clamp(anchor.len(), all.len()));
        prop_assert_eq!(schema_context(&c, SchemaMode::Dynamic, &anchor, seed, budget).unwrap(), block);
    }

    #[test]
    fn block_keeps_types_and_descriptions(c in catalog()) {
        let block = schema_context(&c, SchemaMode::Full, &BTreeSet::new(), 0, None).unwrap();
        let parsed = parse_block(&block).unwrap();
        for t in c.tables() {
            let cols = &parsed[&t.name];
            prop_assert_eq!(cols.len(), t.columns.len());
            for (got, want) in cols.iter().zip(&t.columns) {
                prop_assert_eq!(&got.name, &want.name);
                prop_assert_eq!(got.data_type, want.data_type);
                prop_assert_eq!(&got.description, &want.description);
            }
        }
    }
}

#[test]
fn full_mode_names_every_fixture_table() {
    let c = common::catalog();
    let block = schema_context(&c, SchemaMode::Full, &BTreeSet::new(), 1, None).unwrap();
    for t in c.tables() {
        assert!(block.contains(&format!("CREATE TABLE {} (", t.name)));
    }
    assert_eq!(c.tables().len(), 5);
}

#[test]
fn fixture_has_no_column_named_like_a_table() {
    let c = common::catalog();
    let tables: BTreeSet<&str> = c.tables().iter().map(|t| t.name.as_str()).collect();
    assert!(c.column_refs().all(|r| !tables.contains(r.column.as_str())));
}
