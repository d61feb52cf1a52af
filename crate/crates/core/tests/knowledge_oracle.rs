mod common;

use std::collections::BTreeSet;

use metasql_core::knowledge::{generate_knowledge, KnowledgeSample, Phrasings, Subtask};
use metasql_core::Catalog;

/// Recomputes a sample's answer from the catalog using only its provenance.
fn lookup(catalog: &Catalog, s: &KnowledgeSample) -> Option<String> {
    let first = s.provenance.first()?;
    let table = catalog.tables().iter().find(|t| t.name == first.table)?;
    let column = || table.columns.iter().find(|c| Some(&c.name) == first.column.as_ref());
    Some(match s.subtask {
        Subtask::ColumnsOfTable => table
            .columns
            .iter()
            .map(|c| c.name.clone())
            .collect::<Vec<_>>()
            .join(", "),
        Subtask::TableFromDescription => table.name.clone(),
        Subtask::DescribeTable => table.description.clone(),
        Subtask::DescribeColumn => column()?.description.clone(),
        Subtask::ColumnDatatype => column()?.data_type.as_str().to_string(),
        Subtask::TableOfColumn => {
            let name = first.column.as_ref()?;
            let mut owners: Vec<&str> = catalog
                .tables()
                .iter()
                .filter(|t| t.columns.iter().any(|c| &c.name == name))
                .map(|t| t.name.as_str())
                .collect();
            owners.sort_unstable();
            owners.join(", ")
        }
        Subtask::JoinRelationship => {
            let second = s.provenance.get(1)?;
            let r = catalog.relationships().iter().find(|r| {
                r.left_table == first.table
                    && Some(&r.left_column) == first.column.as_ref()
                    && r.right_table == second.table
                    && Some(&r.right_column) == second.column.as_ref()
            })?;
            format!(
                "{}.{} = {}.{}",
                r.left_table, r.left_column, r.right_table, r.right_column
            )
        }
    })
}

fn generate(catalog: &Catalog, seed: u64) -> Vec<KnowledgeSample> {
    generate_knowledge(catalog, &Subtask::ALL, &Phrasings::default(), seed).unwrap()
}

#[test]
fn every_answer_is_reproduced_by_lookup() {
    let catalog = common::catalog();
    let samples = generate(&catalog, 7);
    for s in &samples {
        assert_eq!(lookup(&catalog, s).as_deref(), Some(s.answer.as_str()), "{s:?}");
    }
    let subtasks: BTreeSet<Subtask> = samples.iter().map(|s| s.subtask).collect();
    assert_eq!(subtasks.len(), 7);
}

#[test]
fn coverage_law_on_fixture() {
    let catalog = common::catalog();
    let distinct: BTreeSet<&str> = catalog
        .tables()
        .iter()
        .flat_map(|t| t.columns.iter().map(|c| c.name.as_str()))
        .collect();
    let columns: usize = catalog.tables().iter().map(|t| t.columns.len()).sum();
    let expected = catalog.tables().len() * 3 + distinct.len() + 2 * columns + catalog.relationships().len();
    assert_eq!(generate(&catalog, 1).len(), expected);
}

#[test]
fn shared_column_lists_all_owners() {
    let catalog = common::catalog();
    let s = generate(&catalog, 3)
        .into_iter()
        .find(|s| s.subtask == Subtask::TableOfColumn && s.provenance[0].column.as_deref() == Some("product_id"))
        .unwrap();
    assert_eq!(s.answer, "inventory, products, promotions, sales");
}

#[test]
fn questions_use_the_phrasing_pool() {
    let catalog = common::catalog();
    let phrasings = Phrasings::default();
    for s in generate(&catalog, 11) {
        let pool = phrasings.pool(s.subtask);
        let prefix_match = pool.iter().any(|p| {
            let head = p.split('{').next().unwrap();
            s.question.starts_with(head)
        });
        assert!(prefix_match, "{}", s.question);
        assert!(!s.question.contains('{'));
    }
}

#[test]
fn deterministic_under_seed() {
    let catalog = common::catalog();
    assert_eq!(generate(&catalog, 5), generate(&catalog, 5));
    let a: Vec<String> = generate(&catalog, 5).into_iter().map(|s| s.question).collect();
    let b: Vec<String> = generate(&catalog, 6).into_iter().map(|s| s.question).collect();
    assert_ne!(a, b);
}

#[test]
fn descriptions_missing_everywhere_yield_empty_subtasks() {
    let catalog = metasql_core::ddl::parse_ddl("CREATE TABLE t (c INTEGER)").unwrap();
    for subtask in [
        Subtask::TableFromDescription,
        Subtask::DescribeTable,
        Subtask::DescribeColumn,
    ] {
        assert!(generate_knowledge(&catalog, &[subtask], &Phrasings::default(), 0)
            .unwrap()
            .is_empty());
    }
}
