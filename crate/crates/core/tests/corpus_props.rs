mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

use metasql_core::corpus::{assemble, split_balanced, stratum_quotas, subset_ladder, AssembleInput, FamilyStructures};
use metasql_core::knowledge::{generate_knowledge, Phrasings};
use metasql_core::{Catalog, Corpus, InstructionPool, PromptStructure, QaPair, SchemaMode, Split, Subtask, TaskType};
use proptest::prelude::*;

struct Fixture {
    catalog: Catalog,
    qa: Vec<QaPair>,
    pool: InstructionPool,
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| Fixture {
        catalog: common::catalog(),
        qa: common::qa(),
        pool: common::pool(8),
    })
}

fn schema_only(f: &Fixture, qa: &[QaPair], seed: u64) -> Corpus {
    assemble(&AssembleInput {
        catalog: &f.catalog,
        qa,
        include_schema: true,
        cot: None,
        knowledge: None,
        structures: FamilyStructures::default(),
        schema_mode: SchemaMode::Exact,
        dynamic_budget: None,
        pool: &f.pool,
        seed,
    })
    .unwrap()
}

fn per_table(c: &Corpus) -> BTreeMap<String, usize> {
    let mut counts = BTreeMap::new();
    for s in &c.samples {
        *counts.entry(s.meta.stratum().to_string()).or_insert(0) += 1;
    }
    counts
}

#[test]
fn counting_law_for_all_families() {
    let f = fixture();
    let cot = common::cot_answers(&f.catalog, &f.qa);
    let kn = generate_knowledge(&f.catalog, &Subtask::ALL, &Phrasings::default(), 3).unwrap();
    let corpus = assemble(&AssembleInput {
        catalog: &f.catalog,
        qa: &f.qa,
        include_schema: true,
        cot: Some(&cot),
        knowledge: Some(&kn),
        structures: FamilyStructures::default(),
        schema_mode: SchemaMode::Exact,
        dynamic_budget: None,
        pool: &f.pool,
        seed: 3,
    })
    .unwrap();
    assert_eq!(corpus.len(), 2 * f.qa.len() + kn.len());
    let count = |t: TaskType| corpus.samples.iter().filter(|s| s.meta.task_type == t).count();
    assert_eq!(count(TaskType::Schema), f.qa.len());
    assert_eq!(count(TaskType::Cot), f.qa.len());
    assert_eq!(count(TaskType::Knowledge), kn.len());
    assert_eq!(corpus.ids().len(), corpus.len());
    for s in &corpus.samples {
        match s.meta.task_type {
            TaskType::Cot => assert!(!s.system.contains("CREATE TABLE")),
            TaskType::Schema => assert!(s.system.contains("CREATE TABLE")),
            TaskType::Knowledge => assert!(s.instruction.is_empty()),
        }
    }
}

#[test]
fn schema_only_subset_keeps_its_size() {
    let f = fixture();
    let corpus = schema_only(f, &f.qa[..24], 1);
    assert_eq!(corpus.len(), 24);
    assert!(corpus.samples.iter().all(|s| s.meta.task_type == TaskType::Schema));
}

#[test]
fn instructions_come_from_the_pool() {
    let f = fixture();
    let corpus = schema_only(f, &f.qa, 9);
    let used: BTreeSet<usize> = corpus
        .samples
        .iter()
        .map(|s| s.meta.instruction_variant.unwrap())
        .collect();
    assert_eq!(used.len(), f.pool.len());
    for s in &corpus.samples {
        assert_eq!(s.instruction, f.pool.variants[s.meta.instruction_variant.unwrap()]);
    }
}

#[test]
fn exact_schema_covers_gold_columns() {
    let f = fixture();
    let corpus = schema_only(f, &f.qa, 2);
    for (s, q) in corpus.samples.iter().zip(&f.qa) {
        let block = s.system.split_once("\nSchema: ").unwrap().1;
        let shown = metasql_core::schema::block_columns(block).unwrap();
        let used = metasql_core::sql::analyze_sql(&q.answer_sql, &f.catalog)
            .unwrap()
            .columns;
        assert!(used.iter().all(|c| shown.contains(c)), "{}", s.meta.sample_id);
    }
}

#[test]
fn balanced_split_on_fixture() {
    let f = fixture();
    let corpus = schema_only(f, &f.qa, 20240611);
    let (train, test) = split_balanced(&corpus, 500, 20240611).unwrap();
    assert_eq!(test.len(), 500);
    assert_eq!(train.len() + test.len(), corpus.len());
    assert!(train.ids().is_disjoint(&test.ids()));
    assert!(per_table(&test).values().all(|&n| n == 100), "{:?}", per_table(&test));
    assert_eq!(test.split, Split::Test);
}

#[test]
fn stratum_too_small_is_reported() {
    let f = fixture();
    let corpus = schema_only(f, &f.qa, 1);
    assert!(split_balanced(&corpus, 5 * 151, 1).is_err());
}

#[test]
fn ladder_is_nested_on_fixture() {
    let f = fixture();
    let corpus = schema_only(f, &f.qa, 4);
    let (train, _) = split_balanced(&corpus, 500, 4).unwrap();
    assert_eq!(train.len(), 478);
    assert!(subset_ladder(&train, &[250, 500], 4).is_err());
    let rungs = subset_ladder(&train, &[100, 250, 400], 4).unwrap();
    for pair in rungs.windows(2) {
        assert!(pair[0].ids().is_subset(&pair[1].ids()));
    }
    assert_eq!(rungs.iter().map(Corpus::len).collect::<Vec<_>>(), vec![100, 250, 400]);
}

#[test]
fn jsonl_round_trip_every_structure() {
    let f = fixture();
    for structure in [
        PromptStructure::MetaSchema,
        PromptStructure::BasePrompt1,
        PromptStructure::BasePrompt2,
    ] {
        let corpus = assemble(&AssembleInput {
            catalog: &f.catalog,
            qa: &f.qa[..40],
            include_schema: true,
            cot: None,
            knowledge: None,
            structures: FamilyStructures {
                schema: structure,
                ..FamilyStructures::default()
            },
            schema_mode: SchemaMode::Full,
            dynamic_budget: None,
            pool: &f.pool,
            seed: 8,
        })
        .unwrap();
        let text = corpus.to_jsonl().unwrap();
        let back = Corpus::from_jsonl(&text, Split::Train, corpus.generation_config.clone()).unwrap();
        assert_eq!(back, corpus, "{structure}");
    }
}

#[test]
fn incompatible_structure_is_rejected() {
    let f = fixture();
    let result = assemble(&AssembleInput {
        catalog: &f.catalog,
        qa: &f.qa[..2],
        include_schema: true,
        cot: None,
        knowledge: None,
        structures: FamilyStructures {
            schema: PromptStructure::MetaKnowledge,
            ..FamilyStructures::default()
        },
        schema_mode: SchemaMode::Exact,
        dynamic_budget: None,
        pool: &f.pool,
        seed: 0,
    });
    assert!(result.is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn quotas_sum_and_differ_by_at_most_one(n in 1usize..12, test_size in 0usize..500) {
        let names: Vec<String> = (0..n).map(|i| format!("t{i:02}")).collect();
        let q = stratum_quotas(names.iter().map(String::as_str), test_size);
        prop_assert_eq!(q.values().sum::<usize>(), test_size);
        let (lo, hi) = (q.values().min().unwrap(), q.values().max().unwrap());
        prop_assert!(hi - lo <= 1);
    }

    #[test]
    fn split_and_ladder_invariants(seed in any::<u64>(), per in 0usize..=20, take in 0usize..100) {
        let f = fixture();
        let corpus = schema_only(f, &f.qa[..120], seed);
        let strata = per_table(&corpus).len();
        let test_size = per.min(corpus.len() / strata / 2) * strata;
        let (train, test) = split_balanced(&corpus, test_size, seed).unwrap();
        prop_assert!(train.ids().is_disjoint(&test.ids()));
        prop_assert_eq!(train.len() + test.len(), corpus.len());
        prop_assert_eq!(test.len(), test_size);

        let small = take.min(train.len());
        let big = (small + 37).min(train.len());
        let rungs = subset_ladder(&train, &[small, big], seed).unwrap();
        prop_assert!(rungs[0].ids().is_subset(&rungs[1].ids()));
        prop_assert!(rungs[1].ids().is_subset(&train.ids()));

        let again = split_balanced(&corpus, test_size, seed).unwrap();
        prop_assert_eq!(again.1.ids(), test.ids());
    }
}
