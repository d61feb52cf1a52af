use std::path::PathBuf;

use metasql_eval::{evaluate, rows_equivalent, Cell, Database, EvalCase, EvalSettings, Outcome, ResultSet};
use proptest::prelude::*;
use serde::Deserialize;

fn cell() -> impl Strategy<Value = Cell> {
    prop_oneof![
        Just(Cell::Null),
        (-5i64..5).prop_map(Cell::Integer),
        (-5i64..5).prop_map(|i| Cell::Real(i as f64 / 2.0)),
        "[ab]{0,2}".prop_map(Cell::Text),
    ]
}

fn result_set() -> impl Strategy<Value = ResultSet> {
    (1usize..3).prop_flat_map(|w| {
        prop::collection::vec(prop::collection::vec(cell(), w), 0..5).prop_map(move |rows| ResultSet::new(w, rows))
    })
}

proptest! {
    #[test]
    fn reflexive_and_symmetric(a in result_set(), b in result_set(), ordered in any::<bool>()) {
        prop_assert!(rows_equivalent(&a, &a, ordered));
        prop_assert_eq!(rows_equivalent(&a, &b, ordered), rows_equivalent(&b, &a, ordered));
    }

    #[test]
    fn transitive_on_exact_values(a in result_set(), b in result_set(), c in result_set(), ordered in any::<bool>()) {
        if rows_equivalent(&a, &b, ordered) && rows_equivalent(&b, &c, ordered) {
            prop_assert!(rows_equivalent(&a, &c, ordered));
        }
    }

    #[test]
    fn unordered_ignores_row_permutation(a in result_set(), seed in any::<u64>()) {
        let mut rows = a.rows.clone();
        let n = rows.len();
        if n > 1 {
            rows.rotate_left((seed as usize) % n);
        }
        let b = ResultSet::new(a.column_count, rows);
        prop_assert!(rows_equivalent(&a, &b, false));
    }

    #[test]
    fn dropping_a_row_breaks_equivalence(a in result_set(), ordered in any::<bool>()) {
        prop_assume!(!a.rows.is_empty());
        let mut fewer = a.clone();
        fewer.rows.pop();
        prop_assert!(!rows_equivalent(&a, &fewer, ordered));
    }
}

#[derive(Deserialize)]
struct Labeled {
    #[serde(flatten)]
    case: EvalCase,
    expected: Outcome,
}

fn fixture(rel: &str) -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures/retail")
        .join(rel);
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn oracle_verdicts_and_recount() {
    let labeled: Vec<Labeled> = fixture("eval_oracle.jsonl")
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    let db = Database::from_seed_script(&fixture("seed.sql"), "retail").unwrap();
    let cases: Vec<EvalCase> = labeled.iter().map(|l| l.case.clone()).collect();
    let report = evaluate(&cases, &db, &EvalSettings::default()).unwrap();
    for v in &report.cases {
        let want = labeled.iter().find(|l| l.case.id == v.id).unwrap().expected;
        assert_eq!(v.outcome, want, "{}", v.id);
        if v.outcome == Outcome::PredictedError {
            assert!(!v.error_detail.as_deref().unwrap_or("").is_empty(), "{}", v.id);
        }
    }
    let mean = report.cases.iter().filter(|v| v.outcome == Outcome::Match).count() as f64 / report.cases.len() as f64;
    assert_eq!(report.execution_accuracy, mean);
}

#[test]
fn gold_against_itself_is_perfect() {
    let db = Database::from_seed_script(&fixture("seed.sql"), "retail").unwrap();
    let cases: Vec<EvalCase> = fixture("eval_oracle.jsonl")
        .lines()
        .map(|l| {
            let c: EvalCase = serde_json::from_str(l).unwrap();
            EvalCase {
                predicted_sql: c.gold_sql.clone(),
                ..c
            }
        })
        .collect();
    assert_eq!(
        evaluate(&cases, &db, &EvalSettings::default())
            .unwrap()
            .execution_accuracy,
        1.0
    );
}

#[test]
fn gold_failure_halts() {
    let db = Database::from_seed_script("CREATE TABLE t (x INTEGER);", "d").unwrap();
    let cases = [EvalCase::new("a", "SELECT x FROM t", "SELECT nope FROM t", "d")];
    assert!(evaluate(&cases, &db, &EvalSettings::default()).is_err());
    let wrong_db = [EvalCase::new("a", "SELECT x FROM t", "SELECT x FROM t", "other")];
    assert!(evaluate(&wrong_db, &db, &EvalSettings::default())
        .unwrap_err()
        .is_environment());
}
