use metasql_wasm::{analyze_json, render_prompt_text, schema_context_json, structures};
use serde_json::Value;

fn json(text: &str) -> Value {
    serde_json::from_str(text).unwrap()
}

#[test]
fn exact_context_shows_only_anchor() {
    let v = json(&schema_context_json("", "exact", "sales.revenue, stores.region", 1).unwrap());
    assert_eq!(v["tables"], 2);
    assert_eq!(v["columns"], 2);
    assert!(v["block"].as_str().unwrap().contains("CREATE TABLE sales"));
}

#[test]
fn full_and_dynamic_contexts() {
    let full = json(&schema_context_json("", "full", "", 0).unwrap());
    assert_eq!(full["tables"], 5);
    let a = schema_context_json("", "dynamic", "sales.revenue", 9).unwrap();
    let b = schema_context_json("", "dynamic", "sales.revenue", 9).unwrap();
    assert_eq!(a, b);
    let cols = json(&a)["columns"].as_u64().unwrap();
    assert!(cols >= 1 && cols <= full["columns"].as_u64().unwrap());
}

#[test]
fn context_errors_are_messages() {
    assert!(schema_context_json("", "partial", "", 0)
        .unwrap_err()
        .contains("partial"));
    assert!(schema_context_json("", "exact", "revenue", 0).is_err());
    assert!(schema_context_json("{", "exact", "", 0).is_err());
}

#[test]
fn analysis_and_cot() {
    let v = json(
        &analyze_json(
            "",
            "SELECT s.region, SUM(x.revenue) FROM sales x JOIN stores s ON x.store_id = s.store_id GROUP BY s.region ORDER BY 2 DESC",
        )
        .unwrap(),
    );
    assert_eq!(v["tables"], serde_json::json!(["sales", "stores"]));
    assert_eq!(v["joins"], serde_json::json!(["sales.store_id = stores.store_id"]));
    assert_eq!(v["ordered"], true);
    assert!(v["cot_answer"]
        .as_str()
        .unwrap()
        .starts_with("1. Tables: sales, stores\n"));
    assert!(analyze_json("", "SELEC 1").is_err());
}

#[test]
fn render_each_structure() {
    let with = r#"{"system":"Assistant claimer: SQL expert","instruction":"Use SQL.","question":"How many stores?","answer":"SELECT COUNT(*) FROM stores"}"#;
    let without = r#"{"system":"CREATE TABLE stores (store_id INTEGER)","question":"How many stores?","answer":"SELECT COUNT(*) FROM stores"}"#;
    for s in structures() {
        let takes_instruction = !matches!(s, "meta_knowledge" | "base_prompt_2");
        let text = render_prompt_text(s, if takes_instruction { with } else { without }).unwrap();
        assert!(text.contains("How many stores?"), "{s}");
        assert!(
            render_prompt_text(s, if takes_instruction { without } else { with }).is_err(),
            "{s}"
        );
    }
    assert!(render_prompt_text("meta_schema", r#"{"question":"<s>"}"#).is_err());
}
