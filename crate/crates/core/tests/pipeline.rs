use std::path::PathBuf;

use flexq_core::knowledge::{KnowledgeStore, Verdict};
use flexq_core::resolver::{MatchMethod, ResolveError};
use flexq_core::sqlgen::canonicalize_sql;
use flexq_core::{
    build_sql, execute, load_catalog, load_lexicon, parse, Lexicon, Resolver, ResolverConfig,
    SchemaCatalog,
};

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn setup() -> (SchemaCatalog, Lexicon) {
    let dir = fixtures();
    let cat = load_catalog(dir.join("catalog.json"), dir.join("data")).unwrap();
    let lex = load_lexicon(dir.join("lexicon.json")).unwrap();
    (cat, lex)
}

fn translate(q: &str) -> Result<String, String> {
    let (cat, lex) = setup();
    let ir = parse(q, &lex).map_err(|e| e.code().to_string())?;
    let rq = Resolver::new(&cat, &lex, ResolverConfig::default())
        .resolve(&ir)
        .map_err(|e| e.code().to_string())?;
    Ok(build_sql(&rq).text)
}

#[test]
fn orders_over_200_joins_details() {
    let (cat, lex) = setup();
    let ir = parse("Display the details of orders whose unit price is greater than 200", &lex).unwrap();
    let rq = Resolver::new(&cat, &lex, ResolverConfig::default()).resolve(&ir).unwrap();
    assert_eq!(
        canonicalize_sql(&build_sql(&rq).text),
        canonicalize_sql(
            "SELECT * FROM orders AS A, orderdetails AS B WHERE A.OrderID = B.OrderID AND B.UnitPrice > 200"
        )
    );
    let rs = execute(&rq, &cat).unwrap();
    let id = rs.column_index("orders", "OrderID").unwrap();
    let ids: Vec<&str> = rs.rows.iter().map(|r| r[id].display()).collect();
    assert_eq!(ids, ["10329", "10351", "10353", "10360", "10372", "10417"]);
}

#[test]
fn london_suppliers_match_case_insensitively() {
    let (cat, lex) = setup();
    let ir = parse("List supplier details where city is equal to London.", &lex).unwrap();
    let rq = Resolver::new(&cat, &lex, ResolverConfig::default()).resolve(&ir).unwrap();
    assert_eq!(build_sql(&rq).text, "SELECT * FROM suppliers AS A WHERE A.city = 'London'");
    let rs = execute(&rq, &cat).unwrap();
    let sno = rs.column_index("suppliers", "sno").unwrap();
    let ids: Vec<&str> = rs.rows.iter().map(|r| r[sno].display()).collect();
    assert_eq!(ids, ["S1", "S4", "S5", "S10"]);
}

#[test]
fn misspelled_table_binds_fuzzily() {
    let (cat, lex) = setup();
    let ir = parse("List suplier details where city is equal to London.", &lex).unwrap();
    let rq = Resolver::new(&cat, &lex, ResolverConfig::default()).resolve(&ir).unwrap();
    assert_eq!(rq.base_table.bound, "suppliers");
    assert_eq!(rq.base_table.method, MatchMethod::Fuzzy);
    assert_eq!(rq.base_table.distance, 2);
}

#[test]
fn symbolic_operator_and_no_criteria() {
    assert_eq!(
        translate("show suppliers where status >= 10").unwrap(),
        "SELECT * FROM suppliers AS A WHERE A.status >= 10"
    );
    assert_eq!(translate("list all suppliers").unwrap(), "SELECT * FROM suppliers AS A");
}

#[test]
fn error_codes_surface() {
    assert_eq!(translate("   ").unwrap_err(), "empty-query");
    assert_eq!(translate("where city equals London").unwrap_err(), "empty-display");
    assert_eq!(translate("list suppliers where city London").unwrap_err(), "no-operator-found");
    assert_eq!(translate("list suppliers where city equals").unwrap_err(), "missing-literal");
    assert_eq!(translate("list suppliers when city equals London").unwrap_err(), "unknown-conjunction");
    assert_eq!(translate("list zzzzzzz where city equals London").unwrap_err(), "unresolvable-table");
    assert_eq!(translate("list suppliers where qqqqqq equals 1").unwrap_err(), "unresolvable-field");
}

#[test]
fn unresolvable_field_reports_candidates() {
    let (cat, lex) = setup();
    let ir = parse("list suppliers where cityzzz equals London", &lex).unwrap();
    let err = Resolver::new(&cat, &lex, ResolverConfig::default()).resolve(&ir).unwrap_err();
    match err {
        ResolveError::UnresolvableField { nearest, .. } => {
            assert_eq!(nearest.first().map(|c| c.name.as_str()), Some("city"))
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn ordering_on_text_is_a_type_mismatch() {
    let (cat, lex) = setup();
    let ir = parse("list suppliers where city greater than London", &lex).unwrap();
    let rq = Resolver::new(&cat, &lex, ResolverConfig::default()).resolve(&ir).unwrap();
    assert_eq!(execute(&rq, &cat).unwrap_err().code(), "type-mismatch");
}

#[test]
fn knowledge_round_trip_through_journal() {
    let (cat, lex) = setup();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("kb.jsonl");
    let q = "list suppliers where city equals Paris";
    let ir = parse(q, &lex).unwrap();
    let rq = Resolver::new(&cat, &lex, ResolverConfig::default()).resolve(&ir).unwrap();
    let sql = build_sql(&rq);
    let key = flexq_core::normalize_query(q).unwrap();
    let id = {
        let mut kb = KnowledgeStore::open(&path).unwrap();
        let id = kb.record(&key, &sql, &rq).unwrap();
        kb.feedback(&id, Verdict::Accept, Some("good")).unwrap();
        id
    };
    let kb = KnowledgeStore::open(&path).unwrap();
    let hit = kb.lookup(&key).unwrap();
    assert_eq!(hit.id, id);
    assert_eq!(hit.sql, sql);
    assert_eq!(hit.notes, ["good"]);
}
