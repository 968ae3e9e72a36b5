mod common;

use common::*;
use trendcompare::engine::{run_query, verify, EngineOptions};

fn columns(q: &str) -> Vec<String> {
    let r = run_query(q, &sales_catalog(), EngineOptions::default()).unwrap();
    assert!(!r.scores.is_empty(), "no rows for {q}");
    r.scores.column_names()
}

#[test]
fn asia_vs_products_columns() {
    assert_eq!(columns(ASIA_VS_PRODUCTS), ["R1", "P", "W", "V", "score"]);
}

#[test]
fn asia_vs_inspiron_columns() {
    assert_eq!(columns(ASIA_VS_INSPIRON_THREE_GMS), ["R1", "P", "W", "C", "M", "V", "O", "score"]);
}

#[test]
fn asia_vs_europe_columns() {
    assert_eq!(columns(ASIA_VS_EUROPE_CITIES), ["R1", "C1", "R2", "C2", "W", "V", "score"]);
}

#[test]
fn asia_vs_europe_three_gms_columns() {
    assert_eq!(columns(ASIA_VS_EUROPE_CITIES_THREE_GMS), ["R1", "C1", "R2", "C2", "W", "C", "M", "V", "O", "score"]);
}

#[test]
fn example_queries_agree_with_reference() {
    for q in [ASIA_VS_PRODUCTS, ASIA_VS_INSPIRON_THREE_GMS, ASIA_VS_EUROPE_CITIES, ASIA_VS_EUROPE_CITIES_THREE_GMS] {
        let rep = verify(q, &sales_catalog(), EngineOptions::default(), 1e-9).unwrap();
        assert!(rep.ok(), "{q}: {:?}", rep.diff.mismatches);
    }
}


#[test]
fn bench_query_runs() {
    use trendcompare::storage::Catalog;
    use trendcompare::workload::{bench_query, generate, WorkloadConfig};
    let cat = Catalog::single(generate(&WorkloadConfig { trends: 12, days: 20, ..WorkloadConfig::default() }));
    let r = verify(&bench_query(4, 5, true), &cat, EngineOptions::default(), 1e-9).unwrap();
    assert!(r.ok(), "{:?}", r.diff.mismatches);
    println!("{}", r.engine.scores.to_csv_string());
    for p in &r.engine.physical { println!("{}", p.explain()); }
}
