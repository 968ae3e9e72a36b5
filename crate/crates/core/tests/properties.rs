mod common;

use std::collections::{BTreeMap, HashSet};
use std::sync::Arc;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::*;
use trendcompare::algebra::AggExpr;
use trendcompare::engine::{compare_results, run_query, EngineOptions};
use trendcompare::exec::{diff, group_by_aggregate, score_pair, DiffScorer, Scorer, Trend};
use trendcompare::planner::{merge_partition, InputStats, PlannerOptions};
use trendcompare::qlang::{analyze, parse_query, print_query, AggFn, ScoreAgg, ScorerSpec};
use trendcompare::storage::{
    compute_stats, read_csv, write_csv, Catalog, ColumnKind, CsvOptions, Relation, RelationBuilder, Schema, Value,
};

fn mixed_schema() -> Schema {
    Schema::of(&[
        ("i", ColumnKind::Integer),
        ("f", ColumnKind::Float),
        ("s", ColumnKind::String),
    ])
}

type Row = (Option<i64>, Option<f64>, Option<String>);

fn rows() -> impl Strategy<Value = Vec<Row>> {
    let row = (
        proptest::option::of(-1000i64..1000),
        proptest::option::of(-1e6f64..1e6),
        proptest::option::of("[a-z,\"']{1,6}"),
    );
    proptest::collection::vec(row, 0..40)
}

fn build(rows: &[Row]) -> Relation {
    let mut b = RelationBuilder::new("m", mixed_schema());
    for (i, f, s) in rows {
        b.push_row(&[
            i.map_or(Value::Null, Value::Int),
            f.map_or(Value::Null, Value::Float),
            s.as_deref().map_or(Value::Null, Value::str),
        ])
        .unwrap();
    }
    b.finish()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn csv_round_trip(rows in rows()) {
        let rel = build(&rows);
        let mut buf = Vec::new();
        write_csv(&rel, &mut buf).unwrap();
        let back = read_csv(buf.as_slice(), "m", mixed_schema(), CsvOptions::default()).unwrap();
        prop_assert_eq!(back.row_count(), rel.row_count());
        for r in 0..rel.row_count() {
            prop_assert_eq!(back.row(r), rel.row(r));
        }
    }

    #[test]
    fn stats_match_brute_force(rows in rows()) {
        let rel = build(&rows);
        let ints: Vec<i64> = rows.iter().filter_map(|r| r.0).collect();
        let st = compute_stats(&rel, "i").unwrap();
        prop_assert_eq!(st.null_count, rows.len() - ints.len());
        prop_assert_eq!(st.distinct_count, ints.iter().collect::<HashSet<_>>().len());
        prop_assert_eq!(st.min, ints.iter().min().map(|v| Value::Int(*v)));
        prop_assert_eq!(st.max, ints.iter().max().map(|v| Value::Int(*v)));

        let floats: Vec<f64> = rows.iter().filter_map(|r| r.1).collect();
        let st = compute_stats(&rel, "f").unwrap();
        let lo = floats.iter().copied().fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.min(v))));
        prop_assert_eq!(st.min, lo.map(Value::Float));

        let strs: HashSet<&String> = rows.iter().filter_map(|r| r.2.as_ref()).collect();
        let st = compute_stats(&rel, "s").unwrap();
        prop_assert_eq!(st.distinct_count, strs.len());
        prop_assert_eq!(st.min, None);
    }

    #[test]
    fn group_by_matches_brute_force(rows in proptest::collection::vec((0i64..5, 0i64..4, -50.0f64..50.0), 0..60)) {
        let schema = Schema::of(&[("k1", ColumnKind::Integer), ("k2", ColumnKind::Integer), ("v", ColumnKind::Float)]);
        let mut b = RelationBuilder::new("g", schema);
        for (k1, k2, v) in &rows {
            b.push_row(&[Value::Int(*k1), Value::Int(*k2), Value::Float(*v)]).unwrap();
        }
        let rel = Arc::new(b.finish());
        let aggs: Vec<AggExpr> = [AggFn::Sum, AggFn::Count, AggFn::Min, AggFn::Max, AggFn::Avg]
            .into_iter()
            .enumerate()
            .map(|(i, agg)| AggExpr { agg, column: "v".into(), alias: format!("a{i}") })
            .collect();
        let out = group_by_aggregate(&rel, &["k1".into(), "k2".into()], &aggs).unwrap();

        let mut groups: BTreeMap<(i64, i64), Vec<f64>> = BTreeMap::new();
        for (k1, k2, v) in &rows {
            groups.entry((*k1, *k2)).or_default().push(*v);
        }
        prop_assert_eq!(out.row_count(), groups.len());
        for r in 0..out.row_count() {
            let row = out.row(r);
            let (Value::Int(k1), Value::Int(k2)) = (&row[0], &row[1]) else { panic!("keys {row:?}") };
            let vs = &groups[&(*k1, *k2)];
            let sum: f64 = vs.iter().sum();
            let want = [
                sum,
                vs.len() as f64,
                vs.iter().copied().fold(f64::INFINITY, f64::min),
                vs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                sum / vs.len() as f64,
            ];
            for (got, want) in row[2..].iter().zip(want) {
                let got = got.as_f64().unwrap();
                prop_assert!((got - want).abs() <= 1e-9 * want.abs().max(1.0), "{got} vs {want}");
            }
        }
    }
}

fn trend_strategy() -> impl Strategy<Value = Trend> {
    proptest::collection::btree_map(0u64..40, -100.0f64..100.0, 0..30).prop_map(|m| Trend {
        key: Box::new([0]),
        points: m.into_iter().collect(),
    })
}

fn scorer_strategy() -> impl Strategy<Value = ScorerSpec> {
    (
        prop_oneof![Just(ScoreAgg::Sum), Just(ScoreAgg::Avg), Just(ScoreAgg::Min), Just(ScoreAgg::Max)],
        1u32..=4,
    )
        .prop_map(|(agg, p)| ScorerSpec { agg, p })
}

fn nested_loop(a: &Trend, b: &Trend, s: ScorerSpec) -> Option<f64> {
    let diffs: Vec<f64> = a
        .points
        .iter()
        .flat_map(|(ga, ma)| b.points.iter().filter(move |(gb, _)| gb == ga).map(move |(_, mb)| diff(*ma, *mb, s.p)))
        .collect();
    if diffs.is_empty() {
        return None;
    }
    Some(match s.agg {
        ScoreAgg::Sum => diffs.iter().sum(),
        ScoreAgg::Avg => diffs.iter().sum::<f64>() / diffs.len() as f64,
        ScoreAgg::Min => diffs.iter().copied().fold(f64::INFINITY, f64::min),
        ScoreAgg::Max => diffs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    })
}

proptest! {
    #[test]
    fn merge_join_score_matches_nested_loop(a in trend_strategy(), b in trend_strategy(), s in scorer_strategy()) {
        let (got, matched) = score_pair(&a, &b, &DiffScorer(s));
        let want = nested_loop(&a, &b, s);
        prop_assert_eq!(got.is_some(), want.is_some());
        prop_assert_eq!(matched > 0, want.is_some());
        if let (Some(g), Some(w)) = (got, want) {
            prop_assert!((g - w).abs() <= 1e-9 * w.abs().max(1.0), "{g} vs {w}");
        }
    }

    #[test]
    fn scorer_ignores_point_order(
        pairs in proptest::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 1..50),
        s in scorer_strategy(),
        seed in any::<u64>(),
    ) {
        use rand::seq::SliceRandom;
        let ds = DiffScorer(s);
        let run = |ps: &[(f64, f64)]| {
            let mut st = ds.init();
            for (x, y) in ps {
                ds.accumulate(&mut st, *x, *y);
            }
            ds.finish(&st)
        };
        let mut shuffled = pairs.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let (a, b) = (run(&pairs), run(&shuffled));
        prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0), "{a} vs {b}");
    }
}

const TOGGLE_QUERY_FORMS: [&str; 3] = [
    "(a AS A1) <-> (a AS A2)",
    "((b = 'x0') AS B1, a AS A1) <-> ((b = 'x1') AS B2, a AS A2)",
    "(b AS B1) <-> (a AS A2)",
];

fn toggle_query(form: usize, gms: usize, agg: &str, tail: &str) -> String {
    let pool = ["(g1 AS G1, AVG(m1) AS V1)", "(G1, MAX(m2) AS V2)", "(g2 AS G2, V1)", "(G2, V2)"];
    format!(
        "SELECT * FROM t COMPARE [{}] [{}] USING {agg} OVER DIFF(2) AS score{tail}",
        TOGGLE_QUERY_FORMS[form],
        pool[..gms].join(", ")
    )
}

fn all_toggles() -> Vec<PlannerOptions> {
    (0..16u8)
        .map(|m| PlannerOptions {
            merge: m & 1 != 0,
            trendwise: m & 2 != 0,
            pruning: m & 4 != 0,
            early_termination: m & 8 != 0,
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn every_toggle_gives_the_same_result(
        seed in any::<u64>(),
        form in 0usize..3,
        gms in 1usize..=4,
        agg in prop_oneof![Just("SUM"), Just("AVG"), Just("MIN"), Just("MAX")],
        tail in prop_oneof![Just(""), Just(" ORDER BY score ASC LIMIT 3"), Just(" ORDER BY score DESC LIMIT 1")],
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cat = Catalog::single(random_table(&mut rng, 8, 16, 2));
        let q = toggle_query(form, gms, agg, tail);
        let reference = run_query(&q, &cat, EngineOptions { planner: PlannerOptions::BASIC, ..EngineOptions::default() }).unwrap();
        for planner in all_toggles() {
            let r = run_query(&q, &cat, EngineOptions { planner, ..EngineOptions::default() }).unwrap();
            let d = compare_results(&reference.scores, &r.scores, 1e-9);
            prop_assert!(d.ok(), "{planner:?} {q}: {:?}", d.mismatches);
        }
    }

    #[test]
    fn greedy_merging_never_costs_more(seed in any::<u64>(), form in 0usize..3, gms in 1usize..=4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cat = Catalog::single(random_table(&mut rng, 10, 24, 1));
        let q = toggle_query(form, gms, "SUM", "");
        let spec = analyze(&parse_query(&q).unwrap(), &cat).unwrap().spec;
        let stats = InputStats::of(cat.get("t").unwrap(), &spec).unwrap();
        for opts in all_toggles() {
            let greedy = merge_partition(&spec, &stats, opts, false).unwrap();
            let apart = merge_partition(&spec, &stats, PlannerOptions { merge: false, ..opts }, false).unwrap();
            prop_assert!(greedy.cost() <= apart.cost());
            let groups = greedy.group_by_count();
            prop_assert!(groups >= 1 && groups <= gms, "{groups} group-bys for {gms} GMPairs");
        }
    }
}

/// Queries the parser must reproduce through the printer.
fn corpus() -> Vec<String> {
    let mut out: Vec<String> = [ASIA_VS_PRODUCTS, ASIA_VS_INSPIRON_THREE_GMS, ASIA_VS_EUROPE_CITIES, ASIA_VS_EUROPE_CITIES_THREE_GMS].map(String::from).to_vec();
    for form in 0..3 {
        for gms in 1..=4 {
            out.push(toggle_query(form, gms, "AVG", " ORDER BY score DESC LIMIT 5"));
        }
    }
    out.push("SELECT * FROM websales WHERE wp_pk >= 101 AND day < 5 COMPARE [(webpage AS P1) <-> (webpage AS P2)] \
              [(day AS D, SUM(revenue) AS V)] USING MAX OVER DIFF(3) AS score ORDER BY score ASC"
        .into());
    out.push("SELECT * FROM t COMPARE [((b = 'x0') AS B1) <-> (B1, a AS A2)] [(g1 AS G, MIN(m1) AS V)] \
              USING MIN OVER DIFF(1) AS s LIMIT 2"
        .into());
    out
}

#[test]
fn printer_round_trips_the_corpus() {
    for q in corpus() {
        let ast = parse_query(&q).unwrap();
        let printed = print_query(&ast);
        let again = parse_query(&printed).unwrap_or_else(|e| panic!("{printed}: {e}"));
        assert_eq!(again, ast, "{printed}");
    }
}

proptest! {
    #[test]
    fn parse_errors_point_inside_the_input(
        which in 0usize..18,
        cut in any::<prop::sample::Index>(),
        junk in "[\\[\\]()<>=,.;'a-z0-9 ]{0,4}",
    ) {
        let corpus = corpus();
        let q = &corpus[which % corpus.len()];
        let mut at = cut.index(q.len() + 1);
        while !q.is_char_boundary(at) {
            at -= 1;
        }
        let text = format!("{}{junk}", &q[..at]);
        if let Err(e) = parse_query(&text) {
            prop_assert!(e.offset <= text.len(), "offset {} past {} in {text:?}", e.offset, text.len());
            prop_assert!(e.line >= 1 && e.column >= 1);
        }
    }
}
