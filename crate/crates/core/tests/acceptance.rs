//! Acceptance criteria, one line of output each. Run with
//! `cargo test --test acceptance -- --nocapture` to see the report.

mod common;

use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;
use trendcompare::algebra::rules::{apply_anywhere, apply_rule};
use trendcompare::algebra::{LogicalPlan, Predicate, Rule};
use trendcompare::engine::{close, compare_results, evaluate, run_query, verify, EngineOptions, Output};
use trendcompare::exec::{diff, score_pair, Counters, DiffScorer, ScoreRelation, Trend};
use trendcompare::planner::PlannerOptions;
use trendcompare::prune::{
    build_segagg, initial_state, pair_bounds, prune_topk, refine, segment_count, segment_pair_bounds, PruneGroup,
    PruneMode, ScoreBounds, Segment, Segmentation,
};
use trendcompare::qlang::{analyze, parse_query, Direction, ScoreAgg, ScorerSpec};
use trendcompare::storage::{Catalog, Value};
use trendcompare::workload::{bench_query, generate, WorkloadConfig};

type Check = Result<String, String>;

struct Report {
    failures: Vec<String>,
}

impl Report {
    fn run(&mut self, id: usize, name: &str, limit: Duration, f: impl FnOnce() -> Check) {
        let t = Instant::now();
        let out = f();
        let took = t.elapsed();
        let line = match out {
            Ok(detail) if took <= limit => format!("PASS {id} {name} ({took:.2?} <= {limit:?}) {detail}"),
            Ok(detail) => format!("FAIL {id} {name} ({took:.2?} > {limit:?}) {detail}"),
            Err(why) => format!("FAIL {id} {name} ({took:.2?}) {why}"),
        };
        println!("{line}");
        if line.starts_with("FAIL") {
            self.failures.push(line);
        }
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

const AGGS: [ScoreAgg; 4] = [ScoreAgg::Sum, ScoreAgg::Avg, ScoreAgg::Min, ScoreAgg::Max];

fn agg_name(a: ScoreAgg) -> &'static str {
    match a {
        ScoreAgg::Sum => "SUM",
        ScoreAgg::Avg => "AVG",
        ScoreAgg::Min => "MIN",
        ScoreAgg::Max => "MAX",
    }
}

fn trend(points: impl IntoIterator<Item = (u64, f64)>) -> Trend {
    Trend {
        key: Box::new([0]),
        points: points.into_iter().collect(),
    }
}

// 1

fn worked_bounds_example() -> Check {
    let sum2 = ScorerSpec { agg: ScoreAgg::Sum, p: 2 };
    let near = |a: f64, b: f64| (a - b).abs() <= 1e-9;

    let one = segment_pair_bounds(&Segment::new(16, 229.0, 10.0, 18.0), &Segment::new(16, 394.0, 20.0, 30.0), 16, sum2);
    ensure(near(one.lower, 1701.5625) && near(one.upper, 6400.0), || format!("single summary {one:?}"))?;

    let left = [Segment::new(8, 129.0, 13.0, 18.0), Segment::new(8, 100.0, 10.0, 14.0)];
    let right = [Segment::new(8, 211.0, 23.0, 30.0), Segment::new(8, 183.0, 20.0, 27.0)];
    let (mut lo, mut hi) = (0.0, 0.0);
    for (a, b) in left.iter().zip(&right) {
        let s = segment_pair_bounds(a, b, 8, sum2);
        lo += s.lower;
        hi += s.upper;
    }
    ensure(near(lo, 1701.625) && near(hi, 4624.0), || format!("two segments [{lo}, {hi}]"))?;

    // the same summaries reached from concrete trends
    let l = [13., 18., 16., 17., 15., 16., 17., 17., 10., 14., 12., 13., 12., 13., 13., 13.];
    let r = [23., 30., 26., 27., 26., 27., 26., 26., 20., 27., 23., 23., 23., 23., 22., 22.];
    let (a, b) = (trend((0..16).zip(l)), trend((0..16).zip(r)));
    let seg = Segmentation::new((0..16).collect(), 2);
    let sa = build_segagg(&a, &seg).map_err(|e| e.to_string())?;
    let sb = build_segagg(&b, &seg).map_err(|e| e.to_string())?;
    let bounds = pair_bounds(&sa, &sb, sum2).map_err(|e| e.to_string())?.ok_or("no overlap")?;
    ensure(near(bounds.lower, 1701.625) && near(bounds.upper, 4624.0), || format!("from trends {bounds:?}"))?;
    let whole = pair_bounds(
        &build_segagg(&a, &Segmentation::new((0..16).collect(), 1)).unwrap(),
        &build_segagg(&b, &Segmentation::new((0..16).collect(), 1)).unwrap(),
        sum2,
    )
    .unwrap()
    .unwrap();
    ensure(near(whole.lower, 1701.5625) && near(whole.upper, 6400.0), || format!("one segment {whole:?}"))?;
    Ok(format!("[{}, {}] and [{lo}, {hi}]", one.lower, one.upper))
}

// 2

fn mean_of_diffs_dominates() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for case in 0..10_000 {
        let n = rng.gen_range(1..=256);
        let p = rng.gen_range(1..=4u32);
        let a: Vec<f64> = (0..n).map(|_| rng.gen_range(-100.0..=100.0)).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-100.0..=100.0)).collect();
        let avg_diff = a.iter().zip(&b).map(|(x, y)| diff(*x, *y, p)).sum::<f64>() / n as f64;
        let diff_avg = diff(a.iter().sum::<f64>() / n as f64, b.iter().sum::<f64>() / n as f64, p);
        ensure(avg_diff >= diff_avg - 1e-9, || format!("case {case}: {avg_diff} < {diff_avg} (n={n}, p={p})"))?;
    }
    Ok("10000 pairs".into())
}

// 3

fn random_trends(rng: &mut ChaCha8Rng, count: usize, domain: u64, integral: bool) -> Vec<Trend> {
    (0..count)
        .map(|i| Trend {
            key: Box::new([i as u64]),
            points: (0..domain)
                .filter_map(|g| {
                    if !rng.gen_bool(0.75) {
                        return None;
                    }
                    let v = if integral {
                        rng.gen_range(-10..=10) as f64
                    } else {
                        rng.gen_range(-50.0..50.0)
                    };
                    Some((g, v))
                })
                .collect(),
        })
        .collect()
}

/// (score, gm, left, right) of every matched pair, best first.
fn brute_force(sides: &[(Vec<Trend>, Vec<Trend>)], scorer: ScorerSpec, direction: Direction) -> Vec<(f64, usize, u32, u32)> {
    let mut all = Vec::new();
    for (gm, (l, r)) in sides.iter().enumerate() {
        for (i, a) in l.iter().enumerate() {
            for (j, b) in r.iter().enumerate() {
                if let (Some(s), _) = score_pair(a, b, &DiffScorer(scorer)) {
                    all.push((s, gm, i as u32, j as u32));
                }
            }
        }
    }
    all.sort_by(|x, y| match direction {
        Direction::Asc => x.0.total_cmp(&y.0),
        Direction::Desc => y.0.total_cmp(&x.0),
    });
    all
}

fn prune_matches_brute_force(rng: &mut ChaCha8Rng, case: usize) -> Result<(), String> {
    let gms = rng.gen_range(1..=4);
    let domain = rng.gen_range(1..=64);
    let integral = rng.gen_bool(0.5);
    let sides: Vec<(Vec<Trend>, Vec<Trend>)> = (0..gms)
        .map(|_| {
            let nl = rng.gen_range(1..=20);
            let nr = rng.gen_range(1..=20);
            (random_trends(rng, nl, domain, integral), random_trends(rng, nr, domain, integral))
        })
        .collect();
    let scorer = ScorerSpec {
        agg: *AGGS.choose(rng).unwrap(),
        p: rng.gen_range(1..=2),
    };
    let direction = if rng.gen_bool(0.5) { Direction::Asc } else { Direction::Desc };
    let k = *[1usize, 3, 5].choose(rng).unwrap();
    let expected = brute_force(&sides, scorer, direction);
    let top = &expected[..k.min(expected.len())];
    for mode in [PruneMode::EarlyTermination, PruneMode::BoundsOnly] {
        let groups: Vec<PruneGroup> = sides
            .iter()
            .enumerate()
            .map(|(gm, (l, r))| PruneGroup {
                gm,
                left: l,
                right: r,
                pairs: (0..l.len() as u32)
                    .flat_map(|i| (0..r.len() as u32).map(move |j| (i, j)))
                    .collect(),
            })
            .collect();
        let mut counters = Counters::default();
        let out = prune_topk(&groups, scorer, k, direction, mode, &mut counters).map_err(|e| e.to_string())?;
        let mut got: Vec<(f64, usize, u32, u32)> = out
            .iter()
            .enumerate()
            .flat_map(|(gm, v)| v.iter().map(move |p| (p.score, gm, p.left, p.right)))
            .collect();
        let ctx = || format!("case {case} {mode:?} {scorer:?} {direction:?} k={k}");
        for g in &got {
            let exact = score_pair(&sides[g.1].0[g.2 as usize], &sides[g.1].1[g.3 as usize], &DiffScorer(scorer)).0;
            ensure(exact.is_some_and(|e| close(e, g.0, 1e-9)), || format!("{}: wrong score {g:?}", ctx()))?;
        }
        got.sort_by(|x, y| match direction {
            Direction::Asc => x.0.total_cmp(&y.0),
            Direction::Desc => y.0.total_cmp(&x.0),
        });
        if mode == PruneMode::EarlyTermination {
            ensure(got.len() == top.len(), || format!("{}: {} pairs, want {}", ctx(), got.len(), top.len()))?;
        } else {
            ensure(got.len() >= top.len(), || format!("{}: bounds-only lost pairs", ctx()))?;
            got.truncate(top.len());
        }
        for (g, e) in got.iter().zip(top) {
            ensure(close(g.0, e.0, 1e-9), || format!("{}: score {} vs {}", ctx(), g.0, e.0))?;
        }
        // the pair set is unique when the k-th score is not tied with the next
        let tied = expected.len() > k && close(expected[k - 1].0, expected[k].0, 1e-12);
        if !tied {
            let mut a: Vec<_> = got.iter().map(|g| (g.1, g.2, g.3)).collect();
            let mut b: Vec<_> = top.iter().map(|g| (g.1, g.2, g.3)).collect();
            a.sort_unstable();
            b.sort_unstable();
            ensure(a == b, || format!("{}: pairs {a:?} vs {b:?}", ctx()))?;
        }
    }
    Ok(())
}

const FORMS: [&str; 4] = [
    "(a AS A1) <-> (a AS A2)",
    "((b = 'x0') AS B1, a AS A1) <-> ((b = 'x1') AS B2, a AS A2)",
    "((b = 'x0') AS B1) <-> (B1, a AS A2)",
    "(b AS B1) <-> (a AS A2)",
];

const MEASURE_AGGS: [&str; 4] = ["AVG", "SUM", "MIN", "MAX"];

fn gm_list(rng: &mut ChaCha8Rng, count: usize, aggs: &[&str]) -> String {
    let v1 = aggs.choose(rng).unwrap();
    let v2 = aggs.choose(rng).unwrap();
    let pool = [
        format!("(g1 AS G1, {v1}(m1) AS V1)"),
        format!("(G1, {v2}(m2) AS V2)"),
        "(g2 AS G2, V1)".to_string(),
        "(G2, V2)".to_string(),
    ];
    pool[..count].join(", ")
}

fn random_query(rng: &mut ChaCha8Rng) -> String {
    let form = FORMS.choose(rng).unwrap();
    let count = rng.gen_range(1..=4);
    let gms = gm_list(rng, count, &MEASURE_AGGS);
    let agg = agg_name(*AGGS.choose(rng).unwrap());
    let p = rng.gen_range(1..=2);
    let dir = if rng.gen_bool(0.5) { "ASC" } else { "DESC" };
    let k = [1, 3, 5].choose(rng).unwrap();
    format!("SELECT * FROM t COMPARE [{form}] [{gms}] USING {agg} OVER DIFF({p}) AS score ORDER BY score {dir} LIMIT {k}")
}

fn ordered_scores(r: &ScoreRelation) -> Vec<f64> {
    (0..r.len()).map(|i| r.score(i)).collect()
}

fn same_order(a: &ScoreRelation, b: &ScoreRelation) -> bool {
    let (x, y) = (ordered_scores(a), ordered_scores(b));
    x.len() == y.len() && x.iter().zip(&y).all(|(p, q)| close(*p, *q, 1e-9))
}

fn pipeline_matches_oracle(rng: &mut ChaCha8Rng, case: usize) -> Result<(), String> {
    let na = rng.gen_range(2..=20);
    let ng = rng.gen_range(1..=64);
    let dup = rng.gen_range(1..=2);
    let cat = Catalog::single(random_table(rng, na, ng, dup));
    let q = random_query(rng);
    let bounds_only = PlannerOptions {
        early_termination: false,
        ..PlannerOptions::ALL
    };
    for planner in [PlannerOptions::ALL, bounds_only, PlannerOptions::BASIC] {
        let opts = EngineOptions {
            planner,
            ..EngineOptions::default()
        };
        let rep = verify(&q, &cat, opts, 1e-9).map_err(|e| format!("case {case} {q}: {e}"))?;
        ensure(rep.ok(), || format!("case {case} {planner:?} {q}: {:?}", rep.diff.mismatches))?;
        ensure(same_order(&rep.engine.scores, &rep.oracle), || format!("case {case} {q}: score order"))?;
    }
    Ok(())
}

fn oracle_equivalence() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for case in 0..1000 {
        prune_matches_brute_force(&mut rng, case)?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    for case in 0..1000 {
        pipeline_matches_oracle(&mut rng, case)?;
    }
    Ok("1000 prune_topk specs, 1000 queries x 3 planners".into())
}

// 4

fn check_contains(b: &ScoreBounds, exact: f64, ctx: &dyn Fn() -> String) -> Result<(), String> {
    let tol = 1e-9 * exact.abs().max(1.0);
    ensure(b.lower <= exact + tol && exact <= b.upper + tol, || format!("{}: {exact} outside {b:?}", ctx()))
}

fn bounds_sound_and_monotone() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut monotone_cases = 0;
    for case in 0..1000 {
        let domain = rng.gen_range(1..=256u64);
        let full = rng.gen_bool(0.5);
        let keep = if full { 1.0 } else { 0.7 };
        let gen_trend = |rng: &mut ChaCha8Rng, present: &[u64]| {
            trend(present.iter().map(|&g| (g, rng.gen_range(-100.0..=100.0))))
        };
        let ga: Vec<u64> = (0..domain).filter(|_| rng.gen_bool(keep)).collect();
        let gb: Vec<u64> = if full { ga.clone() } else { (0..domain).filter(|_| rng.gen_bool(keep)).collect() };
        let a = gen_trend(&mut rng, &ga);
        let b = gen_trend(&mut rng, &gb);
        let scorer = ScorerSpec {
            agg: *AGGS.choose(&mut rng).unwrap(),
            p: rng.gen_range(1..=4),
        };
        let Some(exact) = score_pair(&a, &b, &DiffScorer(scorer)).0 else { continue };
        let mut dom: Vec<u64> = ga.iter().chain(&gb).copied().collect();
        dom.sort_unstable();
        dom.dedup();
        let l = segment_count(dom.len());
        let monotone = full && matches!(scorer.agg, ScoreAgg::Sum | ScoreAgg::Avg);
        monotone_cases += monotone as usize;
        let ctx = || format!("case {case} {scorer:?} n={} l={l}", dom.len());

        let seg = Segmentation::new(dom.clone(), l);
        let sa = build_segagg(&a, &seg).map_err(|e| e.to_string())?;
        let sb = build_segagg(&b, &seg).map_err(|e| e.to_string())?;
        let mut st = initial_state(&sa, &sb, scorer).map_err(|e| e.to_string())?.ok_or("no overlap")?;
        let initial = st.bounds;
        check_contains(&st.bounds, exact, &ctx)?;
        while !st.is_final(seg.segments()) {
            let before = st.bounds;
            refine(&mut st, &a, &b, &sa, &sb, scorer);
            check_contains(&st.bounds, exact, &ctx)?;
            if monotone {
                let tol = 1e-9 * exact.abs().max(1.0);
                ensure(st.bounds.lower >= before.lower - tol && st.bounds.upper <= before.upper + tol, || {
                    format!("{}: {before:?} -> {:?}", ctx(), st.bounds)
                })?;
            }
        }
        ensure(close(st.bounds.lower, exact, 1e-9) && close(st.bounds.upper, exact, 1e-9), || {
            format!("{}: final {:?} vs {exact}", ctx(), st.bounds)
        })?;

        if monotone && 2 * l <= dom.len() {
            let seg2 = Segmentation::new(dom.clone(), 2 * l);
            let fine = pair_bounds(&build_segagg(&a, &seg2).unwrap(), &build_segagg(&b, &seg2).unwrap(), scorer)
                .unwrap()
                .unwrap();
            let tol = 1e-9 * exact.abs().max(1.0);
            ensure(fine.lower >= initial.lower - tol && fine.upper <= initial.upper + tol, || {
                format!("{}: l bounds {initial:?}, 2l bounds {fine:?}", ctx())
            })?;
            check_contains(&fine, exact, &ctx)?;
        }
    }
    Ok(format!("1000 pairs, {monotone_cases} fully matched SUM/AVG"))
}

// 5

fn scores(out: Output) -> Result<ScoreRelation, String> {
    match out {
        Output::Scores { scores, .. } => Ok(scores),
        Output::Table(_) => Err("plan produced a table".into()),
    }
}

fn equivalent(rule: Rule, plan: &LogicalPlan, cat: &Catalog, ctx: &str) -> Result<(), String> {
    let rewritten = apply_anywhere(rule, plan, cat).ok_or_else(|| format!("{}: did not fire on {ctx}", rule.name()))?;
    rewritten.validate(cat).map_err(|e| format!("{ctx}: rewritten plan invalid: {e}"))?;
    let opts = EngineOptions::default();
    let before = scores(evaluate(plan, cat, opts).map_err(|e| format!("{ctx}: {e}"))?.output)?;
    let after = scores(evaluate(&rewritten, cat, opts).map_err(|e| format!("{ctx}: {e}"))?.output)?;
    let after = after.project(&before.column_names()).map_err(|e| format!("{ctx}: {e}"))?;
    let d = compare_results(&before, &after, 1e-9);
    ensure(d.ok(), || format!("{} {ctx}: {:?}", rule.name(), d.mismatches))?;
    match sort_key(plan).and_then(|k| before.index_of(k)) {
        Some(c) => {
            let col = |r: &ScoreRelation| -> Vec<f64> {
                r.rows.iter().map(|row| row.cells[c].as_f64().unwrap_or(f64::NAN)).collect()
            };
            let (x, y) = (col(&before), col(&after));
            ensure(x.iter().zip(&y).all(|(p, q)| close(*p, *q, 1e-9)), || {
                format!("{} {ctx}: order {x:?} vs {y:?}", rule.name())
            })
        }
        None => Ok(()),
    }
}

/// Key of the Sort at the root, under an optional Limit.
fn sort_key(plan: &LogicalPlan) -> Option<&str> {
    match plan {
        LogicalPlan::Limit { input, .. } => sort_key(input),
        LogicalPlan::Sort { key, .. } => Some(key),
        _ => None,
    }
}

fn analyzed(text: &str, cat: &Catalog) -> Result<LogicalPlan, String> {
    let q = parse_query(text).map_err(|e| format!("{text}: {e}"))?;
    Ok(analyze(&q, cat).map_err(|e| format!("{text}: {e}"))?.plan)
}

/// Replaces the first Compare node by `f(compare)`.
fn wrap_compare(plan: &LogicalPlan, f: &dyn Fn(LogicalPlan) -> LogicalPlan) -> LogicalPlan {
    match plan {
        LogicalPlan::Compare { .. } => f(plan.clone()),
        LogicalPlan::Sort { key, direction, input } => LogicalPlan::Sort {
            key: key.clone(),
            direction: *direction,
            input: Box::new(wrap_compare(input, f)),
        },
        LogicalPlan::Limit { count, input } => LogicalPlan::Limit {
            count: *count,
            input: Box::new(wrap_compare(input, f)),
        },
        other => other.clone(),
    }
}

fn compare_spec(plan: &LogicalPlan) -> Option<&trendcompare::qlang::CompareSpec> {
    match plan {
        LogicalPlan::Compare { spec, .. } => Some(spec),
        _ => plan.children().into_iter().find_map(compare_spec),
    }
}

fn rule_equivalence() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let scorer = |rng: &mut ChaCha8Rng, aggs: &[ScoreAgg]| {
        format!("{} OVER DIFF({})", agg_name(*aggs.choose(rng).unwrap()), rng.gen_range(1..=2))
    };
    let tail = |rng: &mut ChaCha8Rng| match rng.gen_range(0..3) {
        0 => String::new(),
        1 => format!(" ORDER BY score ASC LIMIT {}", rng.gen_range(1..=5)),
        _ => format!(" ORDER BY score DESC LIMIT {}", rng.gen_range(1..=5)),
    };

    // push-compare-below-join on the PK-FK fixture
    let r1_forms = [
        "(webpage AS P1) <-> (webpage AS P2)",
        "(wp_pk AS P1) <-> (wp_pk AS P2)",
        "((webpage = 'page01') AS P1) <-> (webpage AS P2)",
        "((wp_pk = 100) AS P1) <-> (wp_pk AS P2)",
    ];
    let r1_where = ["", " WHERE wp_pk >= 101", " WHERE webpage = 'page02'", " WHERE day < 5"];
    let mut fired = [0usize; 4];
    while fired[0] < 50 {
        let cat = web_catalog(rng.gen_range(3..=8), rng.gen_range(3..=10), rng.gen());
        let form = r1_forms.choose(&mut rng).unwrap();
        let filter = if form.contains("= '") || form.contains("= 1") { "" } else { r1_where.choose(&mut rng).unwrap() };
        let agg = MEASURE_AGGS.choose(&mut rng).unwrap();
        let q = format!(
            "SELECT * FROM websales{filter} COMPARE [{form}] [(day AS D, {agg}(revenue) AS V)] USING {} AS score{}",
            scorer(&mut rng, &AGGS),
            tail(&mut rng)
        );
        let plan = analyzed(&q, &cat)?;
        equivalent(Rule::PushCompareBelowJoin, &plan, &cat, &q)?;
        fired[0] += 1;
    }

    // push-aggregate-below-compare on tables with duplicate rows
    while fired[1] < 50 {
        let na = rng.gen_range(2..=8);
        let (ng, dup) = (rng.gen_range(2..=12), rng.gen_range(2..=3));
        let cat = Catalog::single(random_table(&mut rng, na, ng, dup));
        let form = FORMS.choose(&mut rng).unwrap();
        let count = rng.gen_range(1..=4);
        let gms = gm_list(&mut rng, count, &["MIN", "MAX"]);
        let q = format!(
            "SELECT * FROM t COMPARE [{form}] [{gms}] USING {} AS score{}",
            scorer(&mut rng, &[ScoreAgg::Min, ScoreAgg::Max]),
            tail(&mut rng)
        );
        let plan = wrap_compare(&analyzed(&q, &cat)?, &|c| LogicalPlan::GroupByAgg {
            keys: ["a", "b", "g1", "g2", "m1", "m2"].map(String::from).to_vec(),
            aggregates: vec![],
            input: Box::new(c),
        });
        equivalent(Rule::PushAggregateBelowCompare, &plan, &cat, &q)?;
        fired[1] += 1;
    }

    // push-filter-below-compare: filter on a constraint attribute of both sides
    while fired[2] < 50 {
        let na = rng.gen_range(2..=10);
        let ng = rng.gen_range(2..=16);
        let cat = Catalog::single(random_table(&mut rng, na, ng, 1));
        let form = FORMS[..2].choose(&mut rng).unwrap();
        let count = rng.gen_range(1..=4);
        let gms = gm_list(&mut rng, count, &MEASURE_AGGS);
        let q = format!("SELECT * FROM t COMPARE [{form}] [{gms}] USING {} AS score", scorer(&mut rng, &AGGS));
        let plan = analyzed(&q, &cat)?;
        let op = *[">=", "<", "="].choose(&mut rng).unwrap();
        let pivot = rng.gen_range(0..na as i64);
        let filtered = parse_pred(op, pivot);
        let plan = wrap_compare(&plan, &|c| LogicalPlan::Filter {
            predicate: filtered.clone(),
            input: Box::new(c),
        });
        equivalent(Rule::PushFilterBelowCompare, &plan, &cat, &format!("{q} | a {op} {pivot}"))?;
        fired[2] += 1;
    }

    // commute-compares: two Compares over the same trendsets, the upper keeping fewer pairs
    while fired[3] < 50 {
        let na = rng.gen_range(3..=10);
        let ng = rng.gen_range(2..=16);
        let cat = Catalog::single(random_table(&mut rng, na, ng, 1));
        let form = FORMS.choose(&mut rng).unwrap();
        let ku = rng.gen_range(1..=4);
        let lower_k = if rng.gen_bool(0.5) { String::new() } else { format!(" ORDER BY s1 ASC LIMIT {}", ku + rng.gen_range(1..=4)) };
        let lower_q = format!(
            "SELECT * FROM t COMPARE [{form}] [(g1 AS G1, {}(m1) AS V1)] USING {} AS s1{lower_k}",
            MEASURE_AGGS.choose(&mut rng).unwrap(),
            scorer(&mut rng, &AGGS)
        );
        let dir = if rng.gen_bool(0.5) { "ASC" } else { "DESC" };
        let upper_q = format!(
            "SELECT * FROM t COMPARE [{form}] [(g2 AS G2, {}(m2) AS V2)] USING {} AS s2 ORDER BY s2 {dir} LIMIT {ku}",
            MEASURE_AGGS.choose(&mut rng).unwrap(),
            scorer(&mut rng, &AGGS)
        );
        let lower = compare_spec(&analyzed(&lower_q, &cat)?).cloned().ok_or("no compare")?;
        let upper = compare_spec(&analyzed(&upper_q, &cat)?).cloned().ok_or("no compare")?;
        let direction = upper.direction;
        let chained = LogicalPlan::Compare {
            spec: upper,
            input: Box::new(LogicalPlan::Compare {
                spec: lower,
                input: Box::new(LogicalPlan::scan("t")),
            }),
        };
        ensure(apply_rule(Rule::CommuteCompares, &chained, &cat).is_some(), || format!("commute guard on {upper_q}"))?;
        let plan = LogicalPlan::Sort {
            key: "s2".into(),
            direction,
            input: Box::new(chained),
        };
        equivalent(Rule::CommuteCompares, &plan, &cat, &format!("{upper_q} over {lower_q}"))?;
        fired[3] += 1;
    }
    Ok(format!("{fired:?} plans per rule"))
}

fn parse_pred(op: &str, pivot: i64) -> Predicate {
    use trendcompare::algebra::Comparison;
    use trendcompare::qlang::ast::CmpOp;
    let op = match op {
        ">=" => CmpOp::Ge,
        "<" => CmpOp::Lt,
        _ => CmpOp::Eq,
    };
    Predicate {
        conjuncts: vec![Comparison {
            column: "a".into(),
            op,
            value: Value::Int(pivot),
        }],
    }
}

// 6

fn ablation_structure() -> Check {
    let cfg = WorkloadConfig {
        trends: 1000,
        days: 50,
        replicas: 2,
        clusters: Some(10),
        ..WorkloadConfig::default()
    };
    let cat = Catalog::single(generate(&cfg));
    let q = bench_query(4, 5, true);
    let run = |planner: PlannerOptions| {
        run_query(
            &q,
            &cat,
            EngineOptions {
                planner,
                ..EngineOptions::default()
            },
        )
        .map_err(|e| e.to_string())
    };
    let group_bys = |r: &trendcompare::engine::QueryResult| r.physical.iter().map(|p| p.group_by_count()).sum::<usize>();
    let basic = run(PlannerOptions::BASIC)?;
    let merged = run(PlannerOptions {
        merge: true,
        ..PlannerOptions::BASIC
    })?;
    let trendwise = run(PlannerOptions {
        merge: true,
        trendwise: true,
        ..PlannerOptions::BASIC
    })?;
    let full = run(PlannerOptions::ALL)?;
    let (gb_basic, gb_merged) = (group_bys(&basic), group_bys(&merged));
    ensure(gb_merged < gb_basic, || format!("(a) GroupByAgg {gb_merged} vs basic {gb_basic}"))?;
    let (tc_basic, tc_trend) = (basic.stats.counters.tuple_comparisons, trendwise.stats.counters.tuple_comparisons);
    ensure(tc_trend < tc_basic, || format!("(b) comparisons {tc_trend} vs basic {tc_basic}"))?;
    let c = &full.stats.counters;
    let share = c.pairs_fully_refined as f64 / c.pair_states as f64;
    ensure(share < 0.5, || format!("(c) fully refined {} of {}", c.pairs_fully_refined, c.pair_states))?;
    for r in [&merged, &trendwise, &full] {
        let d = compare_results(&basic.scores, &r.scores, 1e-9);
        ensure(d.ok(), || format!("stage results differ: {:?}", d.mismatches))?;
    }
    Ok(format!(
        "(a) {gb_merged} < {gb_basic} (b) {tc_trend} < {tc_basic} (c) {}/{} = {share:.2e}",
        c.pairs_fully_refined, c.pair_states
    ))
}

// 7

fn memory_bound() -> Check {
    let mut parts = Vec::new();
    for (p, n) in [(10usize, 1000usize), (40, 2560), (100, 6400)] {
        let size = n / p;
        let cfg = WorkloadConfig {
            trends: p,
            days: size,
            replicas: 1,
            ..WorkloadConfig::default()
        };
        let cat = Catalog::single(generate(&cfg));
        let r = run_query(&bench_query(1, 3, true), &cat, EngineOptions::default()).map_err(|e| e.to_string())?;
        let c = &r.stats.counters;
        let want = (0..p).map(|_| (1.0 + (size as f64).log2()).floor() as u64).sum::<u64>();
        ensure(c.segments_built == want, || format!("p={p} n={n}: {} segments, want {want}", c.segments_built))?;
        ensure(c.pair_states <= (p * p) as u64, || format!("p={p} n={n}: {} pair states", c.pair_states))?;
        parts.push(format!("p={p} n={n}: {} segments, {} states", c.segments_built, c.pair_states));
    }
    Ok(parts.join("; "))
}

// 8

fn example_queries_run() -> Check {
    let cat = sales_catalog();
    let expected: [(&str, &[&str]); 4] = [
        (ASIA_VS_PRODUCTS, &["R1", "P", "W", "V", "score"]),
        (ASIA_VS_INSPIRON_THREE_GMS, &["R1", "P", "W", "C", "M", "V", "O", "score"]),
        (ASIA_VS_EUROPE_CITIES, &["R1", "C1", "R2", "C2", "W", "V", "score"]),
        (ASIA_VS_EUROPE_CITIES_THREE_GMS, &["R1", "C1", "R2", "C2", "W", "C", "M", "V", "O", "score"]),
    ];
    let mut rows = Vec::new();
    for (q, cols) in expected {
        let rep = verify(q, &cat, EngineOptions::default(), 1e-9).map_err(|e| e.to_string())?;
        ensure(rep.engine.scores.column_names() == cols, || format!("columns {:?}", rep.engine.scores.column_names()))?;
        ensure(!rep.engine.scores.is_empty(), || format!("no rows for {q}"))?;
        ensure(rep.ok(), || format!("{q}: {:?}", rep.diff.mismatches))?;
        rows.push(rep.engine.scores.len().to_string());
    }
    Ok(format!("rows {}", rows.join("/")))
}

#[test]
fn acceptance() {
    let mut r = Report { failures: Vec::new() };
    r.run(1, "segment bounds of the worked example", Duration::from_secs(1), worked_bounds_example);
    r.run(2, "mean of diffs dominates diff of means", Duration::from_secs(10), mean_of_diffs_dominates);
    r.run(3, "pruned top-k equals the oracle", Duration::from_secs(120), oracle_equivalence);
    r.run(4, "bounds sound and monotone under refinement", Duration::from_secs(30), bounds_sound_and_monotone);
    r.run(5, "rewrite rules preserve results", Duration::from_secs(60), rule_equivalence);
    r.run(6, "ablation counters", Duration::from_secs(120), ablation_structure);
    r.run(7, "segment and pair-state counts", Duration::from_secs(60), memory_bound);
    r.run(8, "example queries parse, analyze and run", Duration::from_secs(5), example_queries_run);
    assert!(r.failures.is_empty(), "{} criteria failed:\n{}", r.failures.len(), r.failures.join("\n"));
}
