//! Logical plan evaluation and the query entry points.

use std::collections::HashMap;
use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;

use crate::algebra::{optimize, JoinKind, LogicalPlan, Predicate, Rule};
use crate::error::{Error, ExecError};
use crate::exec::{execute, group_by_aggregate, ColumnRole, Counters, PhaseTimes, ScoreRelation, ScoreRow};
use crate::oracle::naive_topk;
use crate::planner::{merge_partition, InputStats, PhysicalPlan, PlannerOptions};
use crate::qlang::{analyze, parse_query, CompareSpec, Direction, Side};
use crate::storage::{Catalog, ColumnDef, Relation, RelationBuilder, Schema, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EngineOptions {
    pub planner: PlannerOptions,
    /// Apply the logical rewrite rules before execution.
    pub optimize: bool,
    /// Also build the base tuples of the surviving pairs.
    pub materialize: bool,
    /// Evaluate every Compare with the exhaustive reference instead of the
    /// physical planner.
    pub use_oracle: bool,
    /// Replaces the query's top-k.
    pub k: Option<usize>,
}

impl Default for EngineOptions {
    fn default() -> Self {
        EngineOptions {
            planner: PlannerOptions::ALL,
            optimize: true,
            materialize: false,
            use_oracle: false,
            k: None,
        }
    }
}

#[derive(Clone, Debug)]
pub enum Output {
    Table(Arc<Relation>),
    Scores {
        scores: ScoreRelation,
        /// Table the innermost Compare read.
        source: Arc<Relation>,
    },
}

/// Result of evaluating one logical plan.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub output: Output,
    pub counters: Counters,
    pub phases: PhaseTimes,
    /// Physical plan of every Compare, in evaluation order.
    pub physical: Vec<PhysicalPlan>,
    pub tuples: Option<Relation>,
}

struct Evaluator<'a> {
    catalog: &'a Catalog,
    opts: EngineOptions,
    counters: Counters,
    phases: PhaseTimes,
    physical: Vec<PhysicalPlan>,
    tuples: Option<Relation>,
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

fn invalid(msg: impl Into<String>) -> ExecError {
    ExecError::Invalid(msg.into())
}

pub fn evaluate(plan: &LogicalPlan, catalog: &Catalog, opts: EngineOptions) -> Result<Evaluation, Error> {
    let mut ev = Evaluator {
        catalog,
        opts,
        counters: Counters::default(),
        phases: PhaseTimes::default(),
        physical: Vec::new(),
        tuples: None,
    };
    let output = ev.eval(plan)?;
    Ok(Evaluation {
        output,
        counters: ev.counters,
        phases: ev.phases,
        physical: ev.physical,
        tuples: ev.tuples,
    })
}

impl Evaluator<'_> {
    fn eval(&mut self, plan: &LogicalPlan) -> Result<Output, Error> {
        Ok(match plan {
            LogicalPlan::Scan { table } => Output::Table(self.catalog.get(table)?.clone()),
            LogicalPlan::Filter { predicate, input } => match self.eval(input)? {
                Output::Table(rel) => {
                    let t = Instant::now();
                    let out = filter_table(&rel, predicate)?;
                    self.phases.aggregate += ms(t);
                    Output::Table(Arc::new(out))
                }
                Output::Scores { mut scores, source } => {
                    filter_scores(&mut scores, predicate)?;
                    Output::Scores { scores, source }
                }
            },
            LogicalPlan::Join {
                left,
                right,
                left_key,
                right_key,
                kind,
                ..
            } => {
                let l = self.eval(left)?;
                let Output::Table(r) = self.eval(right)? else {
                    return Err(invalid("right side of a join must be a table").into());
                };
                match (kind, l) {
                    (JoinKind::Inner, Output::Table(l)) => {
                        let t = Instant::now();
                        let out = hash_join(&l, &r, left_key, right_key)?;
                        self.phases.aggregate += ms(t);
                        Output::Table(Arc::new(out))
                    }
                    (JoinKind::Decode { column, value_column }, Output::Scores { mut scores, source }) => {
                        decode(&mut scores, &r, column, right_key, value_column)?;
                        Output::Scores { scores, source }
                    }
                    _ => return Err(invalid("join kind does not match its input").into()),
                }
            }
            LogicalPlan::GroupByAgg {
                keys,
                aggregates,
                input,
            } => match self.eval(input)? {
                Output::Table(rel) => {
                    let t = Instant::now();
                    let out = group_by_aggregate(&rel, keys, aggregates)?;
                    self.phases.aggregate += ms(t);
                    Output::Table(Arc::new(out))
                }
                // score rows are already unique per pair and GMPair
                scores @ Output::Scores { .. } => scores,
            },
            LogicalPlan::Compare { spec, input } => match self.eval(input)? {
                Output::Table(rel) => {
                    let scores = self.run_compare(spec, &rel)?;
                    Output::Scores { scores, source: rel }
                }
                Output::Scores { scores: lower, source } => {
                    let upper = self.run_compare(spec, &source)?;
                    Output::Scores {
                        scores: intersect(&lower, &upper, spec)?,
                        source,
                    }
                }
            },
            LogicalPlan::UnionAll { inputs } => {
                let outs: Vec<Output> = inputs.iter().map(|i| self.eval(i)).collect::<Result<_, _>>()?;
                union(outs)?
            }
            LogicalPlan::Sort { key, direction, input } => match self.eval(input)? {
                Output::Table(rel) => {
                    let c = rel.schema().resolve(key)?;
                    let mut rows: Vec<usize> = (0..rel.row_count()).collect();
                    rows.sort_by(|&a, &b| {
                        let o = rel.column(c).value(a).cmp(&rel.column(c).value(b));
                        if *direction == Direction::Desc {
                            o.reverse()
                        } else {
                            o
                        }
                    });
                    Output::Table(Arc::new(rel.take(&rows)))
                }
                Output::Scores { mut scores, source } => {
                    let c = scores
                        .index_of(key)
                        .ok_or_else(|| invalid(format!("sort key `{key}` not in score relation")))?;
                    scores.sort_by(c, *direction);
                    Output::Scores { scores, source }
                }
            },
            LogicalPlan::Limit { count, input } => match self.eval(input)? {
                Output::Table(rel) => {
                    let rows: Vec<usize> = (0..rel.row_count().min(*count)).collect();
                    Output::Table(Arc::new(rel.take(&rows)))
                }
                Output::Scores { mut scores, source } => {
                    scores.rows.truncate(*count);
                    Output::Scores { scores, source }
                }
            },
        })
    }

    fn run_compare(&mut self, spec: &CompareSpec, rel: &Arc<Relation>) -> Result<ScoreRelation, Error> {
        if self.opts.use_oracle {
            let t = Instant::now();
            let scores = naive_topk(rel, spec)?;
            self.phases.score += ms(t);
            return Ok(scores);
        }
        let t = Instant::now();
        let stats = InputStats::of(rel, spec)?;
        let plan = merge_partition(spec, &stats, self.opts.planner, self.opts.materialize)?;
        self.phases.plan += ms(t);
        let out = execute(&plan, rel)?;
        self.counters.add(&out.counters);
        self.phases.add(&out.phases);
        if out.tuples.is_some() {
            self.tuples = out.tuples;
        }
        self.physical.push(plan);
        Ok(out.scores)
    }
}

fn filter_table(rel: &Relation, predicate: &Predicate) -> Result<Relation, ExecError> {
    let cols: Vec<usize> = predicate
        .conjuncts
        .iter()
        .map(|c| rel.schema().resolve(&c.column))
        .collect::<Result<_, _>>()?;
    let rows: Vec<usize> = (0..rel.row_count())
        .filter(|&r| {
            predicate
                .conjuncts
                .iter()
                .zip(&cols)
                .all(|(c, &i)| c.holds(&rel.column(i).value(r)))
        })
        .collect();
    Ok(rel.take(&rows))
}

/// A predicate column names a score column, or else every constraint
/// column on that attribute.
fn filter_scores(scores: &mut ScoreRelation, predicate: &Predicate) -> Result<(), ExecError> {
    let mut tests: Vec<(Vec<usize>, usize)> = Vec::new();
    for (ci, c) in predicate.conjuncts.iter().enumerate() {
        let targets: Vec<usize> = match scores.index_of(&c.column) {
            Some(i) => vec![i],
            None => scores
                .columns
                .iter()
                .enumerate()
                .filter(|(_, col)| {
                    matches!(&col.role, ColumnRole::Constraint { attribute, .. }
                        if attribute.eq_ignore_ascii_case(&c.column))
                })
                .map(|(i, _)| i)
                .collect(),
        };
        if targets.is_empty() {
            return Err(invalid(format!("filter column `{}` not in score relation", c.column)));
        }
        tests.push((targets, ci));
    }
    scores.rows.retain(|row| {
        tests
            .iter()
            .all(|(targets, ci)| targets.iter().all(|&i| predicate.conjuncts[*ci].holds(&row.cells[i])))
    });
    Ok(())
}

fn value_map(rel: &Relation, key: usize, value: usize) -> HashMap<Value, Value> {
    (0..rel.row_count())
        .map(|r| (rel.column(key).value(r), rel.column(value).value(r)))
        .collect()
}

/// Replaces the key values of score column `column` (and the identity
/// slots mirroring it) by the dimension attribute they determine.
fn decode(
    scores: &mut ScoreRelation,
    dim: &Relation,
    column: &str,
    key: &str,
    value_column: &str,
) -> Result<(), ExecError> {
    let idx = scores
        .index_of(column)
        .ok_or_else(|| invalid(format!("decode column `{column}` not in score relation")))?;
    let map = value_map(dim, dim.schema().resolve(key)?, dim.schema().resolve(value_column)?);
    let mirrors = match &mut scores.columns[idx].role {
        ColumnRole::Constraint { attribute, mirrors } => {
            *attribute = value_column.to_string();
            mirrors.clone()
        }
        _ => return Err(invalid(format!("decode column `{column}` is not a constraint column"))),
    };
    for row in &mut scores.rows {
        let v = map.get(&row.cells[idx]).cloned().unwrap_or(Value::Null);
        for &(side, i) in &mirrors {
            match side {
                Side::Left => row.left[i] = v.clone(),
                Side::Right => row.right[i] = v.clone(),
            }
        }
        row.cells[idx] = v;
    }
    Ok(())
}

fn hash_join(left: &Relation, right: &Relation, left_key: &str, right_key: &str) -> Result<Relation, ExecError> {
    let lk = left.schema().resolve(left_key)?;
    let rk = right.schema().resolve(right_key)?;
    let mut index: HashMap<Value, Vec<usize>> = HashMap::new();
    for r in 0..right.row_count() {
        let v = right.column(rk).value(r);
        if !v.is_null() {
            index.entry(v).or_default().push(r);
        }
    }
    let mut lrows = Vec::new();
    let mut rrows = Vec::new();
    for l in 0..left.row_count() {
        if let Some(ms) = index.get(&left.column(lk).value(l)) {
            for &m in ms {
                lrows.push(l);
                rrows.push(m);
            }
        }
    }
    let mut defs: Vec<ColumnDef> = left.schema().columns.clone();
    let mut columns: Vec<_> = left.columns().iter().map(|c| c.take(&lrows)).collect();
    for (i, def) in right.schema().columns.iter().enumerate() {
        if left.schema().index_of(&def.name).is_none() {
            defs.push(def.clone());
            columns.push(right.column(i).take(&rrows));
        }
    }
    let mut schema = Schema::new(defs)?;
    schema.foreign_keys = left.schema().foreign_keys.clone();
    schema.fds = left
        .schema()
        .fds
        .iter()
        .chain(&right.schema().fds)
        .cloned()
        .collect();
    Ok(Relation::from_columns(left.name(), schema, columns)?)
}

/// Pairs present in both Compares, matched on the upper Compare's
/// constraint columns. Each match joins the lower row with the upper row's
/// flag and score columns.
fn intersect(lower: &ScoreRelation, upper: &ScoreRelation, spec: &CompareSpec) -> Result<ScoreRelation, ExecError> {
    let constraint: Vec<String> = spec.constraint_columns().into_iter().map(|c| c.name).collect();
    let pos = |rel: &ScoreRelation| -> Result<Vec<usize>, ExecError> {
        constraint
            .iter()
            .map(|c| {
                rel.index_of(c)
                    .ok_or_else(|| invalid(format!("chained compare column `{c}` missing")))
            })
            .collect()
    };
    let lp = pos(lower)?;
    let up = pos(upper)?;
    let extra: Vec<usize> = (0..upper.columns.len()).filter(|i| !up.contains(i)).collect();
    let mut index: HashMap<Vec<Value>, Vec<usize>> = HashMap::new();
    for (i, row) in upper.rows.iter().enumerate() {
        index
            .entry(up.iter().map(|&c| row.cells[c].clone()).collect())
            .or_default()
            .push(i);
    }
    let n_upper = spec.gm_pairs().len();
    let mut columns = lower.columns.clone();
    columns.extend(extra.iter().map(|&i| upper.columns[i].clone()));
    let mut rows = Vec::new();
    for row in &lower.rows {
        let key: Vec<Value> = lp.iter().map(|&c| row.cells[c].clone()).collect();
        for &u in index.get(&key).map(Vec::as_slice).unwrap_or(&[]) {
            let urow = &upper.rows[u];
            let mut cells = row.cells.clone();
            cells.extend(extra.iter().map(|&i| urow.cells[i].clone()));
            rows.push(ScoreRow {
                left: row.left.clone(),
                right: row.right.clone(),
                gm: row.gm * n_upper + urow.gm,
                cells,
            });
        }
    }
    Ok(ScoreRelation { columns, rows })
}

fn union(outs: Vec<Output>) -> Result<Output, Error> {
    let mut it = outs.into_iter();
    let first = it.next().ok_or_else(|| invalid("empty union"))?;
    match first {
        Output::Scores { mut scores, source } => {
            for o in it {
                let Output::Scores { scores: s, .. } = o else {
                    return Err(invalid("union of tables and scores").into());
                };
                scores.rows.extend(s.rows);
            }
            Ok(Output::Scores { scores, source })
        }
        Output::Table(rel) => {
            let mut b = RelationBuilder::new(rel.name(), rel.schema().clone());
            let mut push = |r: &Relation| -> Result<(), Error> {
                for i in 0..r.row_count() {
                    b.push_row(&r.row(i))?;
                }
                Ok(())
            };
            push(&rel)?;
            for o in it {
                let Output::Table(r) = o else {
                    return Err(invalid("union of tables and scores").into());
                };
                push(&r)?;
            }
            Ok(Output::Table(Arc::new(b.finish())))
        }
    }
}

/// Timing and work counters of one query.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Stats {
    pub phase_ms: PhaseTimes,
    pub counters: Counters,
}

#[derive(Clone, Debug)]
pub struct QueryResult {
    pub scores: ScoreRelation,
    pub tuples: Option<Relation>,
    pub stats: Stats,
    pub logical_before: LogicalPlan,
    pub logical_after: LogicalPlan,
    pub rules: Vec<Rule>,
    pub physical: Vec<PhysicalPlan>,
}

/// Parses, analyzes, optimizes and runs one query.
pub fn run_query(text: &str, catalog: &Catalog, opts: EngineOptions) -> Result<QueryResult, Error> {
    let t = Instant::now();
    let query = parse_query(text)?;
    let mut analyzed = analyze(&query, catalog)?;
    if let Some(k) = opts.k {
        analyzed.plan = with_k(analyzed.plan, k);
    }
    let parse = ms(t);

    let t = Instant::now();
    let (plan, applied) = if opts.optimize {
        optimize(&analyzed.plan, catalog)
    } else {
        (analyzed.plan.clone(), Vec::new())
    };
    let columns = match &analyzed.projection {
        Some(p) => p.clone(),
        None => analyzed.plan.output_columns(catalog)?,
    };
    let rewrite = ms(t);

    let ev = evaluate(&plan, catalog, opts)?;
    let Output::Scores { scores, .. } = ev.output else {
        return Err(invalid("query did not produce a score relation").into());
    };
    let mut phases = ev.phases;
    phases.parse += parse;
    phases.plan += rewrite;
    Ok(QueryResult {
        scores: scores.project(&columns)?,
        tuples: ev.tuples,
        stats: Stats {
            phase_ms: phases,
            counters: ev.counters,
        },
        logical_before: analyzed.plan,
        logical_after: plan,
        rules: applied.into_iter().map(|a| a.rule).collect(),
        physical: ev.physical,
    })
}

/// Sets the top-k of the outermost Compare and the final LIMIT to `k`.
/// A Compare under a sort on another column keeps its own k.
fn with_k(plan: LogicalPlan, k: usize) -> LogicalPlan {
    let body = match plan {
        LogicalPlan::Limit { input, .. } => *input,
        other => other,
    };
    let body = match body {
        LogicalPlan::Sort { key, direction, input } => match *input {
            LogicalPlan::Compare { mut spec, input } if key.eq_ignore_ascii_case(&spec.score_alias) => {
                spec.k = Some(k);
                spec.direction = direction;
                LogicalPlan::Sort {
                    key,
                    direction,
                    input: Box::new(LogicalPlan::Compare { spec, input }),
                }
            }
            other => LogicalPlan::Sort {
                key,
                direction,
                input: Box::new(other),
            },
        },
        LogicalPlan::Compare { mut spec, input } => {
            spec.k = Some(k);
            LogicalPlan::Sort {
                key: spec.score_alias.clone(),
                direction: spec.direction,
                input: Box::new(LogicalPlan::Compare { spec, input }),
            }
        }
        other => other,
    };
    LogicalPlan::Limit {
        count: k,
        input: Box::new(body),
    }
}

/// Outcome of comparing two score relations.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ResultDiff {
    pub mismatches: Vec<String>,
    /// Largest relative score difference over matched rows.
    pub max_rel_delta: f64,
}

impl ResultDiff {
    pub fn ok(&self) -> bool {
        self.mismatches.is_empty()
    }
}

fn rel_delta(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

/// Differences between two score relations, ignoring row order. Non-score
/// cells must match exactly, scores within `rel_tol` relative error.
pub fn compare_results(a: &ScoreRelation, b: &ScoreRelation, rel_tol: f64) -> ResultDiff {
    let mut out = Vec::new();
    let mut max_rel_delta = 0.0f64;
    if a.column_names() != b.column_names() {
        out.push(format!("columns differ: {:?} vs {:?}", a.column_names(), b.column_names()));
        return ResultDiff {
            mismatches: out,
            max_rel_delta: f64::INFINITY,
        };
    }
    if a.len() != b.len() {
        out.push(format!("row counts differ: {} vs {}", a.len(), b.len()));
    }
    let is_score: Vec<bool> = a.columns.iter().map(|c| c.role == ColumnRole::Score).collect();
    let key = |r: &ScoreRow| -> Vec<Value> {
        r.cells
            .iter()
            .zip(&is_score)
            .filter(|(_, s)| !**s)
            .map(|(v, _)| v.clone())
            .collect()
    };
    let mut ra: Vec<&ScoreRow> = a.rows.iter().collect();
    let mut rb: Vec<&ScoreRow> = b.rows.iter().collect();
    ra.sort_by_key(|r| key(r));
    rb.sort_by_key(|r| key(r));
    for (x, y) in ra.iter().zip(&rb) {
        if key(x) != key(y) {
            out.push(format!("row {:?} vs {:?}", x.cells, y.cells));
            continue;
        }
        for (i, _) in is_score.iter().enumerate().filter(|(_, s)| **s) {
            let (p, q) = (x.cells[i].as_f64().unwrap_or(f64::NAN), y.cells[i].as_f64().unwrap_or(f64::NAN));
            let d = rel_delta(p, q);
            max_rel_delta = max_rel_delta.max(if d.is_nan() { f64::INFINITY } else { d });
            if d.is_nan() || d > rel_tol {
                out.push(format!("score {p} vs {q} in row {:?}", key(x)));
            }
        }
    }
    ResultDiff {
        mismatches: out,
        max_rel_delta,
    }
}

pub fn close(a: f64, b: f64, rel_tol: f64) -> bool {
    rel_delta(a, b) <= rel_tol
}

#[derive(Clone, Debug)]
pub struct VerifyReport {
    pub engine: QueryResult,
    pub oracle: ScoreRelation,
    pub diff: ResultDiff,
}

impl VerifyReport {
    pub fn ok(&self) -> bool {
        self.diff.ok()
    }
}

/// Runs `text` through the engine and through the reference on the
/// unoptimized plan, and compares the results.
pub fn verify(text: &str, catalog: &Catalog, opts: EngineOptions, rel_tol: f64) -> Result<VerifyReport, Error> {
    let engine = run_query(text, catalog, opts)?;
    let reference = run_query(
        text,
        catalog,
        EngineOptions {
            optimize: false,
            materialize: false,
            use_oracle: true,
            ..opts
        },
    )?;
    let diff = compare_results(&engine.scores, &reference.scores, rel_tol);
    Ok(VerifyReport {
        engine,
        oracle: reference.scores,
        diff,
    })
}
