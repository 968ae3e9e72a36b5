use std::sync::Arc;
use std::time::Instant;

use crate::error::ExecError;
use crate::planner::{JoinStrategy, PhysOp, PhysicalPlan};
use crate::prune::{prune_topk, PruneGroup};
use crate::qlang::Direction;
use crate::storage::Relation;

use super::aggregate::{aggregate_partials, rollup, AggTable};
use super::compare::{rank_cmp, score_relation, Candidate, CompareLayout, GmScores};
use super::pairs::{enumerate_pairs, score_all_pairs, score_trendwise, PairRules};
use super::score::ScoreRelation;
use super::scorer::{DiffScorer, Scorer};
use super::trend::{partition_side, Trend};
use super::{materialize_topk_tuples, Counters, PhaseTimes};

/// Result of executing one Compare plan.
#[derive(Clone, Debug)]
pub struct PhysOutput {
    pub scores: ScoreRelation,
    pub tuples: Option<Relation>,
    pub counters: Counters,
    pub phases: PhaseTimes,
}

#[derive(Clone)]
enum Val {
    Rel(Arc<Relation>),
    Agg(Arc<AggTable>),
    Trends { gm: usize, left: Arc<Vec<Trend>>, right: Arc<Vec<Trend>> },
    Scores(Vec<GmScores>),
    Ranked(Vec<GmScores>, Vec<(usize, usize)>),
    Done,
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

fn rank(results: &[GmScores], direction: Direction) -> Vec<(usize, usize)> {
    let cand = |&(g, p): &(usize, usize)| {
        let r = &results[g];
        let s = &r.pairs[p];
        Candidate {
            score: s.score,
            left: &r.left[s.left as usize].key,
            right: &r.right[s.right as usize].key,
            gm: r.gm,
        }
    };
    let mut order: Vec<(usize, usize)> = results
        .iter()
        .enumerate()
        .flat_map(|(g, r)| (0..r.pairs.len()).map(move |p| (g, p)))
        .collect();
    order.sort_by(|a, b| rank_cmp(&cand(a), &cand(b), direction));
    order
}

fn bad(msg: &str) -> ExecError {
    ExecError::Invalid(format!("malformed physical plan: {msg}"))
}

/// Runs `plan` over `input` with the spec's DIFF scorer.
pub fn execute(plan: &PhysicalPlan, input: &Arc<Relation>) -> Result<PhysOutput, ExecError> {
    execute_with(plan, input, &DiffScorer(plan.spec.scorer))
}

/// Runs `plan` with an arbitrary scorer. Bound-based pruning needs a DIFF
/// scorer and is rejected otherwise.
pub fn execute_with(plan: &PhysicalPlan, input: &Arc<Relation>, scorer: &dyn Scorer) -> Result<PhysOutput, ExecError> {
    let spec = &plan.spec;
    let layout = CompareLayout::new(input.clone(), spec)?;
    let rules = PairRules::new(spec);
    let symmetric = rules.symmetric;
    let mut counters = Counters::default();
    let mut phases = PhaseTimes::default();
    let mut vals: Vec<Val> = Vec::with_capacity(plan.nodes.len());
    let mut tuples = None;

    let mut consumers = vec![0usize; plan.nodes.len()];
    for n in &plan.nodes {
        for &i in &n.inputs {
            consumers[i] += 1;
        }
    }

    for node in &plan.nodes {
        let args: Vec<Val> = node
            .inputs
            .iter()
            .map(|&i| {
                consumers[i] -= 1;
                if consumers[i] == 0 {
                    std::mem::replace(&mut vals[i], Val::Done)
                } else {
                    vals[i].clone()
                }
            })
            .collect();
        let arg = |i: usize| -> &Val { &args[i] };
        let t = Instant::now();
        let v = match &node.op {
            PhysOp::Input { .. } => Val::Rel(input.clone()),
            PhysOp::Filter => {
                let Val::Rel(rel) = arg(0) else { return Err(bad("filter input")) };
                let rows: Vec<usize> = (0..rel.row_count())
                    .filter(|&r| layout.left.row_matches(rel, r) || layout.right.row_matches(rel, r))
                    .collect();
                let out = Val::Rel(Arc::new(rel.take(&rows)));
                phases.aggregate += ms(t);
                out
            }
            PhysOp::GroupByAgg { keys, measures, .. } => {
                let Val::Rel(rel) = arg(0) else { return Err(bad("group-by input")) };
                let k: Vec<usize> = keys.iter().map(|c| rel.schema().resolve(c)).collect::<Result<_, _>>()?;
                let m: Vec<usize> = measures
                    .iter()
                    .map(|c| rel.schema().resolve(c))
                    .collect::<Result<_, _>>()?;
                let out = Val::Agg(Arc::new(aggregate_partials(rel, None, &k, &m)?));
                phases.aggregate += ms(t);
                out
            }
            PhysOp::VerticalPartition { gm } => {
                let Val::Agg(table) = arg(0) else { return Err(bad("partition input")) };
                let g = layout.gms[*gm];
                let mut keep: Vec<usize> = Vec::new();
                for c in layout.constraint_columns().into_iter().chain([g.grouping]) {
                    let p = table.key_position(c).ok_or_else(|| bad("partition key"))?;
                    if !keep.contains(&p) {
                        keep.push(p);
                    }
                }
                let slot = table.measure_position(g.measure).ok_or_else(|| bad("partition measure"))?;
                let out = Val::Agg(Arc::new(rollup(table, &keep, &[slot])));
                phases.partition += ms(t);
                out
            }
            PhysOp::HorizontalPartition { gm } => {
                let Val::Agg(table) = arg(0) else { return Err(bad("partition input")) };
                let g = layout.gms[*gm];
                let left = Arc::new(partition_side(table, &layout.left, g.grouping, g.measure, g.agg)?);
                let right = if symmetric {
                    left.clone()
                } else {
                    Arc::new(partition_side(table, &layout.right, g.grouping, g.measure, g.agg)?)
                };
                counters.trends += (left.len() + if symmetric { 0 } else { right.len() }) as u64;
                phases.partition += ms(t);
                Val::Trends { gm: *gm, left, right }
            }
            PhysOp::TrendJoinScore { gm, strategy } => {
                let out = match (strategy, arg(0)) {
                    (JoinStrategy::Trendwise, Val::Trends { left, right, .. }) => {
                        let pairs = enumerate_pairs(left, right, &rules);
                        let scored = score_trendwise(left, right, &pairs, scorer, &mut counters);
                        GmScores {
                            gm: *gm,
                            left: left.clone(),
                            right: right.clone(),
                            pairs: scored,
                        }
                    }
                    (JoinStrategy::AllPairs, Val::Agg(table)) => {
                        let g = layout.gms[*gm];
                        let left = Arc::new(partition_side(table, &layout.left, g.grouping, g.measure, g.agg)?);
                        let right = if symmetric {
                            left.clone()
                        } else {
                            Arc::new(partition_side(table, &layout.right, g.grouping, g.measure, g.agg)?)
                        };
                        counters.trends += (left.len() + if symmetric { 0 } else { right.len() }) as u64;
                        let scored = score_all_pairs(&left, &right, &rules, scorer, &mut counters);
                        GmScores {
                            gm: *gm,
                            left,
                            right,
                            pairs: scored,
                        }
                    }
                    _ => return Err(bad("join input")),
                };
                phases.score += ms(t);
                Val::Scores(vec![out])
            }
            PhysOp::DiffPruneTopK { k, direction, mode } => {
                let diff = scorer
                    .diff_spec()
                    .ok_or_else(|| ExecError::Invalid("bound pruning requires a DIFF scorer".into()))?;
                let mut groups = Vec::new();
                let mut lists = Vec::new();
                for i in 0..node.inputs.len() {
                    let Val::Trends { gm, left, right } = arg(i) else { return Err(bad("prune input")) };
                    groups.push(PruneGroup {
                        gm: *gm,
                        left,
                        right,
                        pairs: enumerate_pairs(left, right, &rules),
                    });
                    lists.push((*gm, left.clone(), right.clone()));
                }
                let kept = prune_topk(&groups, diff, *k, *direction, *mode, &mut counters)?;
                let out = lists
                    .into_iter()
                    .zip(kept)
                    .map(|((gm, left, right), pairs)| GmScores { gm, left, right, pairs })
                    .collect();
                phases.score += ms(t);
                Val::Scores(out)
            }
            PhysOp::UnionAll => {
                let mut all = Vec::new();
                for a in args {
                    let Val::Scores(s) = a else { return Err(bad("union input")) };
                    all.extend(s);
                }
                Val::Scores(all)
            }
            PhysOp::Sort { direction } => {
                let Some(Val::Scores(s)) = args.into_iter().next() else { return Err(bad("sort input")) };
                let order = rank(&s, *direction);
                phases.score += ms(t);
                Val::Ranked(s, order)
            }
            PhysOp::Limit { k } => {
                let Some(Val::Ranked(s, mut order)) = args.into_iter().next() else {
                    return Err(bad("limit input"));
                };
                order.truncate(*k);
                Val::Ranked(s, order)
            }
            PhysOp::MaterializeTuples => {
                let Some(Val::Ranked(s, order)) = args.into_iter().next() else {
                    return Err(bad("materialize input"));
                };
                let scores = assemble(plan, &layout, &s, &order);
                tuples = Some(materialize_topk_tuples(&scores, input, spec)?);
                Val::Ranked(s, order)
            }
        };
        vals.push(v);
    }

    let Val::Ranked(s, order) = &vals[plan.root()] else { return Err(bad("root must rank its input")) };
    let scores = assemble(plan, &layout, s, order);
    Ok(PhysOutput {
        scores,
        tuples,
        counters,
        phases,
    })
}

fn assemble(plan: &PhysicalPlan, layout: &CompareLayout, s: &[GmScores], order: &[(usize, usize)]) -> ScoreRelation {
    let ranked: Vec<Candidate> = order
        .iter()
        .map(|&(g, p)| {
            let r = &s[g];
            let pair = &r.pairs[p];
            Candidate {
                score: pair.score,
                left: &r.left[pair.left as usize].key,
                right: &r.right[pair.right as usize].key,
                gm: r.gm,
            }
        })
        .collect();
    score_relation(&plan.spec, layout, &ranked)
}
