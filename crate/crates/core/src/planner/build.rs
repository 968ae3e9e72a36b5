use std::collections::HashMap;

use crate::error::PlanError;
use crate::prune::{segment_count, PruneMode};
use crate::qlang::{CompareSpec, ConjunctKind, ConstraintSpec};
use crate::storage::{column_stats, Relation};

use super::physical::{JoinStrategy, PhysNode, PhysOp, PhysicalPlan};

/// Exact row count and distinct counts of the Compare input.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct InputStats {
    pub name: String,
    pub rows: usize,
    ndv: HashMap<String, usize>,
}

impl InputStats {
    pub fn new(name: &str, rows: usize, ndv: impl IntoIterator<Item = (String, usize)>) -> Self {
        InputStats {
            name: name.to_string(),
            rows,
            ndv: ndv.into_iter().map(|(k, v)| (k.to_ascii_lowercase(), v)).collect(),
        }
    }

    /// Statistics of every column `spec` reads.
    pub fn of(rel: &Relation, spec: &CompareSpec) -> Result<Self, PlanError> {
        let mut ndv = Vec::new();
        for c in spec.referenced_columns() {
            let idx = rel
                .schema()
                .index_of(&c)
                .ok_or_else(|| PlanError::MissingStats(c.clone()))?;
            ndv.push((c, column_stats(rel.column(idx)).distinct_count));
        }
        Ok(InputStats::new(rel.name(), rel.row_count(), ndv))
    }

    pub fn distinct(&self, column: &str) -> Result<usize, PlanError> {
        self.ndv
            .get(&column.to_ascii_lowercase())
            .copied()
            .ok_or_else(|| PlanError::MissingStats(column.to_string()))
    }

    /// Distinct combinations of `columns`, capped by `cap`.
    fn groups(&self, columns: &[String], cap: f64) -> Result<f64, PlanError> {
        let mut n = 1.0f64;
        for c in columns {
            n *= self.distinct(c)?.max(1) as f64;
        }
        Ok(n.min(cap))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PlannerOptions {
    pub merge: bool,
    pub trendwise: bool,
    pub pruning: bool,
    pub early_termination: bool,
}

impl PlannerOptions {
    pub const ALL: PlannerOptions = PlannerOptions {
        merge: true,
        trendwise: true,
        pruning: true,
        early_termination: true,
    };

    pub const BASIC: PlannerOptions = PlannerOptions {
        merge: false,
        trendwise: false,
        pruning: false,
        early_termination: false,
    };

    /// The five cumulative ablation stages, basic first.
    pub fn stages() -> [(&'static str, PlannerOptions); 5] {
        let mut o = PlannerOptions::BASIC;
        let basic = o;
        o.merge = true;
        let merged = o;
        o.trendwise = true;
        let trendwise = o;
        o.pruning = true;
        let bounds = o;
        o.early_termination = true;
        [
            ("basic", basic),
            ("merge", merged),
            ("trendwise", trendwise),
            ("bounds", bounds),
            ("early-termination", o),
        ]
    }
}

/// GMPairs computed by one shared group-by.
#[derive(Clone, Debug, PartialEq)]
pub struct SubPlanGroup {
    pub gms: Vec<usize>,
    pub est_rows: f64,
}

/// Group-by cost weight on output groups.
const GROUP_WEIGHT: f64 = 2.0;

fn split_fixed(c: &ConstraintSpec) -> bool {
    c.conjuncts.iter().any(|cj| matches!(cj.kind, ConjunctKind::Fixed(_)))
}

struct Builder<'a> {
    spec: &'a CompareSpec,
    stats: &'a InputStats,
    nodes: Vec<PhysNode>,
}

impl Builder<'_> {
    fn push(&mut self, op: PhysOp, inputs: Vec<usize>, est_rows: f64, est_cost: f64) -> usize {
        self.nodes.push(PhysNode {
            op,
            inputs,
            est_rows,
            est_cost,
        });
        self.nodes.len() - 1
    }

    fn rows(&self, id: usize) -> f64 {
        self.nodes[id].est_rows
    }

    fn selectivity(&self, c: &ConstraintSpec) -> Result<f64, PlanError> {
        let mut s = 1.0;
        for cj in &c.conjuncts {
            if let ConjunctKind::Fixed(_) = cj.kind {
                s /= self.stats.distinct(&cj.attribute)?.max(1) as f64;
            }
        }
        Ok(s)
    }

    /// Estimated trends of one side drawn from `rows` aggregate rows.
    fn trends(&self, c: &ConstraintSpec, rows: f64) -> Result<f64, PlanError> {
        let mut n = 1.0f64;
        for cj in &c.conjuncts {
            if cj.is_all() {
                n *= self.stats.distinct(&cj.attribute)?.max(1) as f64;
            }
        }
        Ok(n.min(rows))
    }

    fn pairs(&self, tl: f64, tr: f64) -> f64 {
        if self.spec.symmetric() {
            tl * (tl - 1.0).max(0.0) / 2.0
        } else {
            tl * tr
        }
    }
}

fn group_keys(spec: &CompareSpec, gms: &[usize]) -> (Vec<String>, Vec<String>) {
    let mut keys = spec.constraint_attributes();
    let mut measures: Vec<String> = Vec::new();
    for &g in gms {
        let gm = &spec.gm_pairs()[g];
        if !keys.iter().any(|k| k.eq_ignore_ascii_case(&gm.grouping)) {
            keys.push(gm.grouping.clone());
        }
        if !measures.iter().any(|m| m.eq_ignore_ascii_case(&gm.measure.column)) {
            measures.push(gm.measure.column.clone());
        }
    }
    (keys, measures)
}

/// Physical plan for `spec` with one shared group-by per entry of `groups`.
pub fn build_plan(
    spec: &CompareSpec,
    stats: &InputStats,
    groups: &[Vec<usize>],
    opts: PlannerOptions,
    materialize: bool,
) -> Result<PhysicalPlan, PlanError> {
    let mut seen = vec![false; spec.gm_pairs().len()];
    for &g in groups.iter().flatten() {
        if g >= seen.len() || seen[g] {
            return Err(PlanError::Invalid(format!("GMPair {g} is not covered exactly once")));
        }
        seen[g] = true;
    }
    if seen.iter().any(|s| !s) {
        return Err(PlanError::Invalid("some GMPair has no group-by".into()));
    }

    let mut b = Builder {
        spec,
        stats,
        nodes: Vec::new(),
    };
    let n = stats.rows as f64;
    let mut base = b.push(
        PhysOp::Input {
            name: stats.name.clone(),
        },
        vec![],
        n,
        0.0,
    );
    if split_fixed(&spec.left.constraint) && split_fixed(&spec.right.constraint) {
        let sel = if spec.symmetric() {
            b.selectivity(&spec.left.constraint)?
        } else {
            (b.selectivity(&spec.left.constraint)? + b.selectivity(&spec.right.constraint)?).min(1.0)
        };
        base = b.push(PhysOp::Filter, vec![base], n * sel, n);
    }

    let prune = opts.pruning && spec.k.is_some();
    let trendwise = opts.trendwise || prune;
    let mut leaves: Vec<usize> = Vec::new();
    for group in groups {
        let (keys, measures) = group_keys(spec, group);
        let input = b.rows(base);
        let out = b.stats.groups(&keys, input)?;
        let agg = b.push(
            PhysOp::GroupByAgg {
                keys,
                measures,
                gms: group.clone(),
            },
            vec![base],
            out,
            input + GROUP_WEIGHT * out,
        );
        for &gm in group {
            let g = &spec.gm_pairs()[gm];
            let mut src = agg;
            if group.len() > 1 {
                let mut cols = spec.constraint_attributes();
                cols.push(g.grouping.clone());
                let rows = b.stats.groups(&cols, out)?;
                src = b.push(PhysOp::VerticalPartition { gm }, vec![agg], rows, out);
            }
            let rows = b.rows(src);
            let tl = b.trends(&spec.left.constraint, rows)?;
            let tr = b.trends(&spec.right.constraint, rows)?;
            let size = (b.stats.distinct(&g.grouping)?.max(1) as f64).min(rows / tl.max(1.0));
            let pairs = b.pairs(tl, tr);
            if trendwise {
                let hp = b.push(PhysOp::HorizontalPartition { gm }, vec![src], rows, rows);
                if prune {
                    leaves.push(hp);
                } else {
                    let j = b.push(
                        PhysOp::TrendJoinScore {
                            gm,
                            strategy: JoinStrategy::Trendwise,
                        },
                        vec![hp],
                        pairs,
                        pairs * 2.0 * size,
                    );
                    leaves.push(j);
                }
            } else {
                let j = b.push(
                    PhysOp::TrendJoinScore {
                        gm,
                        strategy: JoinStrategy::AllPairs,
                    },
                    vec![src],
                    pairs,
                    (tl * size) * (tr * size) + pairs * size,
                );
                leaves.push(j);
            }
        }
    }

    let mut top = if prune {
        let k = spec.k.unwrap_or(0);
        let mut cost = 0.0;
        for &hp in &leaves {
            let rows = b.rows(hp);
            let PhysOp::HorizontalPartition { gm } = b.nodes[hp].op else {
                unreachable!()
            };
            let g = &spec.gm_pairs()[gm];
            let tl = b.trends(&spec.left.constraint, rows)?;
            let tr = b.trends(&spec.right.constraint, rows)?;
            let size = (b.stats.distinct(&g.grouping)?.max(1) as f64).min(rows / tl.max(1.0));
            let pairs = b.pairs(tl, tr);
            cost += pairs * (2.0 * size + segment_count(size as usize) as f64);
        }
        let mode = if opts.early_termination {
            PruneMode::EarlyTermination
        } else {
            PruneMode::BoundsOnly
        };
        b.push(
            PhysOp::DiffPruneTopK {
                k,
                direction: spec.direction,
                mode,
            },
            leaves,
            k as f64,
            cost,
        )
    } else if leaves.len() == 1 {
        leaves[0]
    } else {
        let rows: f64 = leaves.iter().map(|&l| b.rows(l)).sum();
        b.push(PhysOp::UnionAll, leaves, rows, rows)
    };
    let rows = b.rows(top);
    top = b.push(
        PhysOp::Sort {
            direction: spec.direction,
        },
        vec![top],
        rows,
        rows * (rows + 1.0).log2(),
    );
    if let Some(k) = spec.k {
        let rows = b.rows(top).min(k as f64);
        top = b.push(PhysOp::Limit { k }, vec![top], rows, 0.0);
    }
    if materialize {
        let rows = b.rows(top);
        b.push(PhysOp::MaterializeTuples, vec![top], rows, n);
    }
    Ok(PhysicalPlan {
        spec: spec.clone(),
        nodes: b.nodes,
    })
}

fn singletons(spec: &CompareSpec) -> Vec<Vec<usize>> {
    (0..spec.gm_pairs().len()).map(|g| vec![g]).collect()
}

/// One group-by and one all-pairs join per GMPair.
pub fn lower_basic(spec: &CompareSpec, stats: &InputStats) -> Result<PhysicalPlan, PlanError> {
    build_plan(spec, stats, &singletons(spec), PlannerOptions::BASIC, false)
}

pub fn merge_pair(a: &SubPlanGroup, b: &SubPlanGroup) -> Result<SubPlanGroup, PlanError> {
    if a.gms.iter().any(|g| b.gms.contains(g)) {
        return Err(PlanError::Invalid("cannot merge overlapping sub-plans".into()));
    }
    let mut gms: Vec<usize> = a.gms.iter().chain(&b.gms).copied().collect();
    gms.sort_unstable();
    Ok(SubPlanGroup {
        gms,
        est_rows: a.est_rows.max(b.est_rows),
    })
}

pub fn cost(plan: &PhysicalPlan) -> f64 {
    plan.cost()
}

/// Greedy merging of sub-plans: starting from one group per GMPair,
/// repeatedly applies the merge with the lowest resulting cost while it
/// lowers the cost.
pub fn merge_partition(
    spec: &CompareSpec,
    stats: &InputStats,
    opts: PlannerOptions,
    materialize: bool,
) -> Result<PhysicalPlan, PlanError> {
    let est = |gms: &[usize]| -> Result<f64, PlanError> {
        let (keys, _) = group_keys(spec, gms);
        stats.groups(&keys, stats.rows as f64)
    };
    let mut groups: Vec<SubPlanGroup> = singletons(spec)
        .into_iter()
        .map(|gms| Ok(SubPlanGroup { est_rows: est(&gms)?, gms }))
        .collect::<Result<_, PlanError>>()?;
    let as_lists = |g: &[SubPlanGroup]| g.iter().map(|s| s.gms.clone()).collect::<Vec<_>>();
    let mut best_plan = build_plan(spec, stats, &as_lists(&groups), opts, materialize)?;
    if !opts.merge {
        return Ok(best_plan);
    }
    loop {
        let mut best: Option<(f64, usize, usize, PhysicalPlan)> = None;
        for i in 0..groups.len() {
            for j in i + 1..groups.len() {
                let merged = merge_pair(&groups[i], &groups[j])?;
                let mut trial: Vec<SubPlanGroup> = groups.clone();
                trial[i] = merged;
                trial.remove(j);
                let plan = build_plan(spec, stats, &as_lists(&trial), opts, materialize)?;
                let c = plan.cost();
                if best.as_ref().is_none_or(|b| c < b.0) {
                    best = Some((c, i, j, plan));
                }
            }
        }
        match best {
            Some((c, i, j, plan)) if c < best_plan.cost() => {
                let mut merged = merge_pair(&groups[i], &groups[j])?;
                merged.est_rows = est(&merged.gms)?;
                groups[i] = merged;
                groups.remove(j);
                best_plan = plan;
            }
            _ => return Ok(best_plan),
        }
    }
}
