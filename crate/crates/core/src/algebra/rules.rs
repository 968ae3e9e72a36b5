use crate::exec::PairRules;
use crate::qlang::ast::CmpOp;
use crate::qlang::spec::{AggFn, CompareSpec, ConjunctKind, ScoreAgg};
use crate::storage::{Catalog, Relation, Value};

use super::plan::{JoinKind, LogicalPlan, Predicate, Shape};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Rule {
    PushCompareBelowJoin,
    PushAggregateBelowCompare,
    PushFilterBelowCompare,
    CommuteCompares,
}

impl Rule {
    /// Application order of the fixpoint driver.
    pub const ORDER: [Rule; 4] = [
        Rule::PushFilterBelowCompare,
        Rule::PushCompareBelowJoin,
        Rule::PushAggregateBelowCompare,
        Rule::CommuteCompares,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Rule::PushCompareBelowJoin => "push-compare-below-join",
            Rule::PushAggregateBelowCompare => "push-aggregate-below-compare",
            Rule::PushFilterBelowCompare => "push-filter-below-compare",
            Rule::CommuteCompares => "commute-compares",
        }
    }
}

fn eq(a: &str, b: &str) -> bool {
    a.eq_ignore_ascii_case(b)
}

/// Compare over a PK-FK join (possibly through filters) rewritten onto the
/// fact side, with a decode join above for every non-key constraint
/// output column. Applies at the root of `plan` only.
pub fn push_compare_below_join(plan: &LogicalPlan, catalog: &Catalog) -> Option<LogicalPlan> {
    let LogicalPlan::Compare { spec, input } = plan else { return None };
    let mut filters: Vec<&Predicate> = Vec::new();
    let mut node = input.as_ref();
    while let LogicalPlan::Filter { predicate, input } = node {
        filters.push(predicate);
        node = input;
    }
    let LogicalPlan::Join {
        left: fact,
        right,
        left_key: fk,
        right_key: pk_name,
        fk_declared: true,
        kind: JoinKind::Inner,
    } = node
    else {
        return None;
    };
    let LogicalPlan::Scan { table: dim_table } = right.as_ref() else { return None };
    let dim = catalog.get(dim_table).ok()?;
    let pk = dim.schema().single_pk()?.to_string();
    if !eq(&pk, pk_name) {
        return None;
    }
    let Shape::Table(fact_cols) = fact.shape(catalog).ok()? else { return None };
    let in_fact = |c: &str| fact_cols.iter().any(|d| eq(&d.name, c));
    if has_nulls(fact, catalog, fk) {
        return None;
    }
    let is_dim = |c: &str| !in_fact(c) && dim.schema().index_of(c).is_some();
    let mappable = |c: &str| eq(c, &pk) || dim.schema().has_fd(c, &pk);

    let mut new_spec = spec.clone();
    let mut decodes: Vec<(String, String)> = Vec::new();
    // constraint attributes: constants mapped to keys, outputs decoded
    for side in [&mut new_spec.left, &mut new_spec.right] {
        for c in &mut side.constraint.conjuncts {
            if !is_dim(&c.attribute) {
                continue;
            }
            if !mappable(&c.attribute) {
                return None;
            }
            if !eq(&c.attribute, &pk) {
                if let ConjunctKind::Fixed(v) = &c.kind {
                    c.kind = ConjunctKind::Fixed(lookup_key(dim, &c.attribute, v, &pk)?);
                }
            }
        }
    }
    for cc in spec.constraint_columns() {
        if is_dim(&cc.attribute) && !eq(&cc.attribute, &pk) {
            decodes.push((cc.name.clone(), cc.attribute.clone()));
        }
    }
    for gm in spec.gm_pairs() {
        if is_dim(&gm.grouping) && !mappable(&gm.grouping) {
            return None;
        }
        // measure values must stay identical
        if is_dim(&gm.measure.column) && !eq(&gm.measure.column, &pk) {
            return None;
        }
    }
    let mut new_filters: Vec<Predicate> = Vec::new();
    for p in &filters {
        let mut q = (*p).clone();
        for cmp in &mut q.conjuncts {
            if !is_dim(&cmp.column) {
                continue;
            }
            if eq(&cmp.column, &pk) {
                cmp.column = fk.clone();
            } else if mappable(&cmp.column) && cmp.op == CmpOp::Eq {
                cmp.value = lookup_key(dim, &cmp.column, &cmp.value, &pk)?;
                cmp.column = fk.clone();
            } else {
                return None;
            }
        }
        new_filters.push(q);
    }
    for c in spec.referenced_columns() {
        if is_dim(&c) {
            new_spec.rename_column(&c, fk);
        }
    }
    if let LogicalPlan::Scan { table } = fact.as_ref() {
        new_spec.source = table.clone();
    }
    // distinct attributes renamed onto one key would change which pairs
    // count as the same trend
    let (before, after) = (PairRules::new(spec), PairRules::new(&new_spec));
    if before.symmetric != after.symmetric || before.same_assignment != after.same_assignment {
        return None;
    }

    let mut below = fact.as_ref().clone();
    for q in new_filters.into_iter().rev() {
        below = LogicalPlan::Filter {
            predicate: q,
            input: Box::new(below),
        };
    }
    let mut out = LogicalPlan::Compare {
        spec: new_spec,
        input: Box::new(below),
    };
    for (column, value_column) in decodes {
        out = LogicalPlan::Join {
            left: Box::new(out),
            right: Box::new(LogicalPlan::scan(dim_table)),
            left_key: column.clone(),
            right_key: pk.clone(),
            fk_declared: true,
            kind: JoinKind::Decode { column, value_column },
        };
    }
    Some(out)
}

/// Key of the single dimension row with `column = value`.
fn lookup_key(dim: &Relation, column: &str, value: &Value, pk: &str) -> Option<Value> {
    let c = dim.schema().index_of(column)?;
    let k = dim.schema().index_of(pk)?;
    let mut found: Option<Value> = None;
    for r in 0..dim.row_count() {
        if &dim.column(c).value(r) == value {
            let key = dim.column(k).value(r);
            match &found {
                Some(f) if f != &key => return None,
                _ => found = Some(key),
            }
        }
    }
    found
}

fn has_nulls(plan: &LogicalPlan, catalog: &Catalog, column: &str) -> bool {
    match plan {
        LogicalPlan::Scan { table } => match catalog.get(table) {
            Ok(rel) if rel.schema().index_of(column).is_some() => {
                catalog.stats(table, column).map_or(true, |s| s.null_count > 0)
            }
            _ => false,
        },
        _ => plan.children().iter().any(|c| has_nulls(c, catalog, column)),
    }
}

/// Duplicate elimination above a MIN/MAX-only Compare moved onto the
/// Compare's input.
pub fn push_aggregate_below_compare(plan: &LogicalPlan) -> Option<LogicalPlan> {
    let LogicalPlan::GroupByAgg {
        keys,
        aggregates,
        input,
    } = plan
    else {
        return None;
    };
    let LogicalPlan::Compare { spec, input: below } = input.as_ref() else { return None };
    if !aggregates.is_empty() || !matches!(spec.scorer.agg, ScoreAgg::Min | ScoreAgg::Max) {
        return None;
    }
    if !spec
        .gm_pairs()
        .iter()
        .all(|g| matches!(g.measure.agg, AggFn::Min | AggFn::Max))
    {
        return None;
    }
    let refs = spec.referenced_columns();
    if !refs.iter().all(|c| keys.iter().any(|k| eq(k, c))) {
        return None;
    }
    if matches!(below.as_ref(), LogicalPlan::GroupByAgg { aggregates, .. } if aggregates.is_empty()) {
        return None;
    }
    Some(LogicalPlan::Compare {
        spec: spec.clone(),
        input: Box::new(LogicalPlan::GroupByAgg {
            keys: keys.clone(),
            aggregates: vec![],
            input: below.clone(),
        }),
    })
}

/// `column` is a constraint attribute of both sides and, if it also names
/// an output column, that column holds the attribute.
fn constrained_on_both(spec: &CompareSpec, column: &str) -> bool {
    let both = spec.left.constraint.attributes().any(|a| eq(a, column))
        && spec.right.constraint.attributes().any(|a| eq(a, column));
    let clash = spec.output_columns().iter().any(|c| eq(c, column))
        && !spec
            .constraint_columns()
            .iter()
            .any(|c| eq(&c.name, column) && eq(&c.attribute, column));
    both && !clash
}

/// Filter on constraint attributes above a Compare without k moved below.
pub fn push_filter_below_compare(plan: &LogicalPlan) -> Option<LogicalPlan> {
    let LogicalPlan::Filter { predicate, input } = plan else { return None };
    let LogicalPlan::Compare { spec, input: below } = input.as_ref() else { return None };
    if spec.k.is_some() || predicate.conjuncts.is_empty() {
        return None;
    }
    if !predicate.columns().all(|c| constrained_on_both(spec, c)) {
        return None;
    }
    Some(LogicalPlan::Compare {
        spec: spec.clone(),
        input: Box::new(LogicalPlan::Filter {
            predicate: predicate.clone(),
            input: below.clone(),
        }),
    })
}

fn same_partitioning(a: &CompareSpec, b: &CompareSpec) -> bool {
    a.left.constraint == b.left.constraint && a.right.constraint == b.right.constraint
}

/// Estimated rows a Compare keeps.
fn survivors(spec: &CompareSpec) -> f64 {
    spec.k.map_or(f64::INFINITY, |k| k as f64)
}

/// Two chained Compares on the same partitioning reordered so the one
/// keeping fewer pairs runs first.
pub fn commute_compares(plan: &LogicalPlan) -> Option<LogicalPlan> {
    let LogicalPlan::Compare { spec: upper, input } = plan else { return None };
    let LogicalPlan::Compare { spec: lower, input: below } = input.as_ref() else { return None };
    if !same_partitioning(upper, lower) || survivors(upper) >= survivors(lower) {
        return None;
    }
    Some(LogicalPlan::Compare {
        spec: lower.clone(),
        input: Box::new(LogicalPlan::Compare {
            spec: upper.clone(),
            input: below.clone(),
        }),
    })
}

pub fn apply_rule(rule: Rule, plan: &LogicalPlan, catalog: &Catalog) -> Option<LogicalPlan> {
    match rule {
        Rule::PushCompareBelowJoin => push_compare_below_join(plan, catalog),
        Rule::PushAggregateBelowCompare => push_aggregate_below_compare(plan),
        Rule::PushFilterBelowCompare => push_filter_below_compare(plan),
        Rule::CommuteCompares => commute_compares(plan),
    }
}

/// Applies `rule` at the first matching node in pre-order.
pub fn apply_anywhere(rule: Rule, plan: &LogicalPlan, catalog: &Catalog) -> Option<LogicalPlan> {
    if let Some(p) = apply_rule(rule, plan, catalog) {
        return Some(p);
    }
    let mut copy = plan.clone();
    for child in copy.children_mut() {
        if let Some(p) = apply_anywhere(rule, child, catalog) {
            *child = p;
            return Some(copy);
        }
    }
    None
}

/// One recorded rewrite.
#[derive(Clone, Debug, PartialEq)]
pub struct RuleApplication {
    pub rule: Rule,
    pub plan: LogicalPlan,
}

/// Applies the rules in [`Rule::ORDER`] until none fires, at most
/// `height × 4` times. Rewrites that would leave an invalid plan are
/// skipped.
pub fn optimize(plan: &LogicalPlan, catalog: &Catalog) -> (LogicalPlan, Vec<RuleApplication>) {
    let budget = plan.height() * Rule::ORDER.len();
    let mut current = plan.clone();
    let mut log = Vec::new();
    'outer: while log.len() < budget {
        for rule in Rule::ORDER {
            if let Some(next) = apply_anywhere(rule, &current, catalog) {
                if next.validate(catalog).is_ok() && next != current {
                    current = next;
                    log.push(RuleApplication {
                        rule,
                        plan: current.clone(),
                    });
                    continue 'outer;
                }
            }
        }
        break;
    }
    (current, log)
}
