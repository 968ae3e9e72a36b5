use std::fmt::Write;

use super::plan::{JoinKind, LogicalPlan};

fn label(plan: &LogicalPlan) -> String {
    match plan {
        LogicalPlan::Scan { table } => format!("Scan {table}"),
        LogicalPlan::Filter { predicate, .. } => format!("Filter {}", predicate.describe()),
        LogicalPlan::Join {
            left_key,
            right_key,
            kind,
            fk_declared,
            ..
        } => match kind {
            JoinKind::Inner => format!(
                "Join {left_key} = {right_key}{}",
                if *fk_declared { " (fk)" } else { "" }
            ),
            JoinKind::Decode { column, value_column } => {
                format!("Decode {column} via {right_key} -> {value_column}")
            }
        },
        LogicalPlan::GroupByAgg { keys, aggregates, .. } => {
            let mut s = format!("GroupByAgg [{}]", keys.join(", "));
            if !aggregates.is_empty() {
                let a: Vec<String> = aggregates
                    .iter()
                    .map(|a| format!("{}({}) AS {}", a.agg.name(), a.column, a.alias))
                    .collect();
                s.push_str(&format!(" {}", a.join(", ")));
            }
            s
        }
        LogicalPlan::Compare { spec, .. } => format!("Compare {} on {}", spec.describe(), spec.source),
        LogicalPlan::UnionAll { .. } => "UnionAll".to_string(),
        LogicalPlan::Sort { key, direction, .. } => format!("Sort {key} {}", direction.name()),
        LogicalPlan::Limit { count, .. } => format!("Limit {count}"),
    }
}

fn walk(plan: &LogicalPlan, depth: usize, out: &mut String) {
    let _ = writeln!(out, "{}{}", "  ".repeat(depth), label(plan));
    for c in plan.children() {
        walk(c, depth + 1, out);
    }
}

/// Indented tree, one node per line.
pub fn explain_logical(plan: &LogicalPlan) -> String {
    let mut out = String::new();
    walk(plan, 0, &mut out);
    out
}
