//! Reference Compare evaluation by direct scans and nested loops.

use std::collections::BTreeMap;

use crate::error::ExecError;
use crate::exec::compare::score_columns;
use crate::exec::{ColumnRole, ScoreRelation, ScoreRow};
use crate::qlang::{AggFn, CompareSpec, ConjunctKind, ConstraintSpec, Direction, ScoreAgg, Side};
use crate::storage::{Relation, Value};

/// Assignments of one side and the matching row indices.
fn assignments(rel: &Relation, c: &ConstraintSpec) -> Result<BTreeMap<Vec<Value>, Vec<usize>>, ExecError> {
    let cols: Vec<usize> = c
        .conjuncts
        .iter()
        .map(|cj| rel.schema().resolve(&cj.attribute))
        .collect::<Result<_, _>>()?;
    let mut out: BTreeMap<Vec<Value>, Vec<usize>> = BTreeMap::new();
    'rows: for r in 0..rel.row_count() {
        let mut key = Vec::new();
        for (cj, &col) in c.conjuncts.iter().zip(&cols) {
            let v = rel.column(col).value(r);
            if v.is_null() {
                return Err(ExecError::NullKey(cj.attribute.clone()));
            }
            if let ConjunctKind::Fixed(want) = &cj.kind {
                if &v != want {
                    continue 'rows;
                }
            }
            key.push(v);
        }
        out.entry(key).or_default().push(r);
    }
    Ok(out)
}

/// Series of one trend: grouping value to aggregated measure.
fn series(rel: &Relation, rows: &[usize], g: usize, m: usize, agg: AggFn) -> Result<Vec<(Value, f64)>, ExecError> {
    let mut groups: BTreeMap<Value, Vec<f64>> = BTreeMap::new();
    for &r in rows {
        let gv = rel.column(g).value(r);
        if gv.is_null() {
            return Err(ExecError::NullKey(rel.schema().column(g).name.clone()));
        }
        let entry = groups.entry(gv).or_default();
        let mv = rel.column(m).value(r);
        match (agg, &mv) {
            (_, Value::Null) => {}
            (AggFn::Count, _) => entry.push(1.0),
            (_, v) => entry.push(v.as_f64().expect("numeric measure")),
        }
    }
    let mut out = Vec::new();
    for (gv, vals) in groups {
        let v = match agg {
            AggFn::Count => vals.len() as f64,
            _ if vals.is_empty() => continue,
            AggFn::Sum => vals.iter().sum(),
            AggFn::Avg => vals.iter().sum::<f64>() / vals.len() as f64,
            AggFn::Min => vals.iter().cloned().fold(f64::INFINITY, f64::min),
            AggFn::Max => vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        };
        out.push((gv, v));
    }
    Ok(out)
}

fn score(a: &[(Value, f64)], b: &[(Value, f64)], agg: ScoreAgg, p: u32) -> Option<f64> {
    let mut diffs = Vec::new();
    for (g1, m1) in a {
        for (g2, m2) in b {
            if g1 == g2 {
                diffs.push((m1 - m2).abs().powi(p as i32));
            }
        }
    }
    if diffs.is_empty() {
        return None;
    }
    Some(match agg {
        ScoreAgg::Sum => diffs.iter().sum(),
        ScoreAgg::Avg => diffs.iter().sum::<f64>() / diffs.len() as f64,
        ScoreAgg::Min => diffs.iter().cloned().fold(f64::INFINITY, f64::min),
        ScoreAgg::Max => diffs.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
    })
}

/// Same trend on both sides: equal values on the same attribute set.
fn same_assignment(spec: &CompareSpec, l: &[Value], r: &[Value]) -> bool {
    let lc = &spec.left.constraint.conjuncts;
    let rc = &spec.right.constraint.conjuncts;
    if lc.len() != rc.len() {
        return false;
    }
    lc.iter().zip(l).all(|(c, v)| {
        rc.iter()
            .zip(r)
            .any(|(d, w)| d.attribute.eq_ignore_ascii_case(&c.attribute) && v == w)
    })
}

/// Every pair scored exhaustively, ranked, first `k` kept.
pub fn naive_topk(rel: &Relation, spec: &CompareSpec) -> Result<ScoreRelation, ExecError> {
    let left = assignments(rel, &spec.left.constraint)?;
    let right = assignments(rel, &spec.right.constraint)?;
    let symmetric = spec.symmetric();
    let mut scored: Vec<(f64, Vec<Value>, Vec<Value>, usize)> = Vec::new();
    for (gi, gm) in spec.gm_pairs().iter().enumerate() {
        let g = rel.schema().resolve(&gm.grouping)?;
        let m = rel.schema().resolve(&gm.measure.column)?;
        let lt: Vec<(&Vec<Value>, Vec<(Value, f64)>)> = left
            .iter()
            .map(|(k, rows)| Ok((k, series(rel, rows, g, m, gm.measure.agg)?)))
            .collect::<Result<_, ExecError>>()?;
        let rt: Vec<(&Vec<Value>, Vec<(Value, f64)>)> = right
            .iter()
            .map(|(k, rows)| Ok((k, series(rel, rows, g, m, gm.measure.agg)?)))
            .collect::<Result<_, ExecError>>()?;
        for (i, (lk, ls)) in lt.iter().enumerate() {
            for (j, (rk, rs)) in rt.iter().enumerate() {
                if symmetric && j <= i {
                    continue;
                }
                if !symmetric && same_assignment(spec, lk, rk) {
                    continue;
                }
                if let Some(s) = score(ls, rs, spec.scorer.agg, spec.scorer.p) {
                    scored.push((s, (*lk).clone(), (*rk).clone(), gi));
                }
            }
        }
    }
    scored.sort_by(|a, b| {
        let o = a.0.total_cmp(&b.0);
        let o = if spec.direction == Direction::Desc { o.reverse() } else { o };
        o.then_with(|| a.1.cmp(&b.1)).then_with(|| a.2.cmp(&b.2)).then(a.3.cmp(&b.3))
    });
    if let Some(k) = spec.k {
        scored.truncate(k);
    }

    let columns = score_columns(spec);
    let rows = scored
        .into_iter()
        .map(|(s, l, r, gi)| {
            let gm = &spec.gm_pairs()[gi];
            let cells = columns
                .iter()
                .map(|c| match &c.role {
                    ColumnRole::Constraint { mirrors, .. } => match mirrors[0] {
                        (Side::Left, i) => l[i].clone(),
                        (Side::Right, i) => r[i].clone(),
                    },
                    ColumnRole::GroupingFlag => Value::Bool(c.name == gm.grouping_alias),
                    ColumnRole::MeasureFlag => Value::Bool(c.name == gm.measure_alias),
                    ColumnRole::Score => Value::Float(s),
                })
                .collect();
            ScoreRow {
                left: l,
                right: r,
                gm: gi,
                cells,
            }
        })
        .collect();
    Ok(ScoreRelation { columns, rows })
}
