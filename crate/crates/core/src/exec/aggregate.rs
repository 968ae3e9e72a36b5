use std::collections::HashMap;
use std::sync::Arc;

use crate::algebra::AggExpr;
use crate::error::ExecError;
use crate::qlang::AggFn;
use crate::storage::{Column, ColumnDef, ColumnKind, Relation, RelationBuilder, Schema, Value};

/// Re-aggregable summary of a bag of measure values.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Partial {
    pub count: u64,
    pub sum: f64,
    pub min: f64,
    pub max: f64,
}

impl Default for Partial {
    fn default() -> Self {
        Partial::EMPTY
    }
}

impl Partial {
    pub const EMPTY: Partial = Partial {
        count: 0,
        sum: 0.0,
        min: f64::INFINITY,
        max: f64::NEG_INFINITY,
    };

    pub fn push(&mut self, v: f64) {
        self.count += 1;
        self.sum += v;
        self.min = self.min.min(v);
        self.max = self.max.max(v);
    }

    /// Counts a non-null value whose magnitude is irrelevant (COUNT over a
    /// string column).
    pub fn push_count(&mut self) {
        self.count += 1;
    }

    pub fn merge(&mut self, other: &Partial) {
        self.count += other.count;
        self.sum += other.sum;
        self.min = self.min.min(other.min);
        self.max = self.max.max(other.max);
    }

    /// Final aggregate. `None` when no value contributed, except COUNT
    /// which is then 0.
    pub fn finish(&self, agg: AggFn) -> Option<f64> {
        if agg == AggFn::Count {
            return Some(self.count as f64);
        }
        if self.count == 0 {
            return None;
        }
        Some(match agg {
            AggFn::Avg => self.sum / self.count as f64,
            AggFn::Sum => self.sum,
            AggFn::Min => self.min,
            AggFn::Max => self.max,
            AggFn::Count => unreachable!(),
        })
    }
}

/// Grouped partial aggregates keyed by order-preserving column keys.
#[derive(Clone, Debug)]
pub struct AggTable {
    pub source: Arc<Relation>,
    /// Source column index of each key.
    pub key_columns: Vec<usize>,
    /// Source column index of each measure slot.
    pub measure_columns: Vec<usize>,
    /// Sorted ascending by key.
    pub rows: Vec<AggRow>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AggRow {
    pub keys: Box<[u64]>,
    pub partials: Box<[Partial]>,
}

impl AggTable {
    pub fn key_position(&self, source_column: usize) -> Option<usize> {
        self.key_columns.iter().position(|&c| c == source_column)
    }

    pub fn measure_position(&self, source_column: usize) -> Option<usize> {
        self.measure_columns.iter().position(|&c| c == source_column)
    }
}

/// Groups the selected rows of `rel` by `keys` and accumulates one partial
/// per measure column. Rows with a null key are an error; null measures are
/// skipped for that measure only.
pub fn aggregate_partials(
    rel: &Arc<Relation>,
    selection: Option<&[u32]>,
    keys: &[usize],
    measures: &[usize],
) -> Result<AggTable, ExecError> {
    let mut index: HashMap<Box<[u64]>, usize> = HashMap::new();
    let mut rows: Vec<AggRow> = Vec::new();
    let mut key = vec![0u64; keys.len()];
    let key_cols: Vec<&Column> = keys.iter().map(|&k| rel.column(k)).collect();
    let measure_cols: Vec<&Column> = measures.iter().map(|&m| rel.column(m)).collect();
    let mut visit = |r: usize| -> Result<(), ExecError> {
        for (i, col) in key_cols.iter().enumerate() {
            key[i] = col
                .key(r)
                .ok_or_else(|| ExecError::NullKey(rel.schema().column(keys[i]).name.clone()))?;
        }
        let idx = match index.get(key.as_slice()) {
            Some(&i) => i,
            None => {
                let boxed: Box<[u64]> = key.clone().into_boxed_slice();
                index.insert(boxed.clone(), rows.len());
                rows.push(AggRow {
                    keys: boxed,
                    partials: vec![Partial::EMPTY; measures.len()].into_boxed_slice(),
                });
                rows.len() - 1
            }
        };
        let partials = &mut rows[idx].partials;
        for (p, col) in partials.iter_mut().zip(&measure_cols) {
            match col {
                Column::String { .. } => {
                    if !col.is_null(r) {
                        p.push_count()
                    }
                }
                _ => {
                    if let Some(v) = col.numeric(r) {
                        p.push(v)
                    }
                }
            }
        }
        Ok(())
    };
    match selection {
        Some(sel) => {
            for &r in sel {
                visit(r as usize)?;
            }
        }
        None => {
            for r in 0..rel.row_count() {
                visit(r)?;
            }
        }
    }
    rows.sort_unstable_by(|a, b| a.keys.cmp(&b.keys));
    Ok(AggTable {
        source: rel.clone(),
        key_columns: keys.to_vec(),
        measure_columns: measures.to_vec(),
        rows,
    })
}

/// Keeps the key positions `keep` of `table` and merges partials of rows
/// that collapse onto the same reduced key. Merging follows ascending
/// original key order, so results are deterministic.
pub fn rollup(table: &AggTable, keep: &[usize], measures: &[usize]) -> AggTable {
    let mut reduced: Vec<AggRow> = table
        .rows
        .iter()
        .map(|r| AggRow {
            keys: keep.iter().map(|&k| r.keys[k]).collect(),
            partials: measures.iter().map(|&m| r.partials[m]).collect(),
        })
        .collect();
    reduced.sort_by(|a, b| a.keys.cmp(&b.keys));
    let mut out: Vec<AggRow> = Vec::with_capacity(reduced.len());
    for row in reduced {
        match out.last_mut() {
            Some(last) if last.keys == row.keys => {
                for (p, q) in last.partials.iter_mut().zip(row.partials.iter()) {
                    p.merge(q);
                }
            }
            _ => out.push(row),
        }
    }
    AggTable {
        source: table.source.clone(),
        key_columns: keep.iter().map(|&k| table.key_columns[k]).collect(),
        measure_columns: measures.iter().map(|&m| table.measure_columns[m]).collect(),
        rows: out,
    }
}

/// Finalized group-by relation: key columns followed by one column per
/// aggregate. An aggregate over a group with no non-null values is null
/// (COUNT is 0). No aggregates means distinct.
pub fn group_by_aggregate(
    rel: &Arc<Relation>,
    keys: &[String],
    aggregates: &[AggExpr],
) -> Result<Relation, ExecError> {
    let key_idx: Vec<usize> = keys
        .iter()
        .map(|k| rel.schema().resolve(k))
        .collect::<Result<_, _>>()?;
    if aggregates.is_empty() {
        return Ok(distinct(rel, &key_idx)?);
    }
    let mut measure_idx: Vec<usize> = Vec::new();
    let mut slots = Vec::new();
    for a in aggregates {
        let c = rel.schema().resolve(&a.column)?;
        if a.agg != AggFn::Count && !rel.schema().column(c).kind.is_numeric() {
            return Err(ExecError::Invalid(format!(
                "{} over string column `{}`",
                a.agg.name(),
                a.column
            )));
        }
        let slot = match measure_idx.iter().position(|&m| m == c) {
            Some(s) => s,
            None => {
                measure_idx.push(c);
                measure_idx.len() - 1
            }
        };
        slots.push(slot);
    }
    let table = aggregate_partials(rel, None, &key_idx, &measure_idx)?;

    let mut defs: Vec<ColumnDef> = key_idx.iter().map(|&k| rel.schema().column(k).clone()).collect();
    let mut columns: Vec<Column> = key_idx
        .iter()
        .enumerate()
        .map(|(pos, &k)| key_column(rel.column(k), table.rows.iter().map(|r| r.keys[pos])))
        .collect();
    for (a, &slot) in aggregates.iter().zip(&slots) {
        if a.agg == AggFn::Count {
            defs.push(ColumnDef {
                name: a.alias.clone(),
                kind: ColumnKind::Integer,
            });
            columns.push(Column::Integer(
                table.rows.iter().map(|r| Some(r.partials[slot].count as i64)).collect(),
            ));
        } else {
            defs.push(ColumnDef {
                name: a.alias.clone(),
                kind: ColumnKind::Float,
            });
            columns.push(Column::Float(
                table.rows.iter().map(|r| r.partials[slot].finish(a.agg)).collect(),
            ));
        }
    }
    let schema = Schema::new(defs)?;
    Ok(Relation::from_columns(rel.name(), schema, columns)?)
}

/// Distinct rows over `keys`, sorted; nulls form their own group.
fn distinct(rel: &Relation, keys: &[usize]) -> Result<Relation, crate::error::StorageError> {
    let mut rows: Vec<Vec<Value>> = (0..rel.row_count())
        .map(|r| keys.iter().map(|&k| rel.column(k).value(r)).collect())
        .collect();
    rows.sort();
    rows.dedup();
    let schema = Schema::new(keys.iter().map(|&k| rel.schema().column(k).clone()).collect())?;
    let mut b = RelationBuilder::new(rel.name(), schema);
    for row in &rows {
        b.push_row(row)?;
    }
    Ok(b.finish())
}

/// Column of the same kind as `like` holding the given keys.
pub fn key_column(like: &Column, keys: impl Iterator<Item = u64>) -> Column {
    use crate::storage::{decode_float, decode_int};
    match like {
        Column::Integer(_) => Column::Integer(keys.map(|k| Some(decode_int(k))).collect()),
        Column::Float(_) => Column::Float(keys.map(|k| Some(decode_float(k))).collect()),
        Column::String { dictionary, .. } => Column::String {
            codes: keys.map(|k| Some(k as u32)).collect(),
            dictionary: dictionary.clone(),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::storage::Value;

    fn rel() -> Arc<Relation> {
        let schema = Schema::of(&[
            ("c", ColumnKind::String),
            ("g", ColumnKind::Integer),
            ("m", ColumnKind::Float),
        ]);
        let mut b = RelationBuilder::new("t", schema);
        for (c, g, m) in [("a", 1, Some(10.0)), ("a", 1, Some(20.0)), ("a", 2, Some(5.0)), ("b", 1, None)] {
            b.push_row(&[Value::str(c), Value::Int(g), m.map_or(Value::Null, Value::Float)])
                .unwrap();
        }
        Arc::new(b.finish())
    }

    fn agg(agg: AggFn, alias: &str) -> AggExpr {
        AggExpr {
            agg,
            column: "m".into(),
            alias: alias.into(),
        }
    }

    #[test]
    fn avg_by_two_keys() {
        let out = group_by_aggregate(&rel(), &["c".into(), "g".into()], &[agg(AggFn::Avg, "v")]).unwrap();
        assert_eq!(out.row_count(), 3);
        assert_eq!(out.row(0), vec![Value::str("a"), Value::Int(1), Value::Float(15.0)]);
        assert_eq!(out.row(1), vec![Value::str("a"), Value::Int(2), Value::Float(5.0)]);
        assert_eq!(out.row(2), vec![Value::str("b"), Value::Int(1), Value::Null]);
    }

    #[test]
    fn all_aggregates_share_one_partial() {
        let out = group_by_aggregate(
            &rel(),
            &["c".into()],
            &[
                agg(AggFn::Sum, "s"),
                agg(AggFn::Min, "lo"),
                agg(AggFn::Max, "hi"),
                agg(AggFn::Count, "n"),
            ],
        )
        .unwrap();
        assert_eq!(
            out.row(0),
            vec![
                Value::str("a"),
                Value::Float(35.0),
                Value::Float(5.0),
                Value::Float(20.0),
                Value::Int(3)
            ]
        );
        assert_eq!(out.row(1)[4], Value::Int(0));
    }

    #[test]
    fn empty_input() {
        let r = Arc::new(rel().take(&[]));
        let out = group_by_aggregate(&r, &["c".into()], &[agg(AggFn::Avg, "v")]).unwrap();
        assert_eq!(out.row_count(), 0);
    }

    #[test]
    fn rollup_is_weighted() {
        let r = rel();
        let t = aggregate_partials(&r, None, &[0, 1], &[2]).unwrap();
        let up = rollup(&t, &[0], &[0]);
        assert_eq!(up.rows.len(), 2);
        // (10 + 20 + 5) / 3, not the mean of the two group means
        assert_eq!(up.rows[0].partials[0].finish(AggFn::Avg), Some(35.0 / 3.0));
    }
}
