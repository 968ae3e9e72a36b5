use std::collections::HashSet;

use crate::error::StorageError;

use super::relation::{Column, Relation};
use super::value::Value;

#[derive(Clone, Debug, PartialEq)]
pub struct ColumnStats {
    pub distinct_count: usize,
    pub null_count: usize,
    /// Numeric columns only; `None` when no non-null value exists.
    pub min: Option<Value>,
    pub max: Option<Value>,
}

pub fn compute_stats(rel: &Relation, column: &str) -> Result<ColumnStats, StorageError> {
    let (_, col) = rel.column_by_name(column)?;
    Ok(column_stats(col))
}

pub fn column_stats(col: &Column) -> ColumnStats {
    let mut distinct = HashSet::new();
    let mut null_count = 0;
    let mut lo: Option<u64> = None;
    let mut hi: Option<u64> = None;
    for r in 0..col.len() {
        match col.key(r) {
            None => null_count += 1,
            Some(k) => {
                distinct.insert(k);
                lo = Some(lo.map_or(k, |l| l.min(k)));
                hi = Some(hi.map_or(k, |h| h.max(k)));
            }
        }
    }
    let numeric = col.kind().is_numeric();
    ColumnStats {
        distinct_count: distinct.len(),
        null_count,
        min: lo.filter(|_| numeric).map(|k| col.decode_key(k)),
        max: hi.filter(|_| numeric).map(|k| col.decode_key(k)),
    }
}
