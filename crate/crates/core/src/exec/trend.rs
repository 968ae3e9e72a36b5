use crate::error::ExecError;
use crate::qlang::{AggFn, ConjunctKind, ConstraintSpec};
use crate::storage::{Relation, Value};

use super::aggregate::{AggTable, Partial};

/// One constraint assignment's series, sorted by grouping key with
/// distinct keys.
#[derive(Clone, Debug, PartialEq)]
pub struct Trend {
    /// Key of each conjunct of the side, in conjunct order.
    pub key: Box<[u64]>,
    /// `(grouping key, measure)` ascending by grouping key.
    pub points: Vec<(u64, f64)>,
}

impl Trend {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Largest absolute measure value, 0 for an empty trend.
    pub fn magnitude(&self) -> f64 {
        self.points.iter().fold(0.0, |m, &(_, v)| m.max(v.abs()))
    }
}

/// Column positions and fixed values of one trendset's constraint.
#[derive(Clone, Debug)]
pub struct SideLayout {
    /// Source column of each conjunct.
    pub columns: Vec<usize>,
    /// Encoded literal per conjunct: `None` for ALL, `Some(None)` for a
    /// literal absent from the column (matches nothing).
    pub fixed: Vec<Option<Option<u64>>>,
}

impl SideLayout {
    pub fn new(rel: &Relation, constraint: &ConstraintSpec) -> Result<Self, ExecError> {
        let mut columns = Vec::new();
        let mut fixed = Vec::new();
        for c in &constraint.conjuncts {
            let idx = rel.schema().resolve(&c.attribute)?;
            columns.push(idx);
            fixed.push(match &c.kind {
                ConjunctKind::All => None,
                ConjunctKind::Fixed(v) => Some(rel.column(idx).encode_value(v)),
            });
        }
        Ok(SideLayout { columns, fixed })
    }

    /// Whether a source row satisfies the fixed conjuncts.
    pub fn row_matches(&self, rel: &Relation, row: usize) -> bool {
        self.columns.iter().zip(&self.fixed).all(|(&c, f)| match f {
            None => true,
            Some(None) => false,
            Some(Some(k)) => rel.column(c).key(row) == Some(*k),
        })
    }

    /// Decoded values of a trend key.
    pub fn decode(&self, rel: &Relation, key: &[u64]) -> Vec<Value> {
        self.columns
            .iter()
            .zip(key)
            .map(|(&c, &k)| rel.column(c).decode_key(k))
            .collect()
    }
}

/// Horizontal partition with re-aggregation: slices `table` into the trends
/// of one side for one (grouping, measure) and merges partials per
/// (trend, grouping value).
pub fn partition_side(
    table: &AggTable,
    side: &SideLayout,
    grouping_column: usize,
    measure_column: usize,
    agg: AggFn,
) -> Result<Vec<Trend>, ExecError> {
    let missing = |what: &str| ExecError::Invalid(format!("aggregate lacks {what} column"));
    let attr_pos: Vec<usize> = side
        .columns
        .iter()
        .map(|&c| table.key_position(c).ok_or_else(|| missing("a constraint")))
        .collect::<Result<_, _>>()?;
    let g_pos = table.key_position(grouping_column).ok_or_else(|| missing("the grouping"))?;
    let m_pos = table
        .measure_position(measure_column)
        .ok_or_else(|| missing("the measure"))?;
    if side.fixed.iter().any(|f| matches!(f, Some(None))) {
        return Ok(Vec::new());
    }

    let mut tagged: Vec<(Box<[u64]>, u64, Partial)> = table
        .rows
        .iter()
        .filter(|r| {
            attr_pos
                .iter()
                .zip(&side.fixed)
                .all(|(&p, f)| f.is_none_or(|k| Some(r.keys[p]) == k))
        })
        .map(|r| {
            (
                attr_pos.iter().map(|&p| r.keys[p]).collect(),
                r.keys[g_pos],
                r.partials[m_pos],
            )
        })
        .collect();
    // stable: equal (trend, g) entries keep ascending source-key order
    tagged.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut trends: Vec<Trend> = Vec::new();
    let mut i = 0;
    while i < tagged.len() {
        let key = tagged[i].0.clone();
        let mut points = Vec::new();
        while i < tagged.len() && tagged[i].0 == key {
            let g = tagged[i].1;
            let mut p = tagged[i].2;
            i += 1;
            while i < tagged.len() && tagged[i].0 == key && tagged[i].1 == g {
                p.merge(&tagged[i].2);
                i += 1;
            }
            if let Some(v) = p.finish(agg) {
                points.push((g, v));
            }
        }
        trends.push(Trend { key, points });
    }
    Ok(trends)
}
