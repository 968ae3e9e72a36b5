use std::cmp::Ordering;
use std::io::Write;

use crate::error::ExecError;
use crate::qlang::{Direction, Side};
use crate::storage::Value;

#[derive(Clone, Debug, PartialEq)]
pub enum ColumnRole {
    /// Constraint value of one side. `mirrors` lists the identity slots
    /// holding the same value (the column's own slot first).
    Constraint { attribute: String, mirrors: Vec<(Side, usize)> },
    GroupingFlag,
    MeasureFlag,
    Score,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScoreColumn {
    pub name: String,
    pub role: ColumnRole,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScoreRow {
    /// Constraint values of the left trend, one per left conjunct.
    pub left: Vec<Value>,
    pub right: Vec<Value>,
    /// Index of the compared GMPair in the innermost Compare.
    pub gm: usize,
    pub cells: Vec<Value>,
}

impl ScoreRow {
    pub fn identity_cmp(&self, other: &ScoreRow) -> Ordering {
        self.left
            .cmp(&other.left)
            .then_with(|| self.right.cmp(&other.right))
            .then(self.gm.cmp(&other.gm))
    }
}

/// Output of a Compare: one row per scored trend pair and GMPair.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct ScoreRelation {
    pub columns: Vec<ScoreColumn>,
    pub rows: Vec<ScoreRow>,
}

impl ScoreRelation {
    pub fn column_names(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.name.clone()).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name.eq_ignore_ascii_case(name))
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Position of the last score column.
    pub fn score_index(&self) -> Option<usize> {
        self.columns.iter().rposition(|c| c.role == ColumnRole::Score)
    }

    pub fn score(&self, row: usize) -> f64 {
        let idx = self.score_index().expect("score relation without a score column");
        self.rows[row].cells[idx].as_f64().unwrap_or(f64::NAN)
    }

    /// Stable sort on one column, ties by pair identity.
    pub fn sort_by(&mut self, column: usize, direction: Direction) {
        self.rows.sort_by(|a, b| {
            let o = a.cells[column].cmp(&b.cells[column]);
            let o = if direction == Direction::Desc { o.reverse() } else { o };
            o.then_with(|| a.identity_cmp(b))
        });
    }

    /// Keeps only the named columns, in the given order.
    pub fn project(&self, names: &[String]) -> Result<ScoreRelation, ExecError> {
        let idx: Vec<usize> = names
            .iter()
            .map(|n| {
                self.index_of(n)
                    .ok_or_else(|| ExecError::Invalid(format!("unknown output column `{n}`")))
            })
            .collect::<Result<_, _>>()?;
        Ok(ScoreRelation {
            columns: idx.iter().map(|&i| self.columns[i].clone()).collect(),
            rows: self
                .rows
                .iter()
                .map(|r| ScoreRow {
                    left: r.left.clone(),
                    right: r.right.clone(),
                    gm: r.gm,
                    cells: idx.iter().map(|&i| r.cells[i].clone()).collect(),
                })
                .collect(),
        })
    }

    /// Rows in a canonical order, for result comparison independent of row
    /// order.
    pub fn canonical_rows(&self) -> Vec<Vec<Value>> {
        let mut rows: Vec<Vec<Value>> = self.rows.iter().map(|r| r.cells.clone()).collect();
        rows.sort();
        rows
    }

    /// CSV with a header row. Flags print as 0/1, scores with 6 decimals.
    pub fn write_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(self.columns.iter().map(|c| c.name.as_str()))?;
        for row in &self.rows {
            let rec: Vec<String> = row
                .cells
                .iter()
                .zip(&self.columns)
                .map(|(v, c)| match (v, &c.role) {
                    (Value::Float(f), ColumnRole::Score) => format!("{f:.6}"),
                    (Value::Float(f), _) => format!("{f:?}"),
                    (v, _) => v.to_string(),
                })
                .collect();
            out.write_record(&rec)?;
        }
        out.flush()
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is utf-8")
    }
}
