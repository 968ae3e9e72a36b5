use std::collections::HashMap;
use std::sync::Arc;

use crate::error::StorageError;

use super::schema::Schema;
use super::value::{decode_float, decode_int, encode_float, encode_int, ColumnKind, Value};

/// Bijection between string values and dense codes. Codes follow the
/// lexicographic order of the values, so code order is value order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Dictionary {
    values: Vec<Arc<str>>,
    index: HashMap<Arc<str>, u32>,
}

impl Dictionary {
    fn from_sorted(values: Vec<Arc<str>>) -> Self {
        let index = values
            .iter()
            .enumerate()
            .map(|(i, v)| (v.clone(), i as u32))
            .collect();
        Dictionary { values, index }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn code(&self, value: &str) -> Option<u32> {
        self.index.get(value).copied()
    }

    pub fn value(&self, code: u32) -> &Arc<str> {
        &self.values[code as usize]
    }

    pub fn values(&self) -> &[Arc<str>] {
        &self.values
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Column {
    Integer(Vec<Option<i64>>),
    Float(Vec<Option<f64>>),
    String {
        codes: Vec<Option<u32>>,
        dictionary: Arc<Dictionary>,
    },
}

impl Column {
    pub fn kind(&self) -> ColumnKind {
        match self {
            Column::Integer(_) => ColumnKind::Integer,
            Column::Float(_) => ColumnKind::Float,
            Column::String { .. } => ColumnKind::String,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Column::Integer(v) => v.len(),
            Column::Float(v) => v.len(),
            Column::String { codes, .. } => codes.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_null(&self, row: usize) -> bool {
        match self {
            Column::Integer(v) => v[row].is_none(),
            Column::Float(v) => v[row].is_none(),
            Column::String { codes, .. } => codes[row].is_none(),
        }
    }

    /// Order-preserving key of a cell; `None` for null.
    pub fn key(&self, row: usize) -> Option<u64> {
        match self {
            Column::Integer(v) => v[row].map(encode_int),
            Column::Float(v) => v[row].map(encode_float),
            Column::String { codes, .. } => codes[row].map(u64::from),
        }
    }

    pub fn decode_key(&self, key: u64) -> Value {
        match self {
            Column::Integer(_) => Value::Int(decode_int(key)),
            Column::Float(_) => Value::Float(decode_float(key)),
            Column::String { dictionary, .. } => Value::Str(dictionary.value(key as u32).clone()),
        }
    }

    /// Key a literal would have in this column. `None` when the literal can
    /// never match (unknown string, non-integral float in an integer column,
    /// or a type mismatch).
    pub fn encode_value(&self, value: &Value) -> Option<u64> {
        match (self, value) {
            (Column::Integer(_), Value::Int(i)) => Some(encode_int(*i)),
            (Column::Integer(_), Value::Float(f)) if f.fract() == 0.0 && f.abs() < 9.0e18 => {
                Some(encode_int(*f as i64))
            }
            (Column::Float(_), Value::Float(f)) if f.is_finite() => Some(encode_float(*f)),
            (Column::Float(_), Value::Int(i)) => Some(encode_float(*i as f64)),
            (Column::String { dictionary, .. }, Value::Str(s)) => dictionary.code(s).map(u64::from),
            _ => None,
        }
    }

    pub fn value(&self, row: usize) -> Value {
        match self {
            Column::Integer(v) => v[row].map_or(Value::Null, Value::Int),
            Column::Float(v) => v[row].map_or(Value::Null, Value::Float),
            Column::String { codes, dictionary } => codes[row]
                .map_or(Value::Null, |c| Value::Str(dictionary.value(c).clone())),
        }
    }

    /// Numeric cell as f64; `None` for null or string columns.
    pub fn numeric(&self, row: usize) -> Option<f64> {
        match self {
            Column::Integer(v) => v[row].map(|i| i as f64),
            Column::Float(v) => v[row],
            Column::String { .. } => None,
        }
    }

    pub fn null_count(&self) -> usize {
        (0..self.len()).filter(|&r| self.is_null(r)).count()
    }

    pub fn take(&self, rows: &[usize]) -> Column {
        match self {
            Column::Integer(v) => Column::Integer(rows.iter().map(|&r| v[r]).collect()),
            Column::Float(v) => Column::Float(rows.iter().map(|&r| v[r]).collect()),
            Column::String { codes, dictionary } => Column::String {
                codes: rows.iter().map(|&r| codes[r]).collect(),
                dictionary: dictionary.clone(),
            },
        }
    }
}

/// Immutable columnar table.
#[derive(Clone, Debug, PartialEq)]
pub struct Relation {
    name: String,
    schema: Schema,
    columns: Vec<Column>,
    row_count: usize,
}

impl Relation {
    pub fn from_columns(
        name: impl Into<String>,
        schema: Schema,
        columns: Vec<Column>,
    ) -> Result<Self, StorageError> {
        if columns.len() != schema.len() {
            return Err(StorageError::SchemaMismatch(format!(
                "{} columns supplied for {} declared",
                columns.len(),
                schema.len()
            )));
        }
        let row_count = columns.first().map_or(0, Column::len);
        for (c, def) in columns.iter().zip(&schema.columns) {
            if c.len() != row_count {
                return Err(StorageError::SchemaMismatch(format!(
                    "column `{}` has {} rows, expected {row_count}",
                    def.name,
                    c.len()
                )));
            }
            if c.kind() != def.kind {
                return Err(StorageError::SchemaMismatch(format!(
                    "column `{}` declared {} but holds {}",
                    def.name,
                    def.kind.name(),
                    c.kind().name()
                )));
            }
        }
        Ok(Relation {
            name: name.into(),
            schema,
            columns,
            row_count,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn row_count(&self) -> usize {
        self.row_count
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column(&self, idx: usize) -> &Column {
        &self.columns[idx]
    }

    pub fn column_by_name(&self, name: &str) -> Result<(usize, &Column), StorageError> {
        let idx = self.schema.resolve(name)?;
        Ok((idx, &self.columns[idx]))
    }

    pub fn row(&self, row: usize) -> Vec<Value> {
        self.columns.iter().map(|c| c.value(row)).collect()
    }

    /// New relation holding the given rows in the given order. Dictionaries
    /// are shared, so codes stay comparable with the source.
    pub fn take(&self, rows: &[usize]) -> Relation {
        Relation {
            name: self.name.clone(),
            schema: self.schema.clone(),
            columns: self.columns.iter().map(|c| c.take(rows)).collect(),
            row_count: rows.len(),
        }
    }

    /// Checks that the declared primary key is unique and non-null.
    pub fn check_primary_key(&self) -> Result<(), StorageError> {
        if self.schema.primary_key.is_empty() {
            return Ok(());
        }
        let idx: Vec<usize> = self
            .schema
            .primary_key
            .iter()
            .map(|c| self.schema.resolve(c))
            .collect::<Result<_, _>>()?;
        let mut seen = std::collections::HashSet::with_capacity(self.row_count);
        for r in 0..self.row_count {
            let key: Option<Vec<u64>> = idx.iter().map(|&c| self.columns[c].key(r)).collect();
            let key = key.ok_or_else(|| {
                StorageError::Integrity(format!("null primary key in `{}` row {}", self.name, r + 1))
            })?;
            if !seen.insert(key) {
                return Err(StorageError::Integrity(format!(
                    "duplicate primary key in `{}` row {}",
                    self.name,
                    r + 1
                )));
            }
        }
        Ok(())
    }
}

/// Row-at-a-time construction of a [`Relation`].
pub struct RelationBuilder {
    name: String,
    schema: Schema,
    cols: Vec<BuildColumn>,
    rows: usize,
}

enum BuildColumn {
    Integer(Vec<Option<i64>>),
    Float(Vec<Option<f64>>),
    String(Vec<Option<Arc<str>>>),
}

impl RelationBuilder {
    pub fn new(name: impl Into<String>, schema: Schema) -> Self {
        let cols = schema
            .columns
            .iter()
            .map(|c| match c.kind {
                ColumnKind::Integer => BuildColumn::Integer(Vec::new()),
                ColumnKind::Float => BuildColumn::Float(Vec::new()),
                ColumnKind::String => BuildColumn::String(Vec::new()),
            })
            .collect();
        RelationBuilder {
            name: name.into(),
            schema,
            cols,
            rows: 0,
        }
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    /// Appends one row. Integers are accepted in float columns.
    pub fn push_row(&mut self, row: &[Value]) -> Result<(), StorageError> {
        if row.len() != self.cols.len() {
            return Err(StorageError::SchemaMismatch(format!(
                "row has {} values, schema has {} columns",
                row.len(),
                self.cols.len()
            )));
        }
        let line = self.rows + 1;
        for (i, (col, v)) in self.cols.iter().zip(row).enumerate() {
            let name = &self.schema.columns[i].name;
            let bad = || StorageError::Parse {
                row: line,
                column: name.clone(),
                value: v.to_string(),
                kind: self.schema.columns[i].kind.name(),
            };
            match (col, v) {
                (_, Value::Null) => {}
                (BuildColumn::Integer(_), Value::Int(_)) => {}
                (BuildColumn::Float(_), Value::Int(_)) => {}
                (BuildColumn::Float(_), Value::Float(f)) => {
                    if !f.is_finite() {
                        return Err(StorageError::NonFinite {
                            row: line,
                            column: name.clone(),
                        });
                    }
                }
                (BuildColumn::String(_), Value::Str(_)) => {}
                _ => return Err(bad()),
            }
        }
        for (col, v) in self.cols.iter_mut().zip(row) {
            match (col, v) {
                (BuildColumn::Integer(c), Value::Int(i)) => c.push(Some(*i)),
                (BuildColumn::Integer(c), _) => c.push(None),
                (BuildColumn::Float(c), Value::Float(f)) => c.push(Some(if *f == 0.0 { 0.0 } else { *f })),
                (BuildColumn::Float(c), Value::Int(i)) => c.push(Some(*i as f64)),
                (BuildColumn::Float(c), _) => c.push(None),
                (BuildColumn::String(c), Value::Str(s)) => c.push(Some(s.clone())),
                (BuildColumn::String(c), _) => c.push(None),
            }
        }
        self.rows += 1;
        Ok(())
    }

    pub fn finish(self) -> Relation {
        let columns = self
            .cols
            .into_iter()
            .map(|c| match c {
                BuildColumn::Integer(v) => Column::Integer(v),
                BuildColumn::Float(v) => Column::Float(v),
                BuildColumn::String(v) => {
                    let mut distinct: Vec<Arc<str>> = v.iter().flatten().cloned().collect();
                    distinct.sort();
                    distinct.dedup();
                    let dictionary = Dictionary::from_sorted(distinct);
                    let codes = v
                        .iter()
                        .map(|s| s.as_ref().map(|s| dictionary.code(s).expect("interned")))
                        .collect();
                    Column::String {
                        codes,
                        dictionary: Arc::new(dictionary),
                    }
                }
            })
            .collect();
        Relation {
            name: self.name,
            schema: self.schema,
            columns,
            row_count: self.rows,
        }
    }
}
