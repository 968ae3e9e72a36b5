use std::io::{Read, Write};
use std::path::Path;

use crate::error::StorageError;

use super::relation::{Relation, RelationBuilder};
use super::schema::Schema;
use super::value::{ColumnKind, Value};

#[derive(Clone, Copy, Debug)]
pub struct CsvOptions {
    pub delimiter: u8,
    pub has_header: bool,
}

impl Default for CsvOptions {
    fn default() -> Self {
        CsvOptions {
            delimiter: b',',
            has_header: true,
        }
    }
}

pub fn load_csv(path: &Path, schema: Schema, options: CsvOptions) -> Result<Relation, StorageError> {
    let file = std::fs::File::open(path).map_err(|source| StorageError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    read_csv(file, &name, schema, options).map_err(|e| match e {
        StorageError::Csv { message, .. } => StorageError::Csv {
            path: path.to_path_buf(),
            message,
        },
        other => other,
    })
}

/// Reads CSV from any reader. Empty cells become nulls. When a header is
/// present its names are matched to the schema case-insensitively, in any
/// order.
pub fn read_csv<R: Read>(
    reader: R,
    name: &str,
    schema: Schema,
    options: CsvOptions,
) -> Result<Relation, StorageError> {
    let csv_err = |e: csv::Error| StorageError::Csv {
        path: name.into(),
        message: e.to_string(),
    };
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(options.delimiter)
        .has_headers(options.has_header)
        .flexible(true)
        .from_reader(reader);

    // position in the csv record for each schema column
    let order: Vec<usize> = if options.has_header {
        let header = rdr.headers().map_err(csv_err)?.clone();
        if header.len() != schema.len() {
            return Err(StorageError::SchemaMismatch(format!(
                "header has {} columns, schema declares {}",
                header.len(),
                schema.len()
            )));
        }
        schema
            .columns
            .iter()
            .map(|c| {
                header
                    .iter()
                    .position(|h| h.trim().eq_ignore_ascii_case(&c.name))
                    .ok_or_else(|| {
                        StorageError::SchemaMismatch(format!("column `{}` missing from header", c.name))
                    })
            })
            .collect::<Result<_, _>>()?
    } else {
        (0..schema.len()).collect()
    };

    let kinds: Vec<ColumnKind> = schema.columns.iter().map(|c| c.kind).collect();
    let names: Vec<String> = schema.columns.iter().map(|c| c.name.clone()).collect();
    let mut builder = RelationBuilder::new(name, schema);
    let mut row = Vec::with_capacity(kinds.len());
    for (i, record) in rdr.records().enumerate() {
        let line = i + 1;
        let record = record.map_err(csv_err)?;
        if record.len() != kinds.len() {
            return Err(StorageError::SchemaMismatch(format!(
                "row {line} has {} fields, expected {}",
                record.len(),
                kinds.len()
            )));
        }
        row.clear();
        for (c, &pos) in order.iter().enumerate() {
            let cell = &record[pos];
            row.push(parse_cell(cell, kinds[c]).ok_or_else(|| StorageError::Parse {
                row: line,
                column: names[c].clone(),
                value: cell.to_string(),
                kind: kinds[c].name(),
            })?);
        }
        builder.push_row(&row).map_err(|e| match e {
            StorageError::NonFinite { column, .. } => StorageError::NonFinite { row: line, column },
            other => other,
        })?;
    }
    Ok(builder.finish())
}

fn parse_cell(cell: &str, kind: ColumnKind) -> Option<Value> {
    if cell.is_empty() {
        return Some(Value::Null);
    }
    match kind {
        ColumnKind::Integer => cell.trim().parse().ok().map(Value::Int),
        ColumnKind::Float => cell.trim().parse().ok().map(Value::Float),
        ColumnKind::String => Some(Value::str(cell)),
    }
}

/// Writes a relation with a header row. Nulls become empty cells.
pub fn write_csv<W: Write>(rel: &Relation, writer: W) -> Result<(), StorageError> {
    let err = |e: csv::Error| StorageError::Csv {
        path: rel.name().into(),
        message: e.to_string(),
    };
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(rel.schema().names()).map_err(err)?;
    let mut cells = Vec::with_capacity(rel.schema().len());
    for r in 0..rel.row_count() {
        cells.clear();
        for c in rel.columns() {
            cells.push(match c.value(r) {
                Value::Float(f) => format!("{f:?}"),
                v => v.to_string(),
            });
        }
        w.write_record(&cells).map_err(err)?;
    }
    w.flush().map_err(|e| StorageError::Csv {
        path: rel.name().into(),
        message: e.to_string(),
    })
}
