//! Columnar relations, CSV ingestion, schema metadata and statistics.

mod catalog;
mod csv_io;
mod relation;
mod schema;
mod stats;
mod value;

pub use catalog::Catalog;
pub use csv_io::{load_csv, read_csv, write_csv, CsvOptions};
pub use relation::{Column, Dictionary, Relation, RelationBuilder};
pub use schema::{suggest, ColumnDef, ForeignKey, FunctionalDependency, Schema};
pub use stats::{column_stats, compute_stats, ColumnStats};
pub use value::{decode_float, decode_int, encode_float, encode_int, ColumnKind, Value};
