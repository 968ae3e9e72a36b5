use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;
use std::sync::{Arc, Mutex};

use crate::error::StorageError;

use super::csv_io::{load_csv, write_csv, CsvOptions};
use super::relation::Relation;
use super::schema::{suggest, Schema};
use super::stats::{column_stats, ColumnStats};

/// Named relations plus cached column statistics.
#[derive(Debug, Default)]
pub struct Catalog {
    tables: BTreeMap<String, Arc<Relation>>,
    stats: Mutex<HashMap<(String, usize), ColumnStats>>,
}

impl Clone for Catalog {
    fn clone(&self) -> Self {
        Catalog {
            tables: self.tables.clone(),
            stats: Mutex::new(self.stats.lock().expect("stats lock").clone()),
        }
    }
}

impl Catalog {
    pub fn new() -> Self {
        Catalog::default()
    }

    /// Convenience for single-table catalogs.
    pub fn single(rel: Relation) -> Self {
        let mut c = Catalog::new();
        c.insert(rel);
        c
    }

    pub fn insert(&mut self, rel: Relation) {
        let key = rel.name().to_ascii_lowercase();
        self.stats.lock().expect("stats lock").retain(|(t, _), _| *t != key);
        self.tables.insert(key, Arc::new(rel));
    }

    pub fn get(&self, name: &str) -> Result<&Arc<Relation>, StorageError> {
        self.tables
            .get(&name.to_ascii_lowercase())
            .ok_or_else(|| StorageError::UnknownTable(name.to_string()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.tables.contains_key(&name.to_ascii_lowercase())
    }

    pub fn suggest_table(&self, name: &str) -> Option<String> {
        suggest(name, self.tables.values().map(|t| t.name()))
    }

    pub fn tables(&self) -> impl Iterator<Item = &Arc<Relation>> {
        self.tables.values()
    }

    pub fn len(&self) -> usize {
        self.tables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tables.is_empty()
    }

    /// Exact statistics, computed once per (table, column).
    pub fn stats(&self, table: &str, column: &str) -> Result<ColumnStats, StorageError> {
        let rel = self.get(table)?;
        let idx = rel.schema().resolve(column)?;
        let key = (rel.name().to_ascii_lowercase(), idx);
        if let Some(s) = self.stats.lock().expect("stats lock").get(&key) {
            return Ok(s.clone());
        }
        let s = column_stats(rel.column(idx));
        self.stats.lock().expect("stats lock").insert(key, s.clone());
        Ok(s)
    }

    /// Loads every `<table>.csv` with a sibling `<table>.schema` in `dir`.
    pub fn load_dir(dir: &Path) -> Result<Self, StorageError> {
        let io = |source| StorageError::Io {
            path: dir.to_path_buf(),
            source,
        };
        let mut entries: Vec<_> = std::fs::read_dir(dir)
            .map_err(io)?
            .collect::<Result<Vec<_>, _>>()
            .map_err(io)?
            .into_iter()
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|e| e == "schema"))
            .collect();
        entries.sort();
        let mut catalog = Catalog::new();
        for schema_path in entries {
            let text = std::fs::read_to_string(&schema_path).map_err(|source| StorageError::Io {
                path: schema_path.clone(),
                source,
            })?;
            let schema = Schema::parse(&text)?;
            let csv_path = schema_path.with_extension("csv");
            catalog.insert(load_csv(&csv_path, schema, CsvOptions::default())?);
        }
        catalog.validate()?;
        Ok(catalog)
    }

    /// Writes every table as `<table>.csv` + `<table>.schema`.
    pub fn save_dir(&self, dir: &Path) -> Result<(), StorageError> {
        std::fs::create_dir_all(dir).map_err(|source| StorageError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        for rel in self.tables.values() {
            let schema_path = dir.join(format!("{}.schema", rel.name()));
            std::fs::write(&schema_path, rel.schema().to_text()).map_err(|source| {
                StorageError::Io {
                    path: schema_path.clone(),
                    source,
                }
            })?;
            let csv_path = dir.join(format!("{}.csv", rel.name()));
            let file = std::fs::File::create(&csv_path).map_err(|source| StorageError::Io {
                path: csv_path.clone(),
                source,
            })?;
            write_csv(rel, std::io::BufWriter::new(file))?;
        }
        Ok(())
    }

    /// Checks primary keys, foreign-key targets and referential integrity.
    pub fn validate(&self) -> Result<(), StorageError> {
        for rel in self.tables.values() {
            rel.check_primary_key()?;
        }
        for rel in self.tables.values() {
            for fk in &rel.schema().foreign_keys {
                let target = self.get(&fk.table)?;
                let pk = target.schema().single_pk().ok_or_else(|| {
                    StorageError::Integrity(format!(
                        "foreign key `{}.{}` targets `{}` which has no single-column primary key",
                        rel.name(),
                        fk.column,
                        fk.table
                    ))
                })?;
                if !pk.eq_ignore_ascii_case(&fk.target) {
                    return Err(StorageError::Integrity(format!(
                        "foreign key `{}.{}` must reference the primary key `{}.{pk}`",
                        rel.name(),
                        fk.column,
                        fk.table
                    )));
                }
                let (_, pk_col) = target.column_by_name(pk)?;
                let (_, fk_col) = rel.column_by_name(&fk.column)?;
                if pk_col.kind() != fk_col.kind() {
                    return Err(StorageError::Integrity(format!(
                        "foreign key `{}.{}` and `{}.{pk}` have different kinds",
                        rel.name(),
                        fk.column,
                        fk.table
                    )));
                }
                let keys: HashSet<_> = (0..target.row_count()).map(|r| pk_col.value(r)).collect();
                for r in 0..rel.row_count() {
                    let v = fk_col.value(r);
                    if !v.is_null() && !keys.contains(&v) {
                        return Err(StorageError::Integrity(format!(
                            "`{}.{}` row {} value {v} has no match in `{}`",
                            rel.name(),
                            fk.column,
                            r + 1,
                            fk.table
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::storage::{ColumnKind, RelationBuilder, Value};

    fn two_tables(bad_fk: bool) -> Catalog {
        let dim_schema = Schema::of(&[("wp_pk", ColumnKind::Integer), ("name", ColumnKind::String)])
            .with_primary_key(&["wp_pk"]);
        let mut d = RelationBuilder::new("webpages", dim_schema);
        d.push_row(&[Value::Int(1), Value::str("home")]).unwrap();
        d.push_row(&[Value::Int(2), Value::str("cart")]).unwrap();
        let fact_schema = Schema::of(&[("wp_fk", ColumnKind::Integer), ("rev", ColumnKind::Float)])
            .with_foreign_key("wp_fk", "webpages", "wp_pk");
        let mut f = RelationBuilder::new("websales", fact_schema);
        f.push_row(&[Value::Int(1), Value::Float(3.0)]).unwrap();
        f.push_row(&[Value::Int(if bad_fk { 9 } else { 2 }), Value::Float(4.0)])
            .unwrap();
        let mut c = Catalog::new();
        c.insert(d.finish());
        c.insert(f.finish());
        c
    }

    #[test]
    fn validates_references() {
        two_tables(false).validate().unwrap();
        assert!(matches!(
            two_tables(true).validate(),
            Err(StorageError::Integrity(_))
        ));
    }

    #[test]
    fn directory_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let c = two_tables(false);
        c.save_dir(dir.path()).unwrap();
        let back = Catalog::load_dir(dir.path()).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(**back.get("WebSales").unwrap(), **c.get("websales").unwrap());
        assert_eq!(back.stats("webpages", "wp_pk").unwrap().distinct_count, 2);
    }
}
