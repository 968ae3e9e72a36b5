use std::fmt::Write as _;

use crate::error::StorageError;

use super::value::ColumnKind;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ColumnDef {
    pub name: String,
    pub kind: ColumnKind,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ForeignKey {
    pub column: String,
    pub table: String,
    pub target: String,
}

/// Declared functional dependency `determinant -> dependent`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FunctionalDependency {
    pub determinant: String,
    pub dependent: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Schema {
    pub columns: Vec<ColumnDef>,
    pub primary_key: Vec<String>,
    pub foreign_keys: Vec<ForeignKey>,
    pub fds: Vec<FunctionalDependency>,
}

impl Schema {
    pub fn new(columns: Vec<ColumnDef>) -> Result<Self, StorageError> {
        let schema = Schema {
            columns,
            ..Schema::default()
        };
        schema.check_unique()?;
        Ok(schema)
    }

    /// Shorthand for tests and generators: `[("a", ColumnKind::Integer), ...]`.
    pub fn of(columns: &[(&str, ColumnKind)]) -> Self {
        Schema::new(
            columns
                .iter()
                .map(|(n, k)| ColumnDef {
                    name: n.to_string(),
                    kind: *k,
                })
                .collect(),
        )
        .expect("duplicate column in Schema::of")
    }

    pub fn with_primary_key(mut self, cols: &[&str]) -> Self {
        self.primary_key = cols.iter().map(|c| c.to_string()).collect();
        self
    }

    pub fn with_foreign_key(mut self, column: &str, table: &str, target: &str) -> Self {
        self.foreign_keys.push(ForeignKey {
            column: column.into(),
            table: table.into(),
            target: target.into(),
        });
        self
    }

    pub fn with_fd(mut self, determinant: &str, dependent: &str) -> Self {
        self.fds.push(FunctionalDependency {
            determinant: determinant.into(),
            dependent: dependent.into(),
        });
        self
    }

    fn check_unique(&self) -> Result<(), StorageError> {
        for (i, c) in self.columns.iter().enumerate() {
            if self.columns[..i]
                .iter()
                .any(|d| d.name.eq_ignore_ascii_case(&c.name))
            {
                return Err(StorageError::DuplicateColumn(c.name.clone()));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    /// Case-insensitive lookup.
    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.columns
            .iter()
            .position(|c| c.name.eq_ignore_ascii_case(name))
    }

    /// Like [`Schema::index_of`] but reports the closest known name on failure.
    pub fn resolve(&self, name: &str) -> Result<usize, StorageError> {
        self.index_of(name)
            .ok_or_else(|| StorageError::UnknownColumn {
                name: name.to_string(),
                suggestion: suggest(name, self.columns.iter().map(|c| c.name.as_str())),
            })
    }

    pub fn column(&self, idx: usize) -> &ColumnDef {
        &self.columns[idx]
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.columns.iter().map(|c| c.name.as_str())
    }

    /// Single-column primary key, if declared.
    pub fn single_pk(&self) -> Option<&str> {
        match self.primary_key.as_slice() {
            [pk] => Some(pk.as_str()),
            _ => None,
        }
    }

    pub fn has_fd(&self, determinant: &str, dependent: &str) -> bool {
        self.fds.iter().any(|fd| {
            fd.determinant.eq_ignore_ascii_case(determinant)
                && fd.dependent.eq_ignore_ascii_case(dependent)
        })
    }

    /// Parses the line-oriented schema format:
    /// `column <name> <kind>`, `pk a[,b]`, `fk <local> -> <table>.<column>`,
    /// `fd <determinant> -> <dependent>`. Blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self, StorageError> {
        let mut schema = Schema::default();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let err = |message: String| StorageError::SchemaFile {
                line: line_no,
                message,
            };
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (word, rest) = line
                .split_once(char::is_whitespace)
                .map(|(w, r)| (w, r.trim()))
                .unwrap_or((line, ""));
            match word.to_ascii_lowercase().as_str() {
                "column" => {
                    let parts: Vec<&str> = rest.split_whitespace().collect();
                    let [name, kind] = parts.as_slice() else {
                        return Err(err("expected `column <name> <kind>`".into()));
                    };
                    let kind = ColumnKind::parse(kind)
                        .ok_or_else(|| err(format!("unknown column kind `{kind}`")))?;
                    schema.columns.push(ColumnDef {
                        name: name.to_string(),
                        kind,
                    });
                }
                "pk" => {
                    schema.primary_key = rest
                        .split(',')
                        .map(|s| s.trim().to_string())
                        .filter(|s| !s.is_empty())
                        .collect();
                    if schema.primary_key.is_empty() {
                        return Err(err("empty primary key".into()));
                    }
                }
                "fk" => {
                    let (local, target) = rest
                        .split_once("->")
                        .ok_or_else(|| err("expected `fk <local> -> <table>.<column>`".into()))?;
                    let (table, column) = target
                        .trim()
                        .split_once('.')
                        .ok_or_else(|| err("fk target must be `<table>.<column>`".into()))?;
                    schema.foreign_keys.push(ForeignKey {
                        column: local.trim().to_string(),
                        table: table.trim().to_string(),
                        target: column.trim().to_string(),
                    });
                }
                "fd" => {
                    let (det, dep) = rest
                        .split_once("->")
                        .ok_or_else(|| err("expected `fd <determinant> -> <dependent>`".into()))?;
                    schema.fds.push(FunctionalDependency {
                        determinant: det.trim().to_string(),
                        dependent: dep.trim().to_string(),
                    });
                }
                other => return Err(err(format!("unknown directive `{other}`"))),
            }
        }
        schema.check_unique()?;
        let known = |name: &str| schema.index_of(name).is_some();
        for pk in &schema.primary_key {
            if !known(pk) {
                return Err(StorageError::SchemaMismatch(format!(
                    "primary key column `{pk}` is not declared"
                )));
            }
        }
        for fk in &schema.foreign_keys {
            if !known(&fk.column) {
                return Err(StorageError::SchemaMismatch(format!(
                    "foreign key column `{}` is not declared",
                    fk.column
                )));
            }
        }
        for fd in &schema.fds {
            if !known(&fd.determinant) || !known(&fd.dependent) {
                return Err(StorageError::SchemaMismatch(format!(
                    "functional dependency `{} -> {}` names an undeclared column",
                    fd.determinant, fd.dependent
                )));
            }
        }
        Ok(schema)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for c in &self.columns {
            let _ = writeln!(out, "column {} {}", c.name, c.kind.name());
        }
        if !self.primary_key.is_empty() {
            let _ = writeln!(out, "pk {}", self.primary_key.join(","));
        }
        for fk in &self.foreign_keys {
            let _ = writeln!(out, "fk {} -> {}.{}", fk.column, fk.table, fk.target);
        }
        for fd in &self.fds {
            let _ = writeln!(out, "fd {} -> {}", fd.determinant, fd.dependent);
        }
        out
    }
}

/// Closest candidate by Jaro-Winkler similarity, if reasonably close.
pub fn suggest<'a>(name: &str, candidates: impl Iterator<Item = &'a str>) -> Option<String> {
    let lower = name.to_ascii_lowercase();
    candidates
        .map(|c| (strsim::jaro_winkler(&lower, &c.to_ascii_lowercase()), c))
        .filter(|(score, _)| *score >= 0.8)
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, c)| c.to_string())
}
