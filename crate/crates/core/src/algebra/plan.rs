use crate::error::PlanError;
use crate::qlang::ast::CmpOp;
use crate::qlang::spec::{quote, AggFn, CompareSpec, Direction};
use crate::storage::{Catalog, ColumnDef, ColumnKind, Value};

/// `column op literal`
#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    pub column: String,
    pub op: CmpOp,
    pub value: Value,
}

impl Comparison {
    pub fn holds(&self, v: &Value) -> bool {
        if v.is_null() {
            return false;
        }
        self.op.holds(v.cmp(&self.value))
    }
}

/// Conjunction of comparisons.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Predicate {
    pub conjuncts: Vec<Comparison>,
}

impl Predicate {
    pub fn columns(&self) -> impl Iterator<Item = &str> {
        self.conjuncts.iter().map(|c| c.column.as_str())
    }

    pub fn describe(&self) -> String {
        self.conjuncts
            .iter()
            .map(|c| format!("{} {} {}", c.column, c.op.symbol(), quote(&c.value)))
            .collect::<Vec<_>>()
            .join(" AND ")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AggExpr {
    pub agg: AggFn,
    pub column: String,
    pub alias: String,
}

#[derive(Clone, Debug, PartialEq)]
pub enum JoinKind {
    /// Row join of two tables on `left_key = right_key`.
    Inner,
    /// Rewrites score column `column` by looking its value up in the right
    /// table's `right_key` and replacing it by `value_column`.
    Decode { column: String, value_column: String },
}

#[derive(Clone, Debug, PartialEq)]
pub enum LogicalPlan {
    Scan {
        table: String,
    },
    Filter {
        predicate: Predicate,
        input: Box<LogicalPlan>,
    },
    Join {
        left: Box<LogicalPlan>,
        right: Box<LogicalPlan>,
        left_key: String,
        right_key: String,
        /// The join follows a foreign key declared in the catalog.
        fk_declared: bool,
        kind: JoinKind,
    },
    /// Over a table: grouped aggregation (no aggregates = distinct). Over a
    /// Compare: duplicate elimination keyed on the Compare's input columns.
    GroupByAgg {
        keys: Vec<String>,
        aggregates: Vec<AggExpr>,
        input: Box<LogicalPlan>,
    },
    Compare {
        spec: CompareSpec,
        input: Box<LogicalPlan>,
    },
    UnionAll {
        inputs: Vec<LogicalPlan>,
    },
    Sort {
        key: String,
        direction: Direction,
        input: Box<LogicalPlan>,
    },
    Limit {
        count: usize,
        input: Box<LogicalPlan>,
    },
}

/// Output shape of a plan node.
#[derive(Clone, Debug, PartialEq)]
pub enum Shape {
    Table(Vec<ColumnDef>),
    /// Score relation with its column names, plus the columns of the table
    /// the innermost Compare read.
    Scores {
        columns: Vec<String>,
        source: Vec<ColumnDef>,
    },
}

fn find<'a>(cols: &'a [ColumnDef], name: &str) -> Option<&'a ColumnDef> {
    cols.iter().find(|c| c.name.eq_ignore_ascii_case(name))
}

fn has(cols: &[String], name: &str) -> bool {
    cols.iter().any(|c| c.eq_ignore_ascii_case(name))
}

fn invalid(msg: impl Into<String>) -> PlanError {
    PlanError::Invalid(msg.into())
}

impl LogicalPlan {
    pub fn scan(table: &str) -> Self {
        LogicalPlan::Scan {
            table: table.to_string(),
        }
    }

    pub fn children(&self) -> Vec<&LogicalPlan> {
        match self {
            LogicalPlan::Scan { .. } => vec![],
            LogicalPlan::Filter { input, .. }
            | LogicalPlan::GroupByAgg { input, .. }
            | LogicalPlan::Compare { input, .. }
            | LogicalPlan::Sort { input, .. }
            | LogicalPlan::Limit { input, .. } => vec![input],
            LogicalPlan::Join { left, right, .. } => vec![left, right],
            LogicalPlan::UnionAll { inputs } => inputs.iter().collect(),
        }
    }

    pub fn children_mut(&mut self) -> Vec<&mut LogicalPlan> {
        match self {
            LogicalPlan::Scan { .. } => vec![],
            LogicalPlan::Filter { input, .. }
            | LogicalPlan::GroupByAgg { input, .. }
            | LogicalPlan::Compare { input, .. }
            | LogicalPlan::Sort { input, .. }
            | LogicalPlan::Limit { input, .. } => vec![input],
            LogicalPlan::Join { left, right, .. } => vec![left, right],
            LogicalPlan::UnionAll { inputs } => inputs.iter_mut().collect(),
        }
    }

    pub fn height(&self) -> usize {
        1 + self.children().iter().map(|c| c.height()).max().unwrap_or(0)
    }

    pub fn node_count(&self) -> usize {
        1 + self.children().iter().map(|c| c.node_count()).sum::<usize>()
    }

    /// All Compare specs, outermost first.
    pub fn compares(&self) -> Vec<&CompareSpec> {
        let mut out = Vec::new();
        if let LogicalPlan::Compare { spec, .. } = self {
            out.push(spec);
        }
        for c in self.children() {
            out.extend(c.compares());
        }
        out
    }

    /// Computes the output shape, checking that every column reference
    /// resolves against the child's output.
    pub fn shape(&self, catalog: &Catalog) -> Result<Shape, PlanError> {
        match self {
            LogicalPlan::Scan { table } => {
                let rel = catalog.get(table).map_err(|e| invalid(e.to_string()))?;
                Ok(Shape::Table(rel.schema().columns.clone()))
            }
            LogicalPlan::Filter { predicate, input } => {
                let shape = input.shape(catalog)?;
                match &shape {
                    Shape::Table(cols) => {
                        for c in predicate.columns() {
                            find(cols, c).ok_or_else(|| invalid(format!("filter column `{c}` not in input")))?;
                        }
                    }
                    Shape::Scores { columns, .. } => {
                        let specs = self.compares_below();
                        for c in predicate.columns() {
                            let ok = has(columns, c)
                                || specs.iter().any(|s| {
                                    s.constraint_attributes().iter().any(|a| a.eq_ignore_ascii_case(c))
                                });
                            if !ok {
                                return Err(invalid(format!("filter column `{c}` not in score relation")));
                            }
                        }
                    }
                }
                Ok(shape)
            }
            LogicalPlan::Join {
                left,
                right,
                left_key,
                right_key,
                kind,
                ..
            } => {
                let l = left.shape(catalog)?;
                let Shape::Table(r) = right.shape(catalog)? else {
                    return Err(invalid("right side of a join must be a table"));
                };
                find(&r, right_key).ok_or_else(|| invalid(format!("join key `{right_key}` not in right input")))?;
                match (kind, l) {
                    (JoinKind::Inner, Shape::Table(mut cols)) => {
                        find(&cols, left_key)
                            .ok_or_else(|| invalid(format!("join key `{left_key}` not in left input")))?;
                        for c in r {
                            if find(&cols, &c.name).is_none() {
                                cols.push(c);
                            }
                        }
                        Ok(Shape::Table(cols))
                    }
                    (JoinKind::Decode { column, value_column }, Shape::Scores { columns, source }) => {
                        if !has(&columns, column) {
                            return Err(invalid(format!("decode column `{column}` not in score relation")));
                        }
                        find(&r, value_column)
                            .ok_or_else(|| invalid(format!("decode value `{value_column}` not in right input")))?;
                        Ok(Shape::Scores { columns, source })
                    }
                    _ => Err(invalid("join kind does not match its input")),
                }
            }
            LogicalPlan::GroupByAgg {
                keys,
                aggregates,
                input,
            } => match input.shape(catalog)? {
                Shape::Table(cols) => {
                    let mut out = Vec::new();
                    for k in keys {
                        out.push(
                            find(&cols, k)
                                .cloned()
                                .ok_or_else(|| invalid(format!("group key `{k}` not in input")))?,
                        );
                    }
                    for a in aggregates {
                        let c = find(&cols, &a.column)
                            .ok_or_else(|| invalid(format!("aggregate column `{}` not in input", a.column)))?;
                        if a.agg != AggFn::Count && !c.kind.is_numeric() {
                            return Err(invalid(format!("{} over string column `{}`", a.agg.name(), a.column)));
                        }
                        out.push(ColumnDef {
                            name: a.alias.clone(),
                            kind: if a.agg == AggFn::Count {
                                ColumnKind::Integer
                            } else {
                                ColumnKind::Float
                            },
                        });
                    }
                    Ok(Shape::Table(out))
                }
                Shape::Scores { columns, source } => {
                    if !aggregates.is_empty() {
                        return Err(invalid("aggregates over a score relation are not supported"));
                    }
                    for k in keys {
                        find(&source, k).ok_or_else(|| invalid(format!("group key `{k}` not in compare input")))?;
                    }
                    Ok(Shape::Scores { columns, source })
                }
            },
            LogicalPlan::Compare { spec, input } => {
                let (cols, lower) = match input.shape(catalog)? {
                    Shape::Table(cols) => (cols, None),
                    Shape::Scores { columns, source } => (source, Some(columns)),
                };
                for c in spec.referenced_columns() {
                    find(&cols, &c).ok_or_else(|| invalid(format!("compare column `{c}` not in input")))?;
                }
                let own = spec.output_columns();
                let columns = match lower {
                    None => own,
                    Some(mut lower) => {
                        let constraint: Vec<String> =
                            spec.constraint_columns().into_iter().map(|c| c.name).collect();
                        for c in &constraint {
                            if !has(&lower, c) {
                                return Err(invalid(format!("chained compare column `{c}` missing below")));
                            }
                        }
                        for c in own.into_iter().filter(|c| !has(&constraint, c)) {
                            if has(&lower, &c) {
                                return Err(invalid(format!("chained compares both define `{c}`")));
                            }
                            lower.push(c);
                        }
                        lower
                    }
                };
                Ok(Shape::Scores { columns, source: cols })
            }
            LogicalPlan::UnionAll { inputs } => {
                let mut shapes = inputs.iter().map(|i| i.shape(catalog));
                let first = shapes.next().ok_or_else(|| invalid("empty union"))??;
                for s in shapes {
                    let s = s?;
                    let same = match (&first, &s) {
                        (Shape::Table(a), Shape::Table(b)) => a == b,
                        (Shape::Scores { columns: a, .. }, Shape::Scores { columns: b, .. }) => a == b,
                        _ => false,
                    };
                    if !same {
                        return Err(invalid("union inputs have different columns"));
                    }
                }
                Ok(first)
            }
            LogicalPlan::Sort { key, input, .. } => {
                let shape = input.shape(catalog)?;
                let ok = match &shape {
                    Shape::Table(cols) => find(cols, key).is_some(),
                    Shape::Scores { columns, .. } => has(columns, key),
                };
                if !ok {
                    return Err(invalid(format!("sort key `{key}` not in input")));
                }
                Ok(shape)
            }
            LogicalPlan::Limit { input, .. } => input.shape(catalog),
        }
    }

    /// Compare specs reachable through the first-child chain.
    fn compares_below(&self) -> Vec<&CompareSpec> {
        let mut out = Vec::new();
        let mut node = self;
        loop {
            if let LogicalPlan::Compare { spec, .. } = node {
                out.push(spec);
            }
            match node.children().first() {
                Some(c) => node = c,
                None => return out,
            }
        }
    }

    pub fn validate(&self, catalog: &Catalog) -> Result<(), PlanError> {
        self.shape(catalog).map(|_| ())
    }

    /// Column names of the node's output.
    pub fn output_columns(&self, catalog: &Catalog) -> Result<Vec<String>, PlanError> {
        Ok(match self.shape(catalog)? {
            Shape::Table(cols) => cols.into_iter().map(|c| c.name).collect(),
            Shape::Scores { columns, .. } => columns,
        })
    }
}
