use std::collections::HashMap;
use std::sync::Arc;

use crate::algebra::{Comparison, JoinKind, LogicalPlan, Predicate};
use crate::error::{AnalyzeError, StorageError};
use crate::storage::{suggest, Catalog, ColumnKind, Relation, Value};

use super::ast::*;
use super::spec::*;

/// Result of semantic analysis.
#[derive(Clone, Debug, PartialEq)]
pub struct AnalyzedQuery {
    pub spec: CompareSpec,
    pub plan: LogicalPlan,
    /// Output columns named in SELECT; `None` for `*` or a bare fragment.
    pub projection: Option<Vec<String>>,
}

/// Resolves names against the catalog, validates comparability, and builds
/// the logical plan.
pub fn analyze(query: &Query, catalog: &Catalog) -> Result<AnalyzedQuery, AnalyzeError> {
    let fact = match &query.from {
        Some(from) => catalog.get(&from.table.name).map_err(|e| match e {
            StorageError::UnknownTable(t) => AnalyzeError::Invalid(match catalog.suggest_table(&t) {
                Some(s) => format!("unknown table `{t}` (did you mean `{s}`?)"),
                None => format!("unknown table `{t}`"),
            }),
            other => other.into(),
        })?,
        None => {
            let mut tables = catalog.tables();
            match (tables.next(), tables.next()) {
                (Some(t), None) => t,
                _ => {
                    return Err(AnalyzeError::Invalid(
                        "a COMPARE fragment without FROM needs a catalog with exactly one table".into(),
                    ))
                }
            }
        }
    }
    .clone();
    let mut cx = Context::new(catalog, fact, query.from.as_ref());

    let (left, right) = match &query.compare.form {
        CompareForm::Shared { left, right, gms } => {
            let (lc, rc) = constraints(&mut cx, left, right)?;
            let gm = gm_pairs(&mut cx, gms)?;
            (
                TrendsetSpec {
                    constraint: lc,
                    gm_pairs: gm.clone(),
                },
                TrendsetSpec {
                    constraint: rc,
                    gm_pairs: gm,
                },
            )
        }
        CompareForm::PerSide {
            left,
            left_gms,
            right,
            right_gms,
        } => {
            let (lc, rc) = constraints(&mut cx, left, right)?;
            let lg = gm_pairs(&mut cx, left_gms)?;
            // the right list gets its own alias namespace; flags follow the left
            let saved = (cx.grouping_aliases.clone(), cx.measure_aliases.clone());
            cx.grouping_aliases.clear();
            cx.measure_aliases.clear();
            let rg = gm_pairs(&mut cx, right_gms)?;
            (cx.grouping_aliases, cx.measure_aliases) = saved;
            let rg = align_comparable(&lg, rg)?;
            (
                TrendsetSpec {
                    constraint: lc,
                    gm_pairs: lg,
                },
                TrendsetSpec {
                    constraint: rc,
                    gm_pairs: rg,
                },
            )
        }
    };

    let score_alias = query
        .compare
        .scorer
        .alias
        .as_ref()
        .map_or_else(|| "score".to_string(), |a| a.name.clone());
    let mut spec = CompareSpec {
        source: cx.fact.name().to_string(),
        left,
        right,
        scorer: ScorerSpec {
            agg: query.compare.scorer.agg,
            p: query.compare.scorer.p,
        },
        score_alias,
        direction: Direction::Desc,
        k: None,
    };

    let outputs = spec.output_columns();
    for (i, name) in outputs.iter().enumerate() {
        if outputs[..i].iter().any(|o| o.eq_ignore_ascii_case(name)) {
            return Err(AnalyzeError::DuplicateAlias(name.clone()));
        }
    }

    // constraint and grouping columns must be null-free
    for col in spec
        .constraint_attributes()
        .into_iter()
        .chain(spec.gm_pairs().iter().map(|g| g.grouping.clone()))
    {
        let (table, _) = cx.owner(&col);
        if catalog.stats(table.name(), &col)?.null_count > 0 {
            return Err(AnalyzeError::NullableKey(col));
        }
    }

    let mut predicate = Predicate::default();
    for cond in &query.where_clause {
        let (name, kind) = cx.resolve(&cond.column)?;
        predicate.conjuncts.push(Comparison {
            column: name.clone(),
            op: cond.op,
            value: coerce(&cond.value, kind, &name)?,
        });
    }

    let limit = match &query.limit {
        Some(l) if l.count == 0 => return Err(AnalyzeError::Invalid("LIMIT must be at least 1".into())),
        Some(l) => Some(usize::try_from(l.count).map_err(|_| AnalyzeError::Invalid("LIMIT too large".into()))?),
        None => None,
    };
    let mut sort = None;
    match &query.order_by {
        Some(o) => {
            let name = &o.column.column.name;
            let direction = o.direction.unwrap_or(Direction::Asc);
            let resolved = outputs
                .iter()
                .find(|c| c.eq_ignore_ascii_case(name))
                .cloned()
                .ok_or_else(|| unknown_output(name, &outputs))?;
            if resolved == spec.score_alias {
                spec.direction = direction;
                spec.k = limit;
            }
            sort = Some((resolved, direction));
        }
        None => {
            if limit.is_some() {
                spec.k = limit;
                sort = Some((spec.score_alias.clone(), Direction::Desc));
            }
        }
    }

    let mut plan = LogicalPlan::scan(cx.fact.name());
    for dim in &cx.joined {
        let fk = cx
            .fact
            .schema()
            .foreign_keys
            .iter()
            .find(|fk| fk.table.eq_ignore_ascii_case(dim.name()))
            .expect("joined dimension has a foreign key");
        plan = LogicalPlan::Join {
            left: Box::new(plan),
            right: Box::new(LogicalPlan::scan(dim.name())),
            left_key: fk.column.clone(),
            right_key: fk.target.clone(),
            fk_declared: true,
            kind: JoinKind::Inner,
        };
    }
    if !predicate.conjuncts.is_empty() {
        plan = LogicalPlan::Filter {
            predicate,
            input: Box::new(plan),
        };
    }
    plan = LogicalPlan::Compare {
        spec: spec.clone(),
        input: Box::new(plan),
    };
    if let Some((key, direction)) = sort {
        plan = LogicalPlan::Sort {
            key,
            direction,
            input: Box::new(plan),
        };
    }
    if let Some(count) = limit {
        plan = LogicalPlan::Limit {
            count,
            input: Box::new(plan),
        };
    }

    let projection = match &query.select {
        Some(SelectList::Columns(cols)) => Some(
            cols.iter()
                .map(|c| {
                    outputs
                        .iter()
                        .find(|o| o.eq_ignore_ascii_case(&c.column.name))
                        .cloned()
                        .ok_or_else(|| unknown_output(&c.column.name, &outputs))
                })
                .collect::<Result<_, _>>()?,
        ),
        _ => None,
    };

    Ok(AnalyzedQuery {
        spec,
        plan,
        projection,
    })
}

fn unknown_output(name: &str, outputs: &[String]) -> AnalyzeError {
    AnalyzeError::Storage(StorageError::UnknownColumn {
        name: name.to_string(),
        suggestion: suggest(name, outputs.iter().map(String::as_str)),
    })
}

struct Context<'a> {
    catalog: &'a Catalog,
    fact: Arc<Relation>,
    qualifiers: Vec<String>,
    /// Dimension tables whose columns the query references, in order.
    joined: Vec<Arc<Relation>>,
    grouping_aliases: HashMap<String, (String, String)>,
    measure_aliases: HashMap<String, (Measure, String)>,
}

impl<'a> Context<'a> {
    fn new(catalog: &'a Catalog, fact: Arc<Relation>, from: Option<&TableRef>) -> Self {
        let mut qualifiers = vec![fact.name().to_ascii_lowercase()];
        if let Some(a) = from.and_then(|f| f.alias.as_ref()) {
            qualifiers.push(a.name.to_ascii_lowercase());
        }
        Context {
            catalog,
            fact,
            qualifiers,
            joined: Vec::new(),
            grouping_aliases: HashMap::new(),
            measure_aliases: HashMap::new(),
        }
    }

    fn dimensions(&self) -> Vec<Arc<Relation>> {
        self.fact
            .schema()
            .foreign_keys
            .iter()
            .filter_map(|fk| self.catalog.get(&fk.table).ok().cloned())
            .collect()
    }

    /// Table owning a resolved column name.
    fn owner(&self, name: &str) -> (Arc<Relation>, ColumnKind) {
        if let Some(i) = self.fact.schema().index_of(name) {
            return (self.fact.clone(), self.fact.schema().column(i).kind);
        }
        for d in &self.joined {
            if let Some(i) = d.schema().index_of(name) {
                return (d.clone(), d.schema().column(i).kind);
            }
        }
        unreachable!("column `{name}` was resolved")
    }

    /// Resolves a column to its declared name and kind; columns of tables
    /// reachable through a declared foreign key pull that table in.
    fn resolve(&mut self, c: &ColumnRef) -> Result<(String, ColumnKind), AnalyzeError> {
        let name = &c.column.name;
        let dims = self.dimensions();
        if let Some(q) = &c.qualifier {
            let q = q.name.to_ascii_lowercase();
            let known = self.qualifiers.contains(&q) || dims.iter().any(|d| d.name().eq_ignore_ascii_case(&q));
            if !known {
                return Err(AnalyzeError::Invalid(format!("unknown table qualifier `{}`", q)));
            }
        }
        let schema = self.fact.schema();
        if let Some(i) = schema.index_of(name) {
            let def = schema.column(i);
            return Ok((def.name.clone(), def.kind));
        }
        for d in dims {
            if let Some(i) = d.schema().index_of(name) {
                let def = d.schema().column(i).clone();
                if !self.joined.iter().any(|j| j.name() == d.name()) {
                    self.joined.push(d.clone());
                }
                return Ok((def.name, def.kind));
            }
        }
        let mut candidates: Vec<String> = schema.names().map(str::to_string).collect();
        for d in self.dimensions() {
            candidates.extend(d.schema().names().map(str::to_string));
        }
        Err(AnalyzeError::Storage(StorageError::UnknownColumn {
            name: name.clone(),
            suggestion: suggest(name, candidates.iter().map(String::as_str)),
        }))
    }
}

fn coerce(lit: &Literal, kind: ColumnKind, column: &str) -> Result<Value, AnalyzeError> {
    let mismatch = || {
        AnalyzeError::Invalid(format!(
            "literal {lit:?} does not match {} column `{column}`",
            kind.name()
        ))
    };
    Ok(match (lit, kind) {
        (Literal::Int(i), ColumnKind::Integer) => Value::Int(*i),
        (Literal::Int(i), ColumnKind::Float) => Value::Float(*i as f64),
        (Literal::Float(f), ColumnKind::Float) => Value::Float(*f),
        (Literal::Float(f), ColumnKind::Integer) if f.fract() == 0.0 => Value::Int(*f as i64),
        (Literal::Str(s) | Literal::Word(s), ColumnKind::String) => Value::str(s),
        (Literal::Int(i), ColumnKind::String) => Value::str(&i.to_string()),
        (Literal::Str(s) | Literal::Word(s), ColumnKind::Integer) => {
            Value::Int(s.parse().map_err(|_| mismatch())?)
        }
        (Literal::Str(s) | Literal::Word(s), ColumnKind::Float) => {
            Value::Float(s.parse().map_err(|_| mismatch())?)
        }
        _ => return Err(mismatch()),
    })
}

fn unique_alias(taken: &[String], base: &str) -> String {
    if !taken.iter().any(|t| t.eq_ignore_ascii_case(base)) {
        return base.to_string();
    }
    (2..)
        .map(|i| format!("{base}_{i}"))
        .find(|c| !taken.iter().any(|t| t.eq_ignore_ascii_case(c)))
        .expect("unbounded")
}

fn constraints(
    cx: &mut Context<'_>,
    left: &ConstraintSet,
    right: &ConstraintSet,
) -> Result<(ConstraintSpec, ConstraintSpec), AnalyzeError> {
    let mut taken: Vec<String> = Vec::new();
    let lc = constraint_side(cx, left, None, &mut taken)?;
    let rc = constraint_side(cx, right, Some(&lc), &mut taken)?;
    Ok((lc, rc))
}

fn constraint_side(
    cx: &mut Context<'_>,
    set: &ConstraintSet,
    left: Option<&ConstraintSpec>,
    taken: &mut Vec<String>,
) -> Result<ConstraintSpec, AnalyzeError> {
    let mut out = ConstraintSpec::default();
    for item in &set.items {
        let conjunct = match item {
            ConstraintItem::Bare(id) => {
                let shared = left.and_then(|l| {
                    l.conjuncts
                        .iter()
                        .find(|c| !c.shared && c.alias.eq_ignore_ascii_case(&id.name))
                });
                match shared {
                    Some(c) if c.is_all() => {
                        return Err(AnalyzeError::Invalid(format!(
                            "alias `{}` names an enumerated constraint and cannot be shared",
                            id.name
                        )))
                    }
                    Some(c) => Conjunct {
                        shared: true,
                        ..c.clone()
                    },
                    None => {
                        let col = ColumnRef {
                            qualifier: None,
                            column: id.clone(),
                        };
                        let (name, _) = cx.resolve(&col)?;
                        let alias = unique_alias(taken, &name);
                        taken.push(alias.clone());
                        Conjunct {
                            attribute: name,
                            kind: ConjunctKind::All,
                            alias,
                            shared: false,
                        }
                    }
                }
            }
            ConstraintItem::Fixed { column, value, alias } => {
                let (name, kind) = cx.resolve(column)?;
                let value = coerce(value, kind, &name)?;
                Conjunct {
                    alias: pick_alias(alias, &name, taken)?,
                    attribute: name,
                    kind: ConjunctKind::Fixed(value),
                    shared: false,
                }
            }
            ConstraintItem::All { column, alias } => {
                let (name, _) = cx.resolve(column)?;
                Conjunct {
                    alias: pick_alias(alias, &name, taken)?,
                    attribute: name,
                    kind: ConjunctKind::All,
                    shared: false,
                }
            }
        };
        if out
            .conjuncts
            .iter()
            .any(|c| c.attribute.eq_ignore_ascii_case(&conjunct.attribute))
        {
            return Err(AnalyzeError::Invalid(format!(
                "attribute `{}` constrained twice in one trendset",
                conjunct.attribute
            )));
        }
        out.conjuncts.push(conjunct);
    }
    Ok(out)
}

fn pick_alias(alias: &Option<Ident>, column: &str, taken: &mut Vec<String>) -> Result<String, AnalyzeError> {
    let name = match alias {
        Some(a) => {
            if taken.iter().any(|t| t.eq_ignore_ascii_case(&a.name)) {
                return Err(AnalyzeError::DuplicateAlias(a.name.clone()));
            }
            a.name.clone()
        }
        None => unique_alias(taken, column),
    };
    taken.push(name.clone());
    Ok(name)
}

fn gm_pairs(cx: &mut Context<'_>, items: &[GmItem]) -> Result<Vec<GmPair>, AnalyzeError> {
    let mut out: Vec<GmPair> = Vec::new();
    for item in items {
        let (grouping, grouping_alias) = match &item.grouping {
            GroupingItem::Bare(id) if cx.grouping_aliases.contains_key(&id.name.to_ascii_lowercase()) => {
                cx.grouping_aliases[&id.name.to_ascii_lowercase()].clone()
            }
            GroupingItem::Bare(id) => {
                let col = ColumnRef {
                    qualifier: None,
                    column: id.clone(),
                };
                let (name, _) = cx.resolve(&col)?;
                bind_grouping(cx, &name, &name)?
            }
            GroupingItem::Column { column, alias } => {
                let (name, _) = cx.resolve(column)?;
                let a = alias.as_ref().map_or(name.clone(), |a| a.name.clone());
                bind_grouping(cx, &name, &a)?
            }
        };
        let (measure, measure_alias) = match &item.measure {
            MeasureItem::Ref(id) => cx
                .measure_aliases
                .get(&id.name.to_ascii_lowercase())
                .cloned()
                .ok_or_else(|| AnalyzeError::UnknownAlias(id.name.clone()))?,
            MeasureItem::Agg { agg, column, alias } => {
                let (name, kind) = cx.resolve(column)?;
                if *agg != AggFn::Count && !kind.is_numeric() {
                    return Err(AnalyzeError::Invalid(format!(
                        "{} needs a numeric column, `{name}` is {}",
                        agg.name(),
                        kind.name()
                    )));
                }
                let measure = Measure {
                    agg: *agg,
                    column: name.clone(),
                };
                let a = alias.as_ref().map_or_else(
                    || format!("{}_{}", agg.name().to_ascii_lowercase(), name),
                    |a| a.name.clone(),
                );
                let key = a.to_ascii_lowercase();
                match cx.measure_aliases.get(&key) {
                    Some((m, _)) if *m != measure => return Err(AnalyzeError::DuplicateAlias(a)),
                    Some(_) => {}
                    None => {
                        cx.measure_aliases.insert(key, (measure.clone(), a.clone()));
                    }
                }
                (measure, a)
            }
        };
        if grouping.eq_ignore_ascii_case(&measure.column) {
            return Err(AnalyzeError::Invalid(format!(
                "grouping and measure both use column `{grouping}`"
            )));
        }
        let gm = GmPair {
            grouping,
            grouping_alias,
            measure,
            measure_alias,
        };
        if out.iter().any(|g| g.same_pair(&gm)) {
            return Err(AnalyzeError::Invalid(format!(
                "grouping/measure pair ({}, {}) listed twice",
                gm.grouping, gm.measure
            )));
        }
        out.push(gm);
    }
    Ok(out)
}

fn bind_grouping(cx: &mut Context<'_>, column: &str, alias: &str) -> Result<(String, String), AnalyzeError> {
    let key = alias.to_ascii_lowercase();
    match cx.grouping_aliases.get(&key) {
        Some((c, _)) if !c.eq_ignore_ascii_case(column) => Err(AnalyzeError::DuplicateAlias(alias.to_string())),
        Some(bound) => Ok(bound.clone()),
        None => {
            let bound = (column.to_string(), alias.to_string());
            cx.grouping_aliases.insert(key, bound.clone());
            Ok(bound)
        }
    }
}

/// Checks that both sides list the same (grouping, measure) pairs and
/// returns the right list in the left order.
fn align_comparable(left: &[GmPair], right: Vec<GmPair>) -> Result<Vec<GmPair>, AnalyzeError> {
    let describe = |g: &GmPair| format!("({}, {})", g.grouping, g.measure);
    if let Some(g) = left.iter().find(|g| !right.iter().any(|r| r.same_pair(g))) {
        return Err(AnalyzeError::NonComparable(format!(
            "{} appears only on the left side",
            describe(g)
        )));
    }
    if let Some(g) = right.iter().find(|g| !left.iter().any(|l| l.same_pair(g))) {
        return Err(AnalyzeError::NonComparable(format!(
            "{} appears only on the right side",
            describe(g)
        )));
    }
    Ok(left
        .iter()
        .map(|l| right.iter().find(|r| r.same_pair(l)).expect("checked").clone())
        .collect())
}
