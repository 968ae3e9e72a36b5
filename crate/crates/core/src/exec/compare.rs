use std::cmp::Ordering;
use std::sync::Arc;

use crate::error::ExecError;
use crate::qlang::{AggFn, CompareSpec, Direction, Side};
use crate::storage::{ColumnDef, ColumnKind, Relation, RelationBuilder, Schema, Value};

use super::pairs::PairScore;
use super::score::{ColumnRole, ScoreColumn, ScoreRelation, ScoreRow};
use super::trend::{SideLayout, Trend};

/// Source column positions of one GMPair.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GmColumns {
    pub grouping: usize,
    pub measure: usize,
    pub agg: AggFn,
}

/// A Compare spec resolved against its input relation.
#[derive(Clone, Debug)]
pub struct CompareLayout {
    pub source: Arc<Relation>,
    pub left: SideLayout,
    pub right: SideLayout,
    pub gms: Vec<GmColumns>,
}

impl CompareLayout {
    pub fn new(source: Arc<Relation>, spec: &CompareSpec) -> Result<Self, ExecError> {
        let left = SideLayout::new(&source, &spec.left.constraint)?;
        let right = SideLayout::new(&source, &spec.right.constraint)?;
        let mut gms = Vec::new();
        for gm in spec.gm_pairs() {
            let schema = source.schema();
            let measure = schema.resolve(&gm.measure.column)?;
            if gm.measure.agg != AggFn::Count && !schema.column(measure).kind.is_numeric() {
                return Err(ExecError::Invalid(format!(
                    "{} over string column `{}`",
                    gm.measure.agg.name(),
                    gm.measure.column
                )));
            }
            gms.push(GmColumns {
                grouping: schema.resolve(&gm.grouping)?,
                measure,
                agg: gm.measure.agg,
            });
        }
        Ok(CompareLayout {
            source,
            left,
            right,
            gms,
        })
    }

    /// Distinct source columns the constraints of both sides read.
    pub fn constraint_columns(&self) -> Vec<usize> {
        let mut out: Vec<usize> = Vec::new();
        for &c in self.left.columns.iter().chain(&self.right.columns) {
            if !out.contains(&c) {
                out.push(c);
            }
        }
        out
    }
}

/// Scored pairs of one GMPair together with the trends they index.
#[derive(Clone, Debug)]
pub struct GmScores {
    pub gm: usize,
    pub left: Arc<Vec<Trend>>,
    pub right: Arc<Vec<Trend>>,
    pub pairs: Vec<PairScore>,
}

/// A pair in identity order: scores by direction, then left key, right key
/// and GMPair index ascending.
#[derive(Clone, Copy, Debug)]
pub struct Candidate<'a> {
    pub score: f64,
    pub left: &'a [u64],
    pub right: &'a [u64],
    pub gm: usize,
}

pub fn identity_cmp(a: &Candidate, b: &Candidate) -> Ordering {
    a.left
        .cmp(b.left)
        .then_with(|| a.right.cmp(b.right))
        .then(a.gm.cmp(&b.gm))
}

pub fn rank_cmp(a: &Candidate, b: &Candidate, direction: Direction) -> Ordering {
    let o = a.score.total_cmp(&b.score);
    let o = if direction == Direction::Desc { o.reverse() } else { o };
    o.then_with(|| identity_cmp(a, b))
}

pub fn candidates(results: &[GmScores]) -> Vec<Candidate<'_>> {
    results
        .iter()
        .flat_map(|r| {
            r.pairs.iter().map(move |p| Candidate {
                score: p.score,
                left: &r.left[p.left as usize].key,
                right: &r.right[p.right as usize].key,
                gm: r.gm,
            })
        })
        .collect()
}

/// Ranks all scored pairs and keeps the first `k`.
pub fn select_top<'a>(mut all: Vec<Candidate<'a>>, direction: Direction, k: Option<usize>) -> Vec<Candidate<'a>> {
    all.sort_by(|a, b| rank_cmp(a, b, direction));
    if let Some(k) = k {
        all.truncate(k);
    }
    all
}

/// Output columns of a Compare.
pub fn score_columns(spec: &CompareSpec) -> Vec<ScoreColumn> {
    let mut cols = Vec::new();
    for c in spec.constraint_columns() {
        let mut mirrors = vec![(c.side, c.index)];
        if c.side == Side::Left {
            for (j, r) in spec.right.constraint.conjuncts.iter().enumerate() {
                if r.shared && r.alias.eq_ignore_ascii_case(&c.name) {
                    mirrors.push((Side::Right, j));
                }
            }
        }
        cols.push(ScoreColumn {
            name: c.name,
            role: ColumnRole::Constraint {
                attribute: c.attribute,
                mirrors,
            },
        });
    }
    for name in spec.grouping_flags() {
        cols.push(ScoreColumn {
            name,
            role: ColumnRole::GroupingFlag,
        });
    }
    for name in spec.measure_flags() {
        cols.push(ScoreColumn {
            name,
            role: ColumnRole::MeasureFlag,
        });
    }
    cols.push(ScoreColumn {
        name: spec.score_alias.clone(),
        role: ColumnRole::Score,
    });
    cols
}

/// Decodes ranked candidates into score rows, keeping their order.
pub fn score_relation(spec: &CompareSpec, layout: &CompareLayout, ranked: &[Candidate]) -> ScoreRelation {
    let columns = score_columns(spec);
    let gms = spec.gm_pairs();
    let rows = ranked
        .iter()
        .map(|c| {
            let left = layout.left.decode(&layout.source, c.left);
            let right = layout.right.decode(&layout.source, c.right);
            let gm = &gms[c.gm];
            let cells = columns
                .iter()
                .map(|col| match &col.role {
                    ColumnRole::Constraint { mirrors, .. } => {
                        let (side, i) = mirrors[0];
                        match side {
                            Side::Left => left[i].clone(),
                            Side::Right => right[i].clone(),
                        }
                    }
                    ColumnRole::GroupingFlag => Value::Bool(col.name == gm.grouping_alias),
                    ColumnRole::MeasureFlag => Value::Bool(col.name == gm.measure_alias),
                    ColumnRole::Score => Value::Float(c.score),
                })
                .collect();
            ScoreRow {
                left,
                right,
                gm: c.gm,
                cells,
            }
        })
        .collect();
    ScoreRelation { columns, rows }
}

/// Base tuples of the surviving pairs. Each score row selects the base
/// rows of its enumerating sides (both sides when neither enumerates);
/// output columns are the constraint attributes, the grouping and measure
/// columns of every GMPair, and the score. Grouping and measure columns of
/// GMPairs other than the row's are null.
pub fn materialize_topk_tuples(
    scores: &ScoreRelation,
    base: &Relation,
    spec: &CompareSpec,
) -> Result<Relation, ExecError> {
    let schema = base.schema();
    let mut picked: Vec<usize> = Vec::new();
    let mut n_constraint = 0;
    let names = spec
        .constraint_attributes()
        .into_iter()
        .map(|a| (a, true))
        .chain(spec.gm_pairs().iter().map(|gm| (gm.grouping.clone(), false)))
        .chain(spec.gm_pairs().iter().map(|gm| (gm.measure.column.clone(), false)));
    for (name, constraint) in names {
        let i = schema.resolve(&name)?;
        if !picked.contains(&i) {
            picked.push(i);
            n_constraint += constraint as usize;
        }
    }
    let mut defs: Vec<ColumnDef> = picked.iter().map(|&i| schema.column(i).clone()).collect();
    let score_name = if defs.iter().any(|d| d.name.eq_ignore_ascii_case(&spec.score_alias)) {
        format!("{}_score", spec.score_alias)
    } else {
        spec.score_alias.clone()
    };
    defs.push(ColumnDef {
        name: score_name,
        kind: ColumnKind::Float,
    });
    let mut out = RelationBuilder::new(base.name(), Schema::new(defs)?);

    let sides: Vec<(Side, SideLayout)> = {
        let l = SideLayout::new(base, &spec.left.constraint)?;
        let r = SideLayout::new(base, &spec.right.constraint)?;
        match (spec.left.constraint.enumerates(), spec.right.constraint.enumerates()) {
            (true, false) => vec![(Side::Left, l)],
            (false, true) => vec![(Side::Right, r)],
            _ => vec![(Side::Left, l), (Side::Right, r)],
        }
    };
    let gm_cols: Vec<(usize, usize)> = spec
        .gm_pairs()
        .iter()
        .map(|gm| Ok((schema.resolve(&gm.grouping)?, schema.resolve(&gm.measure.column)?)))
        .collect::<Result<_, ExecError>>()?;
    let score_idx = scores
        .score_index()
        .ok_or_else(|| ExecError::Invalid("score relation without a score column".into()))?;

    for row in &scores.rows {
        let (g, m) = gm_cols[row.gm];
        for (side, layout) in &sides {
            let values = match side {
                Side::Left => &row.left,
                Side::Right => &row.right,
            };
            let keys: Vec<Option<u64>> = layout
                .columns
                .iter()
                .zip(values)
                .map(|(&c, v)| base.column(c).encode_value(v))
                .collect();
            if keys.iter().any(Option::is_none) {
                continue;
            }
            for r in 0..base.row_count() {
                let hit = layout
                    .columns
                    .iter()
                    .zip(&keys)
                    .all(|(&c, k)| base.column(c).key(r) == *k);
                if !hit {
                    continue;
                }
                let mut cells: Vec<Value> = picked
                    .iter()
                    .enumerate()
                    .map(|(pos, &c)| {
                        if pos < n_constraint || c == g || c == m {
                            base.column(c).value(r)
                        } else {
                            Value::Null
                        }
                    })
                    .collect();
                cells.push(row.cells[score_idx].clone());
                out.push_row(&cells)?;
            }
        }
    }
    Ok(out.finish())
}

