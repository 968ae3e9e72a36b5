//! Resolved, validated description of one COMPARE operation.

use std::fmt;

use crate::storage::Value;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AggFn {
    Avg,
    Sum,
    Min,
    Max,
    Count,
}

impl AggFn {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_uppercase().as_str() {
            "AVG" => Some(AggFn::Avg),
            "SUM" => Some(AggFn::Sum),
            "MIN" => Some(AggFn::Min),
            "MAX" => Some(AggFn::Max),
            "COUNT" => Some(AggFn::Count),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            AggFn::Avg => "AVG",
            AggFn::Sum => "SUM",
            AggFn::Min => "MIN",
            AggFn::Max => "MAX",
            AggFn::Count => "COUNT",
        }
    }
}

/// Aggregate applied to the per-pair DIFF values.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ScoreAgg {
    Sum,
    Avg,
    Min,
    Max,
}

impl ScoreAgg {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_uppercase().as_str() {
            "SUM" => Some(ScoreAgg::Sum),
            "AVG" => Some(ScoreAgg::Avg),
            "MIN" => Some(ScoreAgg::Min),
            "MAX" => Some(ScoreAgg::Max),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ScoreAgg::Sum => "SUM",
            ScoreAgg::Avg => "AVG",
            ScoreAgg::Min => "MIN",
            ScoreAgg::Max => "MAX",
        }
    }

    pub const ALL: [ScoreAgg; 4] = [ScoreAgg::Sum, ScoreAgg::Avg, ScoreAgg::Min, ScoreAgg::Max];
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Direction {
    Asc,
    Desc,
}

impl Direction {
    pub fn name(self) -> &'static str {
        match self {
            Direction::Asc => "ASC",
            Direction::Desc => "DESC",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum ConjunctKind {
    Fixed(Value),
    All,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Conjunct {
    pub attribute: String,
    pub kind: ConjunctKind,
    /// Output column name.
    pub alias: String,
    /// True when this conjunct was introduced on the right side by
    /// referencing a left alias; its output column is the left one.
    pub shared: bool,
}

impl Conjunct {
    pub fn is_all(&self) -> bool {
        matches!(self.kind, ConjunctKind::All)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct ConstraintSpec {
    pub conjuncts: Vec<Conjunct>,
}

impl ConstraintSpec {
    pub fn enumerates(&self) -> bool {
        self.conjuncts.iter().any(Conjunct::is_all)
    }

    pub fn attributes(&self) -> impl Iterator<Item = &str> {
        self.conjuncts.iter().map(|c| c.attribute.as_str())
    }

    /// Same filter, ignoring aliases.
    pub fn same_filter(&self, other: &ConstraintSpec) -> bool {
        self.conjuncts.len() == other.conjuncts.len()
            && self
                .conjuncts
                .iter()
                .zip(&other.conjuncts)
                .all(|(a, b)| a.attribute.eq_ignore_ascii_case(&b.attribute) && a.kind == b.kind)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Measure {
    pub agg: AggFn,
    pub column: String,
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.agg.name(), self.column)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GmPair {
    pub grouping: String,
    pub grouping_alias: String,
    pub measure: Measure,
    pub measure_alias: String,
}

impl GmPair {
    pub fn same_pair(&self, other: &GmPair) -> bool {
        self.grouping.eq_ignore_ascii_case(&other.grouping) && self.measure == other.measure
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TrendsetSpec {
    pub constraint: ConstraintSpec,
    pub gm_pairs: Vec<GmPair>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ScorerSpec {
    pub agg: ScoreAgg,
    pub p: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
}

/// One output constraint column.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConstraintColumn {
    pub name: String,
    pub side: Side,
    /// Index into that side's conjunct list.
    pub index: usize,
    pub attribute: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CompareSpec {
    /// Name of the relation the trends are drawn from.
    pub source: String,
    pub left: TrendsetSpec,
    pub right: TrendsetSpec,
    pub scorer: ScorerSpec,
    pub score_alias: String,
    pub direction: Direction,
    pub k: Option<usize>,
}

impl CompareSpec {
    /// GMPairs in canonical (left) order; the right side lists the same
    /// pairs in the same order after analysis.
    pub fn gm_pairs(&self) -> &[GmPair] {
        &self.left.gm_pairs
    }

    /// Both sides select the same trends, so pairs are unordered.
    pub fn symmetric(&self) -> bool {
        self.left.constraint.same_filter(&self.right.constraint)
    }

    pub fn constraint_columns(&self) -> Vec<ConstraintColumn> {
        let mut out = Vec::new();
        for (side, spec) in [(Side::Left, &self.left), (Side::Right, &self.right)] {
            for (index, c) in spec.constraint.conjuncts.iter().enumerate() {
                if !c.shared {
                    out.push(ConstraintColumn {
                        name: c.alias.clone(),
                        side,
                        index,
                        attribute: c.attribute.clone(),
                    });
                }
            }
        }
        out
    }

    /// Distinct grouping aliases in order of appearance.
    pub fn grouping_flags(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for gm in self.gm_pairs() {
            if !out.contains(&gm.grouping_alias) {
                out.push(gm.grouping_alias.clone());
            }
        }
        out
    }

    /// Distinct measure aliases in order of appearance.
    pub fn measure_flags(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for gm in self.gm_pairs() {
            if !out.contains(&gm.measure_alias) {
                out.push(gm.measure_alias.clone());
            }
        }
        out
    }

    /// Output column names: constraint columns, grouping flags, measure
    /// flags, score.
    pub fn output_columns(&self) -> Vec<String> {
        let mut cols: Vec<String> = self.constraint_columns().into_iter().map(|c| c.name).collect();
        cols.extend(self.grouping_flags());
        cols.extend(self.measure_flags());
        cols.push(self.score_alias.clone());
        cols
    }

    /// Distinct constraint attributes of both sides, left first.
    pub fn constraint_attributes(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for c in self
            .left
            .constraint
            .conjuncts
            .iter()
            .chain(&self.right.constraint.conjuncts)
        {
            if !out.iter().any(|a| a.eq_ignore_ascii_case(&c.attribute)) {
                out.push(c.attribute.clone());
            }
        }
        out
    }

    /// Every input column the Compare reads.
    pub fn referenced_columns(&self) -> Vec<String> {
        let mut out = self.constraint_attributes();
        for gm in self.gm_pairs() {
            for c in [&gm.grouping, &gm.measure.column] {
                if !out.iter().any(|a| a.eq_ignore_ascii_case(c)) {
                    out.push(c.clone());
                }
            }
        }
        out
    }

    /// Renames an input column everywhere it is referenced.
    pub fn rename_column(&mut self, from: &str, to: &str) {
        let fix = |s: &mut String| {
            if s.eq_ignore_ascii_case(from) {
                *s = to.to_string();
            }
        };
        for side in [&mut self.left, &mut self.right] {
            for c in &mut side.constraint.conjuncts {
                fix(&mut c.attribute);
            }
            for gm in &mut side.gm_pairs {
                fix(&mut gm.grouping);
                fix(&mut gm.measure.column);
            }
        }
    }

    pub fn describe(&self) -> String {
        let cset = |t: &TrendsetSpec| {
            let items: Vec<String> = t
                .constraint
                .conjuncts
                .iter()
                .map(|c| match &c.kind {
                    _ if c.shared => c.alias.clone(),
                    ConjunctKind::Fixed(v) => format!("{} = {} AS {}", c.attribute, quote(v), c.alias),
                    ConjunctKind::All => format!("{} AS {}", c.attribute, c.alias),
                })
                .collect();
            format!("({})", items.join(", "))
        };
        let gms: Vec<String> = self
            .gm_pairs()
            .iter()
            .map(|g| format!("({} AS {}, {} AS {})", g.grouping, g.grouping_alias, g.measure, g.measure_alias))
            .collect();
        let mut s = format!(
            "[{} <-> {}] [{}] USING {} OVER DIFF({}) AS {}",
            cset(&self.left),
            cset(&self.right),
            gms.join(", "),
            self.scorer.agg.name(),
            self.scorer.p,
            self.score_alias
        );
        if let Some(k) = self.k {
            s.push_str(&format!(" top {k} {}", self.direction.name()));
        }
        s
    }
}

pub(crate) fn quote(v: &Value) -> String {
    match v {
        Value::Str(s) => format!("'{}'", s.replace('\'', "''")),
        Value::Float(f) => format!("{f:?}"),
        other => other.to_string(),
    }
}
