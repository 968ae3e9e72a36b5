//! Syntax tree of a COMPARE query. Spans are carried for error reporting
//! and ignored by equality.

use super::spec::{AggFn, Direction, ScoreAgg};

#[derive(Clone, Copy, Debug, Default)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn to(self, other: Span) -> Span {
        Span::new(self.start.min(other.start), self.end.max(other.end))
    }
}

impl PartialEq for Span {
    fn eq(&self, _: &Span) -> bool {
        true
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Ident {
    pub name: String,
    pub span: Span,
}

impl Ident {
    pub fn new(name: impl Into<String>) -> Self {
        Ident {
            name: name.into(),
            span: Span::default(),
        }
    }
}

/// `[qualifier.]column`
#[derive(Clone, Debug, PartialEq)]
pub struct ColumnRef {
    pub qualifier: Option<Ident>,
    pub column: Ident,
}

impl ColumnRef {
    pub fn span(&self) -> Span {
        match &self.qualifier {
            Some(q) => q.span.to(self.column.span),
            None => self.column.span,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Literal {
    Int(i64),
    Float(f64),
    /// Quoted string.
    Str(String),
    /// Unquoted word, treated as a string value.
    Word(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Query {
    /// `None` for a bare COMPARE fragment without SELECT/FROM.
    pub select: Option<SelectList>,
    pub from: Option<TableRef>,
    pub where_clause: Vec<Condition>,
    pub compare: CompareClause,
    pub order_by: Option<OrderBy>,
    pub limit: Option<Limit>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum SelectList {
    Star,
    Columns(Vec<ColumnRef>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct TableRef {
    pub table: Ident,
    pub alias: Option<Ident>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }

    pub fn holds(self, ord: std::cmp::Ordering) -> bool {
        use std::cmp::Ordering::*;
        match self {
            CmpOp::Eq => ord == Equal,
            CmpOp::Ne => ord != Equal,
            CmpOp::Lt => ord == Less,
            CmpOp::Le => ord != Greater,
            CmpOp::Gt => ord == Greater,
            CmpOp::Ge => ord != Less,
        }
    }
}

/// One conjunct of a WHERE clause.
#[derive(Clone, Debug, PartialEq)]
pub struct Condition {
    pub column: ColumnRef,
    pub op: CmpOp,
    pub value: Literal,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompareClause {
    pub form: CompareForm,
    pub scorer: ScorerAst,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub enum CompareForm {
    /// `[cset <-> cset] [gmlist]`: both sides share one gm list.
    Shared {
        left: ConstraintSet,
        right: ConstraintSet,
        gms: Vec<GmItem>,
    },
    /// `[cset][gmlist] <-> [cset][gmlist]`: each side names its own pairs.
    PerSide {
        left: ConstraintSet,
        left_gms: Vec<GmItem>,
        right: ConstraintSet,
        right_gms: Vec<GmItem>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConstraintSet {
    pub items: Vec<ConstraintItem>,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ConstraintItem {
    /// `col = literal [AS alias]`
    Fixed {
        column: ColumnRef,
        value: Literal,
        alias: Option<Ident>,
    },
    /// `col [AS alias]` with a qualifier or an alias: enumerate every value.
    All {
        column: ColumnRef,
        alias: Option<Ident>,
    },
    /// Lone identifier: an alias defined on the left side, or else an
    /// unqualified column to enumerate.
    Bare(Ident),
}

impl ConstraintItem {
    pub fn span(&self) -> Span {
        match self {
            ConstraintItem::Fixed { column, alias, .. } | ConstraintItem::All { column, alias } => {
                let s = column.span();
                alias.as_ref().map_or(s, |a| s.to(a.span))
            }
            ConstraintItem::Bare(i) => i.span,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GmItem {
    pub grouping: GroupingItem,
    pub measure: MeasureItem,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub enum GroupingItem {
    Column { column: ColumnRef, alias: Option<Ident> },
    /// Lone identifier: alias reference or unqualified column.
    Bare(Ident),
}

#[derive(Clone, Debug, PartialEq)]
pub enum MeasureItem {
    Agg {
        agg: AggFn,
        column: ColumnRef,
        alias: Option<Ident>,
    },
    /// Reference to a measure alias bound earlier in the list.
    Ref(Ident),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScorerAst {
    pub agg: ScoreAgg,
    pub p: u32,
    pub alias: Option<Ident>,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OrderBy {
    pub column: ColumnRef,
    pub direction: Option<Direction>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Limit {
    pub count: u64,
    pub span: Span,
}
