//! Lexer, parser, printer and semantic analysis for COMPARE queries.

mod analyze;
pub mod ast;
mod lexer;
mod parser;
mod printer;
pub mod spec;

pub use analyze::{analyze, AnalyzedQuery};
pub use parser::parse_query;
pub use printer::print_query;
pub use spec::{
    AggFn, CompareSpec, ConjunctKind, Conjunct, ConstraintColumn, ConstraintSpec, Direction, GmPair, Measure,
    ScoreAgg, ScorerSpec, Side, TrendsetSpec,
};
