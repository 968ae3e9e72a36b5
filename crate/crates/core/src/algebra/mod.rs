//! Logical plan IR and rewrite rules.

mod explain;
mod plan;
pub mod rules;

pub use explain::explain_logical;
pub use plan::{AggExpr, Comparison, JoinKind, LogicalPlan, Predicate, Shape};
pub use rules::{optimize, Rule, RuleApplication};
