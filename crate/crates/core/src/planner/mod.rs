//! Lowering of a Compare to physical operators and merge-partition
//! planning under a row-count cost model.

mod build;
mod physical;

pub use build::{
    build_plan, cost, lower_basic, merge_pair, merge_partition, InputStats, PlannerOptions, SubPlanGroup,
};
pub use physical::{JoinStrategy, PhysNode, PhysOp, PhysicalPlan};
