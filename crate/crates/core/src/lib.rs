pub mod algebra;
pub mod engine;
pub mod error;
pub mod exec;
pub mod oracle;
pub mod planner;
pub mod prune;
pub mod qlang;
pub mod storage;
pub mod workload;

pub use error::{Error, Result};
