use std::fmt::Write;

use crate::prune::PruneMode;
use crate::qlang::{CompareSpec, Direction};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum JoinStrategy {
    /// One grouping-value join over all trends of both sides.
    AllPairs,
    /// Independent merge join per trend pair.
    Trendwise,
}

#[derive(Clone, Debug, PartialEq)]
pub enum PhysOp {
    /// The relation the Compare reads.
    Input { name: String },
    /// Rows matching the fixed conjuncts of either side.
    Filter,
    /// Partial aggregates of `measures` keyed on `keys`, shared by the
    /// GMPairs in `gms`.
    GroupByAgg {
        keys: Vec<String>,
        measures: Vec<String>,
        gms: Vec<usize>,
    },
    /// Rollup of a shared aggregate onto one GMPair's columns.
    VerticalPartition { gm: usize },
    /// Slices one GMPair's aggregate into per-side trends.
    HorizontalPartition { gm: usize },
    TrendJoinScore { gm: usize, strategy: JoinStrategy },
    DiffPruneTopK {
        k: usize,
        direction: Direction,
        mode: PruneMode,
    },
    UnionAll,
    Sort { direction: Direction },
    Limit { k: usize },
    MaterializeTuples,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhysNode {
    pub op: PhysOp,
    pub inputs: Vec<usize>,
    pub est_rows: f64,
    /// Cost of this node alone.
    pub est_cost: f64,
}

/// Operator DAG for one Compare. Nodes are stored children first; the
/// last node is the root.
#[derive(Clone, Debug, PartialEq)]
pub struct PhysicalPlan {
    pub spec: CompareSpec,
    pub nodes: Vec<PhysNode>,
}

impl PhysicalPlan {
    pub fn root(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn cost(&self) -> f64 {
        self.nodes.iter().map(|n| n.est_cost).sum()
    }

    pub fn count(&self, pred: impl Fn(&PhysOp) -> bool) -> usize {
        self.nodes.iter().filter(|n| pred(&n.op)).count()
    }

    pub fn group_by_count(&self) -> usize {
        self.count(|op| matches!(op, PhysOp::GroupByAgg { .. }))
    }

    fn label(&self, op: &PhysOp) -> String {
        let gm_name = |gm: usize| {
            let g = &self.spec.gm_pairs()[gm];
            format!("({}, {})", g.grouping, g.measure)
        };
        match op {
            PhysOp::Input { name } => format!("Input {name}"),
            PhysOp::Filter => "Filter fixed constraints".to_string(),
            PhysOp::GroupByAgg { keys, measures, gms } => format!(
                "GroupByAgg keys=[{}] measures=[{}] gms={:?}",
                keys.join(", "),
                measures.join(", "),
                gms
            ),
            PhysOp::VerticalPartition { gm } => format!("VerticalPartition {}", gm_name(*gm)),
            PhysOp::HorizontalPartition { gm } => format!("HorizontalPartition {}", gm_name(*gm)),
            PhysOp::TrendJoinScore { gm, strategy } => {
                let s = match strategy {
                    JoinStrategy::AllPairs => "all-pairs",
                    JoinStrategy::Trendwise => "trendwise",
                };
                format!("TrendJoinScore {} {s}", gm_name(*gm))
            }
            PhysOp::DiffPruneTopK { k, direction, mode } => {
                let m = match mode {
                    PruneMode::BoundsOnly => "bounds",
                    PruneMode::EarlyTermination => "early-termination",
                };
                format!("DiffPruneTopK k={k} {} {m}", direction.name())
            }
            PhysOp::UnionAll => "UnionAll".to_string(),
            PhysOp::Sort { direction } => format!("Sort {} {}", self.spec.score_alias, direction.name()),
            PhysOp::Limit { k } => format!("Limit {k}"),
            PhysOp::MaterializeTuples => "MaterializeTuples".to_string(),
        }
    }

    /// Indented tree, one node per line with its estimates. A node with
    /// several parents is expanded once and referenced by id afterwards.
    pub fn explain(&self) -> String {
        let mut out = String::new();
        let mut shown = vec![false; self.nodes.len()];
        self.render(self.root(), 0, &mut shown, &mut out);
        out
    }

    fn render(&self, id: usize, depth: usize, shown: &mut [bool], out: &mut String) {
        let n = &self.nodes[id];
        let pad = "  ".repeat(depth);
        if shown[id] {
            let _ = writeln!(out, "{pad}-> #{id}");
            return;
        }
        shown[id] = true;
        let _ = writeln!(
            out,
            "{pad}#{id} {}  (rows={:.0} cost={:.0})",
            self.label(&n.op),
            n.est_rows,
            n.est_cost
        );
        for &c in &n.inputs {
            self.render(c, depth + 1, shown, out);
        }
    }
}
