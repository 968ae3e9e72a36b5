//! Physical operators: aggregation, trend partitioning, pair scoring and
//! the score relation.

pub mod aggregate;
pub mod compare;
pub mod pairs;
pub mod run;
pub mod scorer;
pub mod score;
pub mod trend;

use serde::Serialize;

pub use aggregate::{aggregate_partials, group_by_aggregate, rollup, AggRow, AggTable, Partial};
pub use compare::{materialize_topk_tuples, CompareLayout, GmColumns, GmScores};
pub use run::{execute, execute_with, PhysOutput};
pub use pairs::{enumerate_pairs, score_all_pairs, score_trendwise, PairRules, PairScore};
pub use score::{ColumnRole, ScoreColumn, ScoreRelation, ScoreRow};
pub use scorer::{diff, score_pair, DiffScorer, ScoreState, Scorer};
pub use trend::{partition_side, SideLayout, Trend};

/// Work counters of one execution.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Counters {
    pub tuple_comparisons: u64,
    pub pairs_scored: u64,
    pub pairs_pruned: u64,
    pub pairs_pruned_initial: u64,
    pub pairs_pruned_refinement: u64,
    pub segments_built: u64,
    pub segments_refined: u64,
    pub pairs_fully_refined: u64,
    pub pair_states: u64,
    pub trends: u64,
}

impl Counters {
    pub fn add(&mut self, o: &Counters) {
        self.tuple_comparisons += o.tuple_comparisons;
        self.pairs_scored += o.pairs_scored;
        self.pairs_pruned += o.pairs_pruned;
        self.pairs_pruned_initial += o.pairs_pruned_initial;
        self.pairs_pruned_refinement += o.pairs_pruned_refinement;
        self.segments_built += o.segments_built;
        self.segments_refined += o.segments_refined;
        self.pairs_fully_refined += o.pairs_fully_refined;
        self.pair_states += o.pair_states;
        self.trends += o.trends;
    }
}

/// Wall time per phase, milliseconds.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct PhaseTimes {
    pub parse: f64,
    pub plan: f64,
    pub aggregate: f64,
    pub partition: f64,
    pub score: f64,
}

impl PhaseTimes {
    pub fn add(&mut self, o: &PhaseTimes) {
        self.parse += o.parse;
        self.plan += o.plan;
        self.aggregate += o.aggregate;
        self.partition += o.partition;
        self.score += o.score;
    }
}
