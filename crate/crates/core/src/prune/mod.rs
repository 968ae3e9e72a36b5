//! Segment summaries, score bounds and bound-based top-k selection for
//! DIFF scorers.

mod bounds;
mod topk;

pub use crate::exec::diff;
pub use bounds::{
    build_segagg, initial_state, pair_bounds, refine, segment_count, segment_pair_bounds, Bitmap, ScoreBounds,
    SegAgg, Segment, Segmentation, TState,
};
pub use topk::{prune_topk, PruneGroup, PruneMode};
