use std::sync::Arc;

use crate::error::ExecError;
use crate::exec::{diff, DiffScorer, ScoreState, Scorer, Trend};
use crate::qlang::{ScoreAgg, ScorerSpec};

/// Segments per trend for a trend of `n` points.
pub fn segment_count(n: usize) -> usize {
    if n == 0 {
        return 1;
    }
    (1 + n.ilog2() as usize).clamp(1, n)
}

/// Uncompressed bitset.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Bitmap {
    words: Vec<u64>,
}

impl Bitmap {
    pub fn new(bits: usize) -> Self {
        Bitmap {
            words: vec![0; bits.div_ceil(64)],
        }
    }

    pub fn set(&mut self, i: usize) {
        self.words[i / 64] |= 1 << (i % 64);
    }

    pub fn get(&self, i: usize) -> bool {
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    fn range_mask(w: usize, lo: usize, hi: usize) -> u64 {
        let start = w * 64;
        let a = lo.saturating_sub(start).min(64);
        let b = hi.saturating_sub(start).min(64);
        if a >= b {
            return 0;
        }
        let upper = if b == 64 { u64::MAX } else { (1u64 << b) - 1 };
        upper & !((1u64 << a) - 1)
    }

    /// Set bits of `self & other` in positions `lo..hi`.
    pub fn and_count(&self, other: &Bitmap, lo: usize, hi: usize) -> u64 {
        if lo >= hi {
            return 0;
        }
        (lo / 64..hi.div_ceil(64))
            .map(|w| (self.words[w] & other.words[w] & Self::range_mask(w, lo, hi)).count_ones() as u64)
            .sum()
    }

    pub fn count(&self, lo: usize, hi: usize) -> u64 {
        self.and_count(self, lo, hi)
    }
}

/// Summary of the measure values falling in one segment.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Segment {
    pub count: u64,
    pub sum: f64,
    pub min: f64,
    pub max: f64,
}

impl Segment {
    pub const EMPTY: Segment = Segment {
        count: 0,
        sum: 0.0,
        min: f64::INFINITY,
        max: f64::NEG_INFINITY,
    };

    pub fn new(count: u64, sum: f64, min: f64, max: f64) -> Self {
        Segment { count, sum, min, max }
    }

    pub fn push(&mut self, v: f64) {
        self.count += 1;
        self.sum += v;
        self.min = self.min.min(v);
        self.max = self.max.max(v);
    }

    pub fn avg(&self) -> f64 {
        self.sum / self.count as f64
    }
}

/// Contiguous cut of a sorted grouping domain into segments.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Segmentation {
    pub domain: Vec<u64>,
    /// `cuts[i]..cuts[i + 1]` are the domain positions of segment `i`.
    pub cuts: Vec<usize>,
}

impl Segmentation {
    /// `domain` must be sorted and distinct. The segment count is capped by
    /// the domain size.
    pub fn new(domain: Vec<u64>, segments: usize) -> Self {
        let n = domain.len();
        let l = segments.clamp(1, n.max(1));
        let cuts = (0..=l).map(|i| i * n / l).collect();
        Segmentation { domain, cuts }
    }

    pub fn segments(&self) -> usize {
        self.cuts.len() - 1
    }

    pub fn position(&self, g: u64) -> Option<usize> {
        self.domain.binary_search(&g).ok()
    }
}

/// Per-segment summaries of one trend plus its domain bitmap.
#[derive(Clone, Debug, PartialEq)]
pub struct SegAgg {
    pub segments: Vec<Segment>,
    pub bitmap: Bitmap,
    /// Index into the trend's points where each segment starts, plus the
    /// end.
    pub starts: Vec<usize>,
    pub cuts: Arc<[usize]>,
}

pub fn build_segagg(t: &Trend, seg: &Segmentation) -> Result<SegAgg, ExecError> {
    let l = seg.segments();
    let mut segments = vec![Segment::EMPTY; l];
    let mut bitmap = Bitmap::new(seg.domain.len());
    let mut starts = vec![t.points.len(); l + 1];
    let mut s = 0;
    starts[0] = 0;
    for (idx, &(g, m)) in t.points.iter().enumerate() {
        let pos = seg
            .position(g)
            .ok_or_else(|| ExecError::SegmentMismatch(format!("grouping key {g} outside the domain")))?;
        while pos >= seg.cuts[s + 1] {
            s += 1;
            starts[s] = idx;
        }
        bitmap.set(pos);
        segments[s].push(m);
    }
    Ok(SegAgg {
        segments,
        bitmap,
        starts,
        cuts: seg.cuts.clone().into(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScoreBounds {
    pub lower: f64,
    pub upper: f64,
}

/// Bound on one aligned segment pair with `matched` common grouping
/// values. SUM and AVG bounds are the segment's contribution to the sum of
/// diffs; MIN and MAX bound the extreme diff inside the segment.
pub fn segment_pair_bounds(a: &Segment, b: &Segment, matched: u64, scorer: ScorerSpec) -> ScoreBounds {
    if matched == 0 {
        return match scorer.agg {
            ScoreAgg::Sum | ScoreAgg::Avg => ScoreBounds { lower: 0.0, upper: 0.0 },
            ScoreAgg::Min => ScoreBounds {
                lower: f64::INFINITY,
                upper: f64::INFINITY,
            },
            ScoreAgg::Max => ScoreBounds {
                lower: f64::NEG_INFINITY,
                upper: f64::NEG_INFINITY,
            },
        };
    }
    let p = scorer.p;
    let spread = (a.max - b.min).abs().max((b.max - a.min).abs());
    let gap = (a.min - b.max).max(b.min - a.max).max(0.0);
    let full = matched == a.count && matched == b.count;
    let near = if full {
        diff(a.avg(), b.avg(), p).max(gap.powi(p as i32))
    } else {
        gap.powi(p as i32)
    };
    let far = spread.powi(p as i32);
    match scorer.agg {
        ScoreAgg::Sum | ScoreAgg::Avg => ScoreBounds {
            lower: matched as f64 * near,
            upper: matched as f64 * far,
        },
        ScoreAgg::Min => ScoreBounds {
            lower: gap.powi(p as i32),
            upper: far,
        },
        ScoreAgg::Max => ScoreBounds { lower: near, upper: far },
    }
}

/// Refinement state of one trend pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TState {
    pub bounds: ScoreBounds,
    pub next_segment: usize,
    /// Scorer state over the segments already compared exactly.
    pub exact: ScoreState,
    /// Matched grouping values over the whole domain.
    pub matched: u64,
}

impl TState {
    pub fn is_final(&self, segments: usize) -> bool {
        self.next_segment >= segments
    }
}

fn check_aligned(sa: &SegAgg, sb: &SegAgg) -> Result<(), ExecError> {
    if sa.cuts != sb.cuts {
        return Err(ExecError::SegmentMismatch(
            "trends were segmented over different domains".into(),
        ));
    }
    Ok(())
}

fn segment_matched(sa: &SegAgg, sb: &SegAgg, i: usize) -> u64 {
    sa.bitmap.and_count(&sb.bitmap, sa.cuts[i], sa.cuts[i + 1])
}

/// Bounds from the exact prefix and the summaries of segments `from..`.
fn combine(sa: &SegAgg, sb: &SegAgg, from: usize, exact: &ScoreState, matched: u64, scorer: ScorerSpec) -> ScoreBounds {
    let rest = (from..sa.segments.len()).map(|i| {
        segment_pair_bounds(&sa.segments[i], &sb.segments[i], segment_matched(sa, sb, i), scorer)
    });
    match scorer.agg {
        ScoreAgg::Sum | ScoreAgg::Avg => {
            let (mut lo, mut hi) = (exact.acc, exact.acc);
            for b in rest {
                lo += b.lower;
                hi += b.upper;
            }
            if scorer.agg == ScoreAgg::Avg {
                lo /= matched as f64;
                hi /= matched as f64;
            }
            ScoreBounds { lower: lo, upper: hi }
        }
        ScoreAgg::Min => rest.fold(
            ScoreBounds {
                lower: exact.acc,
                upper: exact.acc,
            },
            |acc, b| ScoreBounds {
                lower: acc.lower.min(b.lower),
                upper: acc.upper.min(b.upper),
            },
        ),
        ScoreAgg::Max => rest.fold(
            ScoreBounds {
                lower: exact.acc,
                upper: exact.acc,
            },
            |acc, b| ScoreBounds {
                lower: acc.lower.max(b.lower),
                upper: acc.upper.max(b.upper),
            },
        ),
    }
}

/// Bounds over all segments; `None` when the trends share no grouping
/// value.
pub fn pair_bounds(sa: &SegAgg, sb: &SegAgg, scorer: ScorerSpec) -> Result<Option<ScoreBounds>, ExecError> {
    Ok(initial_state(sa, sb, scorer)?.map(|s| s.bounds))
}

pub fn initial_state(sa: &SegAgg, sb: &SegAgg, scorer: ScorerSpec) -> Result<Option<TState>, ExecError> {
    check_aligned(sa, sb)?;
    let n = sa.cuts.len() - 1;
    let matched = sa.bitmap.and_count(&sb.bitmap, 0, sa.cuts[n]);
    if matched == 0 {
        return Ok(None);
    }
    let exact = DiffScorer(scorer).init();
    Ok(Some(TState {
        bounds: combine(sa, sb, 0, &exact, matched, scorer),
        next_segment: 0,
        exact,
        matched,
    }))
}

/// Compares segment `state.next_segment` exactly and tightens the bounds.
/// Returns the number of matched tuples compared.
pub fn refine(state: &mut TState, a: &Trend, b: &Trend, sa: &SegAgg, sb: &SegAgg, scorer: ScorerSpec) -> u64 {
    let s = state.next_segment;
    let n = sa.segments.len();
    debug_assert!(s < n);
    let ds = DiffScorer(scorer);
    let pa = &a.points[sa.starts[s]..sa.starts[s + 1]];
    let pb = &b.points[sb.starts[s]..sb.starts[s + 1]];
    let before = state.exact.count;
    let (mut i, mut j) = (0, 0);
    while i < pa.len() && j < pb.len() {
        match pa[i].0.cmp(&pb[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                ds.accumulate(&mut state.exact, pa[i].1, pb[j].1);
                i += 1;
                j += 1;
            }
        }
    }
    state.next_segment += 1;
    if state.next_segment == n {
        let v = ds.finish(&state.exact);
        state.bounds = ScoreBounds { lower: v, upper: v };
    } else {
        let next = combine(sa, sb, state.next_segment, &state.exact, state.matched, scorer);
        state.bounds = ScoreBounds {
            lower: state.bounds.lower.max(next.lower),
            upper: state.bounds.upper.min(next.upper),
        };
    }
    state.exact.count - before
}
