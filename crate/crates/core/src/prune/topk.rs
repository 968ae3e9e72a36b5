use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeSet, BinaryHeap};

use rayon::prelude::*;

use crate::error::ExecError;
use crate::exec::{Counters, PairScore, Trend};
use crate::qlang::{Direction, ScoreAgg, ScorerSpec};

use super::bounds::{build_segagg, initial_state, refine, segment_count, SegAgg, Segmentation, TState};

/// Candidate pairs of one GMPair.
#[derive(Clone, Debug)]
pub struct PruneGroup<'a> {
    pub gm: usize,
    pub left: &'a [Trend],
    /// Same slice as `left` for symmetric Compares.
    pub right: &'a [Trend],
    pub pairs: Vec<(u32, u32)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PruneMode {
    /// Prune once on the initial bounds, then score every survivor.
    BoundsOnly,
    /// Refine the most promising pair one segment at a time.
    EarlyTermination,
}

/// f64 with a total order and a single zero.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Tot(f64);

impl Tot {
    fn new(v: f64) -> Self {
        Tot(if v == 0.0 { 0.0 } else { v })
    }
}

impl Eq for Tot {}

impl PartialOrd for Tot {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Tot {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

struct Entry {
    group: usize,
    left: u32,
    right: u32,
    identity: (u32, u32, usize),
    state: TState,
    slack: f64,
    /// Bounds in ranking space: larger is better in both directions.
    lo: f64,
    hi: f64,
}

/// The k largest lower bounds seen so far.
struct TopLower {
    k: usize,
    set: BTreeSet<(Tot, usize)>,
    member: Vec<bool>,
}

impl TopLower {
    fn new(k: usize, n: usize) -> Self {
        TopLower {
            k,
            set: BTreeSet::new(),
            member: vec![false; n],
        }
    }

    fn offer(&mut self, idx: usize, old: Option<f64>, new: f64) {
        if self.member[idx] {
            if let Some(old) = old {
                self.set.remove(&(Tot::new(old), idx));
            }
            self.set.insert((Tot::new(new), idx));
            return;
        }
        if self.set.len() < self.k {
            self.set.insert((Tot::new(new), idx));
            self.member[idx] = true;
        } else if let Some(&(min, evicted)) = self.set.first() {
            if Tot::new(new) > min {
                self.set.pop_first();
                self.member[evicted] = false;
                self.set.insert((Tot::new(new), idx));
                self.member[idx] = true;
            }
        }
    }

    fn threshold(&self) -> f64 {
        if self.set.len() < self.k {
            f64::NEG_INFINITY
        } else {
            self.set.first().map_or(f64::NEG_INFINITY, |&(t, _)| t.0)
        }
    }
}

/// Rounding allowance on bound decisions, relative to the largest score
/// the pair could reach.
fn slack(a: &Trend, b: &Trend, matched: u64, scorer: ScorerSpec) -> f64 {
    let base = (2.0 * a.magnitude().max(b.magnitude())).powi(scorer.p as i32);
    let reach = match scorer.agg {
        ScoreAgg::Sum => matched as f64 * base,
        _ => base,
    };
    8.0 * (matched as f64 + 2.0) * (scorer.p as f64 + 1.0) * f64::EPSILON * reach
}

fn view(state: &TState, segments: usize, slack: f64, direction: Direction) -> (f64, f64) {
    let (lo, hi) = if state.is_final(segments) {
        (state.bounds.lower, state.bounds.upper)
    } else {
        ((state.bounds.lower - slack).max(0.0), state.bounds.upper + slack)
    };
    match direction {
        Direction::Desc => (lo, hi),
        Direction::Asc => (-hi, -lo),
    }
}

struct GroupSegs {
    segments: usize,
    left: Vec<SegAgg>,
    /// Empty for symmetric groups, which reuse `left`.
    right: Vec<SegAgg>,
}

impl GroupSegs {
    fn right(&self) -> &[SegAgg] {
        if self.right.is_empty() {
            &self.left
        } else {
            &self.right
        }
    }
}

fn segment_group(g: &PruneGroup, counters: &mut Counters) -> Result<GroupSegs, ExecError> {
    let symmetric = std::ptr::eq(g.left, g.right);
    let sides: Vec<&[Trend]> = if symmetric { vec![g.left] } else { vec![g.left, g.right] };
    let mut domain: Vec<u64> = sides
        .iter()
        .flat_map(|s| s.iter().flat_map(|t| t.points.iter().map(|p| p.0)))
        .collect();
    domain.sort_unstable();
    domain.dedup();
    let mut sizes: Vec<usize> = sides.iter().flat_map(|s| s.iter().map(Trend::len)).collect();
    sizes.sort_unstable();
    let median = sizes.get(sizes.len() / 2).copied().unwrap_or(0);
    let seg = Segmentation::new(domain, segment_count(median));
    let build = |ts: &[Trend]| -> Result<Vec<SegAgg>, ExecError> {
        ts.par_iter().map(|t| build_segagg(t, &seg)).collect()
    };
    let left = build(g.left)?;
    let right = if symmetric { Vec::new() } else { build(g.right)? };
    counters.segments_built += ((left.len() + right.len()) * seg.segments()) as u64;
    Ok(GroupSegs {
        segments: seg.segments(),
        left,
        right,
    })
}

/// Rank of every trend key of one side across all groups.
fn side_ranks<'a>(lists: impl Iterator<Item = &'a [Trend]> + Clone) -> Vec<Vec<u32>> {
    let mut keys: Vec<&[u64]> = lists.clone().flat_map(|l| l.iter().map(|t| &*t.key)).collect();
    keys.sort_unstable();
    keys.dedup();
    lists
        .map(|l| {
            l.iter()
                .map(|t| keys.binary_search(&&*t.key).expect("key was collected") as u32)
                .collect()
        })
        .collect()
}

/// Top-k trend pairs by a DIFF scorer using segment bounds. Returns the
/// surviving pairs of each group with exact scores; in early-termination
/// mode these are exactly the top k, in bounds-only mode a superset that
/// the caller still ranks.
pub fn prune_topk(
    groups: &[PruneGroup],
    scorer: ScorerSpec,
    k: usize,
    direction: Direction,
    mode: PruneMode,
    counters: &mut Counters,
) -> Result<Vec<Vec<PairScore>>, ExecError> {
    let mut out: Vec<Vec<PairScore>> = vec![Vec::new(); groups.len()];
    if k == 0 {
        return Ok(out);
    }
    let segs: Vec<GroupSegs> = groups
        .iter()
        .map(|g| segment_group(g, counters))
        .collect::<Result<_, _>>()?;
    let left_ranks = side_ranks(groups.iter().map(|g| g.left));
    let right_ranks = side_ranks(groups.iter().map(|g| g.right));

    let mut entries: Vec<Entry> = Vec::new();
    for (gi, g) in groups.iter().enumerate() {
        let s = &segs[gi];
        let states: Vec<Option<(TState, f64)>> = g
            .pairs
            .par_iter()
            .map(|&(i, j)| {
                let (i, j) = (i as usize, j as usize);
                let st = initial_state(&s.left[i], &s.right()[j], scorer)?;
                Ok(st.map(|st| (st, slack(&g.left[i], &g.right[j], st.matched, scorer))))
            })
            .collect::<Result<_, ExecError>>()?;
        for (&(i, j), st) in g.pairs.iter().zip(states) {
            if let Some((state, slack)) = st {
                let (lo, hi) = view(&state, s.segments, slack, direction);
                entries.push(Entry {
                    group: gi,
                    left: i,
                    right: j,
                    identity: (left_ranks[gi][i as usize], right_ranks[gi][j as usize], g.gm),
                    state,
                    slack,
                    lo,
                    hi,
                });
            }
        }
    }
    counters.pair_states += entries.len() as u64;

    let mut top = TopLower::new(k, entries.len());
    for (idx, e) in entries.iter().enumerate() {
        top.offer(idx, None, e.lo);
    }
    let tau = top.threshold();
    let alive: Vec<usize> = (0..entries.len()).filter(|&i| entries[i].hi >= tau).collect();
    let pruned_initial = (entries.len() - alive.len()) as u64;
    counters.pairs_pruned_initial += pruned_initial;
    counters.pairs_pruned += pruned_initial;

    let refine_step = |e: &mut Entry, counters: &mut Counters| {
        let g = &groups[e.group];
        let s = &segs[e.group];
        let (i, j) = (e.left as usize, e.right as usize);
        counters.tuple_comparisons += refine(&mut e.state, &g.left[i], &g.right[j], &s.left[i], &s.right()[j], scorer);
        counters.segments_refined += 1;
        let (lo, hi) = view(&e.state, s.segments, e.slack, direction);
        if e.state.is_final(s.segments) {
            counters.pairs_fully_refined += 1;
            counters.pairs_scored += 1;
            e.lo = lo;
            e.hi = hi;
        } else {
            e.lo = e.lo.max(lo);
            e.hi = e.hi.min(hi);
        }
    };
    let finish = |e: &mut Entry, counters: &mut Counters| {
        while !e.state.is_final(segs[e.group].segments) {
            refine_step(e, counters);
        }
    };

    let mut confirmed: Vec<usize> = Vec::new();
    match mode {
        PruneMode::BoundsOnly => {
            for &idx in &alive {
                finish(&mut entries[idx], counters);
                confirmed.push(idx);
            }
        }
        PruneMode::EarlyTermination => {
            let mut heap: BinaryHeap<(Tot, Reverse<(u32, u32, usize)>, usize)> = alive
                .iter()
                .map(|&i| (Tot::new(entries[i].hi), Reverse(entries[i].identity), i))
                .collect();
            while confirmed.len() < k {
                if confirmed.len() + heap.len() <= k {
                    let mut rest: Vec<usize> = heap.drain().map(|h| h.2).collect();
                    rest.sort_unstable();
                    for idx in rest {
                        finish(&mut entries[idx], counters);
                        confirmed.push(idx);
                    }
                    break;
                }
                let Some((_, _, idx)) = heap.pop() else { break };
                if entries[idx].hi < top.threshold() {
                    counters.pairs_pruned_refinement += 1;
                    counters.pairs_pruned += 1;
                    break;
                }
                let e = &mut entries[idx];
                if e.state.is_final(segs[e.group].segments) {
                    confirmed.push(idx);
                    continue;
                }
                let old = e.lo;
                refine_step(e, counters);
                let (lo, hi, id) = (e.lo, e.hi, e.identity);
                top.offer(idx, Some(old), lo);
                heap.push((Tot::new(hi), Reverse(id), idx));
            }
            counters.pairs_pruned_refinement += heap.len() as u64;
            counters.pairs_pruned += heap.len() as u64;
        }
    }

    for idx in confirmed {
        let e = &entries[idx];
        out[e.group].push(PairScore {
            left: e.left,
            right: e.right,
            score: e.state.bounds.lower,
        });
    }
    Ok(out)
}
