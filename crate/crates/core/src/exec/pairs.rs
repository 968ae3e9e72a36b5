use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;

use crate::qlang::CompareSpec;

use super::scorer::{score_pair, ScoreState, Scorer};
use super::trend::Trend;
use super::Counters;

/// Which trend pairs a Compare scores.
#[derive(Clone, Debug)]
pub struct PairRules {
    /// Both sides hold the same trends; pairs are unordered, `i < j`.
    pub symmetric: bool,
    /// For each left conjunct, the right conjunct on the same attribute,
    /// when both sides constrain the same attribute set. Pairs whose keys
    /// agree under this mapping are the same trend and are skipped.
    pub same_assignment: Option<Vec<usize>>,
}

impl PairRules {
    pub fn new(spec: &CompareSpec) -> Self {
        let l = &spec.left.constraint.conjuncts;
        let r = &spec.right.constraint.conjuncts;
        let same_assignment = if l.len() == r.len() {
            l.iter()
                .map(|c| {
                    r.iter()
                        .position(|d| d.attribute.eq_ignore_ascii_case(&c.attribute))
                })
                .collect::<Option<Vec<_>>>()
                .filter(|perm| {
                    let mut seen = perm.clone();
                    seen.sort_unstable();
                    seen.dedup();
                    seen.len() == perm.len()
                })
        } else {
            None
        };
        PairRules {
            symmetric: spec.symmetric(),
            same_assignment,
        }
    }

    pub fn excluded(&self, left: &Trend, right: &Trend) -> bool {
        match &self.same_assignment {
            Some(perm) => perm.iter().enumerate().all(|(i, &j)| left.key[i] == right.key[j]),
            None => false,
        }
    }
}

/// Candidate pairs as `(left index, right index)`, ascending. For symmetric
/// rules `right` is ignored and pairs come from `left` alone.
pub fn enumerate_pairs(left: &[Trend], right: &[Trend], rules: &PairRules) -> Vec<(u32, u32)> {
    let mut out = Vec::new();
    if rules.symmetric {
        for i in 0..left.len() {
            for j in i + 1..left.len() {
                out.push((i as u32, j as u32));
            }
        }
    } else {
        for (i, a) in left.iter().enumerate() {
            for (j, b) in right.iter().enumerate() {
                if !rules.excluded(a, b) {
                    out.push((i as u32, j as u32));
                }
            }
        }
    }
    out
}

/// A scored pair of trend indices.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairScore {
    pub left: u32,
    pub right: u32,
    pub score: f64,
}

/// Scores each pair by its own merge join, in parallel. Pairs without any
/// matched grouping value are dropped. Output keeps input order. For
/// symmetric rules pass the same list as both sides.
pub fn score_trendwise(
    left: &[Trend],
    right: &[Trend],
    pairs: &[(u32, u32)],
    scorer: &dyn Scorer,
    counters: &mut Counters,
) -> Vec<PairScore> {
    let scored: Vec<(Option<f64>, u64)> = pairs
        .par_iter()
        .map(|&(i, j)| score_pair(&left[i as usize], &right[j as usize], scorer))
        .collect();
    let mut out = Vec::with_capacity(pairs.len());
    for (&(i, j), (score, matched)) in pairs.iter().zip(scored) {
        counters.tuple_comparisons += matched;
        if let Some(score) = score {
            out.push(PairScore {
                left: i,
                right: j,
                score,
            });
        }
    }
    counters.pairs_scored += out.len() as u64;
    out
}

const DENSE_LIMIT: usize = 1 << 22;

enum States {
    Dense { width: usize, cells: Vec<ScoreState> },
    Sparse(HashMap<u64, ScoreState>),
}

impl States {
    fn get(&mut self, i: u32, j: u32, init: ScoreState) -> &mut ScoreState {
        match self {
            States::Dense { width, cells } => &mut cells[i as usize * *width + j as usize],
            States::Sparse(map) => map.entry(((i as u64) << 32) | j as u64).or_insert(init),
        }
    }
}

/// Basic execution: one equi-join on grouping value over all trends of
/// both sides, followed by per-pair aggregation of the scorer. The tuple
/// comparison counter charges every bucket quadratically in the number of
/// distinct trends it holds, as a self-join on the grouping value does.
pub fn score_all_pairs(
    left: &[Trend],
    right: &[Trend],
    rules: &PairRules,
    scorer: &dyn Scorer,
    counters: &mut Counters,
) -> Vec<PairScore> {
    let right: &[Trend] = if rules.symmetric { left } else { right };
    let mut buckets: BTreeMap<u64, (Vec<(u32, f64)>, Vec<(u32, f64)>)> = BTreeMap::new();
    for (i, t) in left.iter().enumerate() {
        for &(g, m) in &t.points {
            buckets.entry(g).or_default().0.push((i as u32, m));
        }
    }
    if !rules.symmetric {
        for (j, t) in right.iter().enumerate() {
            for &(g, m) in &t.points {
                buckets.entry(g).or_default().1.push((j as u32, m));
            }
        }
    }

    let init = scorer.init();
    let mut states = if left.len().saturating_mul(right.len()) <= DENSE_LIMIT {
        States::Dense {
            width: right.len(),
            cells: vec![init; left.len() * right.len()],
        }
    } else {
        States::Sparse(HashMap::new())
    };
    for (l, r) in buckets.values() {
        if rules.symmetric {
            counters.tuple_comparisons += (l.len() as u64).pow(2);
            for (a, &(i, m1)) in l.iter().enumerate() {
                for &(j, m2) in &l[a + 1..] {
                    scorer.accumulate(states.get(i, j, init), m1, m2);
                }
            }
        } else {
            let mut same = 0u64;
            for &(i, m1) in l {
                for &(j, m2) in r {
                    if rules.excluded(&left[i as usize], &right[j as usize]) {
                        same += 1;
                        continue;
                    }
                    scorer.accumulate(states.get(i, j, init), m1, m2);
                }
            }
            let distinct = l.len() as u64 + r.len() as u64 - same;
            counters.tuple_comparisons += distinct * distinct;
        }
    }

    let mut out: Vec<PairScore> = match states {
        States::Dense { width, cells } => cells
            .iter()
            .enumerate()
            .filter(|(_, s)| s.count > 0)
            .map(|(idx, s)| PairScore {
                left: (idx / width) as u32,
                right: (idx % width) as u32,
                score: scorer.finish(s),
            })
            .collect(),
        States::Sparse(map) => map
            .iter()
            .filter(|(_, s)| s.count > 0)
            .map(|(&key, s)| PairScore {
                left: (key >> 32) as u32,
                right: key as u32,
                score: scorer.finish(s),
            })
            .collect(),
    };
    out.sort_by_key(|p| (p.left, p.right));
    counters.pairs_scored += out.len() as u64;
    out
}
