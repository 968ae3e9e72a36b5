use crate::qlang::{ScoreAgg, ScorerSpec};

use super::trend::Trend;

/// Running state of a scorer over the matched points of one pair.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ScoreState {
    pub acc: f64,
    pub count: u64,
}

/// Reduces the aligned measure values of two trends to one score.
///
/// `finish` is only called with at least one accumulated point; pairs with
/// no matched grouping value are dropped by the caller.
pub trait Scorer: Send + Sync {
    fn init(&self) -> ScoreState {
        ScoreState::default()
    }
    fn accumulate(&self, state: &mut ScoreState, m1: f64, m2: f64);
    fn finish(&self, state: &ScoreState) -> f64;
    /// The DIFF parameters when the scorer is one of the built-ins, which
    /// makes it eligible for bound-based pruning.
    fn diff_spec(&self) -> Option<ScorerSpec> {
        None
    }
}

/// `|m1 - m2|^p`
pub fn diff(m1: f64, m2: f64, p: u32) -> f64 {
    (m1 - m2).abs().powi(p as i32)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiffScorer(pub ScorerSpec);

impl Scorer for DiffScorer {
    fn init(&self) -> ScoreState {
        let acc = match self.0.agg {
            ScoreAgg::Min => f64::INFINITY,
            ScoreAgg::Max => f64::NEG_INFINITY,
            ScoreAgg::Sum | ScoreAgg::Avg => 0.0,
        };
        ScoreState { acc, count: 0 }
    }

    fn accumulate(&self, state: &mut ScoreState, m1: f64, m2: f64) {
        let d = diff(m1, m2, self.0.p);
        state.count += 1;
        match self.0.agg {
            ScoreAgg::Sum | ScoreAgg::Avg => state.acc += d,
            ScoreAgg::Min => state.acc = state.acc.min(d),
            ScoreAgg::Max => state.acc = state.acc.max(d),
        }
    }

    fn finish(&self, state: &ScoreState) -> f64 {
        match self.0.agg {
            ScoreAgg::Avg => state.acc / state.count as f64,
            _ => state.acc,
        }
    }

    fn diff_spec(&self) -> Option<ScorerSpec> {
        Some(self.0)
    }
}

/// Merge-join of two trends on grouping value. Returns the score and the
/// matched point count; the score is `None` when nothing matched.
pub fn score_pair(a: &Trend, b: &Trend, scorer: &dyn Scorer) -> (Option<f64>, u64) {
    let mut state = scorer.init();
    let (mut i, mut j) = (0, 0);
    while i < a.points.len() && j < b.points.len() {
        let (ga, ma) = a.points[i];
        let (gb, mb) = b.points[j];
        match ga.cmp(&gb) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                scorer.accumulate(&mut state, ma, mb);
                i += 1;
                j += 1;
            }
        }
    }
    let matched = state.count;
    if matched == 0 {
        (None, 0)
    } else {
        (Some(scorer.finish(&state)), matched)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trend(points: &[(u64, f64)]) -> Trend {
        Trend {
            key: Box::new([0]),
            points: points.to_vec(),
        }
    }

    fn scorer(agg: ScoreAgg, p: u32) -> DiffScorer {
        DiffScorer(ScorerSpec { agg, p })
    }

    #[test]
    fn diff_values() {
        assert_eq!(diff(4.5, 4.5, 3), 0.0);
        assert_eq!(diff(10.0, 30.0, 2), 400.0);
        assert_eq!(diff(3.0, 1.0, 3), 8.0);
    }

    #[test]
    fn identical_trends_score_zero() {
        let t = trend(&[(1, 3.0), (2, -7.5), (5, 2.0)]);
        assert_eq!(score_pair(&t, &t, &scorer(ScoreAgg::Sum, 2)), (Some(0.0), 3));
    }

    #[test]
    fn only_matching_groups_count() {
        let a = trend(&[(1, 0.0), (2, 3.0)]);
        let b = trend(&[(2, 7.0), (3, 9.0)]);
        assert_eq!(score_pair(&a, &b, &scorer(ScoreAgg::Sum, 1)), (Some(4.0), 1));
        let c = trend(&[(4, 1.0)]);
        assert_eq!(score_pair(&a, &c, &scorer(ScoreAgg::Sum, 1)), (None, 0));
    }

    #[test]
    fn aggregates() {
        let a = trend(&[(1, 0.0), (2, 0.0), (3, 0.0)]);
        let b = trend(&[(1, 1.0), (2, 3.0), (3, -2.0)]);
        let s = |agg| score_pair(&a, &b, &scorer(agg, 2)).0.unwrap();
        assert_eq!(s(ScoreAgg::Sum), 14.0);
        assert_eq!(s(ScoreAgg::Avg), 14.0 / 3.0);
        assert_eq!(s(ScoreAgg::Min), 1.0);
        assert_eq!(s(ScoreAgg::Max), 9.0);
    }
}
