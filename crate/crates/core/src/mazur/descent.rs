use serde::{Deserialize, Serialize};

use super::bnn::BnnOutcome;
use super::index::AnnIndex;
use crate::error::{invalid, Result};
use crate::hierarchy::{level_radius, Level};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationCase {
    /// The query is beyond `3·2^top` of the root; the root is returned.
    RootFar,
    /// The descent reached level 0 and consulted the radius-6 oracle.
    BottomHit,
    /// A node oracle answered null; the current point of interest is returned.
    NullStop,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum StepOutcome {
    /// Oracle answered `answer`; its ancestor `next` on the level below
    /// becomes the point of interest, at normalized distance `next_dist`.
    Hit {
        answer: usize,
        next: usize,
        next_dist: f64,
    },
    Null,
    /// Every replica found a point that failed the `c/9` check.
    Rejected,
    OutsideBall,
}

/// One level of a descent. Distances are in normalized units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DescentStep {
    pub level: Level,
    pub node: usize,
    pub dist: f64,
    /// `3·2^level`.
    pub bound: f64,
    pub outcome: StepOutcome,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DescentTrace {
    pub steps: Vec<DescentStep>,
    pub case: TerminationCase,
    /// The answer is within this factor of the optimum whenever the oracles
    /// along the path behaved as promised.
    pub certified_factor: f64,
    pub answer: usize,
    /// Levels where every replica rejected its backend answer.
    pub rejections: usize,
}

impl DescentTrace {
    /// Records violating `d(t, q) ≤ 3·2^i`, or a hit step whose next point of
    /// interest breaks `3·2^{i-1}`.
    pub fn violations(&self) -> Vec<DescentStep> {
        self.steps
            .iter()
            .filter(|s| {
                s.dist > s.bound || matches!(s.outcome, StepOutcome::Hit { next_dist, .. } if next_dist > s.bound / 2.0)
            })
            .copied()
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnnAnswer<T> {
    pub id: usize,
    /// ℓ_p distance in original units.
    pub dist: T,
    pub trace: DescentTrace,
}

/// Starting point of interest. With no hint this is the root at the top
/// level. A hint `q'` (any database point, e.g. from a coarse search) at
/// distance `D` gives level `⌈log₂ D⌉` and the ancestor of `q'` there.
pub fn coarse_start<T: Scalar>(index: &AnnIndex<T>, q: &[T], hint: Option<usize>) -> Result<(usize, Level)> {
    index.set.check_query(q)?;
    let h = &index.hierarchy;
    let top = (h.root(), h.top_level());
    let Some(hint) = hint else { return Ok(top) };
    if hint >= h.len() {
        return Err(invalid(format!("hint id {hint} out of range")));
    }
    let dist = h.dist_to(hint, &h.normalize_query(q)).as_f64();
    let level = if dist > 0.0 { dist.log2().ceil().max(0.0) } else { 0.0 };
    if level >= h.top_level() as f64 {
        return Ok(top);
    }
    let level = level as Level;
    Ok((h.level_ancestor(hint, level)?, level))
}

/// Descent from the root.
pub fn query_ann<T: Scalar>(index: &AnnIndex<T>, q: &[T]) -> Result<AnnAnswer<T>> {
    index.query_from(q, None)
}

impl<T: Scalar> AnnIndex<T> {
    pub fn query(&self, q: &[T]) -> Result<AnnAnswer<T>> {
        self.query_from(q, None)
    }

    /// Descent from `start`, or from the root when `None`. A start below the
    /// top level must satisfy `d(t, q) ≤ 3·2^i`.
    pub fn query_from(&self, q: &[T], start: Option<(usize, Level)>) -> Result<AnnAnswer<T>> {
        self.set.check_query(q)?;
        let h = &self.hierarchy;
        let qn = h.normalize_query(q);
        let (mut t, mut level) = start.unwrap_or((h.root(), h.top_level()));
        if !h.contains(t, level) || level > h.top_level() {
            return Err(invalid(format!("node {t} does not occupy level {level}")));
        }
        let mut dist = h.dist_to(t, &qn).as_f64();
        let bound_at = |i: Level| 3.0 * level_radius::<f64>(i);
        if dist > bound_at(level) {
            if level == h.top_level() {
                let trace = DescentTrace {
                    steps: Vec::new(),
                    case: TerminationCase::RootFar,
                    certified_factor: 3.0,
                    answer: h.root(),
                    rejections: 0,
                };
                return Ok(self.answer(q, trace));
            }
            return Err(invalid(format!("start ({t}, {level}) is {dist} from the query, above 3·2^{level}")));
        }
        let mut steps = Vec::new();
        let mut rejections = 0;
        loop {
            if level == 0 {
                let outcome = self.bottom[t].query_unchecked(q);
                let (answer, factor) = match outcome {
                    BnnOutcome::Hit { id, .. } => (id, 2.0),
                    _ => (t, self.c / 2.0),
                };
                let outcome = match outcome {
                    BnnOutcome::Hit { id, .. } => {
                        StepOutcome::Hit { answer: id, next: id, next_dist: h.dist_to(id, &qn).as_f64() }
                    }
                    other => step_outcome(other),
                };
                steps.push(DescentStep { level, node: t, dist, bound: bound_at(level), outcome });
                let trace = DescentTrace {
                    steps,
                    case: TerminationCase::BottomHit,
                    certified_factor: factor,
                    answer,
                    rejections,
                };
                return Ok(self.answer(q, trace));
            }
            let replicas = self.oracles.get(&(t, level)).map(Vec::as_slice).unwrap_or(&[]);
            let mut outcome = BnnOutcome::Null;
            let mut all_rejected = !replicas.is_empty();
            for o in replicas {
                outcome = o.query_unchecked(q);
                all_rejected &= outcome == BnnOutcome::Rejected;
                if outcome.hit().is_some() {
                    break;
                }
            }
            match outcome {
                BnnOutcome::Hit { id, .. } => {
                    let next = h.level_ancestor(id, level - 1)?;
                    let next_dist = h.dist_to(next, &qn).as_f64();
                    steps.push(DescentStep {
                        level,
                        node: t,
                        dist,
                        bound: bound_at(level),
                        outcome: StepOutcome::Hit { answer: id, next, next_dist },
                    });
                    t = next;
                    dist = next_dist;
                    level -= 1;
                }
                other => {
                    if all_rejected {
                        rejections += 1;
                    }
                    steps.push(DescentStep {
                        level,
                        node: t,
                        dist,
                        bound: bound_at(level),
                        outcome: step_outcome(other),
                    });
                    let trace = DescentTrace {
                        steps,
                        case: TerminationCase::NullStop,
                        certified_factor: 6.0 * self.c,
                        answer: t,
                        rejections,
                    };
                    return Ok(self.answer(q, trace));
                }
            }
        }
    }

    fn answer(&self, q: &[T], trace: DescentTrace) -> AnnAnswer<T> {
        AnnAnswer { id: trace.answer, dist: self.set.dist_to(trace.answer, q), trace }
    }
}

fn step_outcome<T>(o: BnnOutcome<T>) -> StepOutcome {
    match o {
        BnnOutcome::Rejected => StepOutcome::Rejected,
        BnnOutcome::OutsideBall => StepOutcome::OutsideBall,
        _ => StepOutcome::Null,
    }
}

/// `(1+ε)`-approximate answer from a certified one. The optimum is at least
/// `t0.dist / factor`, so a pruned descent of the net-tree from the root
/// (keeping nodes within `best + 2·2^j` of the query) can stop on the level
/// where `2·2^j ≤ ε·opt_lb`; the best point seen is then within `(1+ε)` of
/// the optimum.
pub fn refine_ann<T: Scalar>(index: &AnnIndex<T>, q: &[T], t0: &AnnAnswer<T>, eps: f64) -> Result<(usize, T)> {
    if !(eps > 0.0) || eps.is_nan() {
        return Err(invalid(format!("eps must be positive, got {eps}")));
    }
    index.set.check_query(q)?;
    let factor = t0.trace.certified_factor;
    if t0.dist == T::zero() || eps >= factor - 1.0 {
        return Ok((t0.id, t0.dist));
    }
    let h = &index.hierarchy;
    let qn = h.normalize_query(q);
    let opt_lb = h.dist_to(t0.id, &qn).as_f64() / factor;
    let stop = ((eps * opt_lb / 2.0).log2().floor() as Level).max(0);
    let mut best = (t0.id, h.dist_to(t0.id, &qn).as_f64());
    let consider = |best: &mut (usize, f64), x: usize, d: f64| {
        if d < best.1 || (d == best.1 && x < best.0) {
            *best = (x, d);
        }
    };
    let mut frontier = vec![h.root()];
    consider(&mut best, h.root(), h.dist_to(h.root(), &qn).as_f64());
    let mut level = h.top_level();
    while level > stop {
        let mut next: Vec<(usize, f64)> =
            frontier.iter().flat_map(|&z| h.children_at(z, level)).map(|x| (x, h.dist_to(x, &qn).as_f64())).collect();
        next.iter().for_each(|&(x, d)| consider(&mut best, x, d));
        level -= 1;
        let keep = best.1 + 2.0 * level_radius::<f64>(level);
        next.retain(|&(_, d)| d <= keep);
        frontier = next.into_iter().map(|(x, _)| x).collect();
    }
    Ok((best.0, index.set.dist_to(best.0, q)))
}
