//! Net hierarchies and net-trees.
//!
//! After normalizing the data so the minimum inter-point distance is 1,
//! level `S_0` is the whole set and each `S_i` is a greedy `2^i`-net of
//! `S_{i-1}`, built in ascending id order, until a single root remains.
//! Nets are nested, so the hierarchy is stored compressed: each point keeps
//! the highest level it occupies and one parent link to the level above it.

mod candidates;
mod net;
mod verify;

use std::fmt::Write as _;

use crate::error::{invalid, Result};
use crate::metric::dist_unchecked;
use crate::pointset::PointSet;
use crate::scalar::Scalar;

pub use candidates::{build_candidate_sets, descent_depth, CandidateSet, CANDIDATE_RADIUS_FACTOR};
pub use net::greedy_net;
pub use verify::{verify_nets, verify_nets_with, NetCheck, NetReport};

pub type Level = i32;

/// `2^level` as a scalar.
#[inline]
pub fn level_radius<T: Scalar>(level: Level) -> T {
    T::lit(2f64.powi(level))
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetHierarchy<T> {
    /// Database points multiplied by `normalization`.
    points: PointSet<T>,
    normalization: T,
    /// Highest level containing each point.
    top: Vec<Level>,
    /// Parent node (at level `top[x] + 1`); `None` only for the root.
    parent: Vec<Option<usize>>,
    /// Points whose parent is this point, by descending top level then id.
    children: Vec<Vec<usize>>,
    /// `x, parent(x), parent(parent(x)), …, root`.
    chains: Vec<Vec<usize>>,
    root: usize,
    top_level: Level,
}

impl<T: Scalar> NetHierarchy<T> {
    /// Builds the hierarchy. The set is rescaled so its minimum inter-point
    /// distance is 1; the factor is kept in [`normalization`](Self::normalization).
    pub fn build(set: &PointSet<T>) -> Self {
        let n = set.len();
        let (normalization, points) = normalize(set);
        let mut top = vec![0 as Level; n];
        let mut parent = vec![None; n];
        let mut current: Vec<usize> = (0..n).collect();
        let mut level: Level = 0;
        while current.len() > 1 {
            level += 1;
            let (next, owner) = greedy_net(&points, &current, level_radius(level));
            for &x in &next {
                top[x] = level;
            }
            for (&v, &o) in current.iter().zip(&owner) {
                if o != v {
                    parent[v] = Some(o);
                }
            }
            current = next;
        }
        let root = current[0];
        Self::assemble(points, normalization, top, parent, root, level)
    }

    fn assemble(
        points: PointSet<T>,
        normalization: T,
        top: Vec<Level>,
        parent: Vec<Option<usize>>,
        root: usize,
        top_level: Level,
    ) -> Self {
        let n = points.len();
        let mut children = vec![Vec::new(); n];
        for (x, p) in parent.iter().enumerate() {
            if let Some(p) = *p {
                children[p].push(x);
            }
        }
        for list in &mut children {
            list.sort_by(|&a, &b| top[b].cmp(&top[a]).then(a.cmp(&b)));
        }
        let chains = (0..n)
            .map(|x| {
                let mut chain = vec![x];
                let mut cur = x;
                while let Some(p) = parent[cur] {
                    chain.push(p);
                    cur = p;
                }
                chain
            })
            .collect();
        NetHierarchy { points, normalization, top, parent, children, chains, root, top_level }
    }

    /// Reassembles a hierarchy from stored top levels and parent links.
    pub(crate) fn from_parts(
        set: &PointSet<T>,
        normalization: T,
        top: Vec<Level>,
        parent: Vec<Option<usize>>,
    ) -> Result<Self> {
        let n = set.len();
        if top.len() != n || parent.len() != n {
            return Err(invalid("hierarchy arrays do not match the point count"));
        }
        let roots: Vec<usize> = (0..n).filter(|&x| parent[x].is_none()).collect();
        if roots.len() != 1 {
            return Err(invalid(format!("hierarchy must have exactly one root, found {}", roots.len())));
        }
        for (x, p) in parent.iter().enumerate() {
            if let Some(p) = *p {
                if p >= n || top[p] <= top[x] {
                    return Err(invalid(format!("bad parent link {x} -> {p}")));
                }
            }
        }
        let root = roots[0];
        let top_level = top[root];
        Ok(Self::assemble(set.scaled(normalization), normalization, top, parent, root, top_level))
    }

    pub fn len(&self) -> usize {
        self.top.len()
    }

    pub fn is_empty(&self) -> bool {
        self.top.is_empty()
    }

    /// Factor applied to original coordinates; normalized min distance is 1.
    pub fn normalization(&self) -> T {
        self.normalization
    }

    pub fn points(&self) -> &PointSet<T> {
        &self.points
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn bottom_level(&self) -> Level {
        0
    }

    pub fn top_level(&self) -> Level {
        self.top_level
    }

    /// Highest level occupied by point `x`.
    pub fn top_of(&self, x: usize) -> Level {
        self.top[x]
    }

    pub fn parent_of(&self, x: usize) -> Option<usize> {
        self.parent[x]
    }

    pub fn contains(&self, x: usize, level: Level) -> bool {
        level >= 0 && self.top[x] >= level
    }

    /// Ids in `S_level`, ascending.
    pub fn level_members(&self, level: Level) -> Vec<usize> {
        (0..self.len()).filter(|&x| self.contains(x, level)).collect()
    }

    /// Nodes of `S_{level-1}` whose parent node in `S_level` is `z`: `z`
    /// itself plus the points that first drop out below `level`.
    pub fn children_at(&self, z: usize, level: Level) -> impl Iterator<Item = usize> + '_ {
        debug_assert!(self.contains(z, level));
        std::iter::once(z).chain(self.children[z].iter().copied().filter(move |&x| self.top[x] == level - 1))
    }

    /// Points of `S_k` in the subtree of node `(y, from)`.
    pub fn descendants_at(&self, y: usize, from: Level, k: Level) -> Vec<usize> {
        let mut out = Vec::new();
        self.collect_descendants(y, from, k, &mut out);
        out
    }

    fn collect_descendants(&self, y: usize, from: Level, k: Level, out: &mut Vec<usize>) {
        out.push(y);
        for &x in &self.children[y] {
            let t = self.top[x];
            if t < k {
                break;
            }
            if t < from {
                self.collect_descendants(x, t, k, out);
            }
        }
    }

    /// Ancestor of database point `x` in `S_level`; its distance to `x` is
    /// below `2·2^level` in normalized units.
    pub fn level_ancestor(&self, x: usize, level: Level) -> Result<usize> {
        if x >= self.len() {
            return Err(invalid(format!("point id {x} out of range")));
        }
        if level < 0 || level > self.top_level {
            return Err(invalid(format!("level {level} outside [0, {}]", self.top_level)));
        }
        let chain = &self.chains[x];
        let at = chain.partition_point(|&a| self.top[a] < level);
        let anc = chain[at];
        assert!(
            level == 0 || self.dist(x, anc) < T::lit(2.0) * level_radius(level),
            "ancestor bound violated for point {x} at level {level}"
        );
        Ok(anc)
    }

    /// Normalized distance between two stored points.
    #[inline]
    pub fn dist(&self, a: usize, b: usize) -> T {
        self.points.dist(a, b)
    }

    /// Normalized distance from a stored point to a normalized query.
    #[inline]
    pub fn dist_to(&self, a: usize, q_normalized: &[T]) -> T {
        dist_unchecked(self.points.point(a), q_normalized, self.points.norm())
    }

    /// Maps a query from original to normalized coordinates.
    pub fn normalize_query(&self, q: &[T]) -> Vec<T> {
        q.iter().map(|&x| x * self.normalization).collect()
    }

    /// Human-readable dump, one section per level, top to bottom.
    pub fn debug_dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "normalization {}", self.normalization);
        for level in (0..=self.top_level).rev() {
            let members = self.level_members(level);
            let _ = writeln!(out, "[level {level}] radius {} size {}", 2f64.powi(level), members.len());
            for x in members {
                let parent = if level == self.top_level {
                    "-".to_string()
                } else if self.top[x] > level {
                    x.to_string()
                } else {
                    self.parent[x].map_or("-".into(), |p| p.to_string())
                };
                let _ = writeln!(out, "  {x} <- parent {parent}");
            }
        }
        out
    }

    /// Redirects one parent link without any checking; for fault-injection
    /// tests of [`verify_nets`].
    #[doc(hidden)]
    pub fn corrupt_parent(&mut self, x: usize, new_parent: usize) {
        self.parent[x] = Some(new_parent);
        let (points, normalization, top, parent, root, top_level) =
            (self.points.clone(), self.normalization, self.top.clone(), self.parent.clone(), self.root, self.top_level);
        *self = Self::assemble(points, normalization, top, parent, root, top_level);
    }
}

/// Scales the set so its minimum distance is at least 1 after rounding.
fn normalize<T: Scalar>(set: &PointSet<T>) -> (T, PointSet<T>) {
    if set.len() < 2 {
        return (T::one(), set.clone());
    }
    let mut factor = min_distance(set).recip();
    loop {
        let points = set.scaled(factor);
        let m = min_distance(&points);
        if m >= T::one() {
            return (factor, points);
        }
        factor = factor * (T::one() + T::lit(4.0) * T::epsilon()) / m;
    }
}

fn min_distance<T: Scalar>(set: &PointSet<T>) -> T {
    use rayon::prelude::*;
    let n = set.len();
    (0..n)
        .into_par_iter()
        .map(|i| (i + 1..n).map(|j| set.dist(i, j)).fold(T::infinity(), T::min))
        .reduce(T::infinity, T::min)
}
