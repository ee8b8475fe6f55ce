//! ℓ_p near-neighbor search through a randomized embedding into ℓ∞.
//!
//! Points are mapped by `v ↦ (b·v_i·Z_i)_i` with i.i.d. Fréchet `Z_i`, and
//! near-neighbor queries are answered by an ℓ∞ oracle ([`LinfBackend`]).
//! Two variants: the cardinality variant embeds the whole set with
//! `b = (3 ln n)^{1/p}`; the doubling-dimension variant first extracts an
//! `r`-net, rescales by `1/r` and embeds with `b = 1`. Every answer is checked
//! in the original ℓ_p metric before it is returned.

mod backend;

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embed::{frechet_scale_b, net_contraction_threshold, FrechetEmbedding};
use crate::error::{invalid, Result};
use crate::hierarchy::greedy_net;
use crate::oracle::nn_unchecked;
use crate::pointset::PointSet;
use crate::reduction::{ann_via_ladder, RadiusLadder};
use crate::scalar::Scalar;
use crate::seed::derive_seed;
use crate::stats::{set_stats, SetStats};

pub use backend::{BackendKind, LinfBackend};

/// ℓ∞ radius used by the doubling-dimension variant.
pub const DDIM_BACKEND_RADIUS: f64 = 4.0;
pub const DEFAULT_AMPLIFICATION: usize = 3;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinfVariant {
    #[default]
    Cardinality,
    Ddim,
}

impl LinfVariant {
    pub fn tag(self) -> u8 {
        match self {
            LinfVariant::Cardinality => 0,
            LinfVariant::Ddim => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0 => Ok(LinfVariant::Cardinality),
            1 => Ok(LinfVariant::Ddim),
            _ => Err(invalid(format!("unknown ℓ∞ variant tag {tag}"))),
        }
    }
}

/// One embedded copy of the data answering near-neighbor queries at radius `r`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinfNearStructure<T> {
    set: Arc<PointSet<T>>,
    variant: LinfVariant,
    embedding: FrechetEmbedding<T>,
    backend: LinfBackend<T>,
    /// Point id of every backend row.
    ids: Vec<usize>,
    r: T,
    /// Multiplier applied to coordinates before embedding: 1, or `1/r` for
    /// the doubling-dimension variant.
    pre_scale: T,
    ddim_est: f64,
    certified: T,
    seed: u64,
}

fn pipeline_p<T: Scalar>(set: &PointSet<T>) -> Result<T> {
    set.norm().above_two()
}

fn check_radius<T: Scalar>(r: T) -> Result<()> {
    if r > T::zero() && r.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("radius must be positive and finite, got {r}")))
    }
}

impl<T: Scalar> LinfNearStructure<T> {
    /// Cardinality variant: `b = frechet_scale_b(n, p)`, backend radius `2b·r`.
    pub fn cardinality(set: Arc<PointSet<T>>, r: T, backend: BackendKind, seed: u64) -> Result<Self> {
        let p = pipeline_p(&set)?;
        check_radius(r)?;
        let b = T::lit(frechet_scale_b(set.len().max(2), p.as_f64())?);
        let ids: Vec<usize> = (0..set.len()).collect();
        let embedding = FrechetEmbedding::new(set.dim(), p, b, seed)?;
        let data = embed_rows(&set, &embedding, &ids, T::one());
        Self::assemble(set, LinfVariant::Cardinality, embedding, data, ids, r, backend, 0.0, seed)
    }

    /// Doubling-dimension variant: greedy `r`-net, rescaled by `1/r`, `b = 1`,
    /// backend radius 4. `ddim_est` sets the certified distance bound.
    pub fn ddim(set: Arc<PointSet<T>>, r: T, backend: BackendKind, seed: u64, ddim_est: f64) -> Result<Self> {
        let p = pipeline_p(&set)?;
        check_radius(r)?;
        let all: Vec<usize> = (0..set.len()).collect();
        let (ids, _) = greedy_net(&set, &all, r);
        let embedding = FrechetEmbedding::new(set.dim(), p, T::one(), seed)?;
        let data = embed_rows(&set, &embedding, &ids, r.recip());
        Self::assemble(set, LinfVariant::Ddim, embedding, data, ids, r, backend, ddim_est, seed)
    }

    #[allow(clippy::too_many_arguments)]
    pub(crate) fn assemble(
        set: Arc<PointSet<T>>,
        variant: LinfVariant,
        embedding: FrechetEmbedding<T>,
        data: Vec<T>,
        ids: Vec<usize>,
        r: T,
        backend: BackendKind,
        ddim_est: f64,
        seed: u64,
    ) -> Result<Self> {
        let b = embedding.b();
        let (pre_scale, radius) = match variant {
            LinfVariant::Cardinality => (T::one(), T::lit(2.0) * b * r),
            LinfVariant::Ddim => (r.recip(), T::lit(DDIM_BACKEND_RADIUS)),
        };
        let backend = LinfBackend::new(backend, data, set.dim(), radius)?;
        let c_b = T::lit(backend.c_backend());
        let certified = match variant {
            LinfVariant::Cardinality => c_b * T::lit(2.0) * b * r,
            LinfVariant::Ddim => {
                let c = (DDIM_BACKEND_RADIUS * backend.c_backend()).max(4.0);
                r * T::lit(net_contraction_threshold(c, ddim_est, embedding.p().as_f64())?)
            }
        };
        Ok(LinfNearStructure { set, variant, embedding, backend, ids, r, pre_scale, ddim_est, certified, seed })
    }

    pub fn variant(&self) -> LinfVariant {
        self.variant
    }

    pub fn embedding(&self) -> &FrechetEmbedding<T> {
        &self.embedding
    }

    pub fn backend(&self) -> &LinfBackend<T> {
        &self.backend
    }

    /// Point ids stored in the backend, in row order.
    pub fn ids(&self) -> &[usize] {
        &self.ids
    }

    pub fn r(&self) -> T {
        self.r
    }

    /// Query radius inside the embedded ℓ∞ space.
    pub fn r_embedded(&self) -> T {
        self.backend.radius()
    }

    /// The `r` the net was extracted at, for the doubling-dimension variant.
    pub fn net_scale(&self) -> Option<T> {
        (self.variant == LinfVariant::Ddim).then_some(self.r)
    }

    pub fn ddim_est(&self) -> f64 {
        self.ddim_est
    }

    /// ℓ_p distance bound that every returned answer satisfies.
    pub fn certified_bound(&self) -> T {
        self.certified
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Embedded image of `q` as the backend sees it.
    pub fn embed_query(&self, q: &[T]) -> Vec<T> {
        let scaled: Vec<T> = q.iter().map(|&x| x * self.pre_scale).collect();
        self.embedding.apply_unchecked(&scaled)
    }

    /// Embeds `q`, asks the backend, and keeps the answer only if its true
    /// ℓ_p distance is within the certified bound.
    pub fn query(&self, q: &[T]) -> Result<Option<(usize, T)>> {
        self.set.check_query(q)?;
        Ok(self.query_unchecked(q))
    }

    pub(crate) fn query_unchecked(&self, q: &[T]) -> Option<(usize, T)> {
        let (row, _) = self.backend.query(&self.embed_query(q))?;
        let id = self.ids[row];
        let dist = self.set.dist_to(id, q);
        (dist <= self.certified).then_some((id, dist))
    }
}

fn embed_rows<T: Scalar>(set: &PointSet<T>, embedding: &FrechetEmbedding<T>, ids: &[usize], pre_scale: T) -> Vec<T> {
    let mut out = Vec::with_capacity(ids.len() * set.dim());
    for &id in ids {
        let v: Vec<T> = set.point(id).iter().map(|&x| x * pre_scale).collect();
        out.extend(embedding.apply_unchecked(&v));
    }
    out
}

/// Cardinality-variant structure at radius `r` over `set`.
pub fn build_linf_near<T: Scalar>(
    set: &PointSet<T>,
    r: T,
    backend: BackendKind,
    seed: u64,
) -> Result<LinfNearStructure<T>> {
    LinfNearStructure::cardinality(Arc::new(set.clone()), r, backend, seed)
}

/// Doubling-dimension-variant structure at radius `r` with the exact backend;
/// the doubling dimension is estimated from the set.
pub fn build_linf_near_ddim<T: Scalar>(set: &PointSet<T>, r: T, seed: u64) -> Result<LinfNearStructure<T>> {
    let ddim = if set.len() >= 2 { set_stats(set)?.ddim_est } else { 1.0 };
    LinfNearStructure::ddim(Arc::new(set.clone()), r, BackendKind::Exact, seed, ddim)
}

pub fn query_linf_near<T: Scalar>(s: &LinfNearStructure<T>, q: &[T]) -> Result<Option<(usize, T)>> {
    s.query(q)
}

/// `multiplier · ⌈log₂ log₂ n / p⌉`, at least 1.
pub fn amplification_count(n: usize, p: f64, multiplier: usize) -> usize {
    let loglog = (n.max(2) as f64).log2().log2().max(0.0);
    ((loglog / p).ceil() as usize * multiplier).max(1)
}

/// Independent copies at the same radius; the first verified answer wins.
#[derive(Clone, Debug, PartialEq)]
pub struct AmplifiedStructure<T> {
    copies: Vec<LinfNearStructure<T>>,
}

impl<T: Scalar> AmplifiedStructure<T> {
    pub fn new(copies: Vec<LinfNearStructure<T>>) -> Result<Self> {
        if copies.is_empty() {
            return Err(invalid("amplification needs at least one copy"));
        }
        Ok(AmplifiedStructure { copies })
    }

    /// `k` copies with seeds derived from `seed`.
    pub fn build(
        set: Arc<PointSet<T>>,
        r: T,
        variant: LinfVariant,
        backend: BackendKind,
        k: usize,
        seed: u64,
        ddim_est: f64,
    ) -> Result<Self> {
        let copies = (0..k.max(1))
            .into_par_iter()
            .map(|i| {
                let s = derive_seed(seed, "linf-copy", i as u64);
                match variant {
                    LinfVariant::Cardinality => LinfNearStructure::cardinality(set.clone(), r, backend, s),
                    LinfVariant::Ddim => LinfNearStructure::ddim(set.clone(), r, backend, s, ddim_est),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(copies)
    }

    pub fn k(&self) -> usize {
        self.copies.len()
    }

    pub fn copies(&self) -> &[LinfNearStructure<T>] {
        &self.copies
    }

    pub fn query(&self, q: &[T]) -> Result<Option<(usize, T)>> {
        self.copies[0].set.check_query(q)?;
        Ok(self.query_unchecked(q))
    }

    fn query_unchecked(&self, q: &[T]) -> Option<(usize, T)> {
        self.copies.iter().find_map(|c| c.query_unchecked(q))
    }
}

pub fn amplified_query<T: Scalar>(a: &AmplifiedStructure<T>, q: &[T]) -> Result<Option<(usize, T)>> {
    a.query(q)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinfParams {
    pub variant: LinfVariant,
    pub backend: BackendKind,
    pub amplification_multiplier: usize,
    /// Append a rung at half the smallest ladder radius.
    pub extra_half_rung: bool,
    pub seed: u64,
}

impl Default for LinfParams {
    fn default() -> Self {
        LinfParams {
            variant: LinfVariant::Cardinality,
            backend: BackendKind::Exact,
            amplification_multiplier: DEFAULT_AMPLIFICATION,
            extra_half_rung: false,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinfAnswer<T> {
    pub id: usize,
    pub dist: T,
    /// Ladder rung that answered; `None` for the single-point and brute-force paths.
    pub rung: Option<usize>,
    pub invocations: usize,
    pub linear_fallback: bool,
    /// Every rung was null and the answer came from a linear scan of the data.
    pub brute_force_fallback: bool,
}

/// Full ANN index: one amplified structure per ladder rung.
#[derive(Clone, Debug, PartialEq)]
pub struct LinfAnnIndex<T> {
    set: Arc<PointSet<T>>,
    params: LinfParams,
    stats: Option<SetStats>,
    ladder: Option<RadiusLadder>,
    rungs: Vec<AmplifiedStructure<T>>,
}

impl<T: Scalar> LinfAnnIndex<T> {
    pub fn build(set: &PointSet<T>, params: LinfParams) -> Result<Self> {
        pipeline_p(set)?;
        let set = Arc::new(set.clone());
        if set.len() < 2 {
            return Ok(LinfAnnIndex { set, params, stats: None, ladder: None, rungs: Vec::new() });
        }
        let stats = set_stats(&set)?;
        let ladder = RadiusLadder::from_stats(&stats, params.extra_half_rung);
        let k = amplification_count(set.len(), pipeline_p(&set)?.as_f64(), params.amplification_multiplier);
        let rungs = ladder
            .radii()
            .par_iter()
            .enumerate()
            .map(|(j, &r)| {
                let seed = derive_seed(params.seed, "linf-rung", j as u64);
                AmplifiedStructure::build(
                    set.clone(),
                    T::lit(r),
                    params.variant,
                    params.backend,
                    k,
                    seed,
                    stats.ddim_est,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(LinfAnnIndex { set, params, stats: Some(stats), ladder: Some(ladder), rungs })
    }

    pub(crate) fn from_parts(
        set: Arc<PointSet<T>>,
        params: LinfParams,
        stats: Option<SetStats>,
        rungs: Vec<AmplifiedStructure<T>>,
    ) -> Result<Self> {
        let ladder = match &stats {
            Some(_) => Some(RadiusLadder::new(rungs.iter().map(|a| a.copies[0].r.as_f64()).collect())?),
            None => None,
        };
        Ok(LinfAnnIndex { set, params, stats, ladder, rungs })
    }

    pub fn set(&self) -> &PointSet<T> {
        &self.set
    }

    pub fn params(&self) -> &LinfParams {
        &self.params
    }

    pub fn stats(&self) -> Option<&SetStats> {
        self.stats.as_ref()
    }

    pub fn ladder(&self) -> Option<&RadiusLadder> {
        self.ladder.as_ref()
    }

    pub fn rungs(&self) -> &[AmplifiedStructure<T>] {
        &self.rungs
    }

    pub fn query(&self, q: &[T]) -> Result<LinfAnswer<T>> {
        self.set.check_query(q)?;
        let Some(ladder) = &self.ladder else {
            return Ok(LinfAnswer {
                id: 0,
                dist: self.set.dist_to(0, q),
                rung: None,
                invocations: 0,
                linear_fallback: false,
                brute_force_fallback: false,
            });
        };
        let search = ann_via_ladder(ladder, |j| self.rungs[j].query_unchecked(q));
        Ok(match search.answer {
            Some((id, dist)) => LinfAnswer {
                id,
                dist,
                rung: search.rung,
                invocations: search.invocations,
                linear_fallback: search.linear_fallback,
                brute_force_fallback: false,
            },
            None => {
                let (id, dist) = nn_unchecked(&self.set, q);
                LinfAnswer {
                    id,
                    dist,
                    rung: None,
                    invocations: search.invocations,
                    linear_fallback: search.linear_fallback,
                    brute_force_fallback: true,
                }
            }
        })
    }
}

/// Builds a [`LinfAnnIndex`] and answers one query.
pub fn ann_linf<T: Scalar>(set: &PointSet<T>, q: &[T], params: LinfParams) -> Result<(usize, T)> {
    let a = LinfAnnIndex::build(set, params)?.query(q)?;
    Ok((a.id, a.dist))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::PNorm;

    fn p3() -> PNorm<f64> {
        PNorm::new(3.0).unwrap()
    }

    #[test]
    fn two_points_far_apart() {
        let set = PointSet::from_rows(&[vec![0.0, 0.0], vec![10.0, 0.0]], p3()).unwrap();
        let s = build_linf_near(&set, 1.0, BackendKind::Exact, 7).unwrap();
        assert_eq!(s.backend().len(), 2);
        let b = frechet_scale_b(2, 3.0).unwrap();
        assert_eq!(s.r_embedded(), 2.0 * b);
        assert_eq!(s.query(&[10.0, 0.0]).unwrap(), Some((1, 0.0)));
        assert_eq!(s.query(&[1000.0, 1000.0]).unwrap(), None);
        assert_eq!(s, build_linf_near(&set, 1.0, BackendKind::Exact, 7).unwrap());
    }

    #[test]
    fn requires_p_above_two_and_positive_radius() {
        let set = PointSet::from_rows(&[vec![0.0], vec![1.0]], PNorm::new(2.0).unwrap()).unwrap();
        assert!(build_linf_near(&set, 1.0, BackendKind::Exact, 0).is_err());
        let set = set.with_norm(p3()).unwrap();
        assert!(build_linf_near(&set, 0.0, BackendKind::Exact, 0).is_err());
        assert!(build_linf_near(&set, f64::INFINITY, BackendKind::Exact, 0).is_err());
        assert!(build_linf_near(&set, 1.0, BackendKind::Exact, 0).unwrap().query(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn ddim_net_of_clusters() {
        let mut rows = Vec::new();
        for c in 0..5 {
            for j in 0..4 {
                rows.push(vec![50.0 * c as f64 + 0.1 * j as f64, 0.0]);
            }
        }
        let set = PointSet::from_rows(&rows, p3()).unwrap();
        let s = build_linf_near_ddim(&set, 1.0, 1).unwrap();
        assert_eq!(s.ids(), &[0, 4, 8, 12, 16]);
        assert_eq!(s.r_embedded(), 4.0);
        assert_eq!(s.net_scale(), Some(1.0));
        let sep = PointSet::from_rows(&[vec![0.0], vec![5.0], vec![9.0]], p3()).unwrap();
        assert_eq!(build_linf_near_ddim(&sep, 2.0, 1).unwrap().ids(), &[0, 1, 2]);
    }

    #[test]
    fn amplification_counts() {
        assert_eq!(amplification_count(2000, 3.0, 3), 6);
        assert_eq!(amplification_count(2000, 6.0, 1), 1);
        assert_eq!(amplification_count(1, 3.0, 3), 1);
        assert_eq!(amplification_count(2, 3.0, 0), 1);
    }

    #[test]
    fn single_point_index() {
        let set = PointSet::from_rows(&[vec![1.0, 1.0]], p3()).unwrap();
        let (id, dist) = ann_linf(&set, &[1.0, 2.0], LinfParams::default()).unwrap();
        assert_eq!((id, dist), (0, 1.0));
    }

    #[test]
    fn exact_hit_has_ratio_one() {
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64, ((i * 7) % 13) as f64]).collect();
        let set = PointSet::from_rows(&rows, p3()).unwrap();
        let index = LinfAnnIndex::build(&set, LinfParams { seed: 5, ..Default::default() }).unwrap();
        for (i, row) in rows.iter().enumerate() {
            let a = index.query(row).unwrap();
            assert_eq!((a.id, a.dist), (i, 0.0));
        }
    }
}
