use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bnn::{bnn_c, BnnOracle, BnnOutcome};
use crate::embed::jl_target_dim;
use crate::error::{invalid, Result};
use crate::hierarchy::{
    build_candidate_sets, level_radius, CandidateSet, Level, NetHierarchy, CANDIDATE_RADIUS_FACTOR,
};
use crate::pointset::PointSet;
use crate::scalar::Scalar;
use crate::seed::derive_seed;
use crate::stats::set_stats;

/// Candidate-set key: `(node, level)`.
type OracleKey = (usize, Level);

/// Normalized radius of the bottom-level oracles.
pub const BOTTOM_RADIUS: f64 = 6.0;
/// Embedded scalars kept in memory across all oracles of an index.
pub const DEFAULT_EMBED_CACHE_BUDGET: usize = 1 << 22;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CMode {
    /// `c = p·18^{p/2}`.
    #[default]
    Standard,
    /// A caller-chosen `c > 1`. Candidate radii shrink and the certified
    /// factors (`6c`, `c/2`) change with it.
    Heuristic(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnnConfig {
    pub c_mode: CMode,
    pub amplification_multiplier: usize,
    pub seed: u64,
    /// Oracles are materialized in key order while the total number of
    /// embedded scalars stays within this budget; the rest embed on demand.
    pub embed_cache_budget: usize,
}

impl Default for AnnConfig {
    fn default() -> Self {
        AnnConfig {
            c_mode: CMode::Standard,
            amplification_multiplier: 3,
            seed: 0,
            embed_cache_budget: DEFAULT_EMBED_CACHE_BUDGET,
        }
    }
}

impl AnnConfig {
    pub fn resolve_c(&self, p: f64) -> Result<f64> {
        match self.c_mode {
            CMode::Standard => bnn_c(p),
            CMode::Heuristic(c) if c > 1.0 && c.is_finite() => Ok(c),
            CMode::Heuristic(c) => Err(invalid(format!("heuristic c must be finite and > 1, got {c}"))),
        }
    }
}

/// `⌈log₂ log₂ d / (p·ddim)⌉ · multiplier`, at least 1.
pub fn replica_count(d: usize, p: f64, ddim: f64, multiplier: usize) -> usize {
    let loglog = (d.max(2) as f64).log2().log2().max(0.0);
    ((loglog / (p * ddim.max(1.0))).ceil() as usize * multiplier).max(1)
}

/// Oracle over candidate set `cs`, in original coordinates.
pub fn build_bnn_oracle<T: Scalar>(
    h: &NetHierarchy<T>,
    set: Arc<PointSet<T>>,
    cs: &CandidateSet<T>,
    c: f64,
    seed: u64,
) -> Result<BnnOracle<T>> {
    let center = set.point(cs.node).to_vec();
    let mut o = BnnOracle::new(set, cs.members.clone(), center, cs.scale * h.normalization(), T::lit(c), seed)?;
    o.materialize();
    Ok(o)
}

pub fn query_bnn<T: Scalar>(o: &BnnOracle<T>, q: &[T]) -> Result<BnnOutcome<T>> {
    o.query(q)
}

fn oracle_seed(root: u64, node: usize, level: Level, replica: usize) -> u64 {
    derive_seed(derive_seed(root, "bnn", node as u64), "bnn-level", ((level as u64) << 32) | replica as u64)
}

fn bottom_seed(root: u64, node: usize) -> u64 {
    derive_seed(root, "bnn-bottom", node as u64)
}

/// Hierarchy plus its node oracles and radius-6 bottom oracles.
#[derive(Clone, Debug, PartialEq)]
pub struct AnnIndex<T> {
    pub(crate) set: Arc<PointSet<T>>,
    pub(crate) hierarchy: NetHierarchy<T>,
    pub(crate) config: AnnConfig,
    pub(crate) c: f64,
    pub(crate) ddim_est: f64,
    pub(crate) replicas: usize,
    pub(crate) oracles: BTreeMap<(usize, Level), Vec<BnnOracle<T>>>,
    pub(crate) bottom: Vec<BnnOracle<T>>,
}

impl<T: Scalar> AnnIndex<T> {
    pub fn build(set: &PointSet<T>, config: AnnConfig) -> Result<Self> {
        let p = set.norm().above_two()?.as_f64();
        let c = config.resolve_c(p)?;
        let set = Arc::new(set.clone());
        let hierarchy = NetHierarchy::build(&set);
        let ddim_est = if set.len() >= 2 { set_stats(&set)?.ddim_est } else { 1.0 };
        let replicas = replica_count(set.dim(), p, ddim_est, config.amplification_multiplier);
        let members: BTreeMap<(usize, Level), Vec<usize>> =
            build_candidate_sets(&hierarchy, c)?.into_iter().map(|(k, cs)| (k, cs.members)).collect();
        let bottom_members = bottom_member_lists(&hierarchy);
        Self::assemble(set, hierarchy, config, c, ddim_est, replicas, members, bottom_members)
    }

    #[allow(clippy::too_many_arguments)]
    pub(crate) fn assemble(
        set: Arc<PointSet<T>>,
        hierarchy: NetHierarchy<T>,
        config: AnnConfig,
        c: f64,
        ddim_est: f64,
        replicas: usize,
        members: BTreeMap<(usize, Level), Vec<usize>>,
        bottom_members: Vec<Vec<usize>>,
    ) -> Result<Self> {
        let nf = hierarchy.normalization();
        let ct = T::lit(c);
        let d = set.dim();
        let built: Vec<(OracleKey, Vec<BnnOracle<T>>)> = members
            .into_par_iter()
            .map(|((node, level), ids)| {
                let scale = ct / (T::lit(CANDIDATE_RADIUS_FACTOR) * level_radius(level)) * nf;
                // Without a real JL projection the oracle is deterministic and
                // extra replicas would repeat it exactly.
                let distinct = if jl_target_dim(ids.len()) >= d { 1 } else { replicas };
                let center = set.point(node).to_vec();
                let list = (0..distinct)
                    .map(|r| {
                        BnnOracle::new(
                            set.clone(),
                            ids.clone(),
                            center.clone(),
                            scale,
                            ct,
                            oracle_seed(config.seed, node, level, r),
                        )
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(((node, level), list))
            })
            .collect::<Result<_>>()?;
        let mut oracles: BTreeMap<_, _> = built.into_iter().collect();
        let bottom_scale = ct / T::lit(BOTTOM_RADIUS) * nf;
        let mut bottom = bottom_members
            .into_par_iter()
            .enumerate()
            .map(|(w, ids)| {
                BnnOracle::new(set.clone(), ids, set.point(w).to_vec(), bottom_scale, ct, bottom_seed(config.seed, w))
            })
            .collect::<Result<Vec<_>>>()?;

        let mut budget = config.embed_cache_budget;
        let mut take = |o: &mut BnnOracle<T>| {
            let cost = o.members().len() * o.embedded_dim();
            if cost <= budget {
                budget -= cost;
                o.materialize();
            }
        };
        oracles.values_mut().flatten().for_each(&mut take);
        bottom.iter_mut().for_each(&mut take);

        Ok(AnnIndex { set, hierarchy, config, c, ddim_est, replicas, oracles, bottom })
    }

    pub fn set(&self) -> &PointSet<T> {
        &self.set
    }

    pub fn hierarchy(&self) -> &NetHierarchy<T> {
        &self.hierarchy
    }

    pub fn config(&self) -> &AnnConfig {
        &self.config
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn ddim_est(&self) -> f64 {
        self.ddim_est
    }

    /// Nominal replica count; deterministic oracles are stored once.
    pub fn replicas(&self) -> usize {
        self.replicas
    }

    pub fn oracles(&self) -> &BTreeMap<(usize, Level), Vec<BnnOracle<T>>> {
        &self.oracles
    }

    pub fn node_oracles(&self, node: usize, level: Level) -> Option<&[BnnOracle<T>]> {
        self.oracles.get(&(node, level)).map(Vec::as_slice)
    }

    pub fn bottom_oracle(&self, w: usize) -> &BnnOracle<T> {
        &self.bottom[w]
    }

    /// Sum of member counts over every stored oracle.
    pub fn total_members(&self) -> usize {
        self.oracles.values().flatten().chain(&self.bottom).map(|o| o.members().len()).sum()
    }
}

/// For each point, the points within normalized distance 6 of it.
pub(crate) fn bottom_member_lists<T: Scalar>(h: &NetHierarchy<T>) -> Vec<Vec<usize>> {
    let r = T::lit(BOTTOM_RADIUS);
    (0..h.len()).into_par_iter().map(|w| (0..h.len()).filter(|&x| h.dist(x, w) <= r).collect()).collect()
}

pub fn build_ann_index<T: Scalar>(set: &PointSet<T>, config: AnnConfig) -> Result<AnnIndex<T>> {
    AnnIndex::build(set, config)
}
