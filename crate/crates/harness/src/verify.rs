//! Statistical checks of the embeddings, with optional fault injection.

use std::fmt;

use lpann_core::embed::{
    frechet_cdf, frechet_scale_b, jl_target_dim, mazur_map, mazur_map_unsigned, net_contraction_threshold,
    sample_frechet, FrechetEmbedding, JlProjection, MazurParams,
};
use lpann_core::mazur::{bnn_c, BnnOracle, BnnOutcome};
use lpann_core::seed::{derive_seed, rng_from};
use lpann_core::{lp_dist, lp_norm, set_stats, PNorm, PointSet};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Open01, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;

pub const KS_TOLERANCE: f64 = 0.01;
pub const MAZUR_SWEEP_P: [f64; 4] = [2.5, 3.0, 4.0, 6.0];
pub const MAZUR_SWEEP_C: [f64; 2] = [1.0, 10.0];
pub const MAZUR_SLACK: f64 = 1e-9;
const CENSUS_N: usize = 256;
const CENSUS_D: usize = 16;
const JL_N: usize = 1000;
const JL_D: usize = 512;
const NET_C: f64 = 4.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Check { name: name.into(), passed, detail: detail.into() }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}: {}", if self.passed { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fault {
    /// Drop the sign in the Mazur map.
    UnsignedMazur,
    /// Use half of `(3 ln n)^{1/p}` as the Fréchet scale.
    HalvedB,
}

impl std::str::FromStr for Fault {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "unsigned-mazur" => Ok(Fault::UnsignedMazur),
            "halved-b" => Ok(Fault::HalvedB),
            _ => Err(format!("unknown fault {s:?} (unsigned-mazur, halved-b)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VerifyConfig {
    pub p_list: Vec<f64>,
    /// Embeddings per contraction census.
    pub trials: usize,
    /// Samples per KS test.
    pub samples: usize,
    /// Draws per expansion test and pairs per Mazur sweep cell.
    pub pairs: usize,
    pub seed: u64,
    pub fault: Option<Fault>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig { p_list: vec![3.0, 4.0, 6.0], trials: 200, samples: 100_000, pairs: 10_000, seed: 0, fault: None }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{c}")?;
        }
        Ok(())
    }
}

/// Two-sided Kolmogorov–Smirnov distance between a sample and a CDF.
pub fn ks_distance(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    samples.iter().enumerate().fold(0.0, |worst, (i, &x)| {
        let f = cdf(x);
        worst.max(f - i as f64 / n).max((i + 1) as f64 / n - f)
    })
}

fn sigma(rate: f64, trials: usize) -> f64 {
    (rate * (1.0 - rate) / trials as f64).sqrt()
}

/// Uniform direction on the ℓ_p unit sphere (normalized Gaussian).
pub fn lp_direction(g: &mut ChaCha8Rng, d: usize, p: f64) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut *g)).collect();
        let norm = lp_norm(&v, PNorm::Finite(p)).expect("finite");
        if norm > 0.0 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

fn gaussian_set(g: &mut ChaCha8Rng, n: usize, d: usize, p: f64) -> PointSet<f64> {
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| StandardNormal.sample(&mut *g)).collect()).collect();
    PointSet::from_rows(&rows, PNorm::Finite(p)).expect("gaussian rows are distinct")
}

pub fn verify_embeddings(cfg: &VerifyConfig) -> Result<VerifyReport> {
    let mut checks = Vec::new();
    for &p in &cfg.p_list {
        checks.push(frechet_sampler_check(p, cfg.samples, derive_seed(cfg.seed, "ks", p.to_bits()))?);
    }
    for &p in &cfg.p_list {
        for v in [vec![1.0, 2.0, 2.0], vec![1.0, 1.0, 1.0, 1.0]] {
            let seed = derive_seed(derive_seed(cfg.seed, "max-stable", p.to_bits()), "v", v.len() as u64);
            checks.push(max_stability_check(&v, p, cfg.samples, seed)?);
        }
    }
    let halve = cfg.fault == Some(Fault::HalvedB);
    for &p in &cfg.p_list {
        checks.push(contraction_check(p, cfg.trials, halve, derive_seed(cfg.seed, "contraction", p.to_bits()))?);
    }
    for &p in &cfg.p_list {
        checks.push(expansion_check(p, cfg.pairs, halve, derive_seed(cfg.seed, "expansion", p.to_bits()))?);
    }
    checks.push(mazur_sweep(cfg.pairs, cfg.fault == Some(Fault::UnsignedMazur), derive_seed(cfg.seed, "mazur", 0))?);
    checks.push(jl_census(cfg.pairs, derive_seed(cfg.seed, "jl", 0))?);
    for &p in &cfg.p_list {
        checks.push(net_contraction_check(p, cfg.trials, derive_seed(cfg.seed, "net", p.to_bits()))?);
    }
    Ok(VerifyReport { checks })
}

/// KS distance of inverse-CDF samples against `e^{-x^{-p}}`.
pub fn frechet_sampler_check(p: f64, samples: usize, seed: u64) -> Result<Check> {
    let mut g = rng_from(seed);
    let mut xs =
        (0..samples).map(|_| sample_frechet(p, Open01.sample(&mut g))).collect::<lpann_core::Result<Vec<f64>>>()?;
    let ks = ks_distance(&mut xs, |x| frechet_cdf(p, x));
    Ok(Check::new(format!("frechet sampler p={p}"), ks <= KS_TOLERANCE, format!("KS {ks:.5} over {samples} samples")))
}

/// `max_i v_i Z_i / ‖v‖_p` over fresh embeddings against the Fréchet law.
pub fn max_stability_check(v: &[f64], p: f64, samples: usize, seed: u64) -> Result<Check> {
    let norm = lp_norm(v, PNorm::new(p)?)?;
    let mut xs = (0..samples)
        .into_par_iter()
        .map(|i| {
            let e = FrechetEmbedding::new(v.len(), p, 1.0, derive_seed(seed, "embedding", i as u64))?;
            Ok(e.apply(v)?.into_iter().fold(0.0, f64::max) / norm)
        })
        .collect::<lpann_core::Result<Vec<f64>>>()?;
    let ks = ks_distance(&mut xs, |x| frechet_cdf(p, x));
    Ok(Check::new(
        format!("max-stability v={v:?} p={p}"),
        ks <= KS_TOLERANCE,
        format!("KS {ks:.5} over {samples} embeddings"),
    ))
}

/// Share of embeddings (scale `b = (3 ln n)^{1/p}`, halved if asked) that
/// contract some pair of a fixed random set, against `1/n + 0.04`.
pub fn contraction_check(p: f64, trials: usize, halve_b: bool, seed: u64) -> Result<Check> {
    let mut g = rng_from(seed);
    let set = gaussian_set(&mut g, CENSUS_N, CENSUS_D, p);
    let n = set.len();
    let b = frechet_scale_b(n, p)? * if halve_b { 0.5 } else { 1.0 };
    let dists: Vec<f64> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).map(|(i, j)| set.dist(i, j)).collect();
    let contracted: usize = (0..trials)
        .into_par_iter()
        .map(|t| -> lpann_core::Result<usize> {
            let e = FrechetEmbedding::new(CENSUS_D, p, b, derive_seed(seed, "embedding", t as u64))?;
            let rows = set.rows().map(|r| e.apply(r)).collect::<lpann_core::Result<Vec<_>>>()?;
            let mut k = 0;
            for i in 0..n {
                for j in i + 1..n {
                    let linf = rows[i].iter().zip(&rows[j]).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
                    if linf < dists[k] {
                        return Ok(1);
                    }
                    k += 1;
                }
            }
            Ok(0)
        })
        .collect::<lpann_core::Result<Vec<_>>>()?
        .into_iter()
        .sum();
    let rate = contracted as f64 / trials as f64;
    let limit = 1.0 / n as f64 + 0.04;
    Ok(Check::new(
        format!("contraction p={p}{}", if halve_b { " (b halved)" } else { "" }),
        rate <= limit,
        format!("{contracted}/{trials} embeddings contract a pair (b = {b:.4}, limit {limit:.4})"),
    ))
}

/// Per-draw rate of `‖f_b(u) − f_b(w)‖∞ > 2b‖u − w‖_p` with a fresh pair and
/// embedding each draw, against `2^{-p} + 3σ`.
pub fn expansion_check(p: f64, draws: usize, halve_b: bool, seed: u64) -> Result<Check> {
    let b = frechet_scale_b(CENSUS_N, p)? * if halve_b { 0.5 } else { 1.0 };
    let norm = PNorm::new(p)?;
    let expanded: usize = (0..draws)
        .into_par_iter()
        .map(|t| -> lpann_core::Result<usize> {
            let mut g = rng_from(derive_seed(seed, "pair", t as u64));
            let u: Vec<f64> = (0..CENSUS_D).map(|_| StandardNormal.sample(&mut g)).collect();
            let w: Vec<f64> = (0..CENSUS_D).map(|_| StandardNormal.sample(&mut g)).collect();
            let e = FrechetEmbedding::new(CENSUS_D, p, b, derive_seed(seed, "embedding", t as u64))?;
            let (fu, fw) = (e.apply(&u)?, e.apply(&w)?);
            let linf = fu.iter().zip(&fw).fold(0.0f64, |m, (a, c)| m.max((a - c).abs()));
            Ok((linf > 2.0 * b * lp_dist(&u, &w, norm)?) as usize)
        })
        .collect::<lpann_core::Result<Vec<_>>>()?
        .into_iter()
        .sum();
    let q = 0.5f64.powf(p);
    let limit = q + 3.0 * sigma(q, draws);
    let rate = expanded as f64 / draws as f64;
    Ok(Check::new(
        format!("expansion p={p}"),
        rate <= limit,
        format!("rate {rate:.5} over {draws} draws (limit {limit:.5})"),
    ))
}

/// Deterministic Mazur inequalities on random pairs in the `C`-ball, one in
/// ten antipodal.
pub fn mazur_sweep(pairs: usize, unsigned: bool, seed: u64) -> Result<Check> {
    let d = 8;
    let mut violations = 0usize;
    let mut first: Option<String> = None;
    let mut total = 0usize;
    for &p in &MAZUR_SWEEP_P {
        for &c in &MAZUR_SWEEP_C {
            let params = MazurParams::new(p, c)?;
            let norm = PNorm::new(p)?;
            let l2 = PNorm::new(2.0)?;
            let mut g = rng_from(derive_seed(derive_seed(seed, "p", p.to_bits()), "c", c.to_bits()));
            for k in 0..pairs {
                let x = in_ball(&mut g, d, p, c);
                let y = if k % 10 == 0 { x.iter().map(|v| -v).collect() } else { in_ball(&mut g, d, p, c) };
                let (mx, my) = if unsigned {
                    (mazur_map_unsigned(&x, &params)?, mazur_map_unsigned(&y, &params)?)
                } else {
                    (mazur_map(&x, &params)?, mazur_map(&y, &params)?)
                };
                let u = lp_dist(&x, &y, norm)?;
                let out = lp_dist(&mx, &my, l2)?;
                let lower = params.contraction_lower_bound(u);
                let bad = if out > u * (1.0 + MAZUR_SLACK) {
                    Some("expansion")
                } else if out < lower * (1.0 - MAZUR_SLACK) {
                    Some("contraction bound")
                } else {
                    None
                };
                if let Some(kind) = bad {
                    violations += 1;
                    if first.is_none() {
                        first = Some(format!(
                            "{kind} at p={p} C={c}: x={x:?} y={y:?} ‖x−y‖_p={u:.6} ‖M(x)−M(y)‖₂={out:.6} bound {lower:.6}"
                        ));
                    }
                }
                total += 1;
            }
        }
    }
    let name = if unsigned { "mazur inequalities (unsigned map)" } else { "mazur inequalities" };
    let detail = match first {
        None => format!("0 violations over {total} pairs"),
        Some(ex) => format!("{violations} violations over {total} pairs; first: {ex}"),
    };
    Ok(Check::new(name, violations == 0, detail))
}

fn in_ball(g: &mut ChaCha8Rng, d: usize, p: f64, c: f64) -> Vec<f64> {
    let r = c * g.random_range(0.0..1.0) * (1.0 - 1e-12);
    lp_direction(g, d, p).into_iter().map(|v| v * r).collect()
}

/// Distortion census of the JL projection on random unit vectors.
pub fn jl_census(pairs: usize, seed: u64) -> Result<Check> {
    let per_matrix = 100;
    let matrices = pairs.div_ceil(per_matrix);
    let counts = (0..matrices)
        .into_par_iter()
        .map(|m| -> lpann_core::Result<(usize, usize, usize)> {
            let jl = JlProjection::<f64>::new(JL_N, JL_D, derive_seed(seed, "matrix", m as u64));
            let mut g = rng_from(derive_seed(seed, "vectors", m as u64));
            let l2 = PNorm::Finite(2.0);
            let (mut expand, mut contract, mut seen) = (0, 0, 0);
            for _ in 0..per_matrix.min(pairs - m * per_matrix) {
                let v = lp_direction(&mut g, JL_D, 2.0);
                let len = lp_norm(&jl.apply(&v)?, l2)?;
                expand += (len > 1.0) as usize;
                contract += (len < 0.5) as usize;
                seen += 1;
            }
            Ok((expand, contract, seen))
        })
        .collect::<lpann_core::Result<Vec<_>>>()?;
    let (e, c, n) = counts.iter().fold((0, 0, 0), |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2));
    let (er, cr) = (e as f64 / n as f64, c as f64 / n as f64);
    Ok(Check::new(
        "jl distortion",
        er <= 0.01 && cr <= 0.01,
        format!("k = {}: expanding {er:.4}, contracting below 1/2 {cr:.4} over {n} vectors", jl_target_dim(JL_N)),
    ))
}

/// On a unit-separated grid, the share of `f_1` embeddings that bring some
/// point beyond `h` within ℓ∞ distance `c = 4` of the query, against
/// `ddim^{-6·ddim} + 0.04`.
pub fn net_contraction_check(p: f64, trials: usize, seed: u64) -> Result<Check> {
    let side = 40;
    let rows: Vec<Vec<f64>> = (0..side * side).map(|i| vec![(i / side) as f64, (i % side) as f64]).collect();
    let set = PointSet::from_rows(&rows, PNorm::new(p)?)?;
    let ddim = set_stats(&set)?.ddim_est.max(2.0);
    let h = net_contraction_threshold(NET_C, ddim, p)?;
    let q = [side as f64 / 2.0 - 0.3, side as f64 / 2.0 + 0.2];
    let far: Vec<usize> = (0..set.len()).filter(|&i| set.dist_to(i, &q) > h).collect();
    let events: usize = (0..trials)
        .into_par_iter()
        .map(|t| -> lpann_core::Result<usize> {
            let e = FrechetEmbedding::new(2, p, 1.0, derive_seed(seed, "embedding", t as u64))?;
            let fq = e.apply(&q)?;
            for &i in &far {
                let fx = e.apply(set.point(i))?;
                if fx.iter().zip(&fq).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())) <= NET_C {
                    return Ok(1);
                }
            }
            Ok(0)
        })
        .collect::<lpann_core::Result<Vec<_>>>()?
        .into_iter()
        .sum();
    let rate = events as f64 / trials as f64;
    let limit = ddim.powf(-6.0 * ddim) + 0.04;
    Ok(Check::new(
        format!("net contraction p={p}"),
        rate <= limit,
        format!(
            "{events}/{trials} embeddings (h = {h:.3}, ddim {ddim:.2}, {} far points, limit {limit:.4})",
            far.len()
        ),
    ))
}

/// Planted c-BNN instances: members spread over the `c`-ball, one member at
/// distance 1 from a query of magnitude at most `c/2`. Every hit must be
/// within `c/9` (recomputed); the hit rate must reach `min_rate`.
pub fn bnn_planted_check(n: usize, d: usize, p: f64, trials: usize, min_rate: f64, seed: u64) -> Result<Check> {
    let c = bnn_c(p)?;
    let norm = PNorm::new(p)?;
    let results = (0..trials)
        .into_par_iter()
        .map(|t| -> lpann_core::Result<(bool, bool)> {
            let mut g = rng_from(derive_seed(seed, "instance", t as u64));
            let radial = |g: &mut ChaCha8Rng, max: f64| -> Vec<f64> {
                let r = max * g.random_range(0.0f64..1.0).powf(1.0 / d as f64);
                lp_direction(g, d, p).into_iter().map(|x| x * r).collect()
            };
            let q = radial(&mut g, c / 2.0);
            let mut rows: Vec<Vec<f64>> = (0..n - 1).map(|_| radial(&mut g, c)).collect();
            let dir = lp_direction(&mut g, d, p);
            rows.insert(g.random_range(0..n), q.iter().zip(&dir).map(|(a, b)| a + b).collect());
            let set = std::sync::Arc::new(PointSet::from_rows(&rows, norm)?);
            let mut oracle = BnnOracle::new(
                set.clone(),
                (0..n).collect(),
                vec![0.0; d],
                1.0,
                c,
                derive_seed(seed, "oracle", t as u64),
            )?;
            oracle.materialize();
            Ok(match oracle.query(&q)? {
                BnnOutcome::Hit { id, dist } => {
                    let recomputed = lp_dist(&q, set.point(id), norm)?;
                    (true, recomputed == dist && recomputed <= c / 9.0)
                }
                _ => (false, true),
            })
        })
        .collect::<lpann_core::Result<Vec<_>>>()?;
    let hits = results.iter().filter(|r| r.0).count();
    let sound = results.iter().all(|r| r.1);
    let rate = hits as f64 / trials as f64;
    Ok(Check::new(
        format!("planted c-BNN n={n} d={d} p={p}"),
        rate >= min_rate && sound,
        format!("hit rate {rate:.3} (need {min_rate}), every hit within c/9 = {:.3}: {sound}", c / 9.0),
    ))
}
