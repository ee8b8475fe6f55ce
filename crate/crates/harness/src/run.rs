//! Experiment runner: build, query, cross-check against brute force, report.

use std::time::Instant;

use lpann_core::embed::frechet_scale_b;
use lpann_core::format::{read_index, write_ann_index, write_linf_index, IndexFile};
use lpann_core::linf::LinfAnnIndex;
use lpann_core::mazur::{refine_ann, AnnIndex, DescentStep, TerminationCase};
use lpann_core::oracle::ratio_of;
use lpann_core::{brute_force_nn, DistanceReport, PointSet};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{hex, ExperimentConfig, Pipeline};
use crate::datasets::{gen_dataset, Dataset};
use crate::error::{HarnessError, Result};
use crate::verify::Check;

/// Share of linf answers that must meet the ratio bound.
pub const LINF_BOUND_SHARE: f64 = 0.9;

pub enum BuiltIndex {
    Linf(LinfAnnIndex<f64>),
    Mazur(AnnIndex<f64>),
}

/// One pipeline answer plus what the pipeline says about it.
#[derive(Clone, Debug, PartialEq)]
pub struct Answer {
    pub id: usize,
    pub dist: f64,
    pub oracle_calls: usize,
    pub case: Option<TerminationCase>,
    pub certified_factor: Option<f64>,
    pub linear_fallback: bool,
    pub brute_force_fallback: bool,
    pub descent_violations: Vec<DescentStep>,
    pub refined: Option<(usize, f64)>,
}

impl BuiltIndex {
    pub fn build(cfg: &ExperimentConfig, set: &PointSet<f64>) -> Result<Self> {
        Ok(match cfg.pipeline {
            Pipeline::Linf | Pipeline::LinfDdim => BuiltIndex::Linf(LinfAnnIndex::build(set, cfg.linf_params())?),
            Pipeline::Mazur => BuiltIndex::Mazur(AnnIndex::build(set, cfg.ann_config())?),
        })
    }

    pub fn to_lpix(&self) -> Result<Vec<u8>> {
        let mut bytes = Vec::new();
        match self {
            BuiltIndex::Linf(i) => write_linf_index(i, &mut bytes)?,
            BuiltIndex::Mazur(i) => write_ann_index(i, &mut bytes)?,
        }
        Ok(bytes)
    }

    pub fn from_lpix(bytes: &[u8], set: &PointSet<f64>) -> Result<Self> {
        Ok(match read_index(bytes, set)? {
            IndexFile::Linf(i) => BuiltIndex::Linf(i),
            IndexFile::Mazur(i) => BuiltIndex::Mazur(i),
        })
    }

    pub fn set(&self) -> &PointSet<f64> {
        match self {
            BuiltIndex::Linf(i) => i.set(),
            BuiltIndex::Mazur(i) => i.set(),
        }
    }

    pub fn answer(&self, q: &[f64], refine_eps: Option<f64>) -> Result<Answer> {
        Ok(match self {
            BuiltIndex::Linf(i) => {
                let a = i.query(q)?;
                Answer {
                    id: a.id,
                    dist: a.dist,
                    oracle_calls: a.invocations,
                    case: None,
                    certified_factor: None,
                    linear_fallback: a.linear_fallback,
                    brute_force_fallback: a.brute_force_fallback,
                    descent_violations: Vec::new(),
                    refined: None,
                }
            }
            BuiltIndex::Mazur(i) => {
                let a = i.query(q)?;
                let refined = match refine_eps {
                    Some(eps) => Some(refine_ann(i, q, &a, eps)?),
                    None => None,
                };
                let t = &a.trace;
                Answer {
                    id: a.id,
                    dist: a.dist,
                    oracle_calls: t.steps.len() + (t.case == TerminationCase::BottomHit) as usize,
                    case: Some(t.case),
                    certified_factor: Some(t.certified_factor),
                    linear_fallback: false,
                    brute_force_fallback: false,
                    descent_violations: t.violations(),
                    refined,
                }
            }
        })
    }
}

/// The ratio every answer is measured against: `4·(3 ln n)^{1/p}` for the
/// ℓ∞ pipelines (ladder 2 × expansion 2b), `6c` for the Mazur pipeline.
pub fn ratio_bound(index: &BuiltIndex) -> Result<f64> {
    let set = index.set();
    if set.len() < 2 {
        return Ok(1.0);
    }
    Ok(match index {
        BuiltIndex::Linf(i) => {
            let p = set.norm().exponent().unwrap_or(f64::INFINITY);
            match i.rungs().first().and_then(|a| a.copies().first()) {
                Some(s) if s.net_scale().is_some() => 2.0 * s.certified_bound() / s.r(),
                _ => 4.0 * frechet_scale_b(set.len(), p)?,
            }
        }
        BuiltIndex::Mazur(i) => 6.0 * i.c(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueryRecord {
    #[serde(flatten)]
    pub report: DistanceReport,
    pub oracle_calls: usize,
    pub case: Option<TerminationCase>,
    pub certified_factor: Option<f64>,
    pub linear_fallback: bool,
    pub brute_force_fallback: bool,
    pub refined_id: Option<usize>,
    pub refined_ratio: Option<f64>,
    /// Planted datasets: whether the planted neighbor came back.
    pub truth_match: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportHeader {
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub seed: u64,
    pub pipeline: Pipeline,
    pub n: usize,
    pub d: usize,
    pub p: f64,
    pub index_sha256: String,
    pub index_bytes: usize,
    pub ratio_bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub queries: usize,
    pub nulls: usize,
    pub median_ratio: f64,
    pub max_ratio: f64,
    pub within_bound: usize,
    pub oracle_calls: usize,
    pub max_oracle_calls: usize,
    pub linear_fallbacks: usize,
    pub brute_force_fallbacks: usize,
    /// Mazur: answers whose ratio exceeds their own certified factor.
    pub certificate_failures: usize,
    pub descent_violations: usize,
    pub refined_max_ratio: Option<f64>,
    pub truth_matches: Option<usize>,
    pub checks: Vec<Check>,
}

impl Summary {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Wall-clock times. Printed in the summary table, never written to the
/// report file, so reports stay byte-identical across runs.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Timings {
    pub gen_ms: f64,
    pub build_ms: f64,
    pub query_ms: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunReport {
    pub header: ReportHeader,
    pub queries: Vec<QueryRecord>,
    pub summary: Summary,
    pub timings: Timings,
}

#[derive(Serialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum Line<'a> {
    Header(&'a ReportHeader),
    Query(&'a QueryRecord),
    Summary(&'a Summary),
}

impl RunReport {
    /// JSON lines: header, one line per query, summary.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let mut push = |line: Line<'_>| {
            out.push_str(&serde_json::to_string(&line).expect("report serializes"));
            out.push('\n');
        };
        push(Line::Header(&self.header));
        for q in &self.queries {
            push(Line::Query(q));
        }
        push(Line::Summary(&self.summary));
        out
    }

    pub fn table(&self) -> String {
        let h = &self.header;
        let s = &self.summary;
        let mut out = String::new();
        let mut row = |k: &str, v: String| out.push_str(&format!("{k:<24} {v}\n"));
        row("pipeline", h.pipeline.to_string());
        row("dataset", format!("{:?} n={} d={} p={}", h.config.dataset.kind, h.n, h.d, h.p));
        row("config hash", h.config_hash[..16].to_string());
        row("index", format!("{} bytes, sha256 {}", h.index_bytes, &h.index_sha256[..16]));
        row("queries", s.queries.to_string());
        row("nulls", s.nulls.to_string());
        row("median ratio", format!("{:.4}", s.median_ratio));
        row("max ratio", format!("{:.4}", s.max_ratio));
        row("ratio bound", format!("{:.4} ({} within)", h.ratio_bound, s.within_bound));
        row("oracle calls", format!("{} (max {} per query)", s.oracle_calls, s.max_oracle_calls));
        if let Some(r) = s.refined_max_ratio {
            row("refined max ratio", format!("{r:.6}"));
        }
        if let Some(m) = s.truth_matches {
            row("planted recovered", m.to_string());
        }
        row("build", format!("{:.1} ms", self.timings.build_ms));
        row("queries time", format!("{:.1} ms", self.timings.query_ms));
        for c in &s.checks {
            out.push_str(&format!("{c}\n"));
        }
        out
    }
}

/// Full run: everything plus the LPIX bytes of the index.
pub struct RunOutput {
    pub report: RunReport,
    pub dataset: Dataset,
    pub index: BuiltIndex,
    pub lpix: Vec<u8>,
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let t0 = Instant::now();
    let dataset = gen_dataset(&cfg.dataset)?;
    let t1 = Instant::now();
    let index = BuiltIndex::build(cfg, &dataset.points)?;
    let lpix = index.to_lpix()?;
    let t2 = Instant::now();
    let set = &dataset.points;
    let answers = dataset.queries.par_iter().map(|q| index.answer(q, cfg.refine_eps)).collect::<Result<Vec<_>>>()?;
    let t3 = Instant::now();

    let mut records = Vec::with_capacity(answers.len());
    for (qid, (q, a)) in dataset.queries.iter().zip(&answers).enumerate() {
        let report = DistanceReport::evaluate(set, qid, q, Some(a.id))?;
        if report.dist != a.dist {
            return Err(violation("reported distance differs from recomputation", qid, q, a, &report));
        }
        if !a.descent_violations.is_empty() {
            return Err(violation("descent invariant d(t,q) ≤ 3·2^i", qid, q, a, &report));
        }
        let refined_ratio = match a.refined {
            Some((id, dist)) => {
                if dist != set.dist_to(id, q) {
                    return Err(violation("refined distance differs from recomputation", qid, q, a, &report));
                }
                ratio_of(Some(id), dist, report.opt_dist)
            }
            None => None,
        };
        let truth_match = dataset.truth.as_ref().map(|t| t[qid].id == a.id);
        records.push(QueryRecord {
            report,
            oracle_calls: a.oracle_calls,
            case: a.case,
            certified_factor: a.certified_factor,
            linear_fallback: a.linear_fallback,
            brute_force_fallback: a.brute_force_fallback,
            refined_id: a.refined.map(|r| r.0),
            refined_ratio,
            truth_match,
        });
    }

    let bound = ratio_bound(&index)?;
    let summary = summarize(cfg, &records, bound);
    let header = ReportHeader {
        config: cfg.echo(),
        config_hash: cfg.hash(),
        seed: cfg.seed,
        pipeline: cfg.pipeline,
        n: set.len(),
        d: set.dim(),
        p: cfg.dataset.p,
        index_sha256: hex(&Sha256::digest(&lpix)),
        index_bytes: lpix.len(),
        ratio_bound: bound,
    };
    let ms = |a: Instant, b: Instant| (b - a).as_secs_f64() * 1e3;
    let timings = Timings { gen_ms: ms(t0, t1), build_ms: ms(t1, t2), query_ms: ms(t2, t3) };
    Ok(RunOutput { report: RunReport { header, queries: records, summary, timings }, dataset, index, lpix })
}

fn violation(what: &str, qid: usize, q: &[f64], a: &Answer, report: &DistanceReport) -> HarnessError {
    let dump = serde_json::json!({
        "query_id": qid,
        "query": q,
        "returned_id": a.id,
        "returned_dist": a.dist,
        "recomputed": report,
        "descent_violations": a.descent_violations,
    });
    HarnessError::Violation { what: what.to_string(), dump: serde_json::to_string_pretty(&dump).expect("dump") }
}

/// Ratios here are recomputed from the raw distances, not taken from the
/// records.
fn summarize(cfg: &ExperimentConfig, records: &[QueryRecord], bound: f64) -> Summary {
    let mut ratios: Vec<f64> =
        records.iter().filter_map(|r| ratio_of(r.report.returned_id, r.report.dist, r.report.opt_dist)).collect();
    ratios.sort_by(f64::total_cmp);
    let median_ratio = match ratios.len() {
        0 => f64::NAN,
        k if k % 2 == 1 => ratios[k / 2],
        k => 0.5 * (ratios[k / 2 - 1] + ratios[k / 2]),
    };
    let max_ratio = ratios.last().copied().unwrap_or(f64::NAN);
    let within_bound = ratios.iter().filter(|&&r| r <= bound).count();
    let certificate_failures = records
        .iter()
        .filter(|r| match (r.certified_factor, r.report.ratio) {
            (Some(f), Some(ratio)) => ratio > f * (1.0 + 1e-12),
            _ => false,
        })
        .count();
    let refined_max_ratio =
        cfg.refine_eps.map(|_| records.iter().filter_map(|r| r.refined_ratio).fold(1.0f64, f64::max));
    let nulls = records.iter().filter(|r| r.report.returned_id.is_none()).count();
    let n = records.len();

    let mut checks =
        vec![Check::new("every ratio ≥ 1", ratios.iter().all(|&r| r >= 1.0), format!("{} ratios", ratios.len()))];
    match cfg.pipeline {
        Pipeline::Linf | Pipeline::LinfDdim => {
            let share = if n == 0 { 1.0 } else { within_bound as f64 / n as f64 };
            checks.push(Check::new(
                "linf ratio bound",
                share >= LINF_BOUND_SHARE,
                format!("{within_bound}/{n} within {bound:.4} (need {:.0}%)", 100.0 * LINF_BOUND_SHARE),
            ));
        }
        Pipeline::Mazur => {
            checks.push(Check::new(
                "mazur ratio bound",
                within_bound == n,
                format!("{within_bound}/{n} within 6c = {bound:.4}"),
            ));
            checks.push(Check::new(
                "certified factors",
                certificate_failures == 0,
                format!("{certificate_failures} answers beyond their certified factor"),
            ));
            if let (Some(eps), Some(worst)) = (cfg.refine_eps, refined_max_ratio) {
                checks.push(Check::new(
                    "refinement",
                    worst <= 1.0 + eps,
                    format!("worst refined ratio {worst:.6} (eps {eps})"),
                ));
            }
        }
    }
    Summary {
        queries: n,
        nulls,
        median_ratio,
        max_ratio,
        within_bound,
        oracle_calls: records.iter().map(|r| r.oracle_calls).sum(),
        max_oracle_calls: records.iter().map(|r| r.oracle_calls).max().unwrap_or(0),
        linear_fallbacks: records.iter().filter(|r| r.linear_fallback).count(),
        brute_force_fallbacks: records.iter().filter(|r| r.brute_force_fallback).count(),
        certificate_failures,
        descent_violations: 0,
        refined_max_ratio,
        truth_matches: records
            .first()
            .and_then(|r| r.truth_match)
            .map(|_| records.iter().filter(|r| r.truth_match == Some(true)).count()),
        checks,
    }
}

/// Exact answers for a batch, for callers that only need `opt`.
pub fn exact_answers(set: &PointSet<f64>, queries: &[Vec<f64>]) -> Result<Vec<(usize, f64)>> {
    queries.par_iter().map(|q| Ok(brute_force_nn(set, q)?)).collect()
}
