//! Invariant audit of a built (or loaded) index, behind `verify-index`.

use std::collections::BTreeSet;

use lpann_core::embed::{frechet_scale_b, jl_target_dim};
use lpann_core::hierarchy::{build_candidate_sets, verify_nets};
use lpann_core::linf::{amplification_count, LinfAnnIndex, LinfVariant};
use lpann_core::mazur::{AnnIndex, BOTTOM_RADIUS};
use lpann_core::reduction::RadiusLadder;
use rayon::prelude::*;

use crate::error::Result;
use crate::run::BuiltIndex;
use crate::verify::{Check, VerifyReport};

/// Embedded members re-derived per oracle.
const EMBED_SPOT_CHECKS: usize = 16;

pub fn audit_index(index: &BuiltIndex) -> Result<VerifyReport> {
    match index {
        BuiltIndex::Linf(i) => audit_linf(i),
        BuiltIndex::Mazur(i) => audit_mazur(i),
    }
}

fn audit_linf(index: &LinfAnnIndex<f64>) -> Result<VerifyReport> {
    let set = index.set();
    let mut checks = Vec::new();
    let (Some(stats), Some(ladder)) = (index.stats(), index.ladder()) else {
        checks.push(Check::new("single point", set.len() == 1 && index.rungs().is_empty(), "no ladder"));
        return Ok(VerifyReport { checks });
    };
    let params = index.params();
    let expected = RadiusLadder::from_stats(stats, params.extra_half_rung);
    checks.push(Check::new(
        "ladder",
        ladder == &expected && ladder.len() == index.rungs().len(),
        format!("{} rungs from diam {:.4} to {:.4}", ladder.len(), stats.diam, stats.min_dist),
    ));

    let p = set.norm().exponent().unwrap_or(f64::INFINITY);
    let k = amplification_count(set.len(), p, params.amplification_multiplier);
    let b = frechet_scale_b(set.len(), p)?;
    let mut seeds = BTreeSet::new();
    let (mut copies_ok, mut radius_ok, mut rows_ok, mut net_ok) = (true, true, true, true);
    let (mut radius_detail, mut rows_detail, mut net_detail) = (Vec::new(), Vec::new(), Vec::new());
    for (j, rung) in index.rungs().iter().enumerate() {
        copies_ok &= rung.copies().len() == k;
        let r = ladder.radii()[j];
        for s in rung.copies() {
            seeds.insert(s.seed());
            let want = match s.variant() {
                LinfVariant::Cardinality => 2.0 * b * r,
                LinfVariant::Ddim => 4.0,
            };
            if (s.r_embedded() - want).abs() > 1e-12 * want || s.r() != r {
                radius_ok = false;
                radius_detail.push(format!("rung {j}: radius {} want {want}", s.r_embedded()));
            }
            let bad = (0..s.ids().len())
                .into_par_iter()
                .filter(|&row| s.backend().row(row) != s.embed_query(set.point(s.ids()[row])).as_slice())
                .count();
            if bad > 0 {
                rows_ok = false;
                rows_detail.push(format!("rung {j}: {bad} embedded rows differ"));
            }
        }
        let s = &rung.copies()[0];
        if s.variant() == LinfVariant::Ddim {
            let ids = s.ids();
            let separated = ids.par_iter().enumerate().all(|(a, &x)| ids[a + 1..].iter().all(|&y| set.dist(x, y) >= r));
            let covered = (0..set.len()).into_par_iter().all(|x| ids.iter().any(|&y| set.dist(x, y) < r));
            if !(separated && covered) {
                net_ok = false;
                net_detail.push(format!("rung {j}: net separated {separated}, covering {covered}"));
            }
        }
    }
    let total = index.rungs().len() * k;
    checks.push(Check::new("amplified copies", copies_ok, format!("{k} per rung")));
    checks.push(Check::new(
        "distinct seeds",
        seeds.len() == total,
        format!("{} seeds for {total} copies", seeds.len()),
    ));
    checks.push(Check::new("backend radii", radius_ok, detail_or(&radius_detail, "2b·r (cardinality) or 4 (ddim)")));
    checks.push(Check::new("embedded rows", rows_ok, detail_or(&rows_detail, "every row re-derived bit for bit")));
    if params.variant == LinfVariant::Ddim {
        checks.push(Check::new("r-nets", net_ok, detail_or(&net_detail, "every rung stores an r-net")));
    }
    Ok(VerifyReport { checks })
}

fn detail_or(detail: &[String], ok: &str) -> String {
    if detail.is_empty() {
        ok.to_string()
    } else {
        detail.join("; ")
    }
}

fn audit_mazur(index: &AnnIndex<f64>) -> Result<VerifyReport> {
    let h = index.hierarchy();
    let c = index.c();
    let mut checks: Vec<Check> = verify_nets(h)?
        .checks
        .into_iter()
        .map(|n| Check::new(format!("hierarchy {}", n.name), n.passed, n.detail))
        .collect();

    let expected = build_candidate_sets(h, c)?;
    let keys_match = expected.len() == index.oracles().len()
        && expected.iter().zip(index.oracles()).all(|((k1, cs), (k2, reps))| {
            k1 == k2 && !reps.is_empty() && reps.iter().all(|o| o.members() == cs.members.as_slice())
        });
    checks.push(Check::new(
        "oracle coverage",
        keys_match,
        format!("{} node-level oracles, candidate sets re-derived", expected.len()),
    ));

    let d = index.set().dim();
    let replicas_ok = index.oracles().values().all(|reps| {
        let want = if jl_target_dim(reps[0].members().len()) >= d { 1 } else { index.replicas() };
        reps.len() == want
    });
    checks.push(Check::new("replicas", replicas_ok, format!("{} per oracle with a real projection", index.replicas())));

    let all: Vec<_> = index.oracles().values().flatten().chain((0..h.len()).map(|w| index.bottom_oracle(w))).collect();
    let limit = c * (1.0 + 1e-9);
    let outside: usize = all
        .par_iter()
        .map(|o| o.members().iter().filter(|&&x| index.set().norm_of(&o.scaled(index.set().point(x))) > limit).count())
        .sum();
    checks.push(Check::new("oracle domain", outside == 0, format!("{outside} scaled members beyond c = {c:.4}")));

    let mismatched: usize = all
        .par_iter()
        .map(|o| {
            let step = o.members().len().div_ceil(EMBED_SPOT_CHECKS).max(1);
            (0..o.members().len())
                .step_by(step)
                .filter(|&i| o.embedded_member(i) != o.embed(index.set().point(o.members()[i])))
                .count()
        })
        .sum();
    checks.push(Check::new("oracle embeddings", mismatched == 0, format!("{mismatched} sampled members differ")));

    let bottom_ok = (0..h.len()).into_par_iter().all(|w| {
        let want: Vec<usize> = (0..h.len()).filter(|&x| h.dist(x, w) <= BOTTOM_RADIUS).collect();
        index.bottom_oracle(w).members() == want.as_slice()
    });
    checks.push(Check::new("bottom oracles", bottom_ok, format!("{} radius-6 oracles", h.len())));
    Ok(VerifyReport { checks })
}
