mod common;

use std::sync::Arc;

use common::{gaussian, rng, unit_direction};
use lpann_core::embed::MazurParams;
use lpann_core::hierarchy::{level_radius, CANDIDATE_RADIUS_FACTOR};
use lpann_core::mazur::{
    bnn_c, coarse_start, refine_ann, replica_count, AnnConfig, AnnIndex, BnnOracle, BnnOutcome, CMode, StepOutcome,
    TerminationCase,
};
use lpann_core::stats::packing_bound;
use lpann_core::{brute_force_nn, lp_dist, lp_norm, set_stats, PNorm, PointSet};
use rand::Rng;

fn chain(p: f64) -> f64 {
    let c = p * 18f64.powf(p / 2.0);
    (2.0 / p) * (2.0 * c).powf(1.0 - p / 2.0) * (c / 9.0).powf(p / 2.0)
}

#[test]
fn separation_chain_is_four() {
    for p in [3.0, 4.0, 6.0] {
        assert!((chain(p) - 4.0).abs() < 1e-9, "p = {p}: {}", chain(p));
        let c = bnn_c(p).unwrap();
        let params = MazurParams::new(p, c).unwrap();
        assert!((params.contraction_lower_bound(c / 9.0) - 4.0).abs() < 1e-9);
    }
}

#[test]
fn pairs_at_c_over_nine_embed_far_apart() {
    for p in [3.0, 4.0, 6.0] {
        let c = bnn_c(p).unwrap();
        let params = MazurParams::new(p, c).unwrap();
        let norm = PNorm::new(p).unwrap();
        let mut g = rng(p as u64);
        let mut checked = 0;
        while checked < 500 {
            let dir = unit_direction(&mut g, 8, p);
            let u: Vec<f64> = dir.iter().map(|x| x * c * g.random_range(0.0..1.0)).collect();
            let dir = unit_direction(&mut g, 8, p);
            let v: Vec<f64> = dir.iter().map(|x| x * c * g.random_range(0.0..1.0)).collect();
            if lp_dist(&u, &v, norm).unwrap() < c / 9.0 {
                continue;
            }
            let (mu, mv) = (
                lpann_core::embed::mazur_map(&u, &params).unwrap(),
                lpann_core::embed::mazur_map(&v, &params).unwrap(),
            );
            assert!(lp_dist(&mu, &mv, PNorm::new(2.0).unwrap()).unwrap() >= 4.0 * (1.0 - 1e-9));
            checked += 1;
        }
    }
}

/// Members spread over the `c`-ball, a query, and one member at distance 1.
fn planted_bnn(n: usize, d: usize, p: f64, seed: u64) -> (Arc<PointSet<f64>>, Vec<f64>, usize) {
    let c = bnn_c(p).unwrap();
    let mut g = rng(seed);
    let radial = |g: &mut rand_chacha::ChaCha8Rng, max: f64| {
        let dir = unit_direction(g, d, p);
        let r = max * g.random_range(0.0f64..1.0).powf(1.0 / d as f64);
        dir.into_iter().map(|x| x * r).collect::<Vec<f64>>()
    };
    let q = radial(&mut g, c / 2.0);
    let mut rows: Vec<Vec<f64>> = (0..n - 1).map(|_| radial(&mut g, c)).collect();
    let dir = unit_direction(&mut g, d, p);
    let id = g.random_range(0..n);
    rows.insert(id, q.iter().zip(&dir).map(|(a, b)| a + b).collect());
    (Arc::new(PointSet::from_rows(&rows, PNorm::new(p).unwrap()).unwrap()), q, id)
}

#[test]
fn planted_bnn_answers() {
    let p = 3.0;
    let c = bnn_c(p).unwrap();
    let trials = 200;
    let mut hits = 0;
    for t in 0..trials {
        let (set, q, _) = planted_bnn(300, 16, p, 500 + t);
        let members: Vec<usize> = (0..set.len()).collect();
        let o = BnnOracle::new(set.clone(), members, vec![0.0; 16], 1.0, c, t).unwrap();
        match o.query(&q).unwrap() {
            BnnOutcome::Hit { id, dist } => {
                hits += 1;
                assert_eq!(dist, lp_dist(&q, set.point(id), PNorm::new(p).unwrap()).unwrap());
                assert!(dist <= c / 9.0);
            }
            BnnOutcome::Null | BnnOutcome::Rejected => {}
            BnnOutcome::OutsideBall => panic!("query inside the ball"),
        }
    }
    assert!(hits as f64 >= 0.95 * trials as f64, "{hits}/{trials}");
}

#[test]
fn replica_formula() {
    assert_eq!(replica_count(32, 3.0, 2.0, 3), 3);
    assert_eq!(replica_count(2, 3.0, 2.0, 3), 1);
    // ⌈log₂log₂ 2^16 / (3·1)⌉ = ⌈4/3⌉ = 2.
    assert_eq!(replica_count(1 << 16, 3.0, 1.0, 3), 6);
}

fn assert_certified(index: &AnnIndex<f64>, queries: &PointSet<f64>, c: f64) {
    let h = index.hierarchy();
    for q in queries.rows() {
        let a = index.query(q).unwrap();
        let (_, opt) = brute_force_nn(index.set(), q).unwrap();
        assert!(a.trace.violations().is_empty(), "{:?}", a.trace);
        assert_eq!(a.dist, index.set().dist_to(a.id, q));
        let factor = a.trace.certified_factor;
        let allowed = match a.trace.case {
            TerminationCase::RootFar => vec![3.0],
            TerminationCase::BottomHit => vec![2.0, c / 2.0],
            TerminationCase::NullStop => vec![6.0 * c],
        };
        assert!(allowed.iter().any(|f| (f - factor).abs() < 1e-9), "{:?} {factor}", a.trace.case);
        assert!(a.dist <= factor * opt * (1.0 + 1e-12), "{} > {factor}·{opt}", a.dist);
        // Every step's recorded distance matches an independent recomputation.
        let qn = h.normalize_query(q);
        for s in &a.trace.steps {
            let d = lp_dist(h.points().point(s.node), &qn, h.points().norm()).unwrap();
            assert!((d - s.dist).abs() <= 1e-9 * d.max(1.0));
            assert_eq!(s.bound, 3.0 * level_radius::<f64>(s.level));
        }
        if a.trace.case == TerminationCase::NullStop {
            let last = a.trace.steps.last().unwrap();
            assert!(matches!(last.outcome, StepOutcome::Null | StepOutcome::Rejected));
            if last.outcome == StepOutcome::Rejected {
                continue;
            }
            let nearest = (0..h.len()).map(|x| h.dist_to(x, &qn)).fold(f64::INFINITY, f64::min);
            assert!(nearest >= level_radius::<f64>(last.level) / (2.0 * c), "null at level {}", last.level);
        }
    }
}

#[test]
fn descent_certificates_standard_constant() {
    let set = gaussian(400, 8, 3.0, 61);
    let queries = gaussian(60, 8, 3.0, 62);
    let index = AnnIndex::build(&set, AnnConfig { seed: 3, ..Default::default() }).unwrap();
    assert_certified(&index, &queries, bnn_c(3.0).unwrap());
    for x in (0..set.len()).step_by(37) {
        let a = index.query(set.point(x)).unwrap();
        assert_eq!((a.id, a.dist, a.trace.case), (x, 0.0, TerminationCase::BottomHit));
    }
}

#[test]
fn descent_certificates_heuristic_constant() {
    let set = gaussian(500, 6, 4.0, 71);
    let queries = gaussian(80, 6, 4.0, 72);
    let index =
        AnnIndex::build(&set, AnnConfig { c_mode: CMode::Heuristic(6.0), seed: 9, ..Default::default() }).unwrap();
    assert_certified(&index, &queries, 6.0);
    for q in queries.rows() {
        let a = index.query(q).unwrap();
        let (_, opt) = brute_force_nn(&set, q).unwrap();
        let (_, dist) = refine_ann(&index, q, &a, 0.1).unwrap();
        assert!(dist <= 1.1 * opt * (1.0 + 1e-12));
    }
}

#[test]
fn coarse_start_from_exact_neighbor() {
    let set = gaussian(400, 6, 3.0, 81);
    let queries = gaussian(50, 6, 3.0, 82);
    let index = AnnIndex::build(&set, AnnConfig::default()).unwrap();
    let h = index.hierarchy();
    for q in queries.rows() {
        let (nn, _) = brute_force_nn(&set, q).unwrap();
        let qn = h.normalize_query(q);
        let opt = h.dist_to(nn, &qn);
        let (t, level) = coarse_start(&index, q, Some(nn)).unwrap();
        assert!(h.dist_to(t, &qn) <= 3.0 * level_radius::<f64>(level));
        if level < h.top_level() {
            assert_eq!(level, opt.log2().ceil().max(0.0) as i32);
        }
        let a = index.query_from(q, Some((t, level))).unwrap();
        assert!(a.trace.violations().is_empty());
        assert!(a.trace.steps.len() <= 4, "{} levels from {level}", a.trace.steps.len());
        assert!(a.dist <= a.trace.certified_factor * set.dist_to(nn, q) * (1.0 + 1e-12));
    }
}

#[test]
fn single_point_index() {
    let set = PointSet::from_rows(&[vec![1.0, 2.0]], PNorm::new(3.0).unwrap()).unwrap();
    let index = AnnIndex::build(&set, AnnConfig::default()).unwrap();
    let a = index.query(&[5.0, -1.0]).unwrap();
    assert_eq!(a.id, 0);
}

#[test]
fn f32_index_certified() {
    let set64 = gaussian(300, 6, 3.0, 91);
    let rows: Vec<Vec<f32>> = set64.rows().map(|r| r.iter().map(|&x| x as f32).collect()).collect();
    let set = PointSet::<f32>::from_rows(&rows, PNorm::new(3.0f32).unwrap()).unwrap();
    let index = lpann_core::AnnIndex32::build(&set, AnnConfig::default()).unwrap();
    let queries = gaussian(40, 6, 3.0, 92);
    for q in queries.rows() {
        let q: Vec<f32> = q.iter().map(|&x| x as f32).collect();
        let a = index.query(&q).unwrap();
        let (_, opt) = brute_force_nn(&set, &q).unwrap();
        assert!(a.trace.violations().is_empty());
        assert!(a.dist as f64 <= a.trace.certified_factor * opt as f64 * (1.0 + 1e-5));
    }
}

#[test]
fn candidate_member_counts() {
    // Points on a plane inside R^16: small doubling dimension.
    let mut g = rng(101);
    let rows: Vec<Vec<f64>> = (0..400)
        .map(|_| {
            let (a, b): (f64, f64) = (g.random_range(-4.0..4.0), g.random_range(-4.0..4.0));
            (0..16).map(|j| if j % 2 == 0 { a } else { b } * (1.0 + j as f64 / 16.0)).collect()
        })
        .collect();
    let set = PointSet::from_rows(&rows, PNorm::new(3.0).unwrap()).unwrap();
    let index = AnnIndex::build(&set, AnnConfig { c_mode: CMode::Heuristic(4.0), ..Default::default() }).unwrap();
    let ddim = set_stats(index.hierarchy().points()).unwrap().ddim_ceil();
    let n = set.len();
    let mut total = 0;
    for (&(_, level), replicas) in index.oracles() {
        let k = replicas[0].members().len();
        let depth = lpann_core::hierarchy::descent_depth(4.0);
        let alpha = level_radius::<f64>((level - depth).max(0));
        let bound = packing_bound(2.0 * CANDIDATE_RADIUS_FACTOR * level_radius::<f64>(level), alpha, ddim);
        assert!(k as f64 <= bound.min(n as f64), "level {level}: {k} > {bound}");
        total += k * replicas.len();
    }
    assert_eq!(total, index.total_members() - (0..n).map(|w| index.bottom_oracle(w).members().len()).sum::<usize>());
    assert!(lp_norm(&[0.0], PNorm::new(3.0).unwrap()).unwrap() == 0.0);
}
