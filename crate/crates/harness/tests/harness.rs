use std::process::Command;

use lpann_core::{brute_force_nn, set_stats};
use lpann_harness::verify::Fault;
use lpann_harness::{
    audit_index, gen_dataset, run_experiment, verify_embeddings, BuiltIndex, DatasetKind, DatasetSpec,
    ExperimentConfig, Pipeline, VerifyConfig,
};

fn spec(kind: DatasetKind, n: usize, d: usize) -> DatasetSpec {
    DatasetSpec { kind, n, d, seed: 3, queries: 40, ..Default::default() }
}

fn cfg(dataset: DatasetSpec, pipeline: Pipeline) -> ExperimentConfig {
    ExperimentConfig { dataset, pipeline, seed: 5, ..Default::default() }
}

#[test]
fn planted_truth_is_the_exact_neighbor() {
    let ds = gen_dataset(&spec(DatasetKind::Planted, 300, 8)).unwrap();
    let truth = ds.truth.as_ref().unwrap();
    for (q, t) in ds.queries.iter().zip(truth) {
        let (id, dist) = brute_force_nn(&ds.points, q).unwrap();
        assert_eq!((id, dist), (t.id, t.dist));
        assert_eq!(dist, 1.0);
    }
}

#[test]
fn manifold_has_low_ddim() {
    let ds = gen_dataset(&DatasetSpec { manifold_dim: 2, ..spec(DatasetKind::LowdimManifold, 1000, 64) }).unwrap();
    let s = set_stats(&ds.points).unwrap();
    assert!(s.ddim_est <= 5.0, "{}", s.ddim_est);
}

#[test]
fn single_point_dataset() {
    for pipeline in [Pipeline::Mazur, Pipeline::Linf, Pipeline::LinfDdim] {
        let out = run_experiment(&cfg(spec(DatasetKind::Gaussian, 1, 4), pipeline)).unwrap();
        assert!(out.report.summary.passed(), "{pipeline}");
        for r in &out.report.queries {
            assert_eq!((r.report.returned_id, r.report.ratio), (Some(0), Some(1.0)), "{pipeline}");
        }
    }
}

#[test]
fn lpix_round_trip_then_audit() {
    for (pipeline, kind) in [
        (Pipeline::Mazur, DatasetKind::Planted),
        (Pipeline::Linf, DatasetKind::Gaussian),
        (Pipeline::LinfDdim, DatasetKind::Grid),
    ] {
        let out = run_experiment(&cfg(spec(kind, 256, 2), pipeline)).unwrap();
        let loaded = BuiltIndex::from_lpix(&out.lpix, &out.dataset.points).unwrap();
        assert_eq!(loaded.to_lpix().unwrap(), out.lpix, "{pipeline}");
        let audit = audit_index(&loaded).unwrap();
        assert!(audit.passed(), "{pipeline}\n{audit}");
        for q in &out.dataset.queries {
            assert_eq!(loaded.answer(q, None).unwrap(), out.index.answer(q, None).unwrap());
        }
    }
}

#[test]
fn lpix_rejects_other_dataset() {
    let out = run_experiment(&cfg(spec(DatasetKind::Gaussian, 100, 4), Pipeline::Mazur)).unwrap();
    let other = gen_dataset(&DatasetSpec { seed: 4, ..spec(DatasetKind::Gaussian, 100, 4) }).unwrap();
    assert!(BuiltIndex::from_lpix(&out.lpix, &other.points).is_err());
}

#[test]
fn runs_are_deterministic() {
    let c = ExperimentConfig { refine_eps: Some(0.2), ..cfg(spec(DatasetKind::Gaussian, 300, 8), Pipeline::Mazur) };
    let a = run_experiment(&c).unwrap();
    let b = run_experiment(&c).unwrap();
    assert_eq!(a.report.to_jsonl(), b.report.to_jsonl());
    assert_eq!(a.lpix, b.lpix);
    let other = run_experiment(&ExperimentConfig { seed: 6, ..c.clone() }).unwrap();
    assert_ne!(a.report.header.config_hash, other.report.header.config_hash);
}

#[test]
fn report_layout() {
    let out = run_experiment(&cfg(spec(DatasetKind::Planted, 200, 4), Pipeline::Mazur)).unwrap();
    let text = out.report.to_jsonl();
    let lines: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 40 + 2);
    assert_eq!(lines[0]["record"], "header");
    assert_eq!(lines[41]["record"], "summary");
    assert!(lines[1..41].iter().all(|l| l["record"] == "query"));
    assert_eq!(out.report.summary.truth_matches, Some(40));
}

#[test]
fn faults_are_caught() {
    let base = VerifyConfig { p_list: vec![3.0], trials: 100, samples: 100_000, pairs: 2_000, seed: 1, fault: None };
    let clean = verify_embeddings(&base).unwrap();
    assert!(clean.passed(), "{clean}");
    for fault in [Fault::UnsignedMazur, Fault::HalvedB] {
        let report = verify_embeddings(&VerifyConfig { fault: Some(fault), ..base.clone() }).unwrap();
        assert!(!report.passed(), "{fault:?} went unnoticed\n{report}");
    }
}

fn lpann(args: &[&str], dir: &std::path::Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_lpann")).args(args).current_dir(dir).env_remove("LPANN_SEED").output().unwrap()
}

#[test]
fn cli_round_trip_and_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let gen = lpann(&["gen", "--kind", "planted", "--n", "200", "--d", "4", "--queries", "10", "--out", "data"], dir);
    assert!(gen.status.success(), "{}", String::from_utf8_lossy(&gen.stderr));
    assert!(lpann(&["build", "--data", "data.lpan", "--out", "idx.lpix", "--pipeline", "mazur"], dir).status.success());

    let query = lpann(&["query", "--data", "data.lpan", "--index", "idx.lpix", "--queries", "data.queries.lpan"], dir);
    assert!(query.status.success(), "{}", String::from_utf8_lossy(&query.stderr));
    assert_eq!(String::from_utf8(query.stdout).unwrap().lines().count(), 10);

    let audit = lpann(&["verify-index", "--data", "data.lpan", "--index", "idx.lpix"], dir);
    assert_eq!(audit.status.code(), Some(0), "{}", String::from_utf8_lossy(&audit.stdout));

    let fault = lpann(
        &[
            "verify-embed",
            "--p-list",
            "3",
            "--trials",
            "50",
            "--samples",
            "5000",
            "--pairs",
            "500",
            "--fault",
            "unsigned-mazur",
        ],
        dir,
    );
    assert_eq!(fault.status.code(), Some(1));

    let missing = lpann(&["query", "--data", "nope.lpan", "--index", "idx.lpix", "--point", "0,0,0,0"], dir);
    assert_eq!(missing.status.code(), Some(2));
    let bad_dim = lpann(&["query", "--data", "data.lpan", "--index", "idx.lpix", "--point", "0,0"], dir);
    assert_eq!(bad_dim.status.code(), Some(2));
}

#[test]
fn seed_flag_beats_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |seed_env: Option<&str>, flag: Option<&str>, out: &str| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_lpann"));
        cmd.current_dir(tmp.path()).env_remove("LPANN_SEED");
        if let Some(s) = seed_env {
            cmd.env("LPANN_SEED", s);
        }
        cmd.args(["bench", "--pipeline", "linf", "--out", out]);
        if let Some(s) = flag {
            cmd.args(["--seed", s]);
        }
        assert!(cmd.output().unwrap().status.success());
        std::fs::read(tmp.path().join(out).join("report.jsonl")).unwrap()
    };
    let env_only = run(Some("8"), None, "a");
    let flag_only = run(None, Some("8"), "b");
    let both = run(Some("9"), Some("8"), "c");
    assert_eq!(env_only, flag_only);
    assert_eq!(flag_only, both);
}
