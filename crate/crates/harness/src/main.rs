use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lpann_core::linf::BackendKind;
use lpann_core::mazur::CMode;
use lpann_core::{DistanceReport, LpanFile, PNorm, PointSet};
use lpann_harness::config::hex;
use lpann_harness::{
    audit_index, gen_dataset, run_experiment, verify_embeddings, BuiltIndex, DatasetKind, ExperimentConfig, Fault,
    HarnessError, Pipeline, VerifyConfig,
};
use sha2::{Digest, Sha256};

#[derive(Parser)]
#[command(name = "lpann", version, about = "Approximate nearest neighbors in l_p, p > 2")]
struct Cli {
    /// Root seed; also read from LPANN_SEED.
    #[arg(long, global = true, env = "LPANN_SEED")]
    seed: Option<u64>,
    /// Norm exponent.
    #[arg(long, global = true)]
    p: Option<f64>,
    /// linf, linf_ddim or mazur.
    #[arg(long, global = true)]
    pipeline: Option<Pipeline>,
    /// JSON experiment config; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a dataset: PREFIX.lpan, PREFIX.queries.lpan and, for planted
    /// data, PREFIX.truth.json.
    Gen {
        #[arg(long)]
        kind: Option<DatasetKind>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        d: Option<usize>,
        #[arg(long)]
        queries: Option<usize>,
        #[arg(long)]
        planted_distance: Option<f64>,
        #[arg(long)]
        manifold_dim: Option<usize>,
        #[arg(long)]
        noise: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build an index over an LPAN dataset and write it as LPIX.
    Build {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Heuristic c for the mazur pipeline (default p·18^{p/2}).
        #[arg(long)]
        c: Option<f64>,
        #[arg(long, value_parser = parse_backend)]
        backend: Option<BackendKind>,
        #[arg(long)]
        amplification: Option<usize>,
    },
    /// Answer queries from an LPAN batch or a single comma-separated point.
    Query {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        index: PathBuf,
        #[arg(long, conflicts_with = "point")]
        queries: Option<PathBuf>,
        #[arg(long, allow_hyphen_values = true)]
        point: Option<String>,
        /// Mazur indexes: refine answers to (1+eps)-ANN.
        #[arg(long)]
        refine: Option<f64>,
    },
    /// Run a full experiment; writes report.jsonl and index.lpix to --out.
    Bench {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Statistical checks of the embeddings.
    VerifyEmbed {
        #[arg(long, value_delimiter = ',')]
        p_list: Option<Vec<f64>>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        pairs: Option<usize>,
        #[arg(long)]
        fault: Option<Fault>,
    },
    /// Audit the invariants of an LPIX index over its dataset.
    VerifyIndex {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        index: PathBuf,
    },
}

fn parse_backend(s: &str) -> Result<BackendKind, String> {
    match s {
        "exact" => Ok(BackendKind::Exact),
        "grid" => Ok(BackendKind::Grid),
        _ => Err(format!("unknown backend {s:?} (exact, grid)")),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

/// `Ok(false)` when a check failed.
fn run(cli: Cli) -> lpann_harness::Result<bool> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(p) = cli.pipeline {
        cfg.pipeline = p;
    }
    if let Some(p) = cli.p {
        cfg.dataset.p = p;
    }
    match cli.command {
        Command::Gen { kind, n, d, queries, planted_distance, manifold_dim, noise, out } => {
            let spec = &mut cfg.dataset;
            if let Some(seed) = cli.seed {
                spec.seed = seed;
            }
            set(&mut spec.kind, kind);
            set(&mut spec.n, n);
            set(&mut spec.d, d);
            set(&mut spec.queries, queries);
            set(&mut spec.planted_distance, planted_distance);
            set(&mut spec.manifold_dim, manifold_dim);
            set(&mut spec.noise, noise);
            let ds = gen_dataset(spec)?;
            write_lpan(&with_suffix(&out, "lpan"), &ds.points.to_lpan())?;
            write_lpan(&with_suffix(&out, "queries.lpan"), &ds.queries_lpan()?)?;
            if let Some(truth) = &ds.truth {
                fs::write(with_suffix(&out, "truth.json"), serde_json::to_string_pretty(truth)?)?;
            }
            println!("wrote {} points and {} queries (n={}, d={})", ds.points.len(), ds.queries.len(), spec.n, spec.d);
            Ok(true)
        }
        Command::Build { data, out, c, backend, amplification } => {
            if let Some(seed) = cli.seed {
                cfg.seed = seed;
            }
            if let Some(c) = c {
                cfg.c_mode = CMode::Heuristic(c);
            }
            set(&mut cfg.backend, backend);
            set(&mut cfg.amplification_multiplier, amplification);
            let set = load_points(&data, cli.p)?;
            cfg.dataset.p = set.norm().exponent().unwrap_or(f64::INFINITY);
            cfg.refine_eps = None;
            cfg.validate()?;
            let index = BuiltIndex::build(&cfg, &set)?;
            let bytes = index.to_lpix()?;
            fs::write(&out, &bytes)?;
            println!("wrote {} ({} bytes, sha256 {})", out.display(), bytes.len(), hex(&Sha256::digest(&bytes)));
            Ok(true)
        }
        Command::Query { data, index, queries, point, refine } => {
            let set = load_points(&data, cli.p)?;
            let index = BuiltIndex::from_lpix(&fs::read(&index)?, &set)?;
            let batch: Vec<Vec<f64>> = match (queries, point) {
                (Some(path), _) => LpanFile::read_from(fs::File::open(path)?)?.rows(),
                (None, Some(text)) => vec![parse_point(&text)?],
                (None, None) => return Err(HarnessError::Config("pass --queries or --point".into())),
            };
            let stdout = std::io::stdout();
            let mut w = BufWriter::new(stdout.lock());
            for (qid, q) in batch.iter().enumerate() {
                let a = index.answer(q, refine)?;
                let report = DistanceReport::evaluate(&set, qid, q, Some(a.id))?;
                let line = serde_json::json!({
                    "query_id": qid,
                    "returned_id": a.id,
                    "dist": a.dist,
                    "opt_dist": report.opt_dist,
                    "ratio": report.ratio,
                    "case": a.case,
                    "certified_factor": a.certified_factor,
                    "oracle_calls": a.oracle_calls,
                    "refined": a.refined,
                });
                writeln!(w, "{line}")?;
            }
            Ok(true)
        }
        Command::Bench { out } => {
            if let Some(seed) = cli.seed {
                cfg.seed = seed;
                cfg.dataset.seed = seed;
            }
            let out = out.or_else(|| cfg.output.clone());
            let result = run_experiment(&cfg)?;
            if let Some(dir) = out {
                fs::create_dir_all(&dir)?;
                fs::write(dir.join("report.jsonl"), result.report.to_jsonl())?;
                fs::write(dir.join("index.lpix"), &result.lpix)?;
            }
            print!("{}", result.report.table());
            Ok(result.report.summary.passed())
        }
        Command::VerifyEmbed { p_list, trials, samples, pairs, fault } => {
            let mut v = VerifyConfig::default();
            if let Some(p) = cli.p {
                v.p_list = vec![p];
            }
            set(&mut v.p_list, p_list);
            set(&mut v.trials, trials);
            set(&mut v.samples, samples);
            set(&mut v.pairs, pairs);
            set(&mut v.seed, cli.seed);
            v.fault = fault;
            let report = verify_embeddings(&v)?;
            print!("{report}");
            Ok(report.passed())
        }
        Command::VerifyIndex { data, index } => {
            let set = load_points(&data, cli.p)?;
            let index = BuiltIndex::from_lpix(&fs::read(&index)?, &set)?;
            let report = audit_index(&index)?;
            print!("{report}");
            Ok(report.passed())
        }
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(".");
    s.push(suffix);
    PathBuf::from(s)
}

fn write_lpan(path: &Path, file: &LpanFile) -> lpann_harness::Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    file.write_to(&mut w)?;
    w.flush()?;
    Ok(())
}

fn load_points(path: &Path, p: Option<f64>) -> lpann_harness::Result<PointSet<f64>> {
    let set = PointSet::from_lpan(&LpanFile::read_from(std::io::BufReader::new(fs::File::open(path)?))?)?;
    Ok(match p {
        Some(p) => set.with_norm(PNorm::new(p)?)?,
        None => set,
    })
}

fn parse_point(text: &str) -> lpann_harness::Result<Vec<f64>> {
    text.split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|e| HarnessError::Config(format!("bad coordinate {s:?}: {e}"))))
        .collect()
}
