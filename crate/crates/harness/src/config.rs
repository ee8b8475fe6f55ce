use std::path::{Path, PathBuf};

use lpann_core::linf::{BackendKind, LinfParams, LinfVariant};
use lpann_core::mazur::{AnnConfig, CMode, DEFAULT_EMBED_CACHE_BUDGET};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::datasets::DatasetSpec;
use crate::error::{config_err, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pipeline {
    #[default]
    Linf,
    LinfDdim,
    Mazur,
}

impl std::str::FromStr for Pipeline {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.replace('-', "_").as_str() {
            "linf" => Ok(Pipeline::Linf),
            "linf_ddim" => Ok(Pipeline::LinfDdim),
            "mazur" => Ok(Pipeline::Mazur),
            _ => Err(format!("unknown pipeline {s:?} (linf, linf_ddim, mazur)")),
        }
    }
}

impl std::fmt::Display for Pipeline {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Pipeline::Linf => "linf",
            Pipeline::LinfDdim => "linf_ddim",
            Pipeline::Mazur => "mazur",
        })
    }
}

/// Everything a run depends on. `output` only says where files go and is left
/// out of the hash and the report echo.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetSpec,
    pub pipeline: Pipeline,
    /// Root seed of the index build.
    pub seed: u64,
    pub c_mode: CMode,
    pub amplification_multiplier: usize,
    pub backend: BackendKind,
    pub extra_half_rung: bool,
    /// Mazur pipeline: also refine every answer to a `(1+eps)`-ANN.
    pub refine_eps: Option<f64>,
    pub embed_cache_budget: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dataset: DatasetSpec::default(),
            pipeline: Pipeline::Linf,
            seed: 0,
            c_mode: CMode::Standard,
            amplification_multiplier: 3,
            backend: BackendKind::Exact,
            extra_half_rung: false,
            refine_eps: None,
            embed_cache_budget: DEFAULT_EMBED_CACHE_BUDGET,
            output: None,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.amplification_multiplier == 0 {
            return Err(config_err("amplification_multiplier must be ≥ 1"));
        }
        if let Some(eps) = self.refine_eps {
            if !(eps > 0.0 && eps.is_finite()) {
                return Err(config_err("refine_eps must be positive"));
            }
            if self.pipeline != Pipeline::Mazur {
                return Err(config_err("refine_eps applies to the mazur pipeline only"));
            }
        }
        if !(self.dataset.p > 2.0) {
            return Err(config_err(format!("both pipelines need p > 2, got {}", self.dataset.p)));
        }
        Ok(())
    }

    /// The config as echoed into reports.
    pub fn echo(&self) -> ExperimentConfig {
        ExperimentConfig { output: None, ..self.clone() }
    }

    /// Hex SHA-256 of the canonical JSON echo.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(&self.echo()).expect("config serializes");
        hex(&Sha256::digest(json))
    }

    pub fn linf_params(&self) -> LinfParams {
        LinfParams {
            variant: if self.pipeline == Pipeline::LinfDdim { LinfVariant::Ddim } else { LinfVariant::Cardinality },
            backend: self.backend,
            amplification_multiplier: self.amplification_multiplier,
            extra_half_rung: self.extra_half_rung,
            seed: self.seed,
        }
    }

    pub fn ann_config(&self) -> AnnConfig {
        AnnConfig {
            c_mode: self.c_mode,
            amplification_multiplier: self.amplification_multiplier,
            seed: self.seed,
            embed_cache_budget: self.embed_cache_budget,
        }
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip_and_defaults() {
        let cfg: ExperimentConfig =
            serde_json::from_str(r#"{"pipeline":"mazur","c_mode":{"heuristic":6.0},"dataset":{"n":10}}"#).unwrap();
        assert_eq!(cfg.pipeline, Pipeline::Mazur);
        assert_eq!(cfg.c_mode, CMode::Heuristic(6.0));
        assert_eq!(cfg.dataset.d, 16);
        let back: ExperimentConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"pipline":"mazur"}"#).is_err());
    }

    #[test]
    fn hash_ignores_output() {
        let a = ExperimentConfig::default();
        let b = ExperimentConfig { output: Some("/tmp/x".into()), ..a.clone() };
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), ExperimentConfig { seed: 1, ..a.clone() }.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn validation() {
        let mut cfg = ExperimentConfig { refine_eps: Some(0.1), ..Default::default() };
        assert!(cfg.validate().is_err());
        cfg.pipeline = Pipeline::Mazur;
        assert!(cfg.validate().is_ok());
        cfg.dataset.p = 2.0;
        assert!(cfg.validate().is_err());
        assert_eq!("linf-ddim".parse::<Pipeline>().unwrap(), Pipeline::LinfDdim);
    }
}
