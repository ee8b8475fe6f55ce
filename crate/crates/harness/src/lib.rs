//! Dataset generators, the experiment runner, statistical verification and
//! index audits behind the `lpann` command.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // NaN-rejecting guards

pub mod audit;
pub mod config;
pub mod datasets;
pub mod error;
pub mod run;
pub mod verify;

pub use audit::audit_index;
pub use config::{ExperimentConfig, Pipeline};
pub use datasets::{gen_dataset, Dataset, DatasetKind, DatasetSpec, PlantedTruth};
pub use error::{HarnessError, Result};
pub use run::{run_experiment, BuiltIndex, RunOutput, RunReport};
pub use verify::{verify_embeddings, Check, Fault, VerifyConfig, VerifyReport};
