//! Approximate nearest-neighbor search in ℓ_p, `p > 2`.
//!
//! Two pipelines are provided:
//!
//! * [`linf`]: embed the data into ℓ∞ with a randomized Fréchet scaling and
//!   answer near-neighbor queries through a pluggable ℓ∞ oracle, driven by the
//!   radius ladder in [`reduction`].
//! * [`mazur`]: descend a net hierarchy ([`hierarchy`]) using bounded
//!   near-neighbor oracles built on the scaled Mazur map into ℓ₂.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the `*64`
//! aliases below name the `f64` instantiations used by the CLI and file formats.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // NaN-rejecting guards

pub mod embed;
pub mod error;
pub mod format;
pub mod hierarchy;
pub mod linf;
pub mod mazur;
pub mod metric;
pub mod oracle;
pub mod pointset;
pub mod reduction;
pub mod scalar;
pub mod seed;
pub mod stats;

pub use error::{LpError, Result};
pub use metric::{lp_dist, lp_norm, PNorm};
pub use oracle::{brute_force_near, brute_force_nn, DistanceReport};
pub use pointset::{LpanFile, PointSet};
pub use scalar::Scalar;
pub use stats::{set_stats, SetStats};

pub type PointSet64 = PointSet<f64>;
pub type PointSet32 = PointSet<f32>;

pub type FrechetEmbedding64 = embed::FrechetEmbedding<f64>;
pub type MazurParams64 = embed::MazurParams<f64>;
pub type JlProjection64 = embed::JlProjection<f64>;

pub type NetHierarchy64 = hierarchy::NetHierarchy<f64>;
pub type LinfAnnIndex64 = linf::LinfAnnIndex<f64>;
pub type AnnIndex64 = mazur::AnnIndex<f64>;
pub type AnnIndex32 = mazur::AnnIndex<f32>;
