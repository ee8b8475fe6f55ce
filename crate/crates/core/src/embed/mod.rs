//! Embeddings: randomized Fréchet scaling into ℓ∞, the scaled Mazur map into
//! ℓ₂, and a Gaussian Johnson–Lindenstrauss projection.

mod frechet;
mod jl;
mod mazur;

pub use frechet::{frechet_cdf, frechet_scale_b, net_contraction_threshold, sample_frechet, FrechetEmbedding};
pub use jl::{jl_target_dim, JlProjection, JL_EPS0, JL_MIN_DIM};
pub use mazur::{mazur_map, mazur_map_unsigned, MazurParams};
