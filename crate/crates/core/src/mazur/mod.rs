//! ℓ_p nearest-neighbor search by descending a net hierarchy.
//!
//! Each node `t` on level `i` owns bounded near-neighbor oracles over its
//! candidate set `N(t, i)`, embedded into ℓ₂ with the scaled Mazur map. The
//! query keeps one point of interest per level with `d(t, q) ≤ 3·2^i` and
//! stops in one of three ways, each with a certified approximation factor:
//! the query is far from the root (factor 3), the bottom level is reached
//! (factor 2 on an oracle hit, `c/2` otherwise), or an oracle returns null
//! (factor `6c`). [`refine_ann`] turns any of these into a `(1+ε)` answer.

mod bnn;
mod descent;
mod index;

pub use bnn::{bnn_c, BnnOracle, BnnOutcome, EMBEDDED_RADIUS};
pub use descent::{
    coarse_start, query_ann, refine_ann, AnnAnswer, DescentStep, DescentTrace, StepOutcome, TerminationCase,
};
pub use index::{
    build_ann_index, build_bnn_oracle, query_bnn, replica_count, AnnConfig, AnnIndex, CMode, BOTTOM_RADIUS,
    DEFAULT_EMBED_CACHE_BUDGET,
};
