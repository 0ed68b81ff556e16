//! Symbolic dynamics of one-dimensional Lorenz-type maps: reduction of a
//! two-dimensional map to `ȳ = G(y)`, kneading invariants, the full-shift
//! test and topological Markov chains.

mod dd;
mod map1d;
mod markov;
mod reduce;
mod symbols;

pub use dd::{Dd, Scalar};
pub use map1d::{orbit, FitInfo, IntervalMap1D, Side};
pub use markov::{
    build_transition_matrix, core_interval, spectral_radius, verify_two_full_branches,
    TransitionMatrix, MIN_CELL_WIDTH, POWER_MAX_ITER, POWER_TOL,
};
pub use reduce::{reduce_to_1d, REDUCTION_BINS, REDUCTION_THRESHOLD};
pub use symbols::{
    compare_kneading, itinerary, itinerary_with, kneading_sequence, twisted_cmp, Itinerary,
    KneadingComparison, KneadingInvariant, SideComparison, Symbol,
};
