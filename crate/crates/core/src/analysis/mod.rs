//! Control-flow analyses and the normalization pipeline that prepares
//! functions for idiom detection.

pub mod cfg;
pub mod dom;
pub mod loops;
pub mod normalize;

pub use cfg::Cfg;
pub use dom::DomTree;
pub use loops::{
    canonical_iv, find_loops, find_loops_with, is_invariant, loop_bounds, InductionVar, Loop,
    LoopBounds, LoopDiagnostic, LoopNest, NonCanonical,
};
pub use normalize::{normalize, normalize_function, normalize_with_report, NormalizeReport};
