//! Detection of sparse and dense linear-algebra idioms in a small SSA IR,
//! driven by declarative computation specifications.
//!
//! The pipeline mirrors a compiler pass: a specification file (`.lilac`)
//! declares *what* a library computes ([`what`]) and *how* to call it
//! ([`how`]). [`matcher::detect`] finds loop nests in normalized IR
//! ([`ir`], [`analysis`]) that implement a computation, [`rewrite`] replaces
//! them with harness calls, and [`harnessgen`] emits harness source from the
//! library description. [`interp`] executes modules and serves as the
//! semantic oracle for every transformation.

pub mod analysis;
pub mod harnessgen;
pub mod how;
pub mod interp;
pub mod ir;
pub mod matcher;
pub mod rewrite;
pub mod spec;
mod syntax;
pub mod what;

pub use spec::{parse_spec, SpecError, SpecFile};

/// Version of the `.lir` text format and `.lilac` syntax understood by this
/// build.
pub const FORMAT_VERSION: &str = "lir-1 lilac-1";
