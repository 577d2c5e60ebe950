//! Runtime support for marshaled harness arguments.
//!
//! A [`MarshalObject`] binds a library-side value (a device copy, a cached
//! scalar, a handle) to a range of host memory and runs user hooks according
//! to a fixed contract:
//!
//! * `construct` runs before the first use and whenever the bound address or
//!   size changes between invocations;
//! * `update` runs after every `construct` and whenever the bound memory was
//!   written since the previous invocation;
//! * `destruct` runs between consecutive `construct` calls and on release.
//!
//! Whether memory "was written" is answered by a [`TrackedRegion`] using one
//! of several [`Strategy`] implementations: hardware page protection, content
//! checksums, or an exact write-version counter supplied by the caller.

mod error;
pub mod hooks;
mod object;
pub mod protect;
mod region;
mod registry;

pub use error::{HookError, HookKind, MarshalError};
pub use hooks::{cached_invariant, HostCopy, LastElement, MaxPlusOne};
pub use object::{
    MarshalCounters, MarshalHooks, MarshalObject, ObjectState, WriteBackHooks, WriteBackObject,
};
pub use protect::PageBuf;
pub use region::{Element, RegionKey, RegionView, Strategy, TrackedRegion, STRATEGY_ENV};
pub use registry::{MarshalRegistry, ObjectId, RegionStats, ReleaseReport};
