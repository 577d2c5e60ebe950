use std::fmt;

use thiserror::Error;

/// Which of the three marshaling hooks was running.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HookKind {
    Construct,
    Update,
    Destruct,
}

impl fmt::Display for HookKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HookKind::Construct => "construct",
            HookKind::Update => "update",
            HookKind::Destruct => "destruct",
        })
    }
}

/// Failure reported by a user hook.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{0}")]
pub struct HookError(pub String);

impl HookError {
    pub fn new(msg: impl Into<String>) -> Self {
        HookError(msg.into())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MarshalError {
    #[error("{which} hook failed for region `{region}`: {source}")]
    HookFailure {
        region: String,
        which: HookKind,
        source: HookError,
    },
    #[error("page protection is not available: {0}")]
    ProtectionUnsupported(String),
    #[error("exact-version tracking requires a write version for region `{0}`")]
    VersionUnavailable(String),
    #[error("unknown marshal strategy `{0}` (expected pageprotect, checksum, exact or naive)")]
    UnknownStrategy(String),
}
