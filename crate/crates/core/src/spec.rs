//! `.lilac` specification files: any mix of `COMPUTATION`, `HARNESS`,
//! `INPUT` and `OUTPUT` items.

use std::fmt;

use thiserror::Error;

use crate::how::{self, HowProgram};
use crate::syntax::Cursor;
use crate::what::{self, WhatProgram};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SpecError {
    #[error("{line}:{col}: syntax error: {msg}")]
    Syntax {
        line: usize,
        col: usize,
        msg: String,
    },
    #[error("{line}:{col}: iterator `{name}` is already bound by an enclosing range")]
    DuplicateIterator {
        name: String,
        line: usize,
        col: usize,
    },
    #[error("{line}:{col}: computation has no dot product")]
    EmptyBody { line: usize, col: usize },
    #[error("{line}:{col}: `{base}` is indexed more than once; only one-dimensional arrays are supported")]
    MultiIndexUnsupported {
        base: String,
        line: usize,
        col: usize,
    },
    #[error("{line}:{col}: iterator `{name}` is used outside its range")]
    IteratorOutOfScope {
        name: String,
        line: usize,
        col: usize,
    },
    #[error("{line}:{col}: iterator `{name}` is used as an array")]
    IteratorAsArray {
        name: String,
        line: usize,
        col: usize,
    },
    #[error("{line}:{col}: bounds of `{name}` refer to `{name}` itself")]
    RangeSelfReference {
        name: String,
        line: usize,
        col: usize,
    },
    #[error("{line}:{col}: dot operand `{name}` must be an indexed array")]
    UnindexedOperand {
        name: String,
        line: usize,
        col: usize,
    },
    #[error("result array `{name}` is also read by the dot product")]
    TargetAliasesOperand { name: String },
    #[error("computation `{0}` is defined twice")]
    DuplicateComputation(String),
    #[error("harness `{0}` is defined twice")]
    DuplicateHarness(String),
    #[error("marshaling class `{0}` is defined twice")]
    DuplicateClass(String),
    #[error("harness `{harness}` has two `{section}` sections")]
    DuplicateSection { harness: String, section: String },
    #[error("{line}:{col}: unbalanced code block")]
    UnbalancedCodeBlock { line: usize, col: usize },
}

/// A parsed specification file.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SpecFile {
    pub computations: Vec<WhatProgram>,
    pub how: HowProgram,
}

impl SpecFile {
    pub fn computation(&self, name: &str) -> Option<&WhatProgram> {
        self.computations.iter().find(|c| c.name == name)
    }
}

/// Parses a specification file containing computations and library
/// descriptions in any order.
pub fn parse_spec(text: &str) -> Result<SpecFile, SpecError> {
    let mut cur = Cursor::new(text);
    let mut spec = SpecFile::default();
    while !cur.at_eof() {
        match cur.peek_ident() {
            Some("COMPUTATION") => {
                let p = what::parse::computation(&mut cur)?;
                if spec.computation(&p.name).is_some() {
                    return Err(SpecError::DuplicateComputation(p.name));
                }
                spec.computations.push(p);
            }
            Some("HARNESS" | "INPUT" | "OUTPUT") => how::parse::item(&mut cur, &mut spec.how)?,
            _ => {
                return Err({
                    let found = cur.describe_next();
                    cur.syntax(format!(
                        "expected COMPUTATION, HARNESS, INPUT or OUTPUT, found {found}"
                    ))
                })
            }
        }
    }
    Ok(spec)
}

impl fmt::Display for SpecFile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for c in &self.computations {
            if !first {
                writeln!(f)?;
            }
            first = false;
            write!(f, "{c}")?;
        }
        if !self.how.is_empty() {
            if !first {
                writeln!(f)?;
            }
            write!(f, "{}", self.how)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mixed_file_round_trips() {
        let text = "COMPUTATION dotproduct\nresult = sum (0 <= i < length) a[i] * b[i];\n\
                    HARNESS h IMPLEMENTS dotproduct { run(); }\nINPUT Copy { copy(); }\n";
        let spec = parse_spec(text).unwrap();
        assert_eq!(spec.computations.len(), 1);
        assert_eq!(spec.how.harnesses.len(), 1);
        assert_eq!(spec.how.classes.len(), 1);
        let again = parse_spec(&spec.to_string()).unwrap();
        assert_eq!(again, spec);
    }

    #[test]
    fn duplicate_computation_is_rejected() {
        let text = "COMPUTATION d r = dot (0 <= i < n) a[i] * b[i];\n\
                    COMPUTATION d r = dot (0 <= i < n) a[i] * b[i];";
        assert_eq!(
            parse_spec(text).unwrap_err(),
            SpecError::DuplicateComputation("d".into())
        );
    }

    #[test]
    fn stray_tokens_are_syntax_errors() {
        assert!(matches!(
            parse_spec("forall").unwrap_err(),
            SpecError::Syntax {
                line: 1,
                col: 1,
                ..
            }
        ));
    }
}
