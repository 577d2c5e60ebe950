//! Library descriptions: harness bodies, marshaling classes and the
//! bindings that connect them to computation arguments.
//!
//! ```text
//! HARNESS cusparse_spmv IMPLEMENTS spmv_csr { ... }
//! Marshaling
//!     int nnz = ReadLast of row_ptr [0 .. rows + 1]
//! PersistentVariables
//!     cusparseHandle_t handle
//! BeforeFirstExecution { cusparseCreate(&handle); }
//! CppHeaderFiles
//!     cusparse_v2.h
//!
//! INPUT ReadLast { out = in[size - 1]; }
//! ```

use std::fmt;

pub(crate) mod parse;
mod validate;

pub use parse::parse_how;
pub use validate::{validate_how, HowDiagnostic};

use crate::what::Expr;

/// Verbatim C++ text between a pair of braces.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeBlock(pub String);

impl CodeBlock {
    pub fn text(&self) -> &str {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct HowProgram {
    pub harnesses: Vec<Harness>,
    pub classes: Vec<MarshalClassDef>,
}

impl HowProgram {
    pub fn is_empty(&self) -> bool {
        self.harnesses.is_empty() && self.classes.is_empty()
    }

    pub fn harness(&self, name: &str) -> Option<&Harness> {
        self.harnesses.iter().find(|h| h.name == name)
    }

    pub fn class(&self, name: &str) -> Option<&MarshalClassDef> {
        self.classes.iter().find(|c| c.name == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Harness {
    pub name: String,
    pub implements: String,
    pub code: CodeBlock,
    pub bindings: Vec<MarshalBinding>,
    pub persistent_vars: Vec<PersistentVar>,
    pub before_first: Option<CodeBlock>,
    pub after_last: Option<CodeBlock>,
    pub headers: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PersistentVar {
    pub ty: String,
    pub name: String,
}

/// `<out_type> <out_name> = <class> of <array> [0 .. <extent>]`
#[derive(Debug, Clone, PartialEq)]
pub struct MarshalBinding {
    pub out_type: String,
    pub out_name: String,
    pub class: String,
    pub array: String,
    pub extent: Expr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassKind {
    Input,
    Output,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarshalClassDef {
    pub kind: ClassKind,
    pub name: String,
    pub update: CodeBlock,
    pub construct: Option<CodeBlock>,
    pub destruct: Option<CodeBlock>,
}

impl fmt::Display for MarshalBinding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} = {} of {} [0 .. {}]",
            self.out_type, self.out_name, self.class, self.array, self.extent
        )
    }
}

impl fmt::Display for Harness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "HARNESS {} IMPLEMENTS {} {{{}}}",
            self.name, self.implements, self.code.0
        )?;
        if !self.bindings.is_empty() {
            writeln!(f, "Marshaling")?;
            for b in &self.bindings {
                writeln!(f, "    {b}")?;
            }
        }
        if !self.persistent_vars.is_empty() {
            writeln!(f, "PersistentVariables")?;
            for v in &self.persistent_vars {
                writeln!(f, "    {} {}", v.ty, v.name)?;
            }
        }
        if let Some(c) = &self.before_first {
            writeln!(f, "BeforeFirstExecution {{{}}}", c.0)?;
        }
        if let Some(c) = &self.after_last {
            writeln!(f, "AfterLastExecution {{{}}}", c.0)?;
        }
        if !self.headers.is_empty() {
            writeln!(f, "CppHeaderFiles")?;
            for h in &self.headers {
                writeln!(f, "    {h}")?;
            }
        }
        Ok(())
    }
}

impl fmt::Display for MarshalClassDef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kw = match self.kind {
            ClassKind::Input => "INPUT",
            ClassKind::Output => "OUTPUT",
        };
        writeln!(f, "{kw} {} {{{}}}", self.name, self.update.0)?;
        if let Some(c) = &self.construct {
            writeln!(f, "BeforeFirstExecution {{{}}}", c.0)?;
        }
        if let Some(c) = &self.destruct {
            writeln!(f, "AfterLastExecution {{{}}}", c.0)?;
        }
        Ok(())
    }
}

impl fmt::Display for HowProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for h in &self.harnesses {
            if !first {
                writeln!(f)?;
            }
            first = false;
            write!(f, "{h}")?;
        }
        for c in &self.classes {
            if !first {
                writeln!(f)?;
            }
            first = false;
            write!(f, "{c}")?;
        }
        Ok(())
    }
}
