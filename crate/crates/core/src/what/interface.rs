//! Harness signatures: the free variables of a computation with their kinds.

use std::fmt;

use serde::Serialize;
use thiserror::Error;

use super::{Addr, Body, Expr, Range, Target, WhatProgram};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParamKind {
    ScalarInt,
    ArrayInt,
    ArrayFloatIn,
    ArrayFloatOut,
}

impl ParamKind {
    pub fn name(self) -> &'static str {
        match self {
            ParamKind::ScalarInt => "scalar-int",
            ParamKind::ArrayInt => "array-int",
            ParamKind::ArrayFloatIn => "array-float-in",
            ParamKind::ArrayFloatOut => "array-float-out",
        }
    }

    pub fn is_array(self) -> bool {
        self != ParamKind::ScalarInt
    }
}

impl fmt::Display for ParamKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Param {
    pub name: String,
    pub kind: ParamKind,
}

/// Parameters in order of first appearance in the computation text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct HarnessSignature {
    pub computation: String,
    pub params: Vec<Param>,
}

impl HarnessSignature {
    pub fn param(&self, name: &str) -> Option<&Param> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|p| p.name == name)
    }
}

impl fmt::Display for HarnessSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.computation)?;
        for (i, p) in self.params.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{}: {}", p.name, p.kind)?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InterfaceError {
    #[error("`{name}` is used both as {first} and as {second}")]
    KindConflict {
        name: String,
        first: ParamKind,
        second: ParamKind,
    },
}

struct Collector<'p> {
    iterators: Vec<&'p str>,
    params: Vec<Param>,
}

impl<'p> Collector<'p> {
    fn note(&mut self, name: &str, kind: ParamKind) -> Result<(), InterfaceError> {
        if self.iterators.contains(&name) {
            return Ok(());
        }
        match self.params.iter().find(|p| p.name == name) {
            Some(p) if p.kind == kind => Ok(()),
            Some(p) => Err(InterfaceError::KindConflict {
                name: name.to_string(),
                first: p.kind,
                second: kind,
            }),
            None => {
                self.params.push(Param {
                    name: name.to_string(),
                    kind,
                });
                Ok(())
            }
        }
    }

    fn index_expr(&mut self, e: &Expr) -> Result<(), InterfaceError> {
        match e {
            Expr::Name(n) => self.note(n, ParamKind::ScalarInt),
            Expr::Const(_) => Ok(()),
            Expr::Addr(a) => self.addr(a, ParamKind::ArrayInt),
            Expr::Add(a, b) | Expr::Mul(a, b) => {
                self.index_expr(a)?;
                self.index_expr(b)
            }
        }
    }

    fn addr(&mut self, a: &Addr, kind: ParamKind) -> Result<(), InterfaceError> {
        self.note(&a.base, kind)?;
        self.index_expr(&a.index)
    }

    fn range(&mut self, r: &'p Range) -> Result<(), InterfaceError> {
        self.index_expr(&r.lower)?;
        self.index_expr(&r.upper)?;
        self.iterators.push(&r.iterator);
        Ok(())
    }

    fn body(&mut self, b: &'p Body) -> Result<(), InterfaceError> {
        match b {
            Body::ForAll(f) => {
                self.range(&f.range)?;
                self.body(&f.body)
            }
            Body::Dot(d) => {
                match &d.target {
                    Target::Scalar(n) => self.note(n, ParamKind::ArrayFloatOut)?,
                    Target::Element(a) => self.addr(a, ParamKind::ArrayFloatOut)?,
                }
                self.range(&d.range)?;
                self.addr(&d.lhs, ParamKind::ArrayFloatIn)?;
                self.addr(&d.rhs, ParamKind::ArrayFloatIn)
            }
        }
    }
}

/// Derives the harness signature of a computation.
pub fn infer_interface(p: &WhatProgram) -> Result<HarnessSignature, InterfaceError> {
    let mut c = Collector {
        iterators: Vec::new(),
        params: Vec::new(),
    };
    c.body(&p.body)?;
    Ok(HarnessSignature {
        computation: p.name.clone(),
        params: c.params,
    })
}
