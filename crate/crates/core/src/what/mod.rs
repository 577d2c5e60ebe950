//! The computation language: nested `forall` ranges around one dot product.
//!
//! ```text
//! COMPUTATION spmv_csr
//! forall (0 <= i < rows) {
//!     output[i] = dot (row_ptr[i] <= j < row_ptr[i + 1]) val[j] * x[col_ind[j]];
//! }
//! ```

use std::fmt;

pub mod exec;
pub mod interface;
pub(crate) mod parse;

pub use exec::{execute, interpret_what, Bindings, ExecError, Value, WhatEnv};
pub use interface::{infer_interface, HarnessSignature, InterfaceError, Param, ParamKind};
pub use parse::parse_what;

#[derive(Debug, Clone, PartialEq)]
pub struct WhatProgram {
    pub name: String,
    pub body: Body,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Body {
    ForAll(ForAll),
    Dot(DotOp),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForAll {
    pub range: Range,
    pub body: Box<Body>,
}

/// `lower <= iterator < upper`
#[derive(Debug, Clone, PartialEq)]
pub struct Range {
    pub lower: Expr,
    pub iterator: String,
    pub upper: Expr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReductionKeyword {
    Dot,
    Sum,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DotOp {
    pub target: Target,
    pub keyword: ReductionKeyword,
    pub range: Range,
    pub lhs: Addr,
    pub rhs: Addr,
}

/// Where a dot product stores its result.
#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    /// A scalar result, passed to harnesses as a one-element array.
    Scalar(String),
    Element(Addr),
}

impl Target {
    pub fn base(&self) -> &str {
        match self {
            Target::Scalar(n) => n,
            Target::Element(a) => &a.base,
        }
    }
}

/// `base[index]`
#[derive(Debug, Clone, PartialEq)]
pub struct Addr {
    pub base: String,
    pub index: Box<Expr>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Name(String),
    Const(i64),
    Addr(Addr),
    Add(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
}

impl Expr {
    /// Value of an expression without names or array accesses.
    pub fn constant_value(&self) -> Option<i64> {
        match self {
            Expr::Const(c) => Some(*c),
            Expr::Name(_) | Expr::Addr(_) => None,
            Expr::Add(a, b) => Some(a.constant_value()?.wrapping_add(b.constant_value()?)),
            Expr::Mul(a, b) => Some(a.constant_value()?.wrapping_mul(b.constant_value()?)),
        }
    }

    pub fn mentions(&self, name: &str) -> bool {
        match self {
            Expr::Name(n) => n == name,
            Expr::Const(_) => false,
            Expr::Addr(a) => a.base == name || a.index.mentions(name),
            Expr::Add(a, b) | Expr::Mul(a, b) => a.mentions(name) || b.mentions(name),
        }
    }
}

impl WhatProgram {
    pub fn dot(&self) -> &DotOp {
        let mut body = &self.body;
        loop {
            match body {
                Body::ForAll(f) => body = &f.body,
                Body::Dot(d) => return d,
            }
        }
    }

    /// Number of `forall` levels around the dot product.
    pub fn depth(&self) -> usize {
        self.levels().len() - 1
    }

    /// Every range from the outermost `forall` to the dot product's own.
    pub fn levels(&self) -> Vec<&Range> {
        let mut out = Vec::new();
        let mut body = &self.body;
        loop {
            match body {
                Body::ForAll(f) => {
                    out.push(&f.range);
                    body = &f.body;
                }
                Body::Dot(d) => {
                    out.push(&d.range);
                    return out;
                }
            }
        }
    }

    pub fn iterators(&self) -> Vec<&str> {
        self.levels().iter().map(|r| r.iterator.as_str()).collect()
    }
}

fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Add(..) => 1,
        Expr::Mul(..) => 2,
        _ => 3,
    }
}

fn fmt_operand(e: &Expr, parent: u8, right: bool, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    let p = prec(e);
    if p < parent || (right && p == parent) {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Name(n) => f.write_str(n),
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Addr(a) => write!(f, "{a}"),
            Expr::Add(a, b) => {
                fmt_operand(a, 1, false, f)?;
                f.write_str(" + ")?;
                fmt_operand(b, 1, true, f)
            }
            Expr::Mul(a, b) => {
                fmt_operand(a, 2, false, f)?;
                f.write_str(" * ")?;
                fmt_operand(b, 2, true, f)
            }
        }
    }
}

impl fmt::Display for Addr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{}]", self.base, self.index)
    }
}

impl fmt::Display for Range {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({} <= {} < {})", self.lower, self.iterator, self.upper)
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::Scalar(n) => f.write_str(n),
            Target::Element(a) => write!(f, "{a}"),
        }
    }
}

impl fmt::Display for DotOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kw = match self.keyword {
            ReductionKeyword::Dot => "dot",
            ReductionKeyword::Sum => "sum",
        };
        write!(
            f,
            "{} = {kw} {} {} * {};",
            self.target, self.range, self.lhs, self.rhs
        )
    }
}

fn fmt_body(body: &Body, depth: usize, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    let pad = "    ".repeat(depth);
    match body {
        Body::Dot(d) => writeln!(f, "{pad}{d}"),
        Body::ForAll(fa) => {
            writeln!(f, "{pad}forall {} {{", fa.range)?;
            fmt_body(&fa.body, depth + 1, f)?;
            writeln!(f, "{pad}}}")
        }
    }
}

impl fmt::Display for WhatProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "COMPUTATION {}", self.name)?;
        fmt_body(&self.body, 0, f)
    }
}
