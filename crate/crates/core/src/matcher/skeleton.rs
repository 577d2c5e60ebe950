//! Flattening of a computation into numbered pattern nodes.

use crate::ir::Type;
use crate::what::{Addr, Expr, HarnessSignature, ParamKind, Target, WhatProgram};

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Pat {
    Name(String),
    Const(i64),
    IntLoad { base: String, index: usize },
    Add(usize, usize),
    Mul(usize, usize),
    FloatLoad { base: String, index: usize },
    Product,
    Dot,
    Store { base: String, index: usize },
    Escape,
}

#[derive(Debug, Clone)]
pub(crate) struct Level {
    pub iterator: String,
    pub lower: usize,
    pub upper: usize,
}

/// Pattern nodes in a fixed order: each level's bounds from the outside in,
/// then the two accesses, the product, the reduction and the target.
/// Sub-expressions follow their parent.
#[derive(Debug, Clone)]
pub(crate) struct Skeleton {
    pub nodes: Vec<(Pat, String)>,
    pub levels: Vec<Level>,
    pub lhs: usize,
    pub rhs: usize,
    pub product: usize,
    pub dot: usize,
    pub target: usize,
    pub sig: HarnessSignature,
}

impl Skeleton {
    pub fn new(p: &WhatProgram, sig: HarnessSignature) -> Skeleton {
        let mut sk = Skeleton {
            nodes: Vec::new(),
            levels: Vec::new(),
            lhs: 0,
            rhs: 0,
            product: 0,
            dot: 0,
            target: 0,
            sig,
        };
        for r in p.levels() {
            let lower = sk.expr(&r.lower);
            let upper = sk.expr(&r.upper);
            sk.levels.push(Level {
                iterator: r.iterator.clone(),
                lower,
                upper,
            });
        }
        let d = p.dot();
        sk.lhs = sk.float_load(&d.lhs);
        sk.rhs = sk.float_load(&d.rhs);
        sk.product = sk.push(Pat::Product, format!("{} * {}", d.lhs, d.rhs));
        sk.dot = sk.push(Pat::Dot, format!("dot {}", d.range));
        sk.target = match &d.target {
            Target::Scalar(n) => sk.push(Pat::Escape, n.clone()),
            Target::Element(a) => {
                let id = sk.push(Pat::Escape, a.to_string());
                let index = sk.expr(&a.index);
                sk.nodes[id].0 = Pat::Store {
                    base: a.base.clone(),
                    index,
                };
                id
            }
        };
        sk
    }

    fn push(&mut self, pat: Pat, text: String) -> usize {
        self.nodes.push((pat, text));
        self.nodes.len() - 1
    }

    fn float_load(&mut self, a: &Addr) -> usize {
        let id = self.push(Pat::Escape, a.to_string());
        let index = self.expr(&a.index);
        self.nodes[id].0 = Pat::FloatLoad {
            base: a.base.clone(),
            index,
        };
        id
    }

    fn expr(&mut self, e: &Expr) -> usize {
        if let Some(c) = e.constant_value() {
            return self.push(Pat::Const(c), c.to_string());
        }
        let id = self.push(Pat::Escape, e.to_string());
        let pat = match e {
            Expr::Name(n) => Pat::Name(n.clone()),
            Expr::Const(c) => Pat::Const(*c),
            Expr::Addr(a) => Pat::IntLoad {
                base: a.base.clone(),
                index: self.expr(&a.index),
            },
            Expr::Add(a, b) => Pat::Add(self.expr(a), self.expr(b)),
            Expr::Mul(a, b) => Pat::Mul(self.expr(a), self.expr(b)),
        };
        self.nodes[id].0 = pat;
        id
    }

    /// IR type a free variable must have.
    pub fn var_type(&self, name: &str) -> Type {
        match self.sig.param(name).map(|p| p.kind) {
            Some(ParamKind::ArrayInt) => Type::PtrI64,
            Some(ParamKind::ArrayFloatIn | ParamKind::ArrayFloatOut) => Type::PtrF64,
            Some(ParamKind::ScalarInt) | None => Type::I64,
        }
    }
}
