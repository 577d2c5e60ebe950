//! Random well-typed modules and computations for property tests.
//!
//! Generated functions have the signature
//! `@f(%a: ptr f64, %b: ptr i64, %n: i64, %k: i64) -> f64` and only index
//! the arrays with loop counters bounded by `%n` or with small literals, so
//! they run without traps whenever `n <= ARRAY_LEN` and `b` holds values in
//! `0..ARRAY_LEN`.

use lilac_core::ir::{BinOp, Block, Function, Inst, InstKind, Module, Operand, Param, Pred, Type};
use lilac_core::what::{
    Addr, Body, DotOp, Expr, ForAll, Range, ReductionKeyword, Target, WhatProgram,
};
use rand::seq::SliceRandom;
use rand::Rng;
use serde_json::{json, Value as Json};

pub const ARRAY_LEN: usize = 8;

const FLOATS: [f64; 6] = [0.5, -1.25, 2.0, 3.0, 1e-3, -0.0];

struct Builder<'r, R: Rng> {
    rng: &'r mut R,
    blocks: Vec<Block>,
    next: usize,
    ints: Vec<Vec<String>>,
    floats: Vec<Vec<String>>,
    counters: Vec<String>,
    loops: usize,
}

impl<R: Rng> Builder<'_, R> {
    fn fresh(&mut self, stem: &str) -> String {
        self.next += 1;
        format!("{stem}{}", self.next)
    }

    fn label(&self) -> String {
        self.blocks.last().unwrap().label.clone()
    }

    fn emit(&mut self, result: Option<&str>, kind: InstKind) {
        self.blocks
            .last_mut()
            .unwrap()
            .insts
            .push(Inst::new(result, kind));
    }

    fn start(&mut self, label: &str) {
        self.blocks.push(Block {
            label: label.to_string(),
            insts: Vec::new(),
        });
    }

    fn pick(&mut self, pool: fn(&Self) -> Vec<String>) -> Option<String> {
        pool(self).choose(self.rng).cloned()
    }

    fn all_ints(&self) -> Vec<String> {
        self.ints.concat()
    }

    fn all_floats(&self) -> Vec<String> {
        self.floats.concat()
    }

    fn int_operand(&mut self) -> Operand {
        match self.pick(Self::all_ints) {
            Some(v) if self.rng.gen_bool(0.8) => Operand::Value(v),
            _ => Operand::Int(self.rng.gen_range(-5..=5)),
        }
    }

    fn float_operand(&mut self) -> Operand {
        match self.pick(Self::all_floats) {
            Some(v) if self.rng.gen_bool(0.8) => Operand::Value(v),
            _ => Operand::Float(*FLOATS.choose(self.rng).unwrap()),
        }
    }

    fn index(&mut self) -> Operand {
        match self.counters.choose(self.rng) {
            Some(c) if self.rng.gen_bool(0.7) => Operand::Value(c.clone()),
            _ => Operand::Int(self.rng.gen_range(0..ARRAY_LEN as i64)),
        }
    }

    fn define_int(&mut self, v: String) {
        self.ints.last_mut().unwrap().push(v);
    }

    fn define_float(&mut self, v: String) {
        self.floats.last_mut().unwrap().push(v);
    }

    fn push_scope(&mut self) {
        self.ints.push(Vec::new());
        self.floats.push(Vec::new());
    }

    fn pop_scope(&mut self) {
        self.ints.pop();
        self.floats.pop();
    }

    fn load(&mut self, base: &str, float: bool) -> String {
        let p = self.fresh("p");
        let index = self.index();
        self.emit(
            Some(&p),
            InstKind::ElemPtr {
                base: Operand::value(base),
                index,
            },
        );
        let v = self.fresh("v");
        self.emit(
            Some(&v),
            InstKind::Load {
                ptr: Operand::value(&p),
            },
        );
        if float {
            self.define_float(v.clone());
        } else {
            self.define_int(v.clone());
        }
        v
    }

    fn statement(&mut self, depth: usize) {
        let choice = self.rng.gen_range(0..if depth < 2 { 9 } else { 7 });
        match choice {
            0 | 1 => {
                let op = *[BinOp::Add, BinOp::Sub, BinOp::Mul]
                    .choose(self.rng)
                    .unwrap();
                let (lhs, rhs) = (self.int_operand(), self.int_operand());
                let v = self.fresh("v");
                self.emit(Some(&v), InstKind::Binary { op, lhs, rhs });
                self.define_int(v);
            }
            2 | 3 => {
                let op = *[BinOp::FAdd, BinOp::FSub, BinOp::FMul]
                    .choose(self.rng)
                    .unwrap();
                let (lhs, rhs) = (self.float_operand(), self.float_operand());
                let v = self.fresh("v");
                self.emit(Some(&v), InstKind::Binary { op, lhs, rhs });
                self.define_float(v);
            }
            4 => {
                self.load("a", true);
            }
            5 => {
                self.load("b", false);
            }
            6 => {
                let p = self.fresh("p");
                let index = self.index();
                self.emit(
                    Some(&p),
                    InstKind::ElemPtr {
                        base: Operand::value("a"),
                        index,
                    },
                );
                let value = self.float_operand();
                self.emit(
                    None,
                    InstKind::Store {
                        value,
                        ptr: Operand::value(&p),
                    },
                );
            }
            7 => self.diamond(depth),
            _ if self.loops < 3 => self.counted_loop(depth),
            _ => self.diamond(depth),
        }
    }

    fn sequence(&mut self, depth: usize) {
        for _ in 0..self.rng.gen_range(1..5) {
            self.statement(depth);
        }
    }

    fn diamond(&mut self, depth: usize) {
        let pred = *[Pred::Eq, Pred::Ne, Pred::Slt, Pred::Sle]
            .choose(self.rng)
            .unwrap();
        let (lhs, rhs) = (self.int_operand(), self.int_operand());
        let c = self.fresh("c");
        self.emit(Some(&c), InstKind::Icmp { pred, lhs, rhs });
        let (then_bb, else_bb, join) = (self.fresh("then"), self.fresh("else"), self.fresh("join"));
        self.emit(
            None,
            InstKind::CondBr {
                cond: Operand::value(&c),
                then_bb: then_bb.clone(),
                else_bb: else_bb.clone(),
            },
        );
        let mut arms = Vec::new();
        for label in [then_bb, else_bb] {
            self.start(&label);
            self.push_scope();
            if self.rng.gen_bool(0.8) {
                self.sequence(depth + 1);
            }
            let i = self.int_operand();
            let x = self.float_operand();
            arms.push((i, x, self.label()));
            self.emit(
                None,
                InstKind::Br {
                    target: join.clone(),
                },
            );
            self.pop_scope();
        }
        self.start(&join);
        let vi = self.fresh("m");
        let vx = self.fresh("m");
        self.emit(
            Some(&vi),
            InstKind::Phi {
                incoming: arms
                    .iter()
                    .map(|(i, _, l)| (i.clone(), l.clone()))
                    .collect(),
            },
        );
        self.emit(
            Some(&vx),
            InstKind::Phi {
                incoming: arms
                    .iter()
                    .map(|(_, x, l)| (x.clone(), l.clone()))
                    .collect(),
            },
        );
        self.define_int(vi);
        self.define_float(vx);
    }

    fn counted_loop(&mut self, depth: usize) {
        self.loops += 1;
        let init = self.float_operand();
        let pre = self.label();
        let (header, body, exit) = (self.fresh("head"), self.fresh("body"), self.fresh("exit"));
        let (i, acc) = (self.fresh("i"), self.fresh("acc"));
        let (i_next, acc_next, more) =
            (format!("{i}.next"), format!("{acc}.next"), self.fresh("c"));
        self.emit(
            None,
            InstKind::Br {
                target: header.clone(),
            },
        );
        self.start(&header);
        let phi_at = self.blocks.len() - 1;
        self.start(&body);
        self.push_scope();
        self.counters.push(i.clone());
        self.define_int(i.clone());
        self.define_float(acc.clone());
        self.sequence(depth + 1);
        let step = self.float_operand();
        self.emit(
            Some(&acc_next),
            InstKind::Binary {
                op: BinOp::FAdd,
                lhs: Operand::value(&acc),
                rhs: step,
            },
        );
        self.emit(
            Some(&i_next),
            InstKind::Binary {
                op: BinOp::Add,
                lhs: Operand::value(&i),
                rhs: Operand::Int(1),
            },
        );
        let latch = self.label();
        self.emit(
            None,
            InstKind::Br {
                target: header.clone(),
            },
        );
        self.counters.pop();
        self.pop_scope();
        self.blocks[phi_at].insts = vec![
            Inst::new(
                Some(&i),
                InstKind::Phi {
                    incoming: vec![
                        (Operand::Int(0), pre.clone()),
                        (Operand::value(&i_next), latch.clone()),
                    ],
                },
            ),
            Inst::new(
                Some(&acc),
                InstKind::Phi {
                    incoming: vec![(init, pre), (Operand::value(&acc_next), latch)],
                },
            ),
            Inst::new(
                Some(&more),
                InstKind::Icmp {
                    pred: Pred::Slt,
                    lhs: Operand::value(&i),
                    rhs: Operand::value("n"),
                },
            ),
            Inst::new(
                None,
                InstKind::CondBr {
                    cond: Operand::value(&more),
                    then_bb: body,
                    else_bb: exit.clone(),
                },
            ),
        ];
        self.start(&exit);
        self.define_int(i);
        self.define_float(acc);
    }
}

/// A random single-function module that passes the verifier.
pub fn random_module<R: Rng>(rng: &mut R) -> Module {
    let mut b = Builder {
        rng,
        blocks: Vec::new(),
        next: 0,
        ints: vec![vec!["n".into(), "k".into()]],
        floats: vec![Vec::new()],
        counters: Vec::new(),
        loops: 0,
    };
    b.start("entry");
    b.load("a", true);
    b.sequence(0);
    b.sequence(0);
    let ret = b.float_operand();
    b.emit(None, InstKind::Ret { value: Some(ret) });
    let param = |name: &str, ty| Param {
        name: name.into(),
        ty,
    };
    Module {
        functions: vec![Function {
            name: "f".into(),
            params: vec![
                param("a", Type::PtrF64),
                param("b", Type::PtrI64),
                param("n", Type::I64),
                param("k", Type::I64),
            ],
            ret: Some(Type::F64),
            blocks: b.blocks,
        }],
    }
}

/// Inputs for [`random_module`] that keep every access in bounds.
pub fn random_inputs<R: Rng>(rng: &mut R) -> Json {
    let a: Vec<f64> = (0..ARRAY_LEN)
        .map(|_| rng.gen_range(-4i32..=4) as f64 * 0.75)
        .collect();
    let b: Vec<i64> = (0..ARRAY_LEN)
        .map(|_| rng.gen_range(0..ARRAY_LEN as i64))
        .collect();
    json!({
        "a": a,
        "b": b,
        "n": rng.gen_range(0..=5),
        "k": rng.gen_range(-3..=3),
    })
}

fn random_expr<R: Rng>(rng: &mut R, names: &[String], depth: usize) -> Expr {
    let leaf = depth == 0 || rng.gen_bool(0.4);
    if leaf {
        return match rng.gen_range(0..3) {
            0 => Expr::Const(rng.gen_range(-3..=9)),
            _ => Expr::Name(names.choose(rng).unwrap().clone()),
        };
    }
    match rng.gen_range(0..3) {
        0 => Expr::Add(
            Box::new(random_expr(rng, names, depth - 1)),
            Box::new(random_expr(rng, names, depth - 1)),
        ),
        1 => Expr::Mul(
            Box::new(random_expr(rng, names, depth - 1)),
            Box::new(random_expr(rng, names, depth - 1)),
        ),
        _ => Expr::Addr(random_addr(rng, names, depth - 1)),
    }
}

fn random_addr<R: Rng>(rng: &mut R, names: &[String], depth: usize) -> Addr {
    Addr {
        base: format!("arr{}", rng.gen_range(0..4)),
        index: Box::new(random_expr(rng, names, depth)),
    }
}

/// A random computation with distinct iterators `i0`, `i1`, ...
pub fn random_what<R: Rng>(rng: &mut R) -> WhatProgram {
    let levels = rng.gen_range(1..=3);
    let mut names: Vec<String> = vec!["n".into(), "m".into()];
    let mut ranges = Vec::new();
    for l in 0..levels {
        let lower = random_expr(rng, &names, 2);
        let upper = random_expr(rng, &names, 2);
        let iterator = format!("i{l}");
        names.push(iterator.clone());
        ranges.push(Range {
            lower,
            iterator,
            upper,
        });
    }
    let dot_range = ranges.pop().unwrap();
    let outer = names[..names.len() - 1].to_vec();
    let target = if rng.gen_bool(0.3) {
        Target::Scalar("res".into())
    } else {
        Target::Element(Addr {
            base: "out".into(),
            index: Box::new(random_expr(rng, &outer, 2)),
        })
    };
    let mut body = Body::Dot(DotOp {
        target,
        keyword: if rng.gen_bool(0.5) {
            ReductionKeyword::Dot
        } else {
            ReductionKeyword::Sum
        },
        range: dot_range,
        lhs: random_addr(rng, &names, 2),
        rhs: random_addr(rng, &names, 2),
    });
    for range in ranges.into_iter().rev() {
        body = Body::ForAll(ForAll {
            range,
            body: Box::new(body),
        });
    }
    WhatProgram {
        name: format!("c{}", rng.gen_range(0..100)),
        body,
    }
}
