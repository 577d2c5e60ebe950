//! A small typed SSA IR with a stable text form (`.lir`).
//!
//! ```text
//! func @dot(%a: ptr f64, %b: ptr f64, %n: i64) -> f64 {
//! entry:
//!   br loop
//! loop:
//!   %i = phi [0, entry], [%i.next, body]
//!   ...
//! }
//! ```
//!
//! Values keep the names they were given in the source, so printed modules
//! can be diffed against their input.

use std::collections::HashMap;
use std::fmt;

mod parse;
mod print;
pub mod types;
mod verify;

pub use parse::{parse_module, ParseError};
pub(crate) use print::print_inst;
pub use print::print_module;
pub use types::{infer_types, Type};
pub use verify::{verify, DiagKind, IrDiagnostic};

#[derive(Debug, Clone, PartialEq)]
pub enum Operand {
    Value(String),
    Int(i64),
    Float(f64),
    Bool(bool),
}

impl Operand {
    pub fn value(name: &str) -> Operand {
        Operand::Value(name.to_string())
    }

    pub fn as_value(&self) -> Option<&str> {
        match self {
            Operand::Value(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_literal(&self) -> bool {
        !matches!(self, Operand::Value(_))
    }

    /// Bitwise identity, so that `0.0` and `-0.0` stay distinct.
    pub fn same(&self, other: &Operand) -> bool {
        match (self, other) {
            (Operand::Float(a), Operand::Float(b)) => a.to_bits() == b.to_bits(),
            _ => self == other,
        }
    }
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operand::Value(v) => write!(f, "%{v}"),
            Operand::Int(i) => write!(f, "{i}"),
            Operand::Float(x) => write!(f, "{x:?}"),
            Operand::Bool(b) => write!(f, "{b}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    FAdd,
    FSub,
    FMul,
}

impl BinOp {
    pub fn mnemonic(self) -> &'static str {
        match self {
            BinOp::Add => "add",
            BinOp::Sub => "sub",
            BinOp::Mul => "mul",
            BinOp::FAdd => "fadd",
            BinOp::FSub => "fsub",
            BinOp::FMul => "fmul",
        }
    }

    pub fn is_float(self) -> bool {
        matches!(self, BinOp::FAdd | BinOp::FSub | BinOp::FMul)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pred {
    Eq,
    Ne,
    Slt,
    Sle,
}

impl Pred {
    pub fn mnemonic(self) -> &'static str {
        match self {
            Pred::Eq => "icmp.eq",
            Pred::Ne => "icmp.ne",
            Pred::Slt => "icmp.slt",
            Pred::Sle => "icmp.sle",
        }
    }

    pub fn eval(self, a: i64, b: i64) -> bool {
        match self {
            Pred::Eq => a == b,
            Pred::Ne => a != b,
            Pred::Slt => a < b,
            Pred::Sle => a <= b,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InstKind {
    Binary {
        op: BinOp,
        lhs: Operand,
        rhs: Operand,
    },
    Icmp {
        pred: Pred,
        lhs: Operand,
        rhs: Operand,
    },
    /// `base + index` elements.
    ElemPtr {
        base: Operand,
        index: Operand,
    },
    Load {
        ptr: Operand,
    },
    Store {
        value: Operand,
        ptr: Operand,
    },
    /// Fresh zeroed buffer of `count` elements.
    Alloca {
        elem: Type,
        count: i64,
    },
    Phi {
        incoming: Vec<(Operand, String)>,
    },
    /// `ret` is the annotated return type; calls to functions outside the
    /// module need it to produce a value.
    Call {
        callee: String,
        args: Vec<Operand>,
        ret: Option<Type>,
    },
    Br {
        target: String,
    },
    CondBr {
        cond: Operand,
        then_bb: String,
        else_bb: String,
    },
    Ret {
        value: Option<Operand>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Inst {
    pub result: Option<String>,
    pub kind: InstKind,
}

impl Inst {
    pub fn new(result: Option<&str>, kind: InstKind) -> Inst {
        Inst {
            result: result.map(str::to_string),
            kind,
        }
    }

    pub fn is_terminator(&self) -> bool {
        matches!(
            self.kind,
            InstKind::Br { .. } | InstKind::CondBr { .. } | InstKind::Ret { .. }
        )
    }

    pub fn is_phi(&self) -> bool {
        matches!(self.kind, InstKind::Phi { .. })
    }

    /// Stores and calls; removing these changes observable behaviour.
    pub fn has_side_effects(&self) -> bool {
        matches!(self.kind, InstKind::Store { .. } | InstKind::Call { .. })
    }

    pub fn successors(&self) -> Vec<&str> {
        match &self.kind {
            InstKind::Br { target } => vec![target],
            InstKind::CondBr {
                then_bb, else_bb, ..
            } => vec![then_bb, else_bb],
            _ => Vec::new(),
        }
    }

    pub fn successors_mut(&mut self) -> Vec<&mut String> {
        match &mut self.kind {
            InstKind::Br { target } => vec![target],
            InstKind::CondBr {
                then_bb, else_bb, ..
            } => vec![then_bb, else_bb],
            _ => Vec::new(),
        }
    }

    pub fn operands(&self) -> Vec<&Operand> {
        match &self.kind {
            InstKind::Binary { lhs, rhs, .. } | InstKind::Icmp { lhs, rhs, .. } => vec![lhs, rhs],
            InstKind::ElemPtr { base, index } => vec![base, index],
            InstKind::Load { ptr } => vec![ptr],
            InstKind::Store { value, ptr } => vec![value, ptr],
            InstKind::Alloca { .. } | InstKind::Br { .. } => Vec::new(),
            InstKind::Phi { incoming } => incoming.iter().map(|(o, _)| o).collect(),
            InstKind::Call { args, .. } => args.iter().collect(),
            InstKind::CondBr { cond, .. } => vec![cond],
            InstKind::Ret { value } => value.iter().collect(),
        }
    }

    pub fn operands_mut(&mut self) -> Vec<&mut Operand> {
        match &mut self.kind {
            InstKind::Binary { lhs, rhs, .. } | InstKind::Icmp { lhs, rhs, .. } => vec![lhs, rhs],
            InstKind::ElemPtr { base, index } => vec![base, index],
            InstKind::Load { ptr } => vec![ptr],
            InstKind::Store { value, ptr } => vec![value, ptr],
            InstKind::Alloca { .. } | InstKind::Br { .. } => Vec::new(),
            InstKind::Phi { incoming } => incoming.iter_mut().map(|(o, _)| o).collect(),
            InstKind::Call { args, .. } => args.iter_mut().collect(),
            InstKind::CondBr { cond, .. } => vec![cond],
            InstKind::Ret { value } => value.iter_mut().collect(),
        }
    }

    pub fn uses(&self, name: &str) -> bool {
        self.operands().iter().any(|o| o.as_value() == Some(name))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub label: String,
    pub insts: Vec<Inst>,
}

impl Block {
    pub fn terminator(&self) -> Option<&Inst> {
        self.insts.last().filter(|i| i.is_terminator())
    }

    pub fn terminator_mut(&mut self) -> Option<&mut Inst> {
        self.insts.last_mut().filter(|i| i.is_terminator())
    }

    pub fn successors(&self) -> Vec<&str> {
        self.terminator().map(Inst::successors).unwrap_or_default()
    }

    pub fn phis(&self) -> impl Iterator<Item = &Inst> {
        self.insts.iter().take_while(|i| i.is_phi())
    }

    /// Index of the first non-phi instruction.
    pub fn first_non_phi(&self) -> usize {
        self.insts.iter().take_while(|i| i.is_phi()).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub ty: Type,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Function {
    pub name: String,
    pub params: Vec<Param>,
    pub ret: Option<Type>,
    pub blocks: Vec<Block>,
}

/// Position of an instruction: block index and index within the block.
pub type InstPos = (usize, usize);

impl Function {
    pub fn block_index(&self, label: &str) -> Option<usize> {
        self.blocks.iter().position(|b| b.label == label)
    }

    pub fn block(&self, label: &str) -> Option<&Block> {
        self.blocks.iter().find(|b| b.label == label)
    }

    pub fn inst(&self, pos: InstPos) -> &Inst {
        &self.blocks[pos.0].insts[pos.1]
    }

    /// Where each instruction result is defined.
    pub fn def_sites(&self) -> HashMap<String, InstPos> {
        let mut out = HashMap::new();
        for (bi, b) in self.blocks.iter().enumerate() {
            for (ii, inst) in b.insts.iter().enumerate() {
                if let Some(r) = &inst.result {
                    out.entry(r.clone()).or_insert((bi, ii));
                }
            }
        }
        out
    }

    pub fn is_param(&self, name: &str) -> bool {
        self.params.iter().any(|p| p.name == name)
    }

    /// Replaces every use of `%name` with `with`.
    pub fn replace_uses(&mut self, name: &str, with: &Operand) {
        for b in &mut self.blocks {
            for inst in &mut b.insts {
                for op in inst.operands_mut() {
                    if op.as_value() == Some(name) {
                        *op = with.clone();
                    }
                }
            }
        }
    }

    pub fn use_count(&self, name: &str) -> usize {
        self.blocks
            .iter()
            .flat_map(|b| &b.insts)
            .map(|i| {
                i.operands()
                    .iter()
                    .filter(|o| o.as_value() == Some(name))
                    .count()
            })
            .sum()
    }

    /// A value or label name based on `stem` that is not used yet.
    pub fn fresh_name(&self, stem: &str) -> String {
        let taken = |n: &str| {
            self.is_param(n)
                || self
                    .blocks
                    .iter()
                    .any(|b| b.label == n || b.insts.iter().any(|i| i.result.as_deref() == Some(n)))
        };
        if !taken(stem) {
            return stem.to_string();
        }
        (1..)
            .map(|k| format!("{stem}.{k}"))
            .find(|n| !taken(n))
            .expect("unbounded search")
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Module {
    pub functions: Vec<Function>,
}

impl Module {
    pub fn function(&self, name: &str) -> Option<&Function> {
        self.functions.iter().find(|f| f.name == name)
    }

    pub fn function_mut(&mut self, name: &str) -> Option<&mut Function> {
        self.functions.iter_mut().find(|f| f.name == name)
    }
}

impl fmt::Display for Module {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print_module(self))
    }
}
