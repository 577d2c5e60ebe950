//! Value types and type inference.

use std::collections::HashMap;
use std::fmt;

use super::{Function, InstKind, Module, Operand};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Type {
    I1,
    I64,
    F64,
    PtrI64,
    PtrF64,
}

impl Type {
    pub fn pointee(self) -> Option<Type> {
        match self {
            Type::PtrI64 => Some(Type::I64),
            Type::PtrF64 => Some(Type::F64),
            _ => None,
        }
    }

    pub fn pointer_to(self) -> Option<Type> {
        match self {
            Type::I64 => Some(Type::PtrI64),
            Type::F64 => Some(Type::PtrF64),
            _ => None,
        }
    }

    pub fn is_pointer(self) -> bool {
        self.pointee().is_some()
    }
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Type::I1 => "i1",
            Type::I64 => "i64",
            Type::F64 => "f64",
            Type::PtrI64 => "ptr i64",
            Type::PtrF64 => "ptr f64",
        })
    }
}

pub fn literal_type(op: &Operand) -> Option<Type> {
    match op {
        Operand::Value(_) => None,
        Operand::Int(_) => Some(Type::I64),
        Operand::Float(_) => Some(Type::F64),
        Operand::Bool(_) => Some(Type::I1),
    }
}

/// Return type of `callee` as seen from a call site: the annotation, or the
/// in-module definition.
pub fn call_type(m: &Module, callee: &str, annotation: Option<Type>) -> Option<Type> {
    annotation.or_else(|| m.function(callee).and_then(|f| f.ret))
}

/// Types of all parameters and instruction results that can be determined.
/// Ill-typed instructions are left out; [`crate::ir::verify`] reports them.
pub fn infer_types(m: &Module, f: &Function) -> HashMap<String, Type> {
    let mut env: HashMap<String, Type> = f.params.iter().map(|p| (p.name.clone(), p.ty)).collect();
    let ty_of = |env: &HashMap<String, Type>, op: &Operand| match op {
        Operand::Value(v) => env.get(v).copied(),
        lit => literal_type(lit),
    };
    loop {
        let mut changed = false;
        for inst in f.blocks.iter().flat_map(|b| &b.insts) {
            let Some(res) = &inst.result else { continue };
            if env.contains_key(res) {
                continue;
            }
            let t = match &inst.kind {
                InstKind::Binary { op, .. } => {
                    Some(if op.is_float() { Type::F64 } else { Type::I64 })
                }
                InstKind::Icmp { .. } => Some(Type::I1),
                InstKind::ElemPtr { base, .. } => ty_of(&env, base).filter(|t| t.is_pointer()),
                InstKind::Load { ptr } => ty_of(&env, ptr).and_then(Type::pointee),
                InstKind::Alloca { elem, .. } => elem.pointer_to(),
                InstKind::Phi { incoming } => incoming.iter().find_map(|(o, _)| ty_of(&env, o)),
                InstKind::Call { callee, ret, .. } => call_type(m, callee, *ret),
                _ => None,
            };
            if let Some(t) = t {
                env.insert(res.clone(), t);
                changed = true;
            }
        }
        if !changed {
            return env;
        }
    }
}

/// What an instruction requires of one operand.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Expect {
    Exactly(Type),
    AnyPointer,
    Anything,
}

/// Operand requirements of an instruction, in operand order.
pub(crate) fn operand_expectations<'i>(
    kind: &'i InstKind,
    env: &HashMap<String, Type>,
    result: Option<Type>,
) -> Vec<(&'i Operand, Expect)> {
    let ty_of = |op: &Operand| match op {
        Operand::Value(v) => env.get(v).copied(),
        lit => literal_type(lit),
    };
    match kind {
        InstKind::Binary { op, lhs, rhs } => {
            let t = if op.is_float() { Type::F64 } else { Type::I64 };
            vec![(lhs, Expect::Exactly(t)), (rhs, Expect::Exactly(t))]
        }
        InstKind::Icmp { lhs, rhs, .. } => vec![
            (lhs, Expect::Exactly(Type::I64)),
            (rhs, Expect::Exactly(Type::I64)),
        ],
        InstKind::ElemPtr { base, index } => {
            vec![
                (base, Expect::AnyPointer),
                (index, Expect::Exactly(Type::I64)),
            ]
        }
        InstKind::Load { ptr } => vec![(ptr, Expect::AnyPointer)],
        InstKind::Store { value, ptr } => {
            let v = match ty_of(ptr).and_then(Type::pointee) {
                Some(t) => Expect::Exactly(t),
                None => Expect::Anything,
            };
            vec![(ptr, Expect::AnyPointer), (value, v)]
        }
        InstKind::Phi { incoming } => {
            let e = result.map_or(Expect::Anything, Expect::Exactly);
            incoming.iter().map(|(o, _)| (o, e)).collect()
        }
        InstKind::CondBr { cond, .. } => vec![(cond, Expect::Exactly(Type::I1))],
        InstKind::Call { args, .. } => args.iter().map(|a| (a, Expect::Anything)).collect(),
        InstKind::Ret { value } => value.iter().map(|v| (v, Expect::Anything)).collect(),
        InstKind::Alloca { .. } | InstKind::Br { .. } => Vec::new(),
    }
}
