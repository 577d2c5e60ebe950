//! Reference interpreter for `.lir` modules.
//!
//! Memory is a set of typed buffers addressed by (buffer, offset) pairs, so
//! every out-of-range access traps instead of reading neighbouring data.
//! Calls to functions outside the module are dispatched to native harnesses
//! registered in a [`HarnessRegistry`].

use std::collections::HashMap;
use std::fmt;
use std::rc::Rc;

use thiserror::Error;

use crate::ir::{BinOp, Function, InstKind, Module, Operand, Pred, Type};

mod data;
mod harness;
mod memory;

pub use data::{bind_data, run_with_data, ArrayValue, DataError, RunError, RunOutcome};
pub use harness::{
    HarnessRegistry, MarshaledHarness, Masked, MaskedCopy, NativeHarness, ReferenceHarness,
    RegistryError,
};
pub use memory::{BufId, Buffer, Data, Memory};

pub const DEFAULT_STEP_LIMIT: u64 = 100_000_000;
const MAX_CALL_DEPTH: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Val {
    I1(bool),
    I64(i64),
    F64(f64),
    Ptr { buf: BufId, off: i64 },
}

impl fmt::Display for Val {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Val::I1(b) => write!(f, "{b}"),
            Val::I64(i) => write!(f, "{i}"),
            Val::F64(x) => write!(f, "{x:?}"),
            Val::Ptr { buf, off } => write!(f, "&buf{buf}+{off}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Trap {
    #[error("out-of-bounds access to `{buffer}` at index {index} (length {len})")]
    OutOfBounds {
        buffer: String,
        index: i64,
        len: usize,
    },
    #[error("step limit of {0} exceeded")]
    StepLimitExceeded(u64),
    #[error("call depth limit of {0} exceeded")]
    CallDepthExceeded(usize),
    #[error("no harness is registered for `@{0}`")]
    UnregisteredHarness(String),
    #[error("unknown function `@{0}`")]
    UnknownFunction(String),
    #[error("type error: {0}")]
    TypeTrap(String),
    #[error("arguments do not match harness `{harness}`: {msg}")]
    HarnessSignatureMismatch { harness: String, msg: String },
    #[error("harness `{harness}` failed: {msg}")]
    Harness { harness: String, msg: String },
}

#[derive(Debug, Clone)]
enum Opnd {
    Slot(usize),
    Const(Val),
}

#[derive(Debug, Clone)]
enum CInst {
    Bin {
        dst: usize,
        op: BinOp,
        a: Opnd,
        b: Opnd,
    },
    Icmp {
        dst: usize,
        pred: Pred,
        a: Opnd,
        b: Opnd,
    },
    ElemPtr {
        dst: usize,
        base: Opnd,
        idx: Opnd,
    },
    Load {
        dst: usize,
        ptr: Opnd,
    },
    Store {
        val: Opnd,
        ptr: Opnd,
    },
    Alloca {
        dst: usize,
        elem: Type,
        count: i64,
        name: String,
    },
    Call {
        dst: Option<usize>,
        callee: String,
        internal: Option<usize>,
        args: Vec<Opnd>,
    },
    Br(usize),
    CondBr(Opnd, usize, usize),
    Ret(Option<Opnd>),
    Unreachable(String),
}

#[derive(Debug, Clone)]
struct CBlock {
    /// (destination, [(predecessor, value)])
    phis: Vec<(usize, Vec<(usize, Opnd)>)>,
    insts: Vec<CInst>,
}

#[derive(Debug, Clone)]
struct CFunc {
    name: String,
    params: Vec<usize>,
    nslots: usize,
    slot_names: Vec<String>,
    blocks: Vec<CBlock>,
}

fn compile(m: &Module) -> Vec<CFunc> {
    let index: HashMap<&str, usize> = m
        .functions
        .iter()
        .enumerate()
        .map(|(i, f)| (f.name.as_str(), i))
        .collect();
    m.functions.iter().map(|f| compile_fn(f, &index)).collect()
}

#[derive(Default)]
struct Slots {
    map: HashMap<String, usize>,
    names: Vec<String>,
}

impl Slots {
    fn get(&mut self, name: &str) -> usize {
        if let Some(&s) = self.map.get(name) {
            return s;
        }
        self.names.push(name.to_string());
        self.map.insert(name.to_string(), self.names.len() - 1);
        self.names.len() - 1
    }

    fn opnd(&mut self, o: &Operand) -> Opnd {
        match o {
            Operand::Value(v) => Opnd::Slot(self.get(v)),
            Operand::Int(i) => Opnd::Const(Val::I64(*i)),
            Operand::Float(x) => Opnd::Const(Val::F64(*x)),
            Operand::Bool(b) => Opnd::Const(Val::I1(*b)),
        }
    }
}

fn compile_fn(f: &Function, funcs: &HashMap<&str, usize>) -> CFunc {
    let mut slots = Slots::default();
    let params = f.params.iter().map(|p| slots.get(&p.name)).collect();
    let blocks_ix: HashMap<&str, usize> = f
        .blocks
        .iter()
        .enumerate()
        .map(|(i, b)| (b.label.as_str(), i))
        .collect();
    let mut blocks = Vec::new();
    for b in &f.blocks {
        let mut cb = CBlock {
            phis: Vec::new(),
            insts: Vec::new(),
        };
        for inst in &b.insts {
            let dst = inst.result.as_deref().map(|r| slots.get(r));
            let d = dst.unwrap_or(usize::MAX);
            let label = |l: &str| blocks_ix.get(l).copied();
            let c = match &inst.kind {
                InstKind::Phi { incoming } => {
                    let entries = incoming
                        .iter()
                        .filter_map(|(o, l)| Some((label(l)?, slots.opnd(o))))
                        .collect();
                    cb.phis.push((d, entries));
                    continue;
                }
                InstKind::Binary { op, lhs, rhs } => CInst::Bin {
                    dst: d,
                    op: *op,
                    a: slots.opnd(lhs),
                    b: slots.opnd(rhs),
                },
                InstKind::Icmp { pred, lhs, rhs } => CInst::Icmp {
                    dst: d,
                    pred: *pred,
                    a: slots.opnd(lhs),
                    b: slots.opnd(rhs),
                },
                InstKind::ElemPtr { base, index } => CInst::ElemPtr {
                    dst: d,
                    base: slots.opnd(base),
                    idx: slots.opnd(index),
                },
                InstKind::Load { ptr } => CInst::Load {
                    dst: d,
                    ptr: slots.opnd(ptr),
                },
                InstKind::Store { value, ptr } => CInst::Store {
                    val: slots.opnd(value),
                    ptr: slots.opnd(ptr),
                },
                InstKind::Alloca { elem, count } => CInst::Alloca {
                    dst: d,
                    elem: *elem,
                    count: *count,
                    name: inst.result.clone().unwrap_or_default(),
                },
                InstKind::Call { callee, args, .. } => CInst::Call {
                    dst,
                    callee: callee.clone(),
                    internal: funcs.get(callee.as_str()).copied(),
                    args: args.iter().map(|a| slots.opnd(a)).collect(),
                },
                InstKind::Br { target } => match label(target) {
                    Some(t) => CInst::Br(t),
                    None => CInst::Unreachable(format!("branch to unknown block `{target}`")),
                },
                InstKind::CondBr {
                    cond,
                    then_bb,
                    else_bb,
                } => match (label(then_bb), label(else_bb)) {
                    (Some(t), Some(e)) => CInst::CondBr(slots.opnd(cond), t, e),
                    _ => CInst::Unreachable("branch to unknown block".into()),
                },
                InstKind::Ret { value } => CInst::Ret(value.as_ref().map(|v| slots.opnd(v))),
            };
            cb.insts.push(c);
        }
        if !b.insts.last().is_some_and(|i| i.is_terminator()) {
            cb.insts.push(CInst::Unreachable(format!(
                "block `{}` has no terminator",
                b.label
            )));
        }
        blocks.push(cb);
    }
    CFunc {
        name: f.name.clone(),
        params,
        nslots: slots.names.len(),
        slot_names: slots.names,
        blocks,
    }
}

fn type_trap(msg: impl Into<String>) -> Trap {
    Trap::TypeTrap(msg.into())
}

/// Executes functions of one module against a shared [`Memory`].
pub struct Interpreter {
    funcs: Rc<[CFunc]>,
    index: HashMap<String, usize>,
    pub memory: Memory,
    pub harnesses: HarnessRegistry,
    step_limit: u64,
    steps: u64,
}

impl Interpreter {
    pub fn new(m: &Module) -> Interpreter {
        let funcs: Rc<[CFunc]> = compile(m).into();
        let index = funcs
            .iter()
            .enumerate()
            .map(|(i, f)| (f.name.clone(), i))
            .collect();
        Interpreter {
            funcs,
            index,
            memory: Memory::new(),
            harnesses: HarnessRegistry::new(),
            step_limit: DEFAULT_STEP_LIMIT,
            steps: 0,
        }
    }

    pub fn with_harnesses(mut self, harnesses: HarnessRegistry) -> Self {
        self.harnesses = harnesses;
        self
    }

    pub fn with_step_limit(mut self, limit: u64) -> Self {
        self.step_limit = limit;
        self
    }

    /// Instructions executed so far, over all calls.
    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Calls `name`, which may be a module function or a registered harness.
    pub fn call(&mut self, name: &str, args: &[Val]) -> Result<Option<Val>, Trap> {
        match self.index.get(name) {
            Some(&fi) => self.run(fi, args, 0),
            None => self.external(name, args),
        }
    }

    fn external(&mut self, name: &str, args: &[Val]) -> Result<Option<Val>, Trap> {
        if !self.harnesses.contains(name) {
            return Err(Trap::UnregisteredHarness(name.to_string()));
        }
        self.harnesses.call(name, args, &mut self.memory)?;
        Ok(None)
    }

    fn run(&mut self, fi: usize, args: &[Val], depth: usize) -> Result<Option<Val>, Trap> {
        if depth >= MAX_CALL_DEPTH {
            return Err(Trap::CallDepthExceeded(MAX_CALL_DEPTH));
        }
        let funcs = Rc::clone(&self.funcs);
        let f = &funcs[fi];
        if args.len() != f.params.len() {
            return Err(type_trap(format!(
                "`@{}` takes {} arguments, got {}",
                f.name,
                f.params.len(),
                args.len()
            )));
        }
        let mut regs: Vec<Option<Val>> = vec![None; f.nslots];
        for (&s, &a) in f.params.iter().zip(args) {
            regs[s] = Some(a);
        }
        let get = |regs: &[Option<Val>], o: &Opnd| -> Result<Val, Trap> {
            match o {
                Opnd::Const(v) => Ok(*v),
                Opnd::Slot(s) => regs[*s].ok_or_else(|| {
                    type_trap(format!("`%{}` used before definition", f.slot_names[*s]))
                }),
            }
        };
        let mut block = 0usize;
        let mut pred: Option<usize> = None;
        loop {
            let b = &f.blocks[block];
            if !b.phis.is_empty() {
                let p = pred.ok_or_else(|| type_trap("phi in entry block"))?;
                let mut vals = Vec::with_capacity(b.phis.len());
                for (dst, entries) in &b.phis {
                    let (_, o) = entries.iter().find(|(l, _)| *l == p).ok_or_else(|| {
                        type_trap(format!(
                            "phi `%{}` has no entry for predecessor",
                            f.slot_names[*dst]
                        ))
                    })?;
                    vals.push((*dst, get(&regs, o)?));
                }
                for (dst, v) in vals {
                    regs[dst] = Some(v);
                }
            }
            for inst in &b.insts {
                self.steps += 1;
                if self.steps > self.step_limit {
                    return Err(Trap::StepLimitExceeded(self.step_limit));
                }
                match inst {
                    CInst::Bin { dst, op, a, b } => {
                        let v = match (op, get(&regs, a)?, get(&regs, b)?) {
                            (BinOp::Add, Val::I64(x), Val::I64(y)) => Val::I64(x.wrapping_add(y)),
                            (BinOp::Sub, Val::I64(x), Val::I64(y)) => Val::I64(x.wrapping_sub(y)),
                            (BinOp::Mul, Val::I64(x), Val::I64(y)) => Val::I64(x.wrapping_mul(y)),
                            (BinOp::FAdd, Val::F64(x), Val::F64(y)) => Val::F64(x + y),
                            (BinOp::FSub, Val::F64(x), Val::F64(y)) => Val::F64(x - y),
                            (BinOp::FMul, Val::F64(x), Val::F64(y)) => Val::F64(x * y),
                            (op, x, y) => {
                                return Err(type_trap(format!(
                                    "{} applied to {x} and {y}",
                                    op.mnemonic()
                                )))
                            }
                        };
                        regs[*dst] = Some(v);
                    }
                    CInst::Icmp { dst, pred, a, b } => {
                        let int = |v: Val| match v {
                            Val::I64(x) => Ok(x),
                            Val::I1(x) => Ok(i64::from(x)),
                            other => Err(type_trap(format!("icmp on {other}"))),
                        };
                        let r = pred.eval(int(get(&regs, a)?)?, int(get(&regs, b)?)?);
                        regs[*dst] = Some(Val::I1(r));
                    }
                    CInst::ElemPtr { dst, base, idx } => {
                        let v = match (get(&regs, base)?, get(&regs, idx)?) {
                            (Val::Ptr { buf, off }, Val::I64(i)) => Val::Ptr {
                                buf,
                                off: off.wrapping_add(i),
                            },
                            (x, y) => return Err(type_trap(format!("elemptr on {x} and {y}"))),
                        };
                        regs[*dst] = Some(v);
                    }
                    CInst::Load { dst, ptr } => match get(&regs, ptr)? {
                        Val::Ptr { buf, off } => regs[*dst] = Some(self.memory.load(buf, off)?),
                        other => return Err(type_trap(format!("load from {other}"))),
                    },
                    CInst::Store { val, ptr } => match get(&regs, ptr)? {
                        Val::Ptr { buf, off } => self.memory.store(buf, off, get(&regs, val)?)?,
                        other => return Err(type_trap(format!("store to {other}"))),
                    },
                    CInst::Alloca {
                        dst,
                        elem,
                        count,
                        name,
                    } => {
                        let n = usize::try_from(*count)
                            .map_err(|_| type_trap(format!("alloca of {count} elements")))?;
                        let buf = match elem {
                            Type::I64 => self.memory.alloc_int(name, &vec![0; n]),
                            Type::F64 => self.memory.alloc_float(name, &vec![0.0; n]),
                            other => return Err(type_trap(format!("alloca of {other}"))),
                        };
                        regs[*dst] = Some(Val::Ptr { buf, off: 0 });
                    }
                    CInst::Call {
                        dst,
                        callee,
                        internal,
                        args,
                    } => {
                        let vals = args
                            .iter()
                            .map(|a| get(&regs, a))
                            .collect::<Result<Vec<_>, _>>()?;
                        let r = match internal {
                            Some(g) => self.run(*g, &vals, depth + 1)?,
                            None => self.external(callee, &vals)?,
                        };
                        if let Some(d) = dst {
                            regs[*d] = Some(r.ok_or_else(|| {
                                type_trap(format!("`@{callee}` returned no value"))
                            })?);
                        }
                    }
                    CInst::Br(t) => {
                        pred = Some(block);
                        block = *t;
                        break;
                    }
                    CInst::CondBr(c, t, e) => {
                        let taken = match get(&regs, c)? {
                            Val::I1(x) => x,
                            other => return Err(type_trap(format!("condbr on {other}"))),
                        };
                        pred = Some(block);
                        block = if taken { *t } else { *e };
                        break;
                    }
                    CInst::Ret(v) => {
                        return v.as_ref().map(|v| get(&regs, v)).transpose();
                    }
                    CInst::Unreachable(msg) => return Err(type_trap(msg.clone())),
                }
            }
        }
    }
}
