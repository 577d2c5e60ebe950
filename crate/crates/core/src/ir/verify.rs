use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::Serialize;

use crate::analysis::cfg::Cfg;
use crate::analysis::dom::DomTree;

use super::types::{literal_type, operand_expectations, Expect};
use super::{infer_types, Function, InstKind, Module, Operand};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum DiagKind {
    DuplicateFunction,
    EmptyFunction,
    DuplicateBlock,
    MultipleDefinition,
    UndefinedValue,
    UnknownBlock,
    MissingTerminator,
    MisplacedTerminator,
    MisplacedPhi,
    PhiMismatch,
    DominanceViolation,
    TypeError,
    EntryHasPredecessors,
    ReturnMismatch,
    CallMismatch,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IrDiagnostic {
    pub function: String,
    pub block: Option<String>,
    pub kind: DiagKind,
    pub message: String,
}

impl fmt::Display for IrDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "@{}", self.function)?;
        if let Some(b) = &self.block {
            write!(f, ", block {b}")?;
        }
        write!(f, ": {:?}: {}", self.kind, self.message)
    }
}

struct Sink<'f> {
    function: &'f str,
    out: Vec<IrDiagnostic>,
}

impl Sink<'_> {
    fn push(&mut self, block: Option<&str>, kind: DiagKind, message: String) {
        self.out.push(IrDiagnostic {
            function: self.function.to_string(),
            block: block.map(str::to_string),
            kind,
            message,
        });
    }
}

/// Structural, SSA and type checks. An empty result means the module is
/// well formed.
pub fn verify(m: &Module) -> Vec<IrDiagnostic> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for f in &m.functions {
        if !seen.insert(f.name.as_str()) {
            out.push(IrDiagnostic {
                function: f.name.clone(),
                block: None,
                kind: DiagKind::DuplicateFunction,
                message: format!("function @{} is defined twice", f.name),
            });
        }
        out.extend(verify_function(m, f));
    }
    out
}

fn verify_function(m: &Module, f: &Function) -> Vec<IrDiagnostic> {
    let mut sink = Sink {
        function: &f.name,
        out: Vec::new(),
    };
    if f.blocks.is_empty() {
        sink.push(
            None,
            DiagKind::EmptyFunction,
            "function has no blocks".into(),
        );
        return sink.out;
    }

    let mut labels = HashSet::new();
    for b in &f.blocks {
        if !labels.insert(b.label.as_str()) {
            sink.push(
                Some(&b.label),
                DiagKind::DuplicateBlock,
                format!("label `{}` is used twice", b.label),
            );
        }
    }

    // Definitions: parameters are defined before the entry block.
    let mut defs: HashMap<&str, Option<(usize, usize)>> = HashMap::new();
    for p in &f.params {
        if defs.insert(&p.name, None).is_some() {
            sink.push(
                None,
                DiagKind::MultipleDefinition,
                format!("parameter %{} is declared twice", p.name),
            );
        }
    }
    for (bi, b) in f.blocks.iter().enumerate() {
        for (ii, inst) in b.insts.iter().enumerate() {
            if let Some(r) = &inst.result {
                if defs.insert(r, Some((bi, ii))).is_some() {
                    sink.push(
                        Some(&b.label),
                        DiagKind::MultipleDefinition,
                        format!("%{r} is defined more than once"),
                    );
                }
            }
        }
    }

    for b in &f.blocks {
        match b.insts.last() {
            Some(last) if last.is_terminator() => {}
            _ => sink.push(
                Some(&b.label),
                DiagKind::MissingTerminator,
                "block does not end in br, condbr or ret".into(),
            ),
        }
        let n = b.insts.len();
        for (ii, inst) in b.insts.iter().enumerate() {
            if inst.is_terminator() && ii + 1 != n {
                sink.push(
                    Some(&b.label),
                    DiagKind::MisplacedTerminator,
                    format!("terminator at position {ii} is followed by more instructions"),
                );
            }
        }
        if b.insts.iter().skip(b.first_non_phi()).any(|i| i.is_phi()) {
            sink.push(
                Some(&b.label),
                DiagKind::MisplacedPhi,
                "phi nodes must precede all other instructions".into(),
            );
        }
        for s in b.successors() {
            if f.block_index(s).is_none() {
                sink.push(
                    Some(&b.label),
                    DiagKind::UnknownBlock,
                    format!("branch to unknown block `{s}`"),
                );
            }
        }
    }

    let cfg = Cfg::of_function(f);
    let dom = DomTree::compute(&cfg);
    if !cfg.preds[0].is_empty() {
        sink.push(
            Some(&f.blocks[0].label),
            DiagKind::EntryHasPredecessors,
            "the entry block is a branch target".into(),
        );
    }

    for (bi, b) in f.blocks.iter().enumerate() {
        let mut preds: Vec<&str> = cfg.preds[bi]
            .iter()
            .map(|&p| f.blocks[p].label.as_str())
            .collect();
        preds.sort_unstable();
        for inst in b.phis() {
            let InstKind::Phi { incoming } = &inst.kind else {
                continue;
            };
            let mut from: Vec<&str> = incoming.iter().map(|(_, l)| l.as_str()).collect();
            for l in &from {
                if f.block_index(l).is_none() {
                    sink.push(
                        Some(&b.label),
                        DiagKind::UnknownBlock,
                        format!("phi refers to unknown block `{l}`"),
                    );
                }
            }
            from.sort_unstable();
            if from != preds {
                sink.push(
                    Some(&b.label),
                    DiagKind::PhiMismatch,
                    format!(
                        "phi %{} lists [{}] but the predecessors are [{}]",
                        inst.result.as_deref().unwrap_or("?"),
                        from.join(", "),
                        preds.join(", ")
                    ),
                );
            }
        }
    }

    // Uses and dominance.
    for (bi, b) in f.blocks.iter().enumerate() {
        for (ii, inst) in b.insts.iter().enumerate() {
            let uses: Vec<(&Operand, Option<usize>)> = match &inst.kind {
                InstKind::Phi { incoming } => incoming
                    .iter()
                    .map(|(o, l)| (o, f.block_index(l)))
                    .collect(),
                _ => inst.operands().into_iter().map(|o| (o, None)).collect(),
            };
            for (op, phi_pred) in uses {
                let Some(name) = op.as_value() else { continue };
                let Some(def) = defs.get(name) else {
                    sink.push(
                        Some(&b.label),
                        DiagKind::UndefinedValue,
                        format!("%{name} is used but never defined"),
                    );
                    continue;
                };
                let Some((db, di)) = *def else { continue };
                let ok = if inst.is_phi() {
                    match phi_pred {
                        Some(p) if dom.is_reachable(p) => dom.dominates(db, p),
                        _ => true,
                    }
                } else if !dom.is_reachable(bi) {
                    true
                } else if db == bi {
                    di < ii
                } else {
                    dom.dominates(db, bi)
                };
                if !ok {
                    sink.push(
                        Some(&b.label),
                        DiagKind::DominanceViolation,
                        format!("%{name} does not dominate its use"),
                    );
                }
            }
        }
    }

    // Types.
    let env = infer_types(m, f);
    for b in &f.blocks {
        for inst in &b.insts {
            let result_ty = inst.result.as_ref().and_then(|r| env.get(r)).copied();
            if let Some(r) = &inst.result {
                if result_ty.is_none() {
                    let why = match &inst.kind {
                        InstKind::Call { callee, .. } => {
                            format!("the return type of @{callee} is unknown; annotate the call")
                        }
                        _ => "its type cannot be determined".to_string(),
                    };
                    sink.push(Some(&b.label), DiagKind::TypeError, format!("%{r}: {why}"));
                }
            }
            for (op, expect) in operand_expectations(&inst.kind, &env, result_ty) {
                let actual = match op {
                    Operand::Value(v) => env.get(v).copied(),
                    lit => literal_type(lit),
                };
                let Some(actual) = actual else { continue };
                let bad = match expect {
                    Expect::Exactly(t) => actual != t,
                    Expect::AnyPointer => !actual.is_pointer(),
                    Expect::Anything => false,
                };
                if bad {
                    let wanted = match expect {
                        Expect::Exactly(t) => t.to_string(),
                        _ => "a pointer".to_string(),
                    };
                    sink.push(
                        Some(&b.label),
                        DiagKind::TypeError,
                        format!("operand {op} has type {actual}, expected {wanted}"),
                    );
                }
            }
            match &inst.kind {
                InstKind::Ret { value } => {
                    let got = value.as_ref().map(|v| match v {
                        Operand::Value(n) => env.get(n.as_str()).copied(),
                        lit => literal_type(lit),
                    });
                    let ok = match (f.ret, got) {
                        (None, None) => true,
                        (Some(t), Some(Some(g))) => t == g,
                        (Some(_), Some(None)) => true,
                        _ => false,
                    };
                    if !ok {
                        sink.push(
                            Some(&b.label),
                            DiagKind::ReturnMismatch,
                            format!(
                                "function returns {}",
                                f.ret.map_or("void".to_string(), |t| t.to_string())
                            ),
                        );
                    }
                }
                InstKind::Call { callee, args, .. } => {
                    if let Some(target) = m.function(callee) {
                        let arity_ok = target.params.len() == args.len();
                        let types_ok = arity_ok
                            && target.params.iter().zip(args).all(|(p, a)| {
                                let t = match a {
                                    Operand::Value(n) => env.get(n.as_str()).copied(),
                                    lit => literal_type(lit),
                                };
                                t.is_none_or(|t| t == p.ty)
                            });
                        if !types_ok {
                            sink.push(
                                Some(&b.label),
                                DiagKind::CallMismatch,
                                format!("arguments do not match the parameters of @{callee}"),
                            );
                        }
                    }
                }
                _ => {}
            }
        }
    }
    sink.out
}
