//! Replacement of matched loop nests by harness calls.
//!
//! The call is placed in the preheader of the outermost matched loop, the
//! preheader branches straight to the loop exit, and the nest is deleted.
//! A scalar result is returned through a one-element buffer and loaded back
//! for the code after the loop.

use std::collections::HashSet;

use thiserror::Error;

use crate::analysis::{canonical_iv, is_invariant};
use crate::ir::{verify, Function, Inst, InstKind, IrDiagnostic, Module, Operand, Type};
use crate::matcher::{context, detect_all, DetectOptions, Match, MatchError, TargetSite};
use crate::what::WhatProgram;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RewriteError {
    #[error("function `@{0}` does not exist")]
    UnknownFunction(String),
    #[error("no loop with header `{0}`")]
    UnknownLoop(String),
    #[error("loop `{0}` is not in canonical form")]
    NonCanonical(String),
    #[error("argument `{param}` is bound to `{value}`, which changes inside the loop")]
    ArgNotLoopInvariant { param: String, value: String },
    #[error("argument `{0}` is not bound by the match")]
    UnboundParameter(String),
    #[error("block `{block}` has side effects besides the matched store: {inst}")]
    SideEffectsInLoop { block: String, inst: String },
    #[error("`{value}` is computed in the loop and used after it")]
    EscapingValue { value: String },
    #[error("rewritten function does not verify: {}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    VerifyFailed(Vec<IrDiagnostic>),
}

/// Everything [`apply`] needs, checked against the module.
#[derive(Debug, Clone, PartialEq)]
pub struct RewritePlan {
    pub function: String,
    pub header: String,
    pub preheader: String,
    pub exit: String,
    pub callee: String,
    /// Harness arguments; `None` marks the scalar result buffer.
    pub args: Vec<Option<Operand>>,
    /// Reduction value to replace after the loop, for scalar results.
    pub escape: Option<String>,
    pub blocks: Vec<String>,
}

/// Default harness name for a computation.
pub fn reference_callee(what: &str) -> String {
    format!("lilac.{what}")
}

pub fn plan(m: &Module, hit: &Match, callee: &str) -> Result<RewritePlan, RewriteError> {
    let f = m
        .function(&hit.function)
        .ok_or_else(|| RewriteError::UnknownFunction(hit.function.clone()))?;
    let ctx = context(m, f);
    let header = f
        .block_index(&hit.header_block)
        .ok_or_else(|| RewriteError::UnknownLoop(hit.header_block.clone()))?;
    let l = ctx
        .nest
        .loops
        .iter()
        .find(|l| l.header == header)
        .ok_or_else(|| RewriteError::UnknownLoop(hit.header_block.clone()))?;
    let iv =
        canonical_iv(f, l).map_err(|_| RewriteError::NonCanonical(hit.header_block.clone()))?;

    let escape = matches!(hit.target, TargetSite::Escape).then(|| hit.reduction_phi.clone());
    let mut args = Vec::new();
    for p in &hit.params {
        match hit.var(p) {
            Some(v) => {
                if !is_invariant(f, l, v) {
                    return Err(RewriteError::ArgNotLoopInvariant {
                        param: p.clone(),
                        value: v.to_string(),
                    });
                }
                args.push(Some(v.clone()));
            }
            None if escape.is_some() && !args.contains(&None) => args.push(None),
            None => return Err(RewriteError::UnboundParameter(p.clone())),
        }
    }

    let target_ptr = match &hit.target {
        TargetSite::Store { pointer, .. } => Some(Operand::value(pointer)),
        TargetSite::Escape => None,
    };
    let mut target_seen = false;
    let mut defined = HashSet::new();
    for &b in &l.blocks {
        for inst in &f.blocks[b].insts {
            if let Some(r) = &inst.result {
                defined.insert(r.clone());
            }
            let allowed = match &inst.kind {
                InstKind::Store { value, ptr } => {
                    let ok = !target_seen
                        && Some(ptr) == target_ptr.as_ref()
                        && value.as_value() == Some(hit.reduction_phi.as_str());
                    target_seen |= ok;
                    ok
                }
                InstKind::Call { .. } | InstKind::Alloca { .. } => false,
                _ => true,
            };
            if !allowed {
                return Err(RewriteError::SideEffectsInLoop {
                    block: f.blocks[b].label.clone(),
                    inst: crate::ir::print_inst(inst),
                });
            }
        }
    }
    for (bi, b) in f.blocks.iter().enumerate() {
        if l.contains(bi) {
            continue;
        }
        for inst in &b.insts {
            for op in inst.operands() {
                let Some(v) = op.as_value() else { continue };
                if defined.contains(v) && escape.as_deref() != Some(v) {
                    return Err(RewriteError::EscapingValue {
                        value: op.to_string(),
                    });
                }
            }
        }
    }
    Ok(RewritePlan {
        function: f.name.clone(),
        header: hit.header_block.clone(),
        preheader: f.blocks[iv.preheader].label.clone(),
        exit: f.blocks[iv.exit].label.clone(),
        callee: callee.to_string(),
        args,
        escape,
        blocks: l
            .blocks
            .iter()
            .map(|&b| f.blocks[b].label.clone())
            .collect(),
    })
}

fn insert_before_terminator(f: &mut Function, block: &str, insts: Vec<Inst>) {
    let b = f
        .blocks
        .iter_mut()
        .find(|b| b.label == block)
        .expect("planned block exists");
    let at = b.insts.len() - usize::from(b.terminator().is_some());
    b.insts.splice(at..at, insts);
}

/// Applies a plan made by [`plan`] to a copy of `m`.
pub fn apply(m: &Module, p: &RewritePlan) -> Result<Module, RewriteError> {
    let mut out = m.clone();
    let f = out
        .function_mut(&p.function)
        .ok_or_else(|| RewriteError::UnknownFunction(p.function.clone()))?;
    let mut new = Vec::new();
    let mut buffer = None;
    if p.args.iter().any(Option::is_none) {
        let name = f.fresh_name(&format!("{}.out", p.escape.as_deref().unwrap_or("dot")));
        new.push(Inst::new(
            Some(&name),
            InstKind::Alloca {
                elem: Type::F64,
                count: 1,
            },
        ));
        buffer = Some(Operand::Value(name));
    }
    let args = p
        .args
        .iter()
        .map(|a| {
            a.clone()
                .or_else(|| buffer.clone())
                .expect("buffer allocated")
        })
        .collect();
    new.push(Inst::new(
        None,
        InstKind::Call {
            callee: p.callee.clone(),
            args,
            ret: None,
        },
    ));
    let mut result = None;
    if let (Some(phi), Some(buf)) = (&p.escape, &buffer) {
        let name = f.fresh_name(&format!("{phi}.result"));
        new.push(Inst::new(Some(&name), InstKind::Load { ptr: buf.clone() }));
        result = Some((phi.clone(), Operand::Value(name)));
    }
    insert_before_terminator(f, &p.preheader, new);

    let pre = f
        .blocks
        .iter_mut()
        .find(|b| b.label == p.preheader)
        .expect("planned block exists");
    if let Some(t) = pre.terminator_mut() {
        t.kind = InstKind::Br {
            target: p.exit.clone(),
        };
    }
    if let Some(exit) = f.blocks.iter_mut().find(|b| b.label == p.exit) {
        for inst in &mut exit.insts {
            if let InstKind::Phi { incoming } = &mut inst.kind {
                for (_, l) in incoming.iter_mut() {
                    if p.blocks.contains(l) {
                        *l = p.preheader.clone();
                    }
                }
            }
        }
    }
    f.blocks.retain(|b| !p.blocks.contains(&b.label));
    if let Some((phi, value)) = result {
        f.replace_uses(&phi, &value);
    }
    let diags = verify(&out);
    if !diags.is_empty() {
        return Err(RewriteError::VerifyFailed(diags));
    }
    Ok(out)
}

/// A replaced loop nest.
#[derive(Debug, Clone, PartialEq)]
pub struct Applied {
    pub what: String,
    pub function: String,
    pub header: String,
    pub callee: String,
}

/// A match that was left in place.
#[derive(Debug, Clone, PartialEq)]
pub struct Skipped {
    pub what: String,
    pub function: String,
    pub header: String,
    pub reason: RewriteError,
}

#[derive(Debug, Clone)]
pub struct RewriteReport {
    pub module: Module,
    pub applied: Vec<Applied>,
    pub skipped: Vec<Skipped>,
}

/// Detects every computation in `m` and replaces each match that can be
/// replaced safely. `callee` names the harness for a computation.
///
/// Matches are applied in detection order. A match whose loop was already
/// removed by an earlier replacement is dropped silently.
pub fn rewrite_module(
    m: &Module,
    whats: &[WhatProgram],
    opts: DetectOptions,
    callee: impl Fn(&str) -> String,
) -> Result<RewriteReport, MatchError> {
    let detection = detect_all(m, whats, opts)?;
    let mut module = detection.module;
    let mut applied = Vec::new();
    let mut skipped = Vec::new();
    for hit in &detection.matches {
        let alive = module
            .function(&hit.function)
            .is_some_and(|f| f.block(&hit.header_block).is_some());
        if !alive {
            continue;
        }
        let name = callee(&hit.what);
        match plan(&module, hit, &name).and_then(|p| apply(&module, &p)) {
            Ok(next) => {
                module = next;
                applied.push(Applied {
                    what: hit.what.clone(),
                    function: hit.function.clone(),
                    header: hit.header_block.clone(),
                    callee: name,
                });
            }
            Err(reason) => skipped.push(Skipped {
                what: hit.what.clone(),
                function: hit.function.clone(),
                header: hit.header_block.clone(),
                reason,
            }),
        }
    }
    Ok(RewriteReport {
        module,
        applied,
        skipped,
    })
}
