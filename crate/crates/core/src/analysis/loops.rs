//! Natural loops, their nesting, and the canonical counted-loop form.
//!
//! A canonical loop is top-tested:
//!
//! ```text
//! pre:                              ; only successor is head
//!   br head
//! head:
//!   %i = phi [L, pre], [%i.next, latch]
//!   %c = icmp.slt %i, U             ; or icmp.sle
//!   condbr %c, body, exit           ; the only exit of the loop
//! ...
//! latch:                            ; the only back edge
//!   %i.next = add %i, 1
//!   br head
//! ```

use std::fmt;

use thiserror::Error;

use crate::ir::{Function, InstKind, Operand, Pred};

use super::cfg::Cfg;
use super::dom::DomTree;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Loop {
    pub header: usize,
    /// Member blocks in function order.
    pub blocks: Vec<usize>,
    pub latches: Vec<usize>,
    /// Edges leaving the loop, as (inside, outside).
    pub exits: Vec<(usize, usize)>,
    pub preheader: Option<usize>,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    pub depth: usize,
}

impl Loop {
    pub fn contains(&self, block: usize) -> bool {
        self.blocks.binary_search(&block).is_ok()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LoopDiagnostic {
    /// A cycle with more than one entry; no loops are reported for the
    /// function.
    IrreducibleRegion { block: String },
}

impl fmt::Display for LoopDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LoopDiagnostic::IrreducibleRegion { block } => {
                write!(
                    f,
                    "IrreducibleRegion: cycle through `{block}` has several entries"
                )
            }
        }
    }
}

/// All loops of a function, outer loops before the loops they contain.
#[derive(Debug, Clone, Default)]
pub struct LoopNest {
    pub loops: Vec<Loop>,
    pub diagnostics: Vec<LoopDiagnostic>,
}

impl LoopNest {
    pub fn with_header(&self, header: usize) -> Option<usize> {
        self.loops.iter().position(|l| l.header == header)
    }

    pub fn roots(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.loops.len()).filter(|&i| self.loops[i].parent.is_none())
    }

    /// Innermost loop containing `block`.
    pub fn innermost(&self, block: usize) -> Option<usize> {
        (0..self.loops.len())
            .filter(|&i| self.loops[i].contains(block))
            .max_by_key(|&i| self.loops[i].depth)
    }
}

fn irreducible_target(cfg: &Cfg, dom: &DomTree) -> Option<usize> {
    if cfg.is_empty() {
        return None;
    }
    let n = cfg.len();
    let mut state = vec![0u8; n]; // 0 new, 1 on stack, 2 done
    let mut stack = vec![(0usize, 0usize)];
    state[0] = 1;
    while let Some(top) = stack.last_mut() {
        let node = top.0;
        let next = cfg.succs[node].get(top.1).copied();
        top.1 += 1;
        match next {
            Some(s) if state[s] == 0 => {
                state[s] = 1;
                stack.push((s, 0));
            }
            Some(s) if state[s] == 1 && !dom.dominates(s, node) => return Some(s),
            Some(_) => {}
            None => {
                state[node] = 2;
                stack.pop();
            }
        }
    }
    None
}

/// Finds the natural loops of `f`. Back edges to the same header are merged
/// into one loop.
pub fn find_loops(f: &Function) -> LoopNest {
    let cfg = Cfg::of_function(f);
    let dom = DomTree::compute(&cfg);
    find_loops_with(f, &cfg, &dom)
}

pub fn find_loops_with(f: &Function, cfg: &Cfg, dom: &DomTree) -> LoopNest {
    if let Some(b) = irreducible_target(cfg, dom) {
        return LoopNest {
            loops: Vec::new(),
            diagnostics: vec![LoopDiagnostic::IrreducibleRegion {
                block: f.blocks[b].label.clone(),
            }],
        };
    }
    let n = cfg.len();
    let mut loops: Vec<Loop> = Vec::new();
    for h in 0..n {
        let latches: Vec<usize> = cfg.preds[h]
            .iter()
            .copied()
            .filter(|&p| dom.dominates(h, p))
            .collect();
        if latches.is_empty() {
            continue;
        }
        let mut member = vec![false; n];
        member[h] = true;
        let mut work: Vec<usize> = latches.clone();
        while let Some(b) = work.pop() {
            if member[b] {
                continue;
            }
            member[b] = true;
            work.extend(
                cfg.preds[b]
                    .iter()
                    .copied()
                    .filter(|&p| dom.is_reachable(p)),
            );
        }
        let blocks: Vec<usize> = (0..n).filter(|&b| member[b]).collect();
        let exits = blocks
            .iter()
            .flat_map(|&b| cfg.succs[b].iter().map(move |&s| (b, s)))
            .filter(|&(_, s)| !member[s])
            .collect();
        let outside: Vec<usize> = cfg.preds[h]
            .iter()
            .copied()
            .filter(|&p| !member[p])
            .collect();
        let preheader = match outside.as_slice() {
            [p] if cfg.succs[*p] == [h] => Some(*p),
            _ => None,
        };
        let mut latches = latches;
        latches.sort_unstable();
        loops.push(Loop {
            header: h,
            blocks,
            latches,
            exits,
            preheader,
            parent: None,
            children: Vec::new(),
            depth: 0,
        });
    }
    // Outer loops first; ties cannot occur because headers are distinct.
    loops.sort_by_key(|l| (std::cmp::Reverse(l.blocks.len()), l.header));
    for i in 0..loops.len() {
        let parent = (0..loops.len())
            .filter(|&j| {
                j != i
                    && loops[j].blocks.len() > loops[i].blocks.len()
                    && loops[j].contains(loops[i].header)
            })
            .min_by_key(|&j| loops[j].blocks.len());
        loops[i].parent = parent;
    }
    for i in 0..loops.len() {
        let mut d = 0;
        let mut cur = loops[i].parent;
        while let Some(p) = cur {
            d += 1;
            cur = loops[p].parent;
        }
        loops[i].depth = d;
        if let Some(p) = loops[i].parent {
            loops[p].children.push(i);
        }
    }
    for l in &mut loops {
        l.children.sort_by_key(|&c| c);
    }
    LoopNest {
        loops,
        diagnostics: Vec::new(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NonCanonical {
    #[error("loop has {0} latches")]
    MultipleLatches(usize),
    #[error("loop has no dedicated preheader")]
    NoPreheader,
    #[error("loop header does not end in a conditional exit")]
    HeaderNotExiting,
    #[error("loop has {0} exit edges")]
    MultipleExits(usize),
    #[error("loop exit condition `{0}` is not icmp.slt or icmp.sle on the induction variable")]
    UnsupportedCompare(String),
    #[error("no induction variable counts up by one from the preheader")]
    NoInductionVariable,
    #[error("loop bound `{0}` changes inside the loop")]
    VariantBound(String),
}

/// The counted-loop facts of a canonical loop.
#[derive(Debug, Clone, PartialEq)]
pub struct InductionVar {
    pub phi: String,
    pub increment: String,
    pub compare: String,
    pub lower: Operand,
    pub upper: Operand,
    /// `icmp.sle`: the loop runs while `phi <= upper`.
    pub inclusive: bool,
    pub preheader: usize,
    pub latch: usize,
    pub body: usize,
    pub exit: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoopBounds {
    pub lower: Operand,
    pub upper: Operand,
    pub inclusive: bool,
}

/// Whether `op` has the same value on every iteration of loop `l`.
pub fn is_invariant(f: &Function, l: &Loop, op: &Operand) -> bool {
    let Some(name) = op.as_value() else {
        return true;
    };
    if f.is_param(name) {
        return true;
    }
    !l.blocks.iter().any(|&b| {
        f.blocks[b]
            .insts
            .iter()
            .any(|i| i.result.as_deref() == Some(name))
    })
}

pub fn canonical_iv(f: &Function, l: &Loop) -> Result<InductionVar, NonCanonical> {
    if l.latches.len() != 1 {
        return Err(NonCanonical::MultipleLatches(l.latches.len()));
    }
    let latch = l.latches[0];
    let preheader = l.preheader.ok_or(NonCanonical::NoPreheader)?;
    let header = &f.blocks[l.header];
    let Some(InstKind::CondBr {
        cond,
        then_bb,
        else_bb,
    }) = header.terminator().map(|t| &t.kind)
    else {
        return Err(NonCanonical::HeaderNotExiting);
    };
    let (Some(body), Some(exit)) = (f.block_index(then_bb), f.block_index(else_bb)) else {
        return Err(NonCanonical::HeaderNotExiting);
    };
    if !l.contains(body) || l.contains(exit) {
        return Err(NonCanonical::HeaderNotExiting);
    }
    if l.exits.len() != 1 {
        return Err(NonCanonical::MultipleExits(l.exits.len()));
    }
    let cond_name = cond.as_value().unwrap_or("");
    let compare = header
        .insts
        .iter()
        .find(|i| i.result.as_deref() == Some(cond_name))
        .ok_or_else(|| NonCanonical::UnsupportedCompare(cond.to_string()))?;
    let InstKind::Icmp { pred, lhs, rhs } = &compare.kind else {
        return Err(NonCanonical::UnsupportedCompare(cond.to_string()));
    };
    let inclusive = match pred {
        Pred::Slt => false,
        Pred::Sle => true,
        other => {
            return Err(NonCanonical::UnsupportedCompare(
                other.mnemonic().to_string(),
            ))
        }
    };
    let iv = lhs
        .as_value()
        .ok_or_else(|| NonCanonical::UnsupportedCompare(cond.to_string()))?;
    let phi = header
        .phis()
        .find(|i| i.result.as_deref() == Some(iv))
        .ok_or(NonCanonical::NoInductionVariable)?;
    let InstKind::Phi { incoming } = &phi.kind else {
        unreachable!("phis() yields phis")
    };
    let pre_label = &f.blocks[preheader].label;
    let latch_label = &f.blocks[latch].label;
    let lower = incoming
        .iter()
        .find(|(_, b)| b == pre_label)
        .map(|(o, _)| o.clone())
        .ok_or(NonCanonical::NoInductionVariable)?;
    let next = incoming
        .iter()
        .find(|(_, b)| b == latch_label)
        .and_then(|(o, _)| o.as_value())
        .ok_or(NonCanonical::NoInductionVariable)?;
    if incoming.len() != 2 {
        return Err(NonCanonical::NoInductionVariable);
    }
    let step_ok = l.blocks.iter().any(|&b| {
        f.blocks[b].insts.iter().any(|i| {
            i.result.as_deref() == Some(next)
                && matches!(&i.kind, InstKind::Binary { op: crate::ir::BinOp::Add, lhs, rhs }
                    if (lhs.as_value() == Some(iv) && *rhs == Operand::Int(1))
                        || (rhs.as_value() == Some(iv) && *lhs == Operand::Int(1)))
        })
    });
    if !step_ok {
        return Err(NonCanonical::NoInductionVariable);
    }
    for bound in [&lower, rhs] {
        if !is_invariant(f, l, bound) {
            return Err(NonCanonical::VariantBound(bound.to_string()));
        }
    }
    Ok(InductionVar {
        phi: iv.to_string(),
        increment: next.to_string(),
        compare: cond_name.to_string(),
        lower,
        upper: rhs.clone(),
        inclusive,
        preheader,
        latch,
        body,
        exit,
    })
}

/// Lower and upper bound of a canonical loop. Fails with `NonCanonicalLoop`
/// reasons for anything else.
pub fn loop_bounds(f: &Function, l: &Loop) -> Result<LoopBounds, NonCanonical> {
    canonical_iv(f, l).map(|iv| LoopBounds {
        lower: iv.lower,
        upper: iv.upper,
        inclusive: iv.inclusive,
    })
}
