//! Detection of computations in normalized IR.
//!
//! A computation with `d` levels (its `forall`s plus the dot product) is
//! matched against chains of `d` canonical loops, each the only loop inside
//! the previous one, whose innermost loop carries a floating-point sum that
//! starts at `0.0`. A backtracking solver then assigns an IR value to every
//! pattern node: iterators are seeded with the induction variables, loop
//! bounds are unified with the range expressions, the two accesses are
//! searched among the loads of the innermost loop, and the result must reach
//! a store of the target element (or leave the loop, for scalar targets).
//!
//! Every assignment, failure and backtrack is recorded; [`replay`] rebuilds
//! the final assignment from the trace alone.

use std::collections::BTreeMap;
use std::fmt;

use serde_json::{json, Value as Json};
use thiserror::Error;

use crate::analysis::{canonical_iv, find_loops_with, normalize, Cfg, DomTree, LoopDiagnostic};
use crate::ir::{infer_types, Function, InstKind, Module, Operand, Type};
use crate::what::{infer_interface, InterfaceError, WhatProgram};

mod skeleton;
mod solve;

use skeleton::Skeleton;
pub use solve::FunctionContext;
use solve::{Candidate, Solver};

pub const DEFAULT_BUDGET: u64 = 10_000;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NodeKey {
    /// An iterator or free variable of the computation.
    Var(String),
    /// A pattern node, numbered in skeleton order.
    Node(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub enum TraceEvent {
    Assign {
        node: NodeKey,
        value: Operand,
    },
    /// A goal had no candidate values at all.
    Fail {
        node: NodeKey,
    },
    /// The search resumed from trail length `to` with the next alternative.
    Backtrack {
        to: usize,
    },
}

/// Rebuilds the assignment trail from a trace.
pub fn replay(trace: &[TraceEvent]) -> Vec<(NodeKey, Operand)> {
    let mut trail = Vec::new();
    for ev in trace {
        match ev {
            TraceEvent::Assign { node, value } => trail.push((node.clone(), value.clone())),
            TraceEvent::Backtrack { to } => trail.truncate(*to),
            TraceEvent::Fail { .. } => {}
        }
    }
    trail
}

#[derive(Debug, Clone, PartialEq)]
pub enum TargetSite {
    /// The result is stored through `pointer` in `block`.
    Store { block: String, pointer: String },
    /// A scalar result: the reduction value is used after the loop.
    Escape,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Match {
    pub what: String,
    pub function: String,
    /// Header of the outermost matched loop.
    pub header_block: String,
    /// Loop headers from the outermost to the innermost.
    pub loops: Vec<String>,
    pub reduction_phi: String,
    pub target: TargetSite,
    pub solution: Vec<(NodeKey, Operand)>,
    /// Source text of every pattern node, indexed by [`NodeKey::Node`].
    pub nodes: Vec<String>,
    /// Parameters of the computation in harness order.
    pub params: Vec<String>,
    pub trace: Vec<TraceEvent>,
}

impl Match {
    pub fn value(&self, key: &NodeKey) -> Option<&Operand> {
        self.solution.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }

    pub fn var(&self, name: &str) -> Option<&Operand> {
        self.value(&NodeKey::Var(name.to_string()))
    }

    pub fn node_name(&self, key: &NodeKey) -> String {
        match key {
            NodeKey::Var(n) => n.clone(),
            NodeKey::Node(i) => self.nodes[*i].clone(),
        }
    }

    /// IR value of every bound parameter of the computation.
    pub fn bindings(&self) -> BTreeMap<String, String> {
        self.params
            .iter()
            .filter_map(|p| Some((p.clone(), self.var(p)?.to_string())))
            .collect()
    }

    /// The trace as `assign node <- value`, `fail node` and `backtrack to n`
    /// lines.
    pub fn trace_lines(&self) -> Vec<String> {
        self.trace
            .iter()
            .map(|ev| match ev {
                TraceEvent::Assign { node, value } => {
                    format!("assign {} <- {value}", self.node_name(node))
                }
                TraceEvent::Fail { node } => format!("fail {}", self.node_name(node)),
                TraceEvent::Backtrack { to } => format!("backtrack to {to}"),
            })
            .collect()
    }

    pub fn trace_json(&self) -> Json {
        Json::Array(
            self.trace
                .iter()
                .map(|ev| match ev {
                    TraceEvent::Assign { node, value } => json!({
                        "event": "assign",
                        "node": self.node_name(node),
                        "value": value.to_string(),
                    }),
                    TraceEvent::Fail { node } => json!({
                        "event": "fail",
                        "node": self.node_name(node),
                    }),
                    TraceEvent::Backtrack { to } => json!({"event": "backtrack", "to": to}),
                })
                .collect(),
        )
    }

    pub fn to_json(&self, with_trace: bool) -> Json {
        let mut j = json!({
            "computation": self.what,
            "function": self.function,
            "header_block": self.header_block,
            "bindings": self.bindings(),
        });
        if with_trace {
            j["trace"] = self.trace_json();
        }
        j
    }
}

impl fmt::Display for Match {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} in @{} at {}:",
            self.what, self.function, self.header_block
        )?;
        for (k, v) in self.bindings() {
            write!(f, " {k}={v}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MatchError {
    #[error(transparent)]
    Interface(#[from] InterfaceError),
    #[error("matching `{what}` against the loop at `{header}` in `@{function}` exceeded the budget of {budget} steps")]
    BudgetExceeded {
        what: String,
        function: String,
        header: String,
        budget: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DetectOptions {
    pub budget: u64,
}

impl Default for DetectOptions {
    fn default() -> Self {
        DetectOptions {
            budget: DEFAULT_BUDGET,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Detection {
    /// The normalized module the matches refer to.
    pub module: Module,
    pub matches: Vec<Match>,
    /// Functions whose loops could not be analysed, with the reason.
    pub diagnostics: Vec<(String, LoopDiagnostic)>,
}

/// Normalizes `m` and finds every occurrence of `what`.
pub fn detect(
    m: &Module,
    what: &WhatProgram,
    opts: DetectOptions,
) -> Result<Detection, MatchError> {
    detect_all(m, std::slice::from_ref(what), opts)
}

/// Normalizes `m` once and finds occurrences of each computation, ordered by
/// function, then loop header, then computation.
pub fn detect_all(
    m: &Module,
    whats: &[WhatProgram],
    opts: DetectOptions,
) -> Result<Detection, MatchError> {
    let module = normalize(m);
    let skeletons = whats
        .iter()
        .map(|w| Ok((w, Skeleton::new(w, infer_interface(w)?))))
        .collect::<Result<Vec<_>, MatchError>>()?;
    let mut matches = Vec::new();
    let mut diagnostics = Vec::new();
    for f in &module.functions {
        if f.blocks.is_empty() {
            continue;
        }
        let ctx = context(&module, f);
        diagnostics.extend(
            ctx.nest
                .diagnostics
                .iter()
                .map(|d| (f.name.clone(), d.clone())),
        );
        let mut found = Vec::new();
        for (w, sk) in &skeletons {
            for m in match_function(&ctx, w, sk, opts)? {
                let header = f.block_index(&m.header_block).unwrap_or(usize::MAX);
                found.push((header, m));
            }
        }
        found.sort_by_key(|(h, _)| *h);
        matches.extend(found.into_iter().map(|(_, m)| m));
    }
    Ok(Detection {
        module,
        matches,
        diagnostics,
    })
}

pub fn context<'f>(m: &Module, f: &'f Function) -> FunctionContext<'f> {
    let cfg = Cfg::of_function(f);
    let dom = DomTree::compute(&cfg);
    let nest = find_loops_with(f, &cfg, &dom);
    FunctionContext {
        f,
        defs: f.def_sites(),
        types: infer_types(m, f),
        cfg,
        dom,
        nest,
    }
}

fn candidates<'c>(ctx: &'c FunctionContext<'_>, depth: usize) -> Vec<Candidate<'c>> {
    let loops = &ctx.nest.loops;
    let mut order: Vec<usize> = (0..loops.len()).collect();
    order.sort_by_key(|&i| loops[i].header);
    let mut out = Vec::new();
    for start in order {
        let mut chain = vec![&loops[start]];
        while chain.len() < depth {
            match chain.last().expect("non-empty").children.as_slice() {
                [only] => chain.push(&loops[*only]),
                _ => break,
            }
        }
        if chain.len() != depth || !chain.last().expect("non-empty").children.is_empty() {
            continue;
        }
        let Ok(ivs) = chain
            .iter()
            .map(|l| canonical_iv(ctx.f, l))
            .collect::<Result<Vec<_>, _>>()
        else {
            continue;
        };
        if ivs.iter().any(|iv| iv.inclusive) {
            continue;
        }
        let inner = ivs.last().expect("non-empty");
        let pre = &ctx.f.blocks[inner.preheader].label;
        let latch = &ctx.f.blocks[inner.latch].label;
        let header = &ctx.f.blocks[chain.last().expect("non-empty").header];
        for phi in header.phis() {
            let (Some(name), InstKind::Phi { incoming }) = (&phi.result, &phi.kind) else {
                continue;
            };
            let zero = incoming
                .iter()
                .any(|(o, b)| b == pre && o.same(&Operand::Float(0.0)));
            let from_latch = incoming.iter().any(|(_, b)| b == latch);
            if incoming.len() == 2 && zero && from_latch && ctx.types.get(name) == Some(&Type::F64)
            {
                out.push(Candidate {
                    chain: chain.clone(),
                    ivs: ivs.clone(),
                    phi: name.clone(),
                });
            }
        }
    }
    out
}

fn match_function(
    ctx: &FunctionContext<'_>,
    what: &WhatProgram,
    sk: &Skeleton,
    opts: DetectOptions,
) -> Result<Vec<Match>, MatchError> {
    let mut out = Vec::new();
    for cand in candidates(ctx, sk.levels.len()) {
        let header = ctx.f.blocks[cand.chain[0].header].label.clone();
        let mut solver = Solver::new(ctx, sk, &cand, opts.budget);
        let solved = solver.run().map_err(|_| MatchError::BudgetExceeded {
            what: what.name.clone(),
            function: ctx.f.name.clone(),
            header: header.clone(),
            budget: opts.budget,
        })?;
        if !solved {
            continue;
        }
        let target = match solver.bound(&NodeKey::Node(sk.target)) {
            Some(Operand::Value(p)) if *p != cand.phi => {
                let block = solver
                    .target_stores()
                    .into_iter()
                    .find(|(_, ptr)| ptr.as_value() == Some(p))
                    .map(|(b, _)| ctx.f.blocks[b].label.clone())
                    .unwrap_or_default();
                TargetSite::Store {
                    block,
                    pointer: p.clone(),
                }
            }
            _ => TargetSite::Escape,
        };
        out.push(Match {
            what: what.name.clone(),
            function: ctx.f.name.clone(),
            header_block: header,
            loops: cand
                .chain
                .iter()
                .map(|l| ctx.f.blocks[l.header].label.clone())
                .collect(),
            reduction_phi: cand.phi.clone(),
            target,
            solution: solver.trail.clone(),
            nodes: sk.nodes.iter().map(|(_, t)| t.clone()).collect(),
            params: sk.sig.params.iter().map(|p| p.name.clone()).collect(),
            trace: std::mem::take(&mut solver.trace),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::parse_module;
    use crate::what::parse_what;

    const DOT: &str = "COMPUTATION dotproduct result = sum (0 <= i < length) a[i] * b[i];";

    const DOT_IR: &str = "func @dot(%x: ptr f64, %y: ptr f64, %n: i64) -> f64 {
entry:
  br h
h:
  %i = phi [0, entry], [%i1, body]
  %s = phi [0.0, entry], [%s1, body]
  %c = icmp.slt %i, %n
  condbr %c, body, exit
body:
  %px = elemptr %x, %i
  %vx = load %px
  %py = elemptr %y, %i
  %vy = load %py
  %m = fmul %vx, %vy
  %s1 = fadd %s, %m
  %i1 = add %i, 1
  br h
exit:
  ret %s
}";

    #[test]
    fn finds_a_dot_product() {
        let m = parse_module(DOT_IR).unwrap();
        let what = parse_what(DOT).unwrap();
        let d = detect(&m, &what, DetectOptions::default()).unwrap();
        assert_eq!(d.matches.len(), 1);
        let hit = &d.matches[0];
        assert_eq!(hit.header_block, "h");
        assert_eq!(hit.target, TargetSite::Escape);
        let b = hit.bindings();
        assert_eq!(b["a"], "%x");
        assert_eq!(b["b"], "%y");
        assert_eq!(b["length"], "%n");
        assert!(!b.contains_key("result"));
        assert_eq!(replay(&hit.trace), hit.solution);
    }

    #[test]
    fn extra_addend_is_rejected() {
        let text = DOT_IR.replace(
            "%s1 = fadd %s, %m",
            "%m2 = fadd %m, 1.0\n  %s1 = fadd %s, %m2",
        );
        let m = parse_module(&text).unwrap();
        let what = parse_what(DOT).unwrap();
        let d = detect(&m, &what, DetectOptions::default()).unwrap();
        assert!(d.matches.is_empty());
    }

    #[test]
    fn tiny_budget_is_exceeded() {
        let m = parse_module(DOT_IR).unwrap();
        let what = parse_what(DOT).unwrap();
        let err = detect(&m, &what, DetectOptions { budget: 2 }).unwrap_err();
        assert!(matches!(err, MatchError::BudgetExceeded { .. }));
    }

    #[test]
    fn json_shape() {
        let m = parse_module(DOT_IR).unwrap();
        let what = parse_what(DOT).unwrap();
        let d = detect(&m, &what, DetectOptions::default()).unwrap();
        let j = d.matches[0].to_json(true);
        assert_eq!(j["function"], "dot");
        assert_eq!(j["bindings"]["a"], "%x");
        assert_eq!(j["trace"][0]["event"], "assign");
        assert_eq!(j["trace"][0]["node"], "i");
    }
}
