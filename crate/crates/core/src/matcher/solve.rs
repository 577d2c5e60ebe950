//! Backtracking unification of pattern nodes with IR values.

use std::collections::HashMap;

use crate::analysis::{Cfg, DomTree, InductionVar, Loop, LoopNest};
use crate::ir::types::literal_type;
use crate::ir::{BinOp, Function, Inst, InstKind, InstPos, Operand, Type};

use super::skeleton::{Pat, Skeleton};
use super::{NodeKey, TraceEvent};

/// Analyses of one normalized function shared by all candidates.
pub struct FunctionContext<'f> {
    pub f: &'f Function,
    pub cfg: Cfg,
    pub dom: DomTree,
    pub nest: LoopNest,
    pub defs: HashMap<String, InstPos>,
    pub types: HashMap<String, Type>,
}

impl FunctionContext<'_> {
    pub fn def(&self, name: &str) -> Option<&Inst> {
        self.defs.get(name).map(|&pos| self.f.inst(pos))
    }

    fn def_kind(&self, op: &Operand) -> Option<&InstKind> {
        self.def(op.as_value()?).map(|i| &i.kind)
    }

    fn type_of(&self, op: &Operand) -> Option<Type> {
        match op {
            Operand::Value(v) => self.types.get(v).copied(),
            lit => literal_type(lit),
        }
    }

    /// `(B, I)` when `op` is `load (elemptr B, I)`.
    fn element_load(&self, op: &Operand) -> Option<(Operand, Operand)> {
        let InstKind::Load { ptr } = self.def_kind(op)? else {
            return None;
        };
        self.element_ptr(ptr)
    }

    fn element_ptr(&self, ptr: &Operand) -> Option<(Operand, Operand)> {
        match self.def_kind(ptr)? {
            InstKind::ElemPtr { base, index } => Some((base.clone(), index.clone())),
            _ => None,
        }
    }
}

/// One loop nest and reduction to match against.
pub(crate) struct Candidate<'c> {
    pub chain: Vec<&'c Loop>,
    pub ivs: Vec<InductionVar>,
    pub phi: String,
}

#[derive(Debug, Clone)]
enum Goal {
    Node(usize, Operand),
    Var(String, Operand, Type),
    Access(usize),
    Product,
    Reduction,
    Target,
}

struct Alt {
    assign: Option<(NodeKey, Operand)>,
    subgoals: Vec<Goal>,
}

impl Alt {
    fn empty() -> Alt {
        Alt {
            assign: None,
            subgoals: Vec::new(),
        }
    }

    fn node(id: usize, value: Operand, subgoals: Vec<Goal>) -> Alt {
        Alt {
            assign: Some((NodeKey::Node(id), value)),
            subgoals,
        }
    }
}

pub(crate) struct BudgetExceeded;

pub(crate) struct Solver<'a> {
    ctx: &'a FunctionContext<'a>,
    sk: &'a Skeleton,
    cand: &'a Candidate<'a>,
    pub trail: Vec<(NodeKey, Operand)>,
    pub trace: Vec<TraceEvent>,
    steps: u64,
    budget: u64,
}

impl<'a> Solver<'a> {
    pub fn new(
        ctx: &'a FunctionContext<'a>,
        sk: &'a Skeleton,
        cand: &'a Candidate<'a>,
        budget: u64,
    ) -> Self {
        Solver {
            ctx,
            sk,
            cand,
            trail: Vec::new(),
            trace: Vec::new(),
            steps: 0,
            budget,
        }
    }

    fn assign(&mut self, key: NodeKey, value: Operand) {
        self.trace.push(TraceEvent::Assign {
            node: key.clone(),
            value: value.clone(),
        });
        self.trail.push((key, value));
    }

    pub fn bound(&self, key: &NodeKey) -> Option<&Operand> {
        self.trail
            .iter()
            .rev()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v)
    }

    /// Seeds the iterators and runs the search. `Ok(true)` leaves the
    /// solution on the trail.
    pub fn run(&mut self) -> Result<bool, BudgetExceeded> {
        let mut goals = Vec::new();
        for (level, iv) in self.sk.levels.iter().zip(&self.cand.ivs) {
            self.assign(
                NodeKey::Var(level.iterator.clone()),
                Operand::value(&iv.phi),
            );
        }
        for (level, iv) in self.sk.levels.iter().zip(&self.cand.ivs) {
            goals.push(Goal::Node(level.lower, iv.lower.clone()));
            goals.push(Goal::Node(level.upper, iv.upper.clone()));
        }
        goals.extend([
            Goal::Access(self.sk.lhs),
            Goal::Access(self.sk.rhs),
            Goal::Product,
            Goal::Reduction,
            Goal::Target,
        ]);
        goals.reverse();
        self.solve(goals)
    }

    fn goal_key(&self, g: &Goal) -> NodeKey {
        match g {
            Goal::Node(id, _) => match &self.sk.nodes[*id].0 {
                Pat::Name(n) => NodeKey::Var(n.clone()),
                _ => NodeKey::Node(*id),
            },
            Goal::Var(n, _, _) => NodeKey::Var(n.clone()),
            Goal::Access(id) => NodeKey::Node(*id),
            Goal::Product => NodeKey::Node(self.sk.product),
            Goal::Reduction => NodeKey::Node(self.sk.dot),
            Goal::Target => NodeKey::Node(self.sk.target),
        }
    }

    fn solve(&mut self, mut goals: Vec<Goal>) -> Result<bool, BudgetExceeded> {
        let Some(goal) = goals.pop() else {
            return Ok(true);
        };
        let alts = self.alternatives(&goal);
        if alts.is_empty() {
            let node = self.goal_key(&goal);
            self.trace.push(TraceEvent::Fail { node });
            return Ok(false);
        }
        let mark = self.trail.len();
        for (k, alt) in alts.into_iter().enumerate() {
            if k > 0 {
                self.trace.push(TraceEvent::Backtrack { to: mark });
                self.trail.truncate(mark);
            }
            self.steps += 1;
            if self.steps > self.budget {
                return Err(BudgetExceeded);
            }
            if let Some((key, value)) = alt.assign {
                self.assign(key, value);
            }
            let mut next = goals.clone();
            next.extend(alt.subgoals.into_iter().rev());
            if self.solve(next)? {
                return Ok(true);
            }
        }
        self.trail.truncate(mark);
        Ok(false)
    }

    fn innermost(&self) -> &Loop {
        self.cand.chain.last().expect("non-empty chain")
    }

    fn blocks_in_order(&self, l: &Loop) -> impl Iterator<Item = &'a Inst> + '_ {
        let f = self.ctx.f;
        let blocks = l.blocks.clone();
        blocks
            .into_iter()
            .flat_map(move |b| f.blocks[b].insts.iter())
    }

    fn alternatives(&self, goal: &Goal) -> Vec<Alt> {
        let ctx = self.ctx;
        match goal {
            Goal::Var(name, op, ty) => {
                if ctx.type_of(op) != Some(*ty) {
                    return Vec::new();
                }
                match self.bound(&NodeKey::Var(name.clone())) {
                    Some(v) if v.same(op) => vec![Alt::empty()],
                    Some(_) => Vec::new(),
                    None => vec![Alt {
                        assign: Some((NodeKey::Var(name.clone()), op.clone())),
                        subgoals: Vec::new(),
                    }],
                }
            }
            Goal::Node(id, op) => {
                let id = *id;
                match &self.sk.nodes[id].0 {
                    Pat::Name(n) => {
                        self.alternatives(&Goal::Var(n.clone(), op.clone(), self.sk.var_type(n)))
                    }
                    Pat::Const(c) => {
                        if op.same(&Operand::Int(*c)) {
                            vec![Alt::empty()]
                        } else {
                            Vec::new()
                        }
                    }
                    Pat::IntLoad { base, index } => match ctx.element_load(op) {
                        Some((b, i)) => vec![Alt::node(
                            id,
                            op.clone(),
                            vec![
                                Goal::Var(base.clone(), b, self.sk.var_type(base)),
                                Goal::Node(*index, i),
                            ],
                        )],
                        None => Vec::new(),
                    },
                    Pat::Add(x, y) | Pat::Mul(x, y) => {
                        let want = if matches!(self.sk.nodes[id].0, Pat::Add(..)) {
                            BinOp::Add
                        } else {
                            BinOp::Mul
                        };
                        match ctx.def_kind(op) {
                            Some(InstKind::Binary { op: o, lhs, rhs }) if *o == want => {
                                let mut alts = vec![Alt::node(
                                    id,
                                    op.clone(),
                                    vec![Goal::Node(*x, lhs.clone()), Goal::Node(*y, rhs.clone())],
                                )];
                                if !lhs.same(rhs) {
                                    alts.push(Alt::node(
                                        id,
                                        op.clone(),
                                        vec![
                                            Goal::Node(*x, rhs.clone()),
                                            Goal::Node(*y, lhs.clone()),
                                        ],
                                    ));
                                }
                                alts
                            }
                            _ => Vec::new(),
                        }
                    }
                    _ => Vec::new(),
                }
            }
            Goal::Access(id) => {
                let Pat::FloatLoad { base, index } = &self.sk.nodes[*id].0 else {
                    return Vec::new();
                };
                self.blocks_in_order(self.innermost())
                    .filter_map(|inst| {
                        let v = Operand::value(inst.result.as_deref()?);
                        if !matches!(inst.kind, InstKind::Load { .. }) {
                            return None;
                        }
                        if ctx.type_of(&v) != Some(Type::F64) {
                            return None;
                        }
                        let (b, i) = ctx.element_load(&v)?;
                        Some(Alt::node(
                            *id,
                            v,
                            vec![
                                Goal::Var(base.clone(), b, Type::PtrF64),
                                Goal::Node(*index, i),
                            ],
                        ))
                    })
                    .collect()
            }
            Goal::Product => {
                let (Some(l), Some(r)) = (
                    self.bound(&NodeKey::Node(self.sk.lhs)),
                    self.bound(&NodeKey::Node(self.sk.rhs)),
                ) else {
                    return Vec::new();
                };
                self.blocks_in_order(self.innermost())
                    .filter_map(|inst| match &inst.kind {
                        InstKind::Binary {
                            op: BinOp::FMul,
                            lhs,
                            rhs,
                        } if (lhs.same(l) && rhs.same(r)) || (lhs.same(r) && rhs.same(l)) => {
                            Some(Alt::node(
                                self.sk.product,
                                Operand::value(inst.result.as_deref()?),
                                Vec::new(),
                            ))
                        }
                        _ => None,
                    })
                    .collect()
            }
            Goal::Reduction => {
                let Some(m) = self.bound(&NodeKey::Node(self.sk.product)) else {
                    return Vec::new();
                };
                let phi = Operand::value(&self.cand.phi);
                let latch = &ctx.f.blocks[self.cand.ivs.last().expect("ivs").latch].label;
                let next = ctx.def(&self.cand.phi).and_then(|i| match &i.kind {
                    InstKind::Phi { incoming } => incoming
                        .iter()
                        .find(|(_, b)| b == latch)
                        .map(|(o, _)| o.clone()),
                    _ => None,
                });
                match next.as_ref().and_then(|n| ctx.def_kind(n)) {
                    Some(InstKind::Binary {
                        op: BinOp::FAdd,
                        lhs,
                        rhs,
                    }) if (lhs.same(&phi) && rhs.same(m)) || (lhs.same(m) && rhs.same(&phi)) => {
                        vec![Alt::node(self.sk.dot, phi, Vec::new())]
                    }
                    _ => Vec::new(),
                }
            }
            Goal::Target => match &self.sk.nodes[self.sk.target].0 {
                Pat::Escape => vec![Alt::node(
                    self.sk.target,
                    Operand::value(&self.cand.phi),
                    Vec::new(),
                )],
                Pat::Store { base, index } => self
                    .target_stores()
                    .into_iter()
                    .filter_map(|(_, ptr)| {
                        let (b, i) = ctx.element_ptr(&ptr)?;
                        Some(Alt::node(
                            self.sk.target,
                            ptr,
                            vec![
                                Goal::Var(base.clone(), b, Type::PtrF64),
                                Goal::Node(*index, i),
                            ],
                        ))
                    })
                    .collect(),
                _ => Vec::new(),
            },
        }
    }

    /// Stores of the reduction result that run once per iteration of the
    /// enclosing level: outside the innermost loop, inside its parent and
    /// dominating the parent's latch. Without an enclosing level, stores in
    /// the loop's exit block.
    pub fn target_stores(&self) -> Vec<(usize, Operand)> {
        let ctx = self.ctx;
        let inner = self.innermost();
        let k = self.cand.chain.len();
        let allowed = |b: usize| {
            if inner.contains(b) {
                return false;
            }
            if k >= 2 {
                let parent = self.cand.chain[k - 2];
                let latch = self.cand.ivs[k - 2].latch;
                parent.contains(b) && ctx.dom.dominates(b, latch)
            } else {
                b == self.cand.ivs[0].exit
            }
        };
        let phi = Operand::value(&self.cand.phi);
        let mut out = Vec::new();
        for (bi, b) in ctx.f.blocks.iter().enumerate() {
            if !allowed(bi) {
                continue;
            }
            for inst in &b.insts {
                if let InstKind::Store { value, ptr } = &inst.kind {
                    if value.same(&phi) {
                        out.push((bi, ptr.clone()));
                    }
                }
            }
        }
        out
    }
}
