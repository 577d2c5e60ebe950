//! Rewrites functions towards the canonical loop form the matcher expects.
//!
//! Every pass preserves the interpreter's observable behaviour on programs
//! that do not trap or overflow. The passes run round-robin until none of
//! them changes the function.

use std::collections::{HashMap, HashSet};

use crate::ir::{BinOp, Block, Function, Inst, InstKind, Module, Operand, Pred};

use super::cfg::Cfg;
use super::loops::{canonical_iv, find_loops, is_invariant, Loop};

/// Upper bound on fixpoint rounds per function.
pub const MAX_ROUNDS: usize = 100;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NormalizeReport {
    /// Functions that reached a fixpoint within [`MAX_ROUNDS`].
    pub converged: bool,
    pub rounds: usize,
}

/// Normalizes every function of `m`.
pub fn normalize(m: &Module) -> Module {
    normalize_with_report(m).0
}

pub fn normalize_with_report(m: &Module) -> (Module, NormalizeReport) {
    let mut out = m.clone();
    let mut report = NormalizeReport {
        converged: true,
        rounds: 0,
    };
    for f in &mut out.functions {
        let (rounds, converged) = normalize_function(f);
        report.rounds = report.rounds.max(rounds);
        report.converged &= converged;
    }
    (out, report)
}

/// Returns the number of rounds and whether a fixpoint was reached.
pub fn normalize_function(f: &mut Function) -> (usize, bool) {
    if f.blocks.is_empty() {
        return (0, true);
    }
    for round in 1..=MAX_ROUNDS {
        let mut changed = false;
        changed |= fold_constants(f);
        changed |= propagate_copies(f);
        changed |= remove_unreachable(f);
        changed |= eliminate_dead_code(f);
        changed |= insert_preheaders(f);
        changed |= canonicalize_guards(f);
        changed |= merge_induction_variables(f);
        changed |= reverse_countdown_loops(f);
        if !changed {
            return (round, true);
        }
    }
    (MAX_ROUNDS, false)
}

fn remove_def(f: &mut Function, name: &str) {
    for b in &mut f.blocks {
        b.insts.retain(|i| i.result.as_deref() != Some(name));
    }
}

fn find_def<'f>(f: &'f Function, name: &str) -> Option<&'f Inst> {
    f.blocks
        .iter()
        .flat_map(|b| &b.insts)
        .find(|i| i.result.as_deref() == Some(name))
}

fn fold(inst: &Inst) -> Option<Operand> {
    match &inst.kind {
        InstKind::Binary { op, lhs, rhs } => match (lhs, rhs) {
            (Operand::Int(a), Operand::Int(b)) => Some(Operand::Int(match op {
                BinOp::Add => a.wrapping_add(*b),
                BinOp::Sub => a.wrapping_sub(*b),
                BinOp::Mul => a.wrapping_mul(*b),
                _ => return None,
            })),
            (Operand::Float(a), Operand::Float(b)) => {
                let r = match op {
                    BinOp::FAdd => a + b,
                    BinOp::FSub => a - b,
                    BinOp::FMul => a * b,
                    _ => return None,
                };
                r.is_finite().then_some(Operand::Float(r))
            }
            _ => None,
        },
        InstKind::Icmp { pred, lhs, rhs } => match (lhs, rhs) {
            (Operand::Int(a), Operand::Int(b)) => Some(Operand::Bool(pred.eval(*a, *b))),
            _ => None,
        },
        _ => None,
    }
}

/// Drops the phi entries of block `to` that name `from`.
fn drop_phi_entries(f: &mut Function, to: &str, from: &str) {
    if let Some(b) = f.blocks.iter_mut().find(|b| b.label == to) {
        for inst in &mut b.insts {
            if let InstKind::Phi { incoming } = &mut inst.kind {
                incoming.retain(|(_, l)| l != from);
            }
        }
    }
}

pub fn fold_constants(f: &mut Function) -> bool {
    let mut changed = false;
    loop {
        let found = f
            .blocks
            .iter()
            .flat_map(|b| &b.insts)
            .find_map(|i| Some((i.result.clone()?, fold(i)?)));
        let Some((name, lit)) = found else { break };
        f.replace_uses(&name, &lit);
        remove_def(f, &name);
        changed = true;
    }
    for bi in 0..f.blocks.len() {
        let label = f.blocks[bi].label.clone();
        let Some(term) = f.blocks[bi].terminator_mut() else {
            continue;
        };
        let InstKind::CondBr {
            cond,
            then_bb,
            else_bb,
        } = &term.kind
        else {
            continue;
        };
        let (keep, drop) = match cond {
            Operand::Bool(true) => (then_bb.clone(), else_bb.clone()),
            Operand::Bool(false) => (else_bb.clone(), then_bb.clone()),
            _ if then_bb == else_bb => (then_bb.clone(), then_bb.clone()),
            _ => continue,
        };
        term.kind = InstKind::Br {
            target: keep.clone(),
        };
        if drop != keep {
            drop_phi_entries(f, &drop, &label);
        }
        changed = true;
    }
    changed
}

/// `x + (z - x)` in either operand order.
fn cancelled_sum(lhs: &Operand, rhs: &Operand, defs: &HashMap<&str, &InstKind>) -> Option<Operand> {
    [(lhs, rhs), (rhs, lhs)]
        .into_iter()
        .find_map(|(x, y)| match defs.get(y.as_value()?)? {
            InstKind::Binary {
                op: BinOp::Sub,
                lhs: z,
                rhs: w,
            } if w.same(x) => Some(z.clone()),
            _ => None,
        })
}

fn copy_of(inst: &Inst, defs: &HashMap<&str, &InstKind>) -> Option<Operand> {
    let name = inst.result.as_deref()?;
    match &inst.kind {
        InstKind::Binary {
            op: BinOp::Add,
            lhs,
            rhs,
        } if cancelled_sum(lhs, rhs, defs).is_some() => cancelled_sum(lhs, rhs, defs),
        InstKind::Binary { op, lhs, rhs } => match (op, lhs, rhs) {
            (BinOp::Add, x, Operand::Int(0)) | (BinOp::Add, Operand::Int(0), x) => Some(x.clone()),
            (BinOp::Sub, x, Operand::Int(0)) => Some(x.clone()),
            (BinOp::Mul, x, Operand::Int(1)) | (BinOp::Mul, Operand::Int(1), x) => Some(x.clone()),
            (BinOp::Mul, _, Operand::Int(0)) | (BinOp::Mul, Operand::Int(0), _) => {
                Some(Operand::Int(0))
            }
            _ => None,
        },
        InstKind::Phi { incoming } => {
            let mut others = incoming
                .iter()
                .map(|(o, _)| o)
                .filter(|o| o.as_value() != Some(name));
            let first = others.next()?;
            others.all(|o| o.same(first)).then(|| first.clone())
        }
        _ => None,
    }
}

pub fn propagate_copies(f: &mut Function) -> bool {
    let mut changed = false;
    loop {
        let defs: HashMap<&str, &InstKind> = f
            .blocks
            .iter()
            .flat_map(|b| &b.insts)
            .filter_map(|i| Some((i.result.as_deref()?, &i.kind)))
            .collect();
        let found = f
            .blocks
            .iter()
            .flat_map(|b| &b.insts)
            .find_map(|i| Some((i.result.clone()?, copy_of(i, &defs)?)));
        let Some((name, with)) = found else { break };
        f.replace_uses(&name, &with);
        remove_def(f, &name);
        changed = true;
    }
    changed
}

pub fn remove_unreachable(f: &mut Function) -> bool {
    let reach = Cfg::of_function(f).reachable();
    if reach.iter().all(|&r| r) {
        return false;
    }
    let dead: HashSet<String> = f
        .blocks
        .iter()
        .zip(&reach)
        .filter(|(_, r)| !**r)
        .map(|(b, _)| b.label.clone())
        .collect();
    let mut keep = reach.iter();
    f.blocks
        .retain(|_| *keep.next().expect("one flag per block"));
    for b in &mut f.blocks {
        for inst in &mut b.insts {
            if let InstKind::Phi { incoming } = &mut inst.kind {
                incoming.retain(|(_, l)| !dead.contains(l));
            }
        }
    }
    true
}

/// Mark-and-sweep removal of unused pure instructions, plus removal of
/// stores that are overwritten through the same pointer operand before any
/// load or call in the same block.
pub fn eliminate_dead_code(f: &mut Function) -> bool {
    let mut changed = false;

    for b in &mut f.blocks {
        let mut dead = vec![false; b.insts.len()];
        let mut pending: Vec<(Operand, usize)> = Vec::new();
        for (ii, inst) in b.insts.iter().enumerate() {
            match &inst.kind {
                InstKind::Store { ptr, .. } => {
                    if let Some(pos) = pending.iter().position(|(p, _)| p.same(ptr)) {
                        dead[pending[pos].1] = true;
                        pending.remove(pos);
                    }
                    pending.push((ptr.clone(), ii));
                }
                InstKind::Load { .. } | InstKind::Call { .. } => pending.clear(),
                _ => {}
            }
        }
        if dead.iter().any(|&d| d) {
            let mut it = dead.iter();
            b.insts
                .retain(|_| !*it.next().expect("one flag per instruction"));
            changed = true;
        }
    }

    let mut live: HashSet<String> = HashSet::new();
    let mut work: Vec<&Inst> = f
        .blocks
        .iter()
        .flat_map(|b| &b.insts)
        .filter(|i| i.has_side_effects() || i.is_terminator())
        .collect();
    let defs: std::collections::HashMap<&str, &Inst> = f
        .blocks
        .iter()
        .flat_map(|b| &b.insts)
        .filter_map(|i| Some((i.result.as_deref()?, i)))
        .collect();
    while let Some(inst) = work.pop() {
        for op in inst.operands() {
            if let Some(v) = op.as_value() {
                if live.insert(v.to_string()) {
                    if let Some(d) = defs.get(v) {
                        work.push(d);
                    }
                }
            }
        }
    }
    for b in &mut f.blocks {
        let before = b.insts.len();
        b.insts.retain(|i| {
            i.has_side_effects()
                || i.is_terminator()
                || i.result.as_ref().is_none_or(|r| live.contains(r))
        });
        changed |= b.insts.len() != before;
    }
    changed
}

fn insert_before_terminator(b: &mut Block, inst: Inst) {
    let at = b.insts.len() - usize::from(b.terminator().is_some());
    b.insts.insert(at, inst);
}

/// Gives every loop a block whose only successor is the header and which is
/// the header's only predecessor from outside the loop.
pub fn insert_preheaders(f: &mut Function) -> bool {
    let nest = find_loops(f);
    let cfg = Cfg::of_function(f);
    for l in &nest.loops {
        if l.preheader.is_some() {
            continue;
        }
        let outside: Vec<usize> = cfg.preds[l.header]
            .iter()
            .copied()
            .filter(|&p| !l.contains(p))
            .collect();
        if outside.is_empty() {
            continue;
        }
        let header = f.blocks[l.header].label.clone();
        let ph = f.fresh_name(&format!("{header}.ph"));
        let outside_labels: Vec<String> =
            outside.iter().map(|&p| f.blocks[p].label.clone()).collect();

        let mut ph_insts = Vec::new();
        let phi_names: Vec<String> = f.blocks[l.header]
            .phis()
            .filter_map(|i| i.result.clone())
            .collect();
        for name in phi_names {
            let fresh = f.fresh_name(&format!("{name}.ph"));
            let inst = f.blocks[l.header]
                .insts
                .iter_mut()
                .find(|i| i.result.as_deref() == Some(name.as_str()))
                .expect("phi exists");
            let InstKind::Phi { incoming } = &mut inst.kind else {
                unreachable!()
            };
            let (from_out, from_in): (Vec<_>, Vec<_>) = incoming
                .drain(..)
                .partition(|(_, l)| outside_labels.contains(l));
            *incoming = from_in;
            let merged = match from_out.first() {
                Some((first, _)) if from_out.iter().all(|(o, _)| o.same(first)) => first.clone(),
                _ => {
                    ph_insts.push(Inst::new(
                        Some(&fresh),
                        InstKind::Phi { incoming: from_out },
                    ));
                    Operand::Value(fresh)
                }
            };
            incoming.insert(0, (merged, ph.clone()));
        }
        for &p in &outside {
            if let Some(t) = f.blocks[p].terminator_mut() {
                for s in t.successors_mut() {
                    if *s == header {
                        *s = ph.clone();
                    }
                }
            }
        }
        ph_insts.push(Inst::new(None, InstKind::Br { target: header }));
        f.blocks.insert(
            l.header,
            Block {
                label: ph,
                insts: ph_insts,
            },
        );
        return true;
    }
    false
}

/// `icmp.sle %i, U` becomes `icmp.slt %i, U + 1` with the sum computed in
/// the preheader.
pub fn canonicalize_guards(f: &mut Function) -> bool {
    let nest = find_loops(f);
    for l in &nest.loops {
        let Ok(iv) = canonical_iv(f, l) else { continue };
        if !iv.inclusive || f.use_count(&iv.compare) != 1 {
            continue;
        }
        let upper = match &iv.upper {
            Operand::Int(k) if *k < i64::MAX => Operand::Int(k + 1),
            Operand::Int(_) => continue,
            other => {
                let name = f.fresh_name(&format!("{}.ub", iv.compare));
                insert_before_terminator(
                    &mut f.blocks[iv.preheader],
                    Inst::new(
                        Some(&name),
                        InstKind::Binary {
                            op: BinOp::Add,
                            lhs: other.clone(),
                            rhs: Operand::Int(1),
                        },
                    ),
                );
                Operand::Value(name)
            }
        };
        set_compare(f, l.header, &iv.compare, Operand::value(&iv.phi), upper);
        return true;
    }
    false
}

fn set_compare(f: &mut Function, header: usize, compare: &str, lhs: Operand, rhs: Operand) {
    let inst = f.blocks[header]
        .insts
        .iter_mut()
        .find(|i| i.result.as_deref() == Some(compare))
        .expect("compare lives in the header");
    inst.kind = InstKind::Icmp {
        pred: Pred::Slt,
        lhs,
        rhs,
    };
}

/// Header phi `[init, preheader], [step, latch]` with `step = add phi, c`.
struct Counter {
    phi: String,
    init: Operand,
    step: String,
    delta: i64,
}

fn counters(f: &Function, l: &Loop) -> Vec<Counter> {
    let (Some(pre), [latch]) = (l.preheader, l.latches.as_slice()) else {
        return Vec::new();
    };
    let pre = &f.blocks[pre].label;
    let latch = &f.blocks[*latch].label;
    let mut out = Vec::new();
    for inst in f.blocks[l.header].phis() {
        let (Some(phi), InstKind::Phi { incoming }) = (&inst.result, &inst.kind) else {
            continue;
        };
        if incoming.len() != 2 {
            continue;
        }
        let init = incoming.iter().find(|(_, b)| b == pre).map(|(o, _)| o);
        let step = incoming
            .iter()
            .find(|(_, b)| b == latch)
            .and_then(|(o, _)| o.as_value());
        let (Some(init), Some(step)) = (init, step) else {
            continue;
        };
        let Some(def) = find_def(f, step) else {
            continue;
        };
        if !l.blocks.iter().any(|&b| f.blocks[b].insts.contains(def)) {
            continue;
        }
        let delta = match &def.kind {
            InstKind::Binary {
                op: BinOp::Add,
                lhs,
                rhs,
            } => match (lhs, rhs) {
                (Operand::Value(v), Operand::Int(c)) | (Operand::Int(c), Operand::Value(v))
                    if v == phi =>
                {
                    Some(*c)
                }
                _ => None,
            },
            InstKind::Binary {
                op: BinOp::Sub,
                lhs: Operand::Value(v),
                rhs: Operand::Int(c),
            } if v == phi => c.checked_neg(),
            _ => None,
        };
        if let Some(delta) = delta {
            out.push(Counter {
                phi: phi.clone(),
                init: init.clone(),
                step: step.to_string(),
                delta,
            });
        }
    }
    out
}

/// Folds header phis that start at the same value and advance by the same
/// step into the first of them.
pub fn merge_induction_variables(f: &mut Function) -> bool {
    let nest = find_loops(f);
    for l in &nest.loops {
        let cs = counters(f, l);
        for (i, p) in cs.iter().enumerate() {
            if let Some(q) = cs[i + 1..]
                .iter()
                .find(|q| q.delta == p.delta && q.init.same(&p.init))
            {
                let (q_phi, p_phi) = (q.phi.clone(), p.phi.clone());
                f.replace_uses(&q_phi, &Operand::Value(p_phi));
                remove_def(f, &q_phi);
                return true;
            }
        }
    }
    false
}

/// Replaces a down-counting exit test `icmp.slt C, %k` (or `sle`) on
/// `k = N, N-1, ...` with an equivalent test on an up-counting induction
/// variable `i = L, L+1, ...`: the loop runs while `i < L + (N - C)`.
pub fn reverse_countdown_loops(f: &mut Function) -> bool {
    let nest = find_loops(f);
    for l in &nest.loops {
        let Some(pre) = l.preheader else { continue };
        let header = &f.blocks[l.header];
        let Some(InstKind::CondBr {
            cond: Operand::Value(c),
            then_bb,
            ..
        }) = header.terminator().map(|t| &t.kind)
        else {
            continue;
        };
        if !f.block_index(then_bb).is_some_and(|b| l.contains(b)) || l.exits.len() != 1 {
            continue;
        }
        let Some(cmp) = header.insts.iter().find(|i| i.result.as_deref() == Some(c)) else {
            continue;
        };
        let InstKind::Icmp {
            pred: pred @ (Pred::Slt | Pred::Sle),
            lhs: bound,
            rhs: Operand::Value(k),
        } = &cmp.kind
        else {
            continue;
        };
        let cs = counters(f, l);
        let Some(down) = cs.iter().find(|x| &x.phi == k && x.delta == -1) else {
            continue;
        };
        let Some(up) = cs.iter().find(|x| x.delta == 1) else {
            continue;
        };
        if f.use_count(c) != 1
            || f.use_count(k) != 2
            || f.use_count(&down.step) != 1
            || !is_invariant(f, l, bound)
            || !is_invariant(f, l, &down.init)
            || !is_invariant(f, l, &up.init)
        {
            continue;
        }
        let (c, pred, bound) = (c.clone(), *pred, bound.clone());
        let (n, lower, iv) = (down.init.clone(), up.init.clone(), up.phi.clone());

        let trip = f.fresh_name(&format!("{c}.trip"));
        let mut new = vec![Inst::new(
            Some(&trip),
            InstKind::Binary {
                op: BinOp::Sub,
                lhs: n,
                rhs: bound,
            },
        )];
        let mut ub = f.fresh_name(&format!("{c}.ub"));
        new.push(Inst::new(
            Some(&ub),
            InstKind::Binary {
                op: BinOp::Add,
                lhs: lower,
                rhs: Operand::Value(trip),
            },
        ));
        if pred == Pred::Sle {
            let incl = f.fresh_name(&format!("{c}.ub.incl"));
            new.push(Inst::new(
                Some(&incl),
                InstKind::Binary {
                    op: BinOp::Add,
                    lhs: Operand::Value(ub),
                    rhs: Operand::Int(1),
                },
            ));
            ub = incl;
        }
        for inst in new {
            insert_before_terminator(&mut f.blocks[pre], inst);
        }
        set_compare(f, l.header, &c, Operand::Value(iv), Operand::Value(ub));
        return true;
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::{parse_module, print_module, verify};

    fn norm(text: &str) -> String {
        let m = parse_module(text).unwrap();
        let n = normalize(&m);
        assert!(
            verify(&n).is_empty(),
            "{:?}\n{}",
            verify(&n),
            print_module(&n)
        );
        print_module(&n)
    }

    #[test]
    fn folds_branches_and_prunes_phis() {
        let out = norm(
            "func @f() -> i64 {
entry:
  %c = icmp.slt 1, 2
  condbr %c, a, b
a:
  br j
b:
  br j
j:
  %x = phi [1, a], [2, b]
  ret %x
}",
        );
        assert_eq!(
            out,
            "func @f() -> i64 {\nentry:\n  br a\na:\n  br j\nj:\n  ret 1\n}\n"
        );
    }

    #[test]
    fn copies_and_dead_code() {
        let out = norm(
            "func @f(%n: i64) -> i64 {
b:
  %a = add %n, 0
  %b = mul 1, %a
  %dead = mul %b, 7
  ret %b
}",
        );
        assert_eq!(out, "func @f(%n: i64) -> i64 {\nb:\n  ret %n\n}\n");
    }

    #[test]
    fn cancelled_difference() {
        let out = norm(
            "func @f(%lo: i64, %hi: i64) -> i64 {
b:
  %len = sub %hi, %lo
  %end = add %lo, %len
  ret %end
}",
        );
        assert_eq!(
            out,
            "func @f(%lo: i64, %hi: i64) -> i64 {\nb:\n  ret %hi\n}\n"
        );
    }

    #[test]
    fn overwritten_store_is_removed() {
        let out = norm(
            "func @f(%p: ptr f64) -> void {
b:
  %q = elemptr %p, 1
  store 1.0, %q
  store 2.0, %q
  ret
}",
        );
        assert!(!out.contains("1.0"));
        assert!(out.contains("store 2.0, %q"));
    }

    #[test]
    fn store_before_load_survives() {
        let out = norm(
            "func @f(%p: ptr f64) -> f64 {
b:
  store 1.0, %p
  %v = load %p
  store 2.0, %p
  ret %v
}",
        );
        assert!(out.contains("store 1.0, %p"));
    }

    #[test]
    fn preheader_insertion_merges_phis() {
        let out = norm(
            "func @f(%c: i1, %n: i64) -> void {
entry:
  condbr %c, a, h
a:
  br h
h:
  %i = phi [0, entry], [0, a], [%i1, h]
  %k = phi [%n, entry], [1, a], [%k, h]
  %i1 = add %i, 1
  %t = icmp.slt %i1, %k
  condbr %t, h, x
x:
  ret
}",
        );
        assert!(out.contains(
            "h.ph:\n  %k.ph = phi [%n, entry], [1, a]\n  br h\nh:\n  %i = phi [0, h.ph], [%i1, h]"
        ));
    }

    #[test]
    fn inclusive_guard_becomes_strict() {
        let out = norm(
            "func @f(%n: i64, %p: ptr f64) -> void {
entry:
  br h
h:
  %i = phi [0, entry], [%i1, body]
  %c = icmp.sle %i, %n
  condbr %c, body, x
body:
  %q = elemptr %p, %i
  store 1.0, %q
  %i1 = add %i, 1
  br h
x:
  ret
}",
        );
        assert!(out.contains("entry:\n  %c.ub = add %n, 1\n  br h"));
        assert!(out.contains("%c = icmp.slt %i, %c.ub"));
    }

    #[test]
    fn redundant_counter_is_merged() {
        let out = norm(
            "func @f(%n: i64, %p: ptr f64) -> void {
entry:
  br h
h:
  %i = phi [0, entry], [%i1, body]
  %k = phi [0, entry], [%k1, body]
  %c = icmp.slt %i, %n
  condbr %c, body, x
body:
  %q = elemptr %p, %k
  store 1.0, %q
  %i1 = add %i, 1
  %k1 = add %k, 1
  br h
x:
  ret
}",
        );
        assert!(!out.contains("%k"));
        assert!(out.contains("%q = elemptr %p, %i"));
    }

    #[test]
    fn countdown_becomes_countup() {
        let out = norm(
            "func @f(%n: i64, %p: ptr f64) -> void {
entry:
  br h
h:
  %i = phi [0, entry], [%i1, body]
  %k = phi [%n, entry], [%k1, body]
  %c = icmp.slt 0, %k
  condbr %c, body, x
body:
  %q = elemptr %p, %i
  store 1.0, %q
  %i1 = add %i, 1
  %k1 = sub %k, 1
  br h
x:
  ret
}",
        );
        assert!(!out.contains("%k"), "{out}");
        assert!(out.contains("%c = icmp.slt %i, %n"), "{out}");
    }

    #[test]
    fn idempotent() {
        let text = "func @f(%n: i64) -> i64 {\nb:\n  %a = add %n, 0\n  ret %a\n}";
        let once = normalize(&parse_module(text).unwrap());
        assert_eq!(normalize(&once), once);
    }
}
