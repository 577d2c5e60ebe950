use std::fmt::Write;

use super::{Function, Inst, InstKind, Module};

fn list<T: std::fmt::Display>(items: &[T]) -> String {
    items
        .iter()
        .map(|i| i.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

pub(crate) fn print_inst(inst: &Inst) -> String {
    let mut s = String::new();
    if let Some(r) = &inst.result {
        let _ = write!(s, "%{r} = ");
    }
    let _ = match &inst.kind {
        InstKind::Binary { op, lhs, rhs } => write!(s, "{} {lhs}, {rhs}", op.mnemonic()),
        InstKind::Icmp { pred, lhs, rhs } => write!(s, "{} {lhs}, {rhs}", pred.mnemonic()),
        InstKind::ElemPtr { base, index } => write!(s, "elemptr {base}, {index}"),
        InstKind::Load { ptr } => write!(s, "load {ptr}"),
        InstKind::Store { value, ptr } => write!(s, "store {value}, {ptr}"),
        InstKind::Alloca { elem, count } => write!(s, "alloca {elem}, {count}"),
        InstKind::Phi { incoming } => {
            let parts: Vec<String> = incoming
                .iter()
                .map(|(v, l)| format!("[{v}, {l}]"))
                .collect();
            write!(s, "phi {}", parts.join(", "))
        }
        InstKind::Call { callee, args, ret } => match ret {
            Some(t) => write!(s, "call {t} @{callee}({})", list(args)),
            None => write!(s, "call @{callee}({})", list(args)),
        },
        InstKind::Br { target } => write!(s, "br {target}"),
        InstKind::CondBr {
            cond,
            then_bb,
            else_bb,
        } => write!(s, "condbr {cond}, {then_bb}, {else_bb}"),
        InstKind::Ret { value: Some(v) } => write!(s, "ret {v}"),
        InstKind::Ret { value: None } => write!(s, "ret"),
    };
    s
}

fn print_function(f: &Function, out: &mut String) {
    let params: Vec<String> = f
        .params
        .iter()
        .map(|p| format!("%{}: {}", p.name, p.ty))
        .collect();
    let ret = f.ret.map_or("void".to_string(), |t| t.to_string());
    let _ = writeln!(out, "func @{}({}) -> {ret} {{", f.name, params.join(", "));
    for b in &f.blocks {
        let _ = writeln!(out, "{}:", b.label);
        for inst in &b.insts {
            let _ = writeln!(out, "  {}", print_inst(inst));
        }
    }
    out.push_str("}\n");
}

/// Canonical text of a module. Parsing the output yields an equal module.
pub fn print_module(m: &Module) -> String {
    let mut out = String::new();
    for (i, f) in m.functions.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        print_function(f, &mut out);
    }
    out
}
