//! C++ harness source generation.
//!
//! Each marshaling class becomes three function templates over
//! `(type_in, type_out)` that wrap the class code blocks verbatim, plus an
//! alias that plugs them into `ReadObject` or `WriteObject`. The harness
//! itself becomes an `extern "C"` entry point named after the harness, with
//! the parameter list of the computation it implements. The runtime header
//! `lilac_runtime.h` is expected to provide both object templates.

use std::fmt::Write;

use thiserror::Error;

use crate::how::{validate_how, ClassKind, Harness, HowDiagnostic, HowProgram, MarshalClassDef};
use crate::what::{infer_interface, HarnessSignature, InterfaceError, ParamKind, WhatProgram};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GenError {
    #[error("harness `{harness}` uses undefined marshaling class `{class}`")]
    MissingClass { harness: String, class: String },
    #[error("no harness named `{0}`")]
    UnknownHarness(String),
    #[error("harness `{harness}` implements unknown computation `{computation}`")]
    UnknownComputation {
        harness: String,
        computation: String,
    },
    #[error(transparent)]
    Interface(#[from] InterfaceError),
    #[error("invalid library description: {}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<HowDiagnostic>),
}

fn c_type(kind: ParamKind) -> &'static str {
    match kind {
        ParamKind::ScalarInt => "int64_t",
        ParamKind::ArrayInt => "int64_t*",
        ParamKind::ArrayFloatIn | ParamKind::ArrayFloatOut => "double*",
    }
}

fn element_type(kind: ParamKind) -> &'static str {
    match kind {
        ParamKind::ArrayInt => "int64_t",
        _ => "double",
    }
}

/// A verbatim block in braces, re-indented to sit at `indent`.
fn braced(text: &str, indent: &str) -> String {
    if !text.contains('\n') {
        return format!("{{{text}}}");
    }
    let lines: Vec<&str> = text.lines().collect();
    let start = lines
        .iter()
        .position(|l| !l.trim().is_empty())
        .unwrap_or(lines.len());
    let end = lines
        .iter()
        .rposition(|l| !l.trim().is_empty())
        .map_or(start, |e| e + 1);
    let body = &lines[start..end];
    let common = body
        .iter()
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.len() - l.trim_start().len())
        .min()
        .unwrap_or(0);
    let mut out = String::from("{\n");
    for l in body {
        if l.trim().is_empty() {
            out.push('\n');
        } else {
            let _ = writeln!(out, "{indent}    {}", &l[common..]);
        }
    }
    out.push_str(indent);
    out.push('}');
    out
}

fn emit_class(c: &MarshalClassDef, out: &mut String) {
    let n = &c.name;
    let block = |b: &Option<crate::how::CodeBlock>| braced(b.as_ref().map_or("", |b| b.text()), "");
    let _ = writeln!(out, "template<typename type_in, typename type_out>");
    let _ = writeln!(
        out,
        "void {n}_update(type_in* in, int size, type_out& out) {}",
        braced(c.update.text(), "")
    );
    let _ = writeln!(out, "template<typename type_in, typename type_out>");
    let _ = writeln!(
        out,
        "void {n}_construct(int size, type_out& out) {}",
        block(&c.construct)
    );
    let _ = writeln!(out, "template<typename type_in, typename type_out>");
    let _ = writeln!(
        out,
        "void {n}_destruct(int size, type_out& out) {}",
        block(&c.destruct)
    );
    let object = match c.kind {
        ClassKind::Input => "ReadObject",
        ClassKind::Output => "WriteObject",
    };
    let _ = writeln!(out, "template<typename type_in, typename type_out>");
    let _ = writeln!(out, "using {n} = {object}<type_in, type_out,");
    let _ = writeln!(out, "    {n}_update<type_in, type_out>,");
    let _ = writeln!(out, "    {n}_construct<type_in, type_out>,");
    let _ = writeln!(out, "    {n}_destruct<type_in, type_out>>;");
    out.push('\n');
}

/// Source text for one harness.
pub fn gen_harness(
    h: &Harness,
    sig: &HarnessSignature,
    how: &HowProgram,
) -> Result<String, GenError> {
    let mut classes: Vec<&MarshalClassDef> = Vec::new();
    for b in &h.bindings {
        let c = how.class(&b.class).ok_or_else(|| GenError::MissingClass {
            harness: h.name.clone(),
            class: b.class.clone(),
        })?;
        if !classes.iter().any(|k| k.name == c.name) {
            classes.push(c);
        }
    }
    let name = &h.name;
    let kind_of = |array: &str| sig.param(array).map_or(ParamKind::ArrayFloatIn, |p| p.kind);

    let mut out = String::new();
    out.push_str("#include <cstdint>\n#include <cstdlib>\n#include \"lilac_runtime.h\"\n");
    for header in &h.headers {
        let _ = writeln!(out, "#include <{header}>");
    }
    out.push('\n');

    for c in &classes {
        emit_class(c, &mut out);
    }

    let _ = writeln!(out, "struct {name}_state {{");
    out.push_str("    bool initialized = false;\n");
    for v in &h.persistent_vars {
        let _ = writeln!(out, "    {} {};", v.ty, v.name);
    }
    for b in &h.bindings {
        let _ = writeln!(
            out,
            "    {}<{}, {}> {}_object;",
            b.class,
            element_type(kind_of(&b.array)),
            b.out_type,
            b.out_name
        );
    }
    out.push_str("};\n\n");
    let _ = writeln!(out, "static {name}_state {name}_global;\n");

    let aliases = |out: &mut String| {
        let _ = writeln!(out, "    {name}_state& state = {name}_global;");
        for v in &h.persistent_vars {
            let _ = writeln!(out, "    auto& {0} = state.{0};", v.name);
        }
    };

    let _ = writeln!(out, "static void {name}_teardown() {{");
    aliases(&mut out);
    if let Some(c) = &h.after_last {
        let _ = writeln!(out, "    {}", braced(c.text(), "    "));
    }
    for b in h.bindings.iter().rev() {
        let _ = writeln!(out, "    state.{}_object.release();", b.out_name);
    }
    out.push_str("}\n\n");

    let params: Vec<String> = sig
        .params
        .iter()
        .map(|p| format!("{} {}", c_type(p.kind), p.name))
        .collect();
    let _ = writeln!(out, "extern \"C\" void {name}({}) {{", params.join(", "));
    aliases(&mut out);
    out.push_str("    if (!state.initialized) {\n        state.initialized = true;\n");
    if let Some(c) = &h.before_first {
        let _ = writeln!(out, "        {}", braced(c.text(), "        "));
    }
    let _ = writeln!(out, "        std::atexit({name}_teardown);");
    out.push_str("    }\n");
    for b in &h.bindings {
        let _ = writeln!(
            out,
            "    auto& {0} = state.{0}_object.acquire({1}, {2});",
            b.out_name, b.array, b.extent
        );
    }
    let _ = writeln!(out, "    {}", braced(h.code.text(), "    "));
    for b in &h.bindings {
        let output = how
            .class(&b.class)
            .is_some_and(|c| c.kind == ClassKind::Output);
        if output {
            let _ = writeln!(
                out,
                "    state.{}_object.write_back({}, {});",
                b.out_name, b.array, b.extent
            );
        }
    }
    out.push_str("}\n");
    Ok(out)
}

/// Generates the named harness after validating the whole description.
pub fn gen_named(
    how: &HowProgram,
    whats: &[WhatProgram],
    harness: &str,
) -> Result<String, GenError> {
    check(how, whats)?;
    let h = how
        .harness(harness)
        .ok_or_else(|| GenError::UnknownHarness(harness.to_string()))?;
    gen_one(h, how, whats)
}

fn check(how: &HowProgram, whats: &[WhatProgram]) -> Result<(), GenError> {
    let diags: Vec<HowDiagnostic> = validate_how(how, whats);
    if let Some(HowDiagnostic::UnknownClass { harness, class }) = diags
        .iter()
        .find(|d| matches!(d, HowDiagnostic::UnknownClass { .. }))
    {
        return Err(GenError::MissingClass {
            harness: harness.clone(),
            class: class.clone(),
        });
    }
    if diags.is_empty() {
        Ok(())
    } else {
        Err(GenError::Invalid(diags))
    }
}

fn gen_one(h: &Harness, how: &HowProgram, whats: &[WhatProgram]) -> Result<String, GenError> {
    let what = whats
        .iter()
        .find(|w| w.name == h.implements)
        .ok_or_else(|| GenError::UnknownComputation {
            harness: h.name.clone(),
            computation: h.implements.clone(),
        })?;
    gen_harness(h, &infer_interface(what)?, how)
}

/// Source text for every harness, in declaration order.
pub fn gen_all(how: &HowProgram, whats: &[WhatProgram]) -> Result<Vec<(String, String)>, GenError> {
    check(how, whats)?;
    how.harnesses
        .iter()
        .map(|h| Ok((h.name.clone(), gen_one(h, how, whats)?)))
        .collect()
}
