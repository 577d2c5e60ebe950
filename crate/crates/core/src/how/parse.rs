use crate::spec::SpecError;
use crate::syntax::{is_keyword, Cursor};
use crate::what::Expr;

use super::{
    ClassKind, CodeBlock, Harness, HowProgram, MarshalBinding, MarshalClassDef, PersistentVar,
};

/// Parses a file holding only library descriptions.
pub fn parse_how(text: &str) -> Result<HowProgram, SpecError> {
    let mut cur = Cursor::new(text);
    let mut how = HowProgram::default();
    while !cur.at_eof() {
        item(&mut cur, &mut how)?;
    }
    Ok(how)
}

pub(crate) fn item(cur: &mut Cursor<'_>, how: &mut HowProgram) -> Result<(), SpecError> {
    match cur.peek_ident() {
        Some("HARNESS") => {
            let h = harness(cur)?;
            if how.harness(&h.name).is_some() {
                return Err(SpecError::DuplicateHarness(h.name));
            }
            how.harnesses.push(h);
            Ok(())
        }
        Some(kw @ ("INPUT" | "OUTPUT")) => {
            cur.ident();
            let kind = if kw == "INPUT" {
                ClassKind::Input
            } else {
                ClassKind::Output
            };
            let c = class(cur, kind)?;
            if how.class(&c.name).is_some() {
                return Err(SpecError::DuplicateClass(c.name));
            }
            how.classes.push(c);
            Ok(())
        }
        _ => Err({
            let found = cur.describe_next();
            cur.syntax(format!("expected HARNESS, INPUT or OUTPUT, found {found}"))
        }),
    }
}

fn plain_name(cur: &mut Cursor<'_>, what: &str) -> Result<String, SpecError> {
    let (line, col) = cur.loc();
    let id = cur.expect_ident(what)?;
    if is_keyword(id) {
        return Err(SpecError::Syntax {
            line,
            col,
            msg: format!("`{id}` is a keyword and cannot be used as {what}"),
        });
    }
    Ok(id.to_string())
}

fn code(cur: &mut Cursor<'_>) -> Result<CodeBlock, SpecError> {
    Ok(CodeBlock(cur.code_block()?.to_string()))
}

fn at_item_end(cur: &mut Cursor<'_>) -> bool {
    cur.at_eof() || cur.peek_ident().is_some_and(is_keyword)
}

fn set_once<T>(
    slot: &mut Option<T>,
    value: T,
    owner: &str,
    section: &str,
) -> Result<(), SpecError> {
    if slot.is_some() {
        return Err(SpecError::DuplicateSection {
            harness: owner.to_string(),
            section: section.to_string(),
        });
    }
    *slot = Some(value);
    Ok(())
}

fn harness(cur: &mut Cursor<'_>) -> Result<Harness, SpecError> {
    cur.expect_keyword("HARNESS")?;
    let name = plain_name(cur, "a harness name")?;
    cur.expect_keyword("IMPLEMENTS")?;
    let implements = plain_name(cur, "a computation name")?;
    let body = code(cur)?;

    let mut bindings = None;
    let mut persistent = None;
    let mut before = None;
    let mut after = None;
    let mut headers = None;
    loop {
        if cur.eat_keyword("Marshaling") {
            let mut list = Vec::new();
            while !at_item_end(cur) {
                list.push(binding(cur)?);
            }
            set_once(&mut bindings, list, &name, "Marshaling")?;
        } else if cur.eat_keyword("PersistentVariables") {
            let mut list = Vec::new();
            while !at_item_end(cur) {
                let ty = type_word(cur)?;
                let var = plain_name(cur, "a variable name")?;
                list.push(PersistentVar { ty, name: var });
            }
            set_once(&mut persistent, list, &name, "PersistentVariables")?;
        } else if cur.eat_keyword("BeforeFirstExecution") {
            let c = code(cur)?;
            set_once(&mut before, c, &name, "BeforeFirstExecution")?;
        } else if cur.eat_keyword("AfterLastExecution") {
            let c = code(cur)?;
            set_once(&mut after, c, &name, "AfterLastExecution")?;
        } else if cur.eat_keyword("CppHeaderFiles") {
            let mut list = Vec::new();
            while !at_item_end(cur) {
                match cur.word() {
                    Some(w) => list.push(w.to_string()),
                    None => {
                        return Err({
                            let found = cur.describe_next();
                            cur.syntax(format!("expected a header file name, found {found}"))
                        })
                    }
                }
            }
            set_once(&mut headers, list, &name, "CppHeaderFiles")?;
        } else {
            break;
        }
    }
    Ok(Harness {
        name,
        implements,
        code: body,
        bindings: bindings.unwrap_or_default(),
        persistent_vars: persistent.unwrap_or_default(),
        before_first: before,
        after_last: after,
        headers: headers.unwrap_or_default(),
    })
}

fn type_word(cur: &mut Cursor<'_>) -> Result<String, SpecError> {
    match cur.word() {
        Some(w) if !is_keyword(w) => Ok(w.to_string()),
        _ => Err({
            let found = cur.describe_next();
            cur.syntax(format!("expected a type, found {found}"))
        }),
    }
}

fn binding(cur: &mut Cursor<'_>) -> Result<MarshalBinding, SpecError> {
    let out_type = type_word(cur)?;
    let out_name = plain_name(cur, "a binding name")?;
    cur.expect("=")?;
    let class = plain_name(cur, "a marshaling class")?;
    cur.expect_keyword("of")?;
    let array = plain_name(cur, "an array name")?;
    cur.expect("[")?;
    match cur.integer() {
        Some(Ok(0)) => {}
        _ => return Err(cur.syntax("marshaled ranges must start at 0")),
    }
    cur.expect("..")?;
    let extent = extent_expr(cur)?;
    cur.expect("]")?;
    Ok(MarshalBinding {
        out_type,
        out_name,
        class,
        array,
        extent,
    })
}

fn extent_expr(cur: &mut Cursor<'_>) -> Result<Expr, SpecError> {
    let mut e = extent_term(cur)?;
    while cur.eat("+") {
        e = Expr::Add(Box::new(e), Box::new(extent_term(cur)?));
    }
    Ok(e)
}

fn extent_term(cur: &mut Cursor<'_>) -> Result<Expr, SpecError> {
    let mut e = extent_atom(cur)?;
    while cur.eat("*") {
        e = Expr::Mul(Box::new(e), Box::new(extent_atom(cur)?));
    }
    Ok(e)
}

fn extent_atom(cur: &mut Cursor<'_>) -> Result<Expr, SpecError> {
    if let Some(c) = cur.integer() {
        return c.map(Expr::Const);
    }
    if cur.eat("(") {
        let e = extent_expr(cur)?;
        cur.expect(")")?;
        return Ok(e);
    }
    let n = plain_name(cur, "an extent")?;
    if cur.peek_char() == Some('[') {
        return Err(cur.syntax(format!(
            "extents may not index arrays; bind `{n}[...]` to a marshaled value first"
        )));
    }
    Ok(Expr::Name(n))
}

fn class(cur: &mut Cursor<'_>, kind: ClassKind) -> Result<MarshalClassDef, SpecError> {
    let name = plain_name(cur, "a class name")?;
    let update = code(cur)?;
    let mut construct = None;
    let mut destruct = None;
    loop {
        if cur.eat_keyword("BeforeFirstExecution") {
            let c = code(cur)?;
            set_once(&mut construct, c, &name, "BeforeFirstExecution")?;
        } else if cur.eat_keyword("AfterLastExecution") {
            let c = code(cur)?;
            set_once(&mut destruct, c, &name, "AfterLastExecution")?;
        } else {
            break;
        }
    }
    Ok(MarshalClassDef {
        kind,
        name,
        update,
        construct,
        destruct,
    })
}
