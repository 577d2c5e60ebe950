use thiserror::Error;

use super::{BinOp, Block, Function, Inst, InstKind, Module, Operand, Param, Pred, Type};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("{line}:{col}: syntax error: {msg}")]
    Syntax {
        line: usize,
        col: usize,
        msg: String,
    },
    #[error("{line}:{col}: unknown opcode `{opcode}`")]
    UnknownOpcode {
        line: usize,
        col: usize,
        opcode: String,
    },
    #[error("{line}:{col}: call annotated `{annotated}` but @{callee} returns `{declared}`")]
    TypeAnnotationMismatch {
        line: usize,
        col: usize,
        callee: String,
        annotated: String,
        declared: String,
    },
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Local(String),
    Global(String),
    Int(i64),
    Float(f64),
    Punct(&'static str),
    Eof,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Local(s) => format!("`%{s}`"),
        Tok::Global(s) => format!("`@{s}`"),
        Tok::Int(i) => format!("`{i}`"),
        Tok::Float(x) => format!("`{x:?}`"),
        Tok::Punct(p) => format!("`{p}`"),
        Tok::Eof => "end of input".to_string(),
    }
}

fn is_name_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '.'
}

fn lex(src: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    macro_rules! advance {
        ($n:expr) => {
            for _ in 0..$n {
                if chars[i] == '\n' {
                    line += 1;
                    col = 1;
                } else {
                    col += 1;
                }
                i += 1;
            }
        };
    }
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            advance!(1);
            continue;
        }
        if c == ';' {
            while i < chars.len() && chars[i] != '\n' {
                advance!(1);
            }
            continue;
        }
        let (tl, tc) = (line, col);
        let syntax = |msg: String| ParseError::Syntax {
            line: tl,
            col: tc,
            msg,
        };
        let tok = if c == '-' && chars.get(i + 1) == Some(&'>') {
            advance!(2);
            Tok::Punct("->")
        } else if c.is_ascii_digit()
            || (c == '-' && chars.get(i + 1).is_some_and(char::is_ascii_digit))
        {
            let start = i;
            let mut j = i + 1;
            let mut float = false;
            while j < chars.len() {
                let d = chars[j];
                if d.is_ascii_digit() {
                    j += 1;
                } else if d == '.' && !float {
                    float = true;
                    j += 1;
                } else if (d == 'e' || d == 'E') && j + 1 < chars.len() {
                    float = true;
                    j += 1;
                    if chars[j] == '+' || chars[j] == '-' {
                        j += 1;
                    }
                } else {
                    break;
                }
            }
            let text: String = chars[start..j].iter().collect();
            advance!(j - start);
            if float {
                Tok::Float(
                    text.parse()
                        .map_err(|_| syntax(format!("malformed float literal `{text}`")))?,
                )
            } else {
                Tok::Int(
                    text.parse()
                        .map_err(|_| syntax(format!("integer literal `{text}` out of range")))?,
                )
            }
        } else if c == '%' || c == '@' {
            let mut j = i + 1;
            while j < chars.len() && is_name_char(chars[j]) {
                j += 1;
            }
            if j == i + 1 {
                return Err(syntax(format!("expected a name after `{c}`")));
            }
            let name: String = chars[i + 1..j].iter().collect();
            advance!(j - i);
            if c == '%' {
                Tok::Local(name)
            } else {
                Tok::Global(name)
            }
        } else if c.is_ascii_alphabetic() || c == '_' {
            let mut j = i;
            while j < chars.len() && is_name_char(chars[j]) {
                j += 1;
            }
            let name: String = chars[i..j].iter().collect();
            advance!(j - i);
            Tok::Ident(name)
        } else {
            let p = match c {
                '(' => "(",
                ')' => ")",
                '{' => "{",
                '}' => "}",
                '[' => "[",
                ']' => "]",
                ',' => ",",
                ':' => ":",
                '=' => "=",
                _ => return Err(syntax(format!("unexpected character `{c}`"))),
            };
            advance!(1);
            Tok::Punct(p)
        };
        out.push(Token {
            tok,
            line: tl,
            col: tc,
        });
    }
    out.push(Token {
        tok: Tok::Eof,
        line,
        col,
    });
    Ok(out)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    annotated_calls: Vec<(usize, usize, String, Type)>,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek2(&self) -> &Tok {
        &self.toks[(self.pos + 1).min(self.toks.len() - 1)].tok
    }

    fn next(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err(&self, msg: impl Into<String>) -> ParseError {
        let t = &self.toks[self.pos];
        ParseError::Syntax {
            line: t.line,
            col: t.col,
            msg: msg.into(),
        }
    }

    fn unexpected(&self, wanted: &str) -> ParseError {
        self.err(format!(
            "expected {wanted}, found {}",
            describe(self.peek())
        ))
    }

    fn punct(&mut self, p: &str) -> Result<(), ParseError> {
        if matches!(self.peek(), Tok::Punct(q) if *q == p) {
            self.next();
            Ok(())
        } else {
            Err(self.unexpected(&format!("`{p}`")))
        }
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if matches!(self.peek(), Tok::Punct(q) if *q == p) {
            self.next();
            true
        } else {
            false
        }
    }

    fn ident(&mut self, wanted: &str) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.next();
                Ok(s)
            }
            _ => Err(self.unexpected(wanted)),
        }
    }

    fn local(&mut self) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Local(s) => {
                self.next();
                Ok(s)
            }
            _ => Err(self.unexpected("a `%` value")),
        }
    }

    fn ty(&mut self) -> Result<Type, ParseError> {
        let word = self.ident("a type")?;
        match word.as_str() {
            "i1" => Ok(Type::I1),
            "i64" => Ok(Type::I64),
            "f64" => Ok(Type::F64),
            "ptr" => match self.ident("`i64` or `f64`")?.as_str() {
                "i64" => Ok(Type::PtrI64),
                "f64" => Ok(Type::PtrF64),
                other => Err(self.err(format!("cannot point to `{other}`"))),
            },
            other => Err(self.err(format!("unknown type `{other}`"))),
        }
    }

    fn operand(&mut self) -> Result<Operand, ParseError> {
        let op = match self.peek().clone() {
            Tok::Local(v) => Operand::Value(v),
            Tok::Int(i) => Operand::Int(i),
            Tok::Float(x) => Operand::Float(x),
            Tok::Ident(s) if s == "true" => Operand::Bool(true),
            Tok::Ident(s) if s == "false" => Operand::Bool(false),
            _ => return Err(self.unexpected("an operand")),
        };
        self.next();
        Ok(op)
    }

    fn two_operands(&mut self) -> Result<(Operand, Operand), ParseError> {
        let a = self.operand()?;
        self.punct(",")?;
        let b = self.operand()?;
        Ok((a, b))
    }

    fn function(&mut self) -> Result<Function, ParseError> {
        match self.next() {
            Tok::Ident(s) if s == "func" => {}
            _ => {
                self.pos -= 1;
                return Err(self.unexpected("`func`"));
            }
        }
        let name = match self.next() {
            Tok::Global(g) => g,
            _ => {
                self.pos -= 1;
                return Err(self.unexpected("a function name"));
            }
        };
        self.punct("(")?;
        let mut params = Vec::new();
        if !self.eat_punct(")") {
            loop {
                let p = self.local()?;
                self.punct(":")?;
                let ty = self.ty()?;
                params.push(Param { name: p, ty });
                if self.eat_punct(")") {
                    break;
                }
                self.punct(",")?;
            }
        }
        self.punct("->")?;
        let ret = if matches!(self.peek(), Tok::Ident(s) if s == "void") {
            self.next();
            None
        } else {
            Some(self.ty()?)
        };
        self.punct("{")?;
        let mut blocks: Vec<Block> = Vec::new();
        loop {
            match (self.peek().clone(), self.peek2().clone()) {
                (Tok::Punct("}"), _) => {
                    self.next();
                    break;
                }
                (Tok::Ident(label), Tok::Punct(":")) => {
                    self.next();
                    self.next();
                    blocks.push(Block {
                        label,
                        insts: Vec::new(),
                    });
                }
                (Tok::Eof, _) => return Err(self.unexpected("`}`")),
                _ => {
                    let Some(block) = blocks.last_mut() else {
                        return Err(self.err("instruction outside of a labelled block"));
                    };
                    let inst = instruction(self)?;
                    block.insts.push(inst);
                }
            }
        }
        Ok(Function {
            name,
            params,
            ret,
            blocks,
        })
    }
}

fn instruction(p: &mut Parser) -> Result<Inst, ParseError> {
    let result = if let Tok::Local(_) = p.peek() {
        let r = p.local()?;
        p.punct("=")?;
        Some(r)
    } else {
        None
    };
    let (line, col) = (p.toks[p.pos].line, p.toks[p.pos].col);
    let opcode = p.ident("an opcode")?;
    let kind = match opcode.as_str() {
        "add" | "sub" | "mul" | "fadd" | "fsub" | "fmul" => {
            let op = match opcode.as_str() {
                "add" => BinOp::Add,
                "sub" => BinOp::Sub,
                "mul" => BinOp::Mul,
                "fadd" => BinOp::FAdd,
                "fsub" => BinOp::FSub,
                _ => BinOp::FMul,
            };
            let (lhs, rhs) = p.two_operands()?;
            InstKind::Binary { op, lhs, rhs }
        }
        "icmp.eq" | "icmp.ne" | "icmp.slt" | "icmp.sle" => {
            let pred = match opcode.as_str() {
                "icmp.eq" => Pred::Eq,
                "icmp.ne" => Pred::Ne,
                "icmp.slt" => Pred::Slt,
                _ => Pred::Sle,
            };
            let (lhs, rhs) = p.two_operands()?;
            InstKind::Icmp { pred, lhs, rhs }
        }
        "elemptr" => {
            let (base, index) = p.two_operands()?;
            InstKind::ElemPtr { base, index }
        }
        "load" => InstKind::Load { ptr: p.operand()? },
        "store" => {
            let (value, ptr) = p.two_operands()?;
            InstKind::Store { value, ptr }
        }
        "alloca" => {
            let elem = p.ty()?;
            if elem.pointer_to().is_none() {
                return Err(p.err(format!("cannot allocate `{elem}` elements")));
            }
            p.punct(",")?;
            let count = match p.next() {
                Tok::Int(n) if n > 0 => n,
                _ => {
                    p.pos -= 1;
                    return Err(p.unexpected("a positive element count"));
                }
            };
            InstKind::Alloca { elem, count }
        }
        "phi" => {
            let mut incoming = Vec::new();
            loop {
                p.punct("[")?;
                let v = p.operand()?;
                p.punct(",")?;
                let label = p.ident("a block label")?;
                p.punct("]")?;
                incoming.push((v, label));
                if !p.eat_punct(",") {
                    break;
                }
            }
            InstKind::Phi { incoming }
        }
        "br" => InstKind::Br {
            target: p.ident("a block label")?,
        },
        "condbr" => {
            let cond = p.operand()?;
            p.punct(",")?;
            let then_bb = p.ident("a block label")?;
            p.punct(",")?;
            let else_bb = p.ident("a block label")?;
            InstKind::CondBr {
                cond,
                then_bb,
                else_bb,
            }
        }
        "call" => {
            let ret = if let Tok::Ident(_) = p.peek() {
                Some(p.ty()?)
            } else {
                None
            };
            let callee = match p.next() {
                Tok::Global(g) => g,
                _ => {
                    p.pos -= 1;
                    return Err(p.unexpected("a function name"));
                }
            };
            p.punct("(")?;
            let mut args = Vec::new();
            if !p.eat_punct(")") {
                loop {
                    args.push(p.operand()?);
                    if p.eat_punct(")") {
                        break;
                    }
                    p.punct(",")?;
                }
            }
            if let Some(t) = ret {
                p.annotated_calls.push((line, col, callee.clone(), t));
            }
            InstKind::Call { callee, args, ret }
        }
        "ret" => {
            let has_value = match (p.peek(), p.peek2()) {
                (Tok::Local(_) | Tok::Int(_) | Tok::Float(_), _) => true,
                (Tok::Ident(s), next) if s == "true" || s == "false" => *next != Tok::Punct(":"),
                _ => false,
            };
            InstKind::Ret {
                value: if has_value { Some(p.operand()?) } else { None },
            }
        }
        _ => return Err(ParseError::UnknownOpcode { line, col, opcode }),
    };
    let needs_result = matches!(
        kind,
        InstKind::Binary { .. }
            | InstKind::Icmp { .. }
            | InstKind::ElemPtr { .. }
            | InstKind::Load { .. }
            | InstKind::Alloca { .. }
            | InstKind::Phi { .. }
    );
    let no_result = matches!(
        kind,
        InstKind::Store { .. }
            | InstKind::Br { .. }
            | InstKind::CondBr { .. }
            | InstKind::Ret { .. }
    );
    if needs_result && result.is_none() {
        return Err(ParseError::Syntax {
            line,
            col,
            msg: format!("`{opcode}` must define a value"),
        });
    }
    if no_result && result.is_some() {
        return Err(ParseError::Syntax {
            line,
            col,
            msg: format!("`{opcode}` does not produce a value"),
        });
    }
    Ok(Inst { result, kind })
}

/// Parses `.lir` text.
pub fn parse_module(text: &str) -> Result<Module, ParseError> {
    let mut p = Parser {
        toks: lex(text)?,
        pos: 0,
        annotated_calls: Vec::new(),
    };
    let mut m = Module::default();
    while *p.peek() != Tok::Eof {
        m.functions.push(p.function()?);
    }
    for (line, col, callee, annotated) in p.annotated_calls {
        if let Some(f) = m.function(&callee) {
            if f.ret != Some(annotated) {
                return Err(ParseError::TypeAnnotationMismatch {
                    line,
                    col,
                    callee,
                    annotated: annotated.to_string(),
                    declared: f.ret.map_or("void".to_string(), |t| t.to_string()),
                });
            }
        }
    }
    Ok(m)
}
