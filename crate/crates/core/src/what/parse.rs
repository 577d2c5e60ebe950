use crate::spec::SpecError;
use crate::syntax::{is_keyword, Cursor};

use super::{Addr, Body, DotOp, Expr, ForAll, Range, ReductionKeyword, Target, WhatProgram};

const RESERVED: &[&str] = &["forall", "dot", "sum"];

/// Parses a file holding exactly one computation.
pub fn parse_what(text: &str) -> Result<WhatProgram, SpecError> {
    let mut cur = Cursor::new(text);
    let p = computation(&mut cur)?;
    if !cur.at_eof() {
        return Err({
            let found = cur.describe_next();
            cur.syntax(format!("unexpected {found} after the computation"))
        });
    }
    Ok(p)
}

struct NameUse {
    name: String,
    line: usize,
    col: usize,
    in_scope: bool,
    as_array: bool,
}

struct Parser<'c, 'a> {
    cur: &'c mut Cursor<'a>,
    scope: Vec<String>,
    iterators: Vec<String>,
    uses: Vec<NameUse>,
}

pub(crate) fn computation(cur: &mut Cursor<'_>) -> Result<WhatProgram, SpecError> {
    cur.expect_keyword("COMPUTATION")?;
    let name = name(cur, "computation name")?;
    let mut p = Parser {
        cur,
        scope: Vec::new(),
        iterators: Vec::new(),
        uses: Vec::new(),
    };
    let body = p.body()?;
    for u in &p.uses {
        let is_iter = p.iterators.contains(&u.name);
        if is_iter && u.as_array {
            return Err(SpecError::IteratorAsArray {
                name: u.name.clone(),
                line: u.line,
                col: u.col,
            });
        }
        if is_iter && !u.in_scope {
            return Err(SpecError::IteratorOutOfScope {
                name: u.name.clone(),
                line: u.line,
                col: u.col,
            });
        }
    }
    let program = WhatProgram { name, body };
    let dot = program.dot();
    let target = dot.target.base();
    if target == dot.lhs.base || target == dot.rhs.base {
        return Err(SpecError::TargetAliasesOperand {
            name: target.to_string(),
        });
    }
    Ok(program)
}

fn name(cur: &mut Cursor<'_>, what: &str) -> Result<String, SpecError> {
    let (line, col) = cur.loc();
    let id = cur.expect_ident(what)?;
    if is_keyword(id) || RESERVED.contains(&id) {
        return Err(SpecError::Syntax {
            line,
            col,
            msg: format!("`{id}` is reserved and cannot be used as {what}"),
        });
    }
    Ok(id.to_string())
}

impl Parser<'_, '_> {
    fn body(&mut self) -> Result<Body, SpecError> {
        self.cur.skip_trivia();
        let (line, col) = self.cur.loc();
        if self.cur.eat_keyword("forall") {
            let range = self.range(line, col)?;
            self.cur.expect("{")?;
            self.cur.skip_trivia();
            if self.cur.peek_char() == Some('}') {
                let (line, col) = self.cur.loc();
                return Err(SpecError::EmptyBody { line, col });
            }
            self.scope.push(range.iterator.clone());
            let inner = self.body()?;
            self.scope.pop();
            self.cur.expect("}")?;
            Ok(Body::ForAll(ForAll {
                range,
                body: Box::new(inner),
            }))
        } else if self.cur.at_eof() || self.cur.peek_char() == Some('}') {
            Err(SpecError::EmptyBody { line, col })
        } else {
            self.dot().map(Body::Dot)
        }
    }

    fn range(&mut self, line: usize, col: usize) -> Result<Range, SpecError> {
        self.cur.expect("(")?;
        let lower = self.expr()?;
        self.cur.expect("<=")?;
        self.cur.skip_trivia();
        let (il, ic) = self.cur.loc();
        let iterator = name(self.cur, "an iterator name")?;
        if self.scope.contains(&iterator) || self.iterators.contains(&iterator) {
            return Err(SpecError::DuplicateIterator {
                name: iterator,
                line: il,
                col: ic,
            });
        }
        self.cur.expect("<")?;
        let upper = self.expr()?;
        self.cur.expect(")")?;
        if lower.mentions(&iterator) || upper.mentions(&iterator) {
            return Err(SpecError::RangeSelfReference {
                name: iterator,
                line,
                col,
            });
        }
        self.iterators.push(iterator.clone());
        Ok(Range {
            lower,
            iterator,
            upper,
        })
    }

    fn dot(&mut self) -> Result<DotOp, SpecError> {
        let target = match self.access()? {
            Expr::Name(n) => Target::Scalar(n),
            Expr::Addr(a) => Target::Element(a),
            _ => unreachable!("access yields a name or an address"),
        };
        self.cur.expect("=")?;
        let (line, col) = self.cur.loc();
        let keyword = if self.cur.eat_keyword("dot") {
            ReductionKeyword::Dot
        } else if self.cur.eat_keyword("sum") {
            ReductionKeyword::Sum
        } else {
            return Err({
                let found = self.cur.describe_next();
                self.cur
                    .syntax(format!("expected `dot` or `sum`, found {found}"))
            });
        };
        let range = self.range(line, col)?;
        self.scope.push(range.iterator.clone());
        let lhs = self.operand()?;
        self.cur.expect("*")?;
        let rhs = self.operand()?;
        self.scope.pop();
        self.cur.expect(";")?;
        Ok(DotOp {
            target,
            keyword,
            range,
            lhs,
            rhs,
        })
    }

    fn operand(&mut self) -> Result<Addr, SpecError> {
        self.cur.skip_trivia();
        let (line, col) = self.cur.loc();
        match self.access()? {
            Expr::Addr(a) => Ok(a),
            Expr::Name(name) => Err(SpecError::UnindexedOperand { name, line, col }),
            _ => unreachable!("access yields a name or an address"),
        }
    }

    /// `name` or `name[expr]`.
    fn access(&mut self) -> Result<Expr, SpecError> {
        self.cur.skip_trivia();
        let (line, col) = self.cur.loc();
        let base = name(self.cur, "a variable name")?;
        let indexed = self.cur.eat("[");
        self.uses.push(NameUse {
            in_scope: self.scope.contains(&base),
            name: base.clone(),
            line,
            col,
            as_array: indexed,
        });
        if !indexed {
            return Ok(Expr::Name(base));
        }
        let index = self.expr()?;
        self.cur.expect("]")?;
        if self.cur.peek_char() == Some('[') {
            return Err(SpecError::MultiIndexUnsupported { base, line, col });
        }
        Ok(Expr::Addr(Addr {
            base,
            index: Box::new(index),
        }))
    }

    fn expr(&mut self) -> Result<Expr, SpecError> {
        let mut e = self.term()?;
        while self.cur.eat("+") {
            let rhs = self.term()?;
            e = Expr::Add(Box::new(e), Box::new(rhs));
        }
        Ok(e)
    }

    fn term(&mut self) -> Result<Expr, SpecError> {
        let mut e = self.atom()?;
        while self.cur.eat("*") {
            let rhs = self.atom()?;
            e = Expr::Mul(Box::new(e), Box::new(rhs));
        }
        Ok(e)
    }

    fn atom(&mut self) -> Result<Expr, SpecError> {
        if let Some(c) = self.cur.integer() {
            return c.map(Expr::Const);
        }
        if self.cur.eat("(") {
            let e = self.expr()?;
            self.cur.expect(")")?;
            return Ok(e);
        }
        if self.cur.peek_ident().is_some() {
            return self.access();
        }
        Err({
            let found = self.cur.describe_next();
            self.cur
                .syntax(format!("expected an expression, found {found}"))
        })
    }
}
