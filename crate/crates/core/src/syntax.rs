//! Character cursor shared by the What and How parsers.

use crate::spec::SpecError;

#[derive(Debug, Clone)]
pub(crate) struct Cursor<'a> {
    src: &'a str,
    pos: usize,
    line: usize,
    col: usize,
}

pub(crate) const KEYWORDS: &[&str] = &[
    "COMPUTATION",
    "HARNESS",
    "IMPLEMENTS",
    "INPUT",
    "OUTPUT",
    "Marshaling",
    "PersistentVariables",
    "BeforeFirstExecution",
    "AfterLastExecution",
    "CppHeaderFiles",
];

pub(crate) fn is_keyword(word: &str) -> bool {
    KEYWORDS.contains(&word)
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

fn is_word_char(c: char) -> bool {
    !c.is_whitespace() && !matches!(c, '{' | '}' | '[' | ']' | '=' | ';')
}

impl<'a> Cursor<'a> {
    pub fn new(src: &'a str) -> Self {
        Cursor {
            src,
            pos: 0,
            line: 1,
            col: 1,
        }
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    pub fn loc(&self) -> (usize, usize) {
        (self.line, self.col)
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.rest().chars().next()?;
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    /// Skips whitespace and `//` or `/* */` comments.
    pub fn skip_trivia(&mut self) {
        loop {
            let rest = self.rest();
            if rest.starts_with("//") {
                while let Some(c) = self.bump() {
                    if c == '\n' {
                        break;
                    }
                }
            } else if rest.starts_with("/*") {
                self.bump();
                self.bump();
                while !self.rest().is_empty() && !self.rest().starts_with("*/") {
                    self.bump();
                }
                self.bump();
                self.bump();
            } else if rest.starts_with(|c: char| c.is_whitespace()) {
                self.bump();
            } else {
                break;
            }
        }
    }

    pub fn at_eof(&mut self) -> bool {
        self.skip_trivia();
        self.rest().is_empty()
    }

    pub fn peek_char(&mut self) -> Option<char> {
        self.skip_trivia();
        self.rest().chars().next()
    }

    pub fn syntax(&self, msg: impl Into<String>) -> SpecError {
        SpecError::Syntax {
            line: self.line,
            col: self.col,
            msg: msg.into(),
        }
    }

    /// Consumes `tok` if the input continues with it.
    pub fn eat(&mut self, tok: &str) -> bool {
        self.skip_trivia();
        if self.rest().starts_with(tok) {
            for _ in tok.chars() {
                self.bump();
            }
            true
        } else {
            false
        }
    }

    pub fn expect(&mut self, tok: &str) -> Result<(), SpecError> {
        if self.eat(tok) {
            Ok(())
        } else {
            Err({
                let found = self.describe_next();
                self.syntax(format!("expected `{tok}`, found {found}"))
            })
        }
    }

    pub fn describe_next(&mut self) -> String {
        self.skip_trivia();
        match self.rest().chars().next() {
            None => "end of input".to_string(),
            Some(_) => {
                let snippet: String = self.rest().chars().take(12).collect();
                let snippet = snippet.split_whitespace().next().unwrap_or("").to_string();
                format!("`{snippet}`")
            }
        }
    }

    pub fn peek_ident(&mut self) -> Option<&'a str> {
        self.skip_trivia();
        let rest = self.rest();
        let mut chars = rest.char_indices();
        match chars.next() {
            Some((_, c)) if is_ident_start(c) => {}
            _ => return None,
        }
        let end = chars
            .find(|&(_, c)| !is_ident_char(c))
            .map_or(rest.len(), |(i, _)| i);
        Some(&rest[..end])
    }

    pub fn ident(&mut self) -> Option<&'a str> {
        let id = self.peek_ident()?;
        for _ in id.chars() {
            self.bump();
        }
        Some(id)
    }

    pub fn expect_ident(&mut self, what: &str) -> Result<&'a str, SpecError> {
        match self.ident() {
            Some(id) => Ok(id),
            None => Err({
                let found = self.describe_next();
                self.syntax(format!("expected {what}, found {found}"))
            }),
        }
    }

    /// Consumes the keyword `kw` if the next identifier is exactly `kw`.
    pub fn eat_keyword(&mut self, kw: &str) -> bool {
        if self.peek_ident() == Some(kw) {
            self.ident();
            true
        } else {
            false
        }
    }

    pub fn expect_keyword(&mut self, kw: &str) -> Result<(), SpecError> {
        if self.eat_keyword(kw) {
            Ok(())
        } else {
            Err({
                let found = self.describe_next();
                self.syntax(format!("expected `{kw}`, found {found}"))
            })
        }
    }

    /// Signed decimal integer literal.
    pub fn integer(&mut self) -> Option<Result<i64, SpecError>> {
        self.skip_trivia();
        let rest = self.rest();
        let digits_from = usize::from(rest.starts_with('-'));
        let len = rest[digits_from..]
            .find(|c: char| !c.is_ascii_digit())
            .unwrap_or(rest.len() - digits_from);
        if len == 0 {
            return None;
        }
        let text = &rest[..digits_from + len];
        let parsed = text
            .parse::<i64>()
            .map_err(|_| self.syntax(format!("integer literal `{text}` out of range")));
        for _ in text.chars() {
            self.bump();
        }
        Some(parsed)
    }

    /// A whitespace-delimited word such as a C++ type or header file name.
    pub fn word(&mut self) -> Option<&'a str> {
        self.skip_trivia();
        let rest = self.rest();
        let end = rest.find(|c: char| !is_word_char(c)).unwrap_or(rest.len());
        if end == 0 {
            return None;
        }
        let w = &rest[..end];
        for _ in w.chars() {
            self.bump();
        }
        Some(w)
    }

    /// Reads a brace-delimited code block and returns its contents verbatim.
    /// String and character literals and comments do not count towards brace
    /// balance.
    pub fn code_block(&mut self) -> Result<&'a str, SpecError> {
        self.skip_trivia();
        let (line, col) = self.loc();
        if !self.rest().starts_with('{') {
            return Err({
                let found = self.describe_next();
                self.syntax(format!("expected `{{` opening a code block, found {found}"))
            });
        }
        self.bump();
        let start = self.pos;
        let mut depth = 1usize;
        loop {
            let rest = self.rest();
            let Some(c) = rest.chars().next() else {
                return Err(SpecError::UnbalancedCodeBlock { line, col });
            };
            if rest.starts_with("//") {
                while let Some(c) = self.bump() {
                    if c == '\n' {
                        break;
                    }
                }
                continue;
            }
            if rest.starts_with("/*") {
                self.bump();
                self.bump();
                while !self.rest().is_empty() && !self.rest().starts_with("*/") {
                    self.bump();
                }
                if self.rest().is_empty() {
                    return Err(SpecError::UnbalancedCodeBlock { line, col });
                }
                self.bump();
                self.bump();
                continue;
            }
            match c {
                '"' | '\'' => {
                    self.bump();
                    loop {
                        match self.bump() {
                            None => return Err(SpecError::UnbalancedCodeBlock { line, col }),
                            Some('\\') => {
                                self.bump();
                            }
                            Some(q) if q == c => break,
                            Some(_) => {}
                        }
                    }
                }
                '{' => {
                    depth += 1;
                    self.bump();
                }
                '}' => {
                    depth -= 1;
                    if depth == 0 {
                        let body = &self.src[start..self.pos];
                        self.bump();
                        return Ok(body);
                    }
                    self.bump();
                }
                _ => {
                    self.bump();
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tracks_line_and_column() {
        let mut c = Cursor::new("  a\n  bb // note\n c");
        assert_eq!(c.ident(), Some("a"));
        c.skip_trivia();
        assert_eq!(c.loc(), (2, 3));
        assert_eq!(c.ident(), Some("bb"));
        c.skip_trivia();
        assert_eq!(c.loc(), (3, 2));
    }

    #[test]
    fn code_block_skips_braces_in_literals_and_comments() {
        let mut c =
            Cursor::new("{ puts(\"}\"); char x = '{'; // }\n /* { */ if (a) { b(); } } rest");
        let body = c.code_block().unwrap();
        assert!(body.ends_with("if (a) { b(); } "));
        assert_eq!(c.ident(), Some("rest"));
    }

    #[test]
    fn unterminated_code_block_is_reported_at_its_opening_brace() {
        let mut c = Cursor::new("\n  { if (x) { y(); }");
        assert_eq!(
            c.code_block().unwrap_err(),
            SpecError::UnbalancedCodeBlock { line: 2, col: 3 }
        );
    }

    #[test]
    fn negative_integers() {
        let mut c = Cursor::new("-12 7");
        assert_eq!(c.integer().unwrap().unwrap(), -12);
        assert_eq!(c.integer().unwrap().unwrap(), 7);
        assert!(c.integer().is_none());
    }
}
