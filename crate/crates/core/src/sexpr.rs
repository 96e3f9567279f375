//! S-expression reader for HDDL files.
//!
//! HDDL domains and problems are parenthesized expressions with `;` line
//! comments. The reader keeps source spans on every node so later stages
//! (parsing, linting) can report precise locations and emit text edits.

use std::fmt;

use crate::error::ParseError;

/// Byte range plus human-readable position of a token or form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub line: u32,
    pub col: u32,
}

impl Span {
    pub fn point(offset: usize, line: u32, col: u32) -> Self {
        Span { start: offset, end: offset, line, col }
    }

    /// Smallest span enclosing both operands.
    pub fn merge(self, other: Span) -> Span {
        let (line, col) = if self.start <= other.start {
            (self.line, self.col)
        } else {
            (other.line, other.col)
        };
        Span {
            start: self.start.min(other.start),
            end: self.end.max(other.end),
            line,
            col,
        }
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone)]
pub enum SExpr {
    Atom { text: String, span: Span },
    List { items: Vec<SExpr>, span: Span },
}

impl SExpr {
    pub fn span(&self) -> Span {
        match self {
            SExpr::Atom { span, .. } | SExpr::List { span, .. } => *span,
        }
    }

    pub fn as_atom(&self) -> Option<&str> {
        match self {
            SExpr::Atom { text, .. } => Some(text),
            SExpr::List { .. } => None,
        }
    }

    pub fn as_list(&self) -> Option<&[SExpr]> {
        match self {
            SExpr::List { items, .. } => Some(items),
            SExpr::Atom { .. } => None,
        }
    }

    /// True when the node is an atom equal to `kw`, compared case-insensitively.
    pub fn is_keyword(&self, kw: &str) -> bool {
        self.as_atom().is_some_and(|a| a.eq_ignore_ascii_case(kw))
    }
}

impl fmt::Display for SExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SExpr::Atom { text, .. } => write!(f, "{text}"),
            SExpr::List { items, .. } => {
                write!(f, "(")?;
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        write!(f, " ")?;
                    }
                    write!(f, "{item}")?;
                }
                write!(f, ")")
            }
        }
    }
}

struct Reader<'a> {
    src: &'a str,
    pos: usize,
    line: u32,
    col: u32,
}

impl<'a> Reader<'a> {
    fn new(src: &'a str) -> Self {
        Reader { src, pos: 0, line: 1, col: 1 }
    }

    fn here(&self) -> Span {
        Span::point(self.pos, self.line, self.col)
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.src[self.pos..].chars().next()?;
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn skip_trivia(&mut self) {
        loop {
            match self.peek() {
                Some(c) if c.is_whitespace() => {
                    self.bump();
                }
                Some(';') => {
                    while let Some(c) = self.peek() {
                        if c == '\n' {
                            break;
                        }
                        self.bump();
                    }
                }
                _ => break,
            }
        }
    }

    fn read_atom(&mut self) -> Result<SExpr, ParseError> {
        let start = self.here();
        while let Some(c) = self.peek() {
            if c.is_whitespace() || c == '(' || c == ')' || c == ';' {
                break;
            }
            if c == '"' || c.is_control() {
                return Err(ParseError::IllegalCharacter { ch: c, span: self.here() });
            }
            self.bump();
        }
        let span = Span {
            start: start.start,
            end: self.pos,
            line: start.line,
            col: start.col,
        };
        let mut text = self.src[start.start..self.pos].to_string();
        // Keywords (`:action`, `:types`, ...) are case-insensitive; lowercase
        // them here. Object and variable names keep their case.
        if text.starts_with(':') {
            text.make_ascii_lowercase();
        }
        debug_assert!(!text.is_empty());
        Ok(SExpr::Atom { text, span })
    }

    fn read_form(&mut self) -> Result<SExpr, ParseError> {
        self.skip_trivia();
        match self.peek() {
            None => Err(ParseError::UnbalancedParenthesis { span: self.here() }),
            Some('(') => {
                let open = self.here();
                self.bump();
                let mut items = Vec::new();
                loop {
                    self.skip_trivia();
                    match self.peek() {
                        None => {
                            return Err(ParseError::UnbalancedParenthesis { span: open })
                        }
                        Some(')') => {
                            self.bump();
                            let span = Span {
                                start: open.start,
                                end: self.pos,
                                line: open.line,
                                col: open.col,
                            };
                            return Ok(SExpr::List { items, span });
                        }
                        Some(_) => items.push(self.read_form()?),
                    }
                }
            }
            Some(')') => Err(ParseError::UnbalancedParenthesis { span: self.here() }),
            Some(_) => self.read_atom(),
        }
    }
}

/// Reads every top-level form in `text`.
pub fn tokenize(text: &str) -> Result<Vec<SExpr>, ParseError> {
    let mut reader = Reader::new(text);
    let mut forms = Vec::new();
    loop {
        reader.skip_trivia();
        if reader.peek().is_none() {
            return Ok(forms);
        }
        forms.push(reader.read_form()?);
    }
}

/// Reads exactly one top-level form.
pub fn read_one(text: &str) -> Result<SExpr, ParseError> {
    let forms = tokenize(text)?;
    match forms.len() {
        1 => Ok(forms.into_iter().next().unwrap()),
        n => Err(ParseError::ExpectedSingleForm { found: n }),
    }
}
