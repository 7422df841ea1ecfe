//! Recursive-descent parser for defining-function expressions.
//!
//! ```text
//! expr   := term (("+" | "-") term)*
//! term   := factor (("*" | "/") factor)*
//! factor := ("-" | "+") factor | atom ("^" INT)?
//! atom   := NUMBER | "x" INT | "y" INT | "re(z" INT ")" | "im(z" INT ")"
//!         | "abs2(z" INT ")" | "bump(" expr "," NUMBER ")" | "(" expr ")"
//! ```
//!
//! Coordinates are one-based in the source (`x1`, `z2`, ...).

use super::ast::{ExprAst, Node};
use super::ExprError;

/// Parses `source` as an expression over `C^n`.
pub fn parse(source: &str, n: usize) -> Result<ExprAst, ExprError> {
    if n == 0 {
        return Err(ExprError::Dimension(n));
    }
    let mut p = Parser {
        src: source.as_bytes(),
        pos: 0,
        n,
    };
    let root = p.expr()?;
    p.skip_ws();
    if p.pos < p.src.len() {
        return Err(p.syntax("unexpected trailing input"));
    }
    ExprAst::new(n, root)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    n: usize,
}

impl Parser<'_> {
    fn syntax(&self, msg: &str) -> ExprError {
        ExprError::Syntax {
            pos: self.pos,
            message: msg.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: u8) -> Result<(), ExprError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.syntax(&format!("expected '{}'", c as char)))
        }
    }

    fn keyword(&mut self, word: &str) -> bool {
        self.skip_ws();
        if self.src[self.pos..].starts_with(word.as_bytes()) {
            self.pos += word.len();
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.term()?;
        loop {
            if self.eat(b'+') {
                lhs = lhs + self.term()?;
            } else if self.eat(b'-') {
                lhs = lhs - self.term()?;
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.factor()?;
        loop {
            if self.eat(b'*') {
                lhs = lhs * self.factor()?;
            } else if self.eat(b'/') {
                lhs = lhs / self.factor()?;
            } else {
                return Ok(lhs);
            }
        }
    }

    fn factor(&mut self) -> Result<Node, ExprError> {
        if self.eat(b'-') {
            return Ok(-self.factor()?);
        }
        if self.eat(b'+') {
            return self.factor();
        }
        let base = self.atom()?;
        if self.eat(b'^') {
            self.skip_ws();
            let start = self.pos;
            let text = self.number_text();
            if text.is_empty() {
                return Err(self.syntax("expected an exponent"));
            }
            return match text.parse::<u32>() {
                Ok(e) if e >= 1 => Ok(base.powi(e)),
                _ => Err(ExprError::NonIntegerExponent {
                    pos: start,
                    text: text.to_string(),
                }),
            };
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node, ExprError> {
        match self.peek() {
            None => Err(self.syntax("unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => Ok(Node::Const(self.number()?)),
            Some(_) => {
                if self.keyword("abs2(") {
                    let j = self.zindex()?;
                    self.expect(b')')?;
                    Ok(Node::abs2(j))
                } else if self.keyword("re(") {
                    let j = self.zindex()?;
                    self.expect(b')')?;
                    Ok(Node::X(j))
                } else if self.keyword("im(") {
                    let j = self.zindex()?;
                    self.expect(b')')?;
                    Ok(Node::Y(j))
                } else if self.keyword("bump(") {
                    let inner = self.expr()?;
                    self.expect(b',')?;
                    self.skip_ws();
                    let at = self.pos;
                    let delta = self.number()?;
                    if delta <= 0.0 {
                        return Err(ExprError::Syntax {
                            pos: at,
                            message: "bump width must be positive".into(),
                        });
                    }
                    self.expect(b')')?;
                    Ok(inner.bump(delta))
                } else if self.eat(b'x') {
                    Ok(Node::X(self.index()?))
                } else if self.eat(b'y') {
                    Ok(Node::Y(self.index()?))
                } else {
                    Err(self.syntax("unexpected character"))
                }
            }
        }
    }

    fn zindex(&mut self) -> Result<usize, ExprError> {
        self.skip_ws();
        if !self.eat(b'z') {
            return Err(self.syntax("expected 'z'"));
        }
        self.index()
    }

    // one-based coordinate index immediately following a name
    fn index(&mut self) -> Result<usize, ExprError> {
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii digits");
        let idx: usize = text.parse().map_err(|_| ExprError::Syntax {
            pos: start,
            message: "expected a coordinate index".into(),
        })?;
        if idx == 0 || idx > self.n {
            return Err(ExprError::IndexOutOfRange {
                pos: start,
                index: idx,
                n: self.n,
            });
        }
        Ok(idx - 1)
    }

    // digits, optional fraction and exponent; returns the raw text
    fn number_text(&mut self) -> &str {
        let start = self.pos;
        let s = self.src;
        let mut i = self.pos;
        while i < s.len() && (s[i].is_ascii_digit() || s[i] == b'.') {
            i += 1;
        }
        if i > start && i < s.len() && (s[i] == b'e' || s[i] == b'E') {
            let mut j = i + 1;
            if j < s.len() && (s[j] == b'+' || s[j] == b'-') {
                j += 1;
            }
            if j < s.len() && s[j].is_ascii_digit() {
                while j < s.len() && s[j].is_ascii_digit() {
                    j += 1;
                }
                i = j;
            }
        }
        self.pos = i;
        std::str::from_utf8(&s[start..i]).expect("ascii number")
    }

    fn number(&mut self) -> Result<f64, ExprError> {
        self.skip_ws();
        let start = self.pos;
        let text = self.number_text();
        text.parse::<f64>().map_err(|_| ExprError::Syntax {
            pos: start,
            message: format!("invalid number '{text}'"),
        })
    }
}
