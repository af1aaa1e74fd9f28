//! Scalar coefficient expressions for inline problems.
//!
//! An expression is a sum of terms; a term is a product of factors:
//! a number, `v`, `v^n` (integer `n`), `|v|`, `|v|^e` or `exp(c*v)`, where
//! `v` is the expression's variable. Examples: `x - x^3`, `|x|^1.5`,
//! `3*R^2 + 1`, `0.5*x - exp(3*x)`.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Factor {
    Pow(i32),
    AbsPow(f64),
    Exp(f64),
}

impl Factor {
    fn eval(self, v: f64) -> f64 {
        match self {
            Factor::Pow(n) => v.powi(n),
            Factor::AbsPow(e) => v.abs().powf(e),
            Factor::Exp(c) => (c * v).exp(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Term {
    coef: f64,
    factors: Vec<Factor>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    source: String,
    terms: Vec<Term>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub message: String,
    pub position: usize,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at offset {}", self.message, self.position)
    }
}

impl std::error::Error for ParseError {}

impl Expr {
    pub fn parse(source: &str, var: &str) -> Result<Self, ParseError> {
        let mut p = Parser {
            src: source.as_bytes(),
            pos: 0,
            var: var.as_bytes(),
        };
        let terms = p.expr()?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(Expr {
            source: source.trim().to_string(),
            terms,
        })
    }

    pub fn eval(&self, v: f64) -> f64 {
        self.terms
            .iter()
            .map(|t| t.factors.iter().fold(t.coef, |acc, f| acc * f.eval(v)))
            .sum()
    }

    pub fn source(&self) -> &str {
        &self.source
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    var: &'a [u8],
}

impl Parser<'_> {
    fn error(&self, message: &str) -> ParseError {
        ParseError {
            message: message.to_string(),
            position: self.pos,
        }
    }

    fn skip_ws(&mut self) {
        while self.src.get(self.pos).is_some_and(u8::is_ascii_whitespace) {
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

    fn expect(&mut self, c: u8) -> Result<(), ParseError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.error(&format!("expected `{}`", c as char)))
        }
    }

    fn eat_word(&mut self, word: &[u8]) -> bool {
        self.skip_ws();
        let end = self.pos + word.len();
        let boundary = !self
            .src
            .get(end)
            .is_some_and(|c| c.is_ascii_alphanumeric() || *c == b'_');
        if self.src.get(self.pos..end) == Some(word) && boundary {
            self.pos = end;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Vec<Term>, ParseError> {
        let mut terms = Vec::new();
        let mut sign = if self.eat(b'-') {
            -1.0
        } else {
            self.eat(b'+');
            1.0
        };
        loop {
            let mut term = self.term()?;
            term.coef *= sign;
            terms.push(term);
            sign = if self.eat(b'+') {
                1.0
            } else if self.eat(b'-') {
                -1.0
            } else {
                return Ok(terms);
            };
        }
    }

    fn term(&mut self) -> Result<Term, ParseError> {
        let mut term = Term {
            coef: 1.0,
            factors: Vec::new(),
        };
        loop {
            self.factor(&mut term)?;
            if !self.eat(b'*') {
                return Ok(term);
            }
        }
    }

    fn factor(&mut self, term: &mut Term) -> Result<(), ParseError> {
        match self.peek() {
            Some(c) if c.is_ascii_digit() || c == b'.' => term.coef *= self.number()?,
            Some(b'|') => {
                self.pos += 1;
                self.variable()?;
                self.expect(b'|')?;
                let e = if self.eat(b'^') { self.number()? } else { 1.0 };
                term.factors.push(Factor::AbsPow(e));
            }
            _ if self.eat_word(b"exp") => {
                self.expect(b'(')?;
                let c = if self.eat_word(self.var) {
                    1.0
                } else {
                    let c = self.number()?;
                    self.expect(b'*')?;
                    self.variable()?;
                    c
                };
                self.expect(b')')?;
                term.factors.push(Factor::Exp(c));
            }
            _ => {
                self.variable()?;
                let n = if self.eat(b'^') {
                    let n = self.number()?;
                    if n.fract() != 0.0 || n.abs() > i32::MAX as f64 {
                        return Err(self.error("non-integer power of a signed variable; use |v|^e"));
                    }
                    n as i32
                } else {
                    1
                };
                term.factors.push(Factor::Pow(n));
            }
        }
        Ok(())
    }

    fn variable(&mut self) -> Result<(), ParseError> {
        if self.eat_word(self.var) {
            Ok(())
        } else {
            Err(self.error(&format!("expected `{}`", String::from_utf8_lossy(self.var))))
        }
    }

    fn number(&mut self) -> Result<f64, ParseError> {
        self.skip_ws();
        let start = self.pos;
        let digits = |p: &mut Self| {
            while p.src.get(p.pos).is_some_and(u8::is_ascii_digit) {
                p.pos += 1;
            }
        };
        self.eat(b'-');
        digits(self);
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            digits(self);
        }
        if matches!(self.src.get(self.pos), Some(b'e' | b'E'))
            && self
                .src
                .get(self.pos + 1)
                .is_some_and(|c| c.is_ascii_digit() || *c == b'-' || *c == b'+')
        {
            self.pos += 2;
            digits(self);
        }
        std::str::from_utf8(&self.src[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| ParseError {
                message: "malformed number".into(),
                position: start,
            })
    }
}
