//! Text syntax for STL formulas.
//!
//! ```text
//! formula  := implies
//! implies  := or ( "->" implies )?
//! or       := and ( "\/" and )*
//! and      := binary ( "/\" binary )*
//! binary   := unary ( ("U_" | "R_") interval unary )*
//! unary    := "not" unary | "alw_" interval unary | "ev_" interval unary | primary
//! primary  := "true" | "false" | expr rel expr | "(" formula ")"
//! interval := "[" number "," ( number | "inf" ) "]"
//! rel      := ">" | ">=" | "<" | "<=" | "=" | "=="
//! ```
//!
//! Expressions are affine: sums of variables scaled by constants, with
//! parentheses, unary minus and division by constants.

use super::ast::{AffineExpr, Formula, Interval, Relation};
use super::StlError;

const MAX_NESTING: usize = 200;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Plus,
    Minus,
    Star,
    Slash,
    Rel(Relation),
    And,
    Or,
    Implies,
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>, StlError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    let err = |pos: usize, msg: &str| StlError::Syntax {
        pos,
        msg: msg.to_string(),
    };
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let two = |s: &str| text[i..].starts_with(s);
        let tok = match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b'[' => Tok::LBracket,
            b']' => Tok::RBracket,
            b',' => Tok::Comma,
            b'+' => Tok::Plus,
            b'*' => Tok::Star,
            b'/' if two("/\\") => {
                i += 1;
                Tok::And
            }
            b'/' => Tok::Slash,
            b'\\' if two("\\/") => {
                i += 1;
                Tok::Or
            }
            b'-' if two("->") => {
                i += 1;
                Tok::Implies
            }
            b'-' => Tok::Minus,
            b'>' if two(">=") => {
                i += 1;
                Tok::Rel(Relation::Ge)
            }
            b'>' => Tok::Rel(Relation::Gt),
            b'<' if two("<=") => {
                i += 1;
                Tok::Rel(Relation::Le)
            }
            b'<' => Tok::Rel(Relation::Lt),
            b'=' if two("==") => {
                i += 1;
                Tok::Rel(Relation::Eq)
            }
            b'=' => Tok::Rel(Relation::Eq),
            b'0'..=b'9' | b'.' => {
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        while j < bytes.len() && bytes[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                let lit = &text[start..i];
                let value: f64 = lit.parse().map_err(|_| err(start, "malformed number"))?;
                if !value.is_finite() {
                    return Err(err(start, "number out of range"));
                }
                out.push((start, Tok::Num(value)));
                continue;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((start, Tok::Ident(text[start..i].to_string())));
                continue;
            }
            _ => return Err(err(start, "unexpected character")),
        };
        i += 1;
        out.push((start, tok));
    }
    Ok(out)
}

/// Affine expression with its constant part, used while parsing.
#[derive(Debug, Clone)]
struct Lin {
    terms: Vec<(String, f64)>,
    constant: f64,
}

impl Lin {
    fn constant(c: f64) -> Self {
        Lin {
            terms: Vec::new(),
            constant: c,
        }
    }

    fn is_constant(&self) -> bool {
        self.terms.iter().all(|(_, c)| *c == 0.0)
    }

    fn scale(mut self, k: f64) -> Self {
        for (_, c) in &mut self.terms {
            *c *= k;
        }
        self.constant *= k;
        self
    }

    fn add(mut self, other: Lin, sign: f64) -> Self {
        self.terms.extend(other.terms.into_iter().map(|(n, c)| (n, sign * c)));
        self.constant += sign * other.constant;
        self
    }
}

fn is_keyword(s: &str) -> bool {
    matches!(s, "not" | "true" | "false" | "inf" | "alw_" | "ev_" | "U_" | "R_")
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
    depth: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |(p, _)| *p)
    }

    fn error(&self, msg: impl Into<String>) -> StlError {
        StlError::Syntax {
            pos: self.offset(),
            msg: msg.into(),
        }
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == Some(tok) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: &Tok, what: &str) -> Result<(), StlError> {
        if self.eat(tok) {
            Ok(())
        } else {
            Err(self.error(format!("expected {what}")))
        }
    }

    fn eat_keyword(&mut self, kw: &str) -> bool {
        if matches!(self.peek(), Some(Tok::Ident(s)) if s == kw) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn enter(&mut self) -> Result<(), StlError> {
        self.depth += 1;
        if self.depth > MAX_NESTING {
            Err(self.error("formula nested too deeply"))
        } else {
            Ok(())
        }
    }

    fn formula(&mut self) -> Result<Formula, StlError> {
        self.enter()?;
        let lhs = self.or()?;
        let out = if self.eat(&Tok::Implies) {
            Formula::implies(lhs, self.formula()?)
        } else {
            lhs
        };
        self.depth -= 1;
        Ok(out)
    }

    fn or(&mut self) -> Result<Formula, StlError> {
        let mut lhs = self.and()?;
        while self.eat(&Tok::Or) {
            lhs = Formula::or(lhs, self.and()?);
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Formula, StlError> {
        let mut lhs = self.binary()?;
        while self.eat(&Tok::And) {
            lhs = Formula::and(lhs, self.binary()?);
        }
        Ok(lhs)
    }

    fn binary(&mut self) -> Result<Formula, StlError> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat_keyword("U_") {
                let i = self.interval()?;
                lhs = Formula::until(i, lhs, self.unary()?);
            } else if self.eat_keyword("R_") {
                let i = self.interval()?;
                lhs = Formula::release(i, lhs, self.unary()?);
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Formula, StlError> {
        self.enter()?;
        let out = if self.eat_keyword("not") {
            Formula::not(self.unary()?)
        } else if self.eat_keyword("alw_") {
            let i = self.interval()?;
            Formula::always(i, self.unary()?)
        } else if self.eat_keyword("ev_") {
            let i = self.interval()?;
            Formula::eventually(i, self.unary()?)
        } else {
            self.primary()?
        };
        self.depth -= 1;
        Ok(out)
    }

    fn primary(&mut self) -> Result<Formula, StlError> {
        if self.eat_keyword("true") {
            return Ok(Formula::True);
        }
        if self.eat_keyword("false") {
            return Ok(Formula::False);
        }
        let save = (self.pos, self.depth);
        match self.atom() {
            Ok(a) => return Ok(a),
            Err(e) => {
                if self.peek_at(save.0) != Some(&Tok::LParen) {
                    return Err(e);
                }
                (self.pos, self.depth) = save;
            }
        }
        self.expect(&Tok::LParen, "`(`")?;
        let f = self.formula()?;
        self.expect(&Tok::RParen, "`)`")?;
        Ok(f)
    }

    fn peek_at(&self, pos: usize) -> Option<&Tok> {
        self.toks.get(pos).map(|(_, t)| t)
    }

    fn atom(&mut self) -> Result<Formula, StlError> {
        let lhs = self.expr()?;
        let relation = match self.peek() {
            Some(Tok::Rel(r)) => *r,
            _ => return Err(self.error("expected comparison operator")),
        };
        self.pos += 1;
        let rhs = self.expr()?;
        let diff = lhs.add(rhs, -1.0);
        let threshold = -diff.constant;
        if !threshold.is_finite() || diff.terms.iter().any(|(_, c)| !c.is_finite()) {
            return Err(self.error("constant out of range"));
        }
        Ok(Formula::atom(AffineExpr::from_terms(diff.terms), relation, threshold))
    }

    fn expr(&mut self) -> Result<Lin, StlError> {
        let mut acc = self.term()?;
        loop {
            if self.eat(&Tok::Plus) {
                acc = acc.add(self.term()?, 1.0);
            } else if self.eat(&Tok::Minus) {
                acc = acc.add(self.term()?, -1.0);
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self) -> Result<Lin, StlError> {
        let mut acc = self.factor()?;
        loop {
            if self.eat(&Tok::Star) {
                let rhs = self.factor()?;
                acc = if rhs.is_constant() {
                    acc.scale(rhs.constant)
                } else if acc.is_constant() {
                    rhs.scale(acc.constant)
                } else {
                    return Err(self.error("product of two variables is not affine"));
                };
            } else if self.eat(&Tok::Slash) {
                let rhs = self.factor()?;
                if !rhs.is_constant() || rhs.constant == 0.0 {
                    return Err(self.error("division must be by a nonzero constant"));
                }
                acc = acc.scale(1.0 / rhs.constant);
            } else {
                return Ok(acc);
            }
        }
    }

    fn factor(&mut self) -> Result<Lin, StlError> {
        self.enter()?;
        let out = match self.peek().cloned() {
            Some(Tok::Minus) => {
                self.pos += 1;
                self.factor()?.scale(-1.0)
            }
            Some(Tok::Plus) => {
                self.pos += 1;
                self.factor()?
            }
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Lin::constant(v)
            }
            Some(Tok::Ident(name)) if !is_keyword(&name) => {
                self.pos += 1;
                Lin {
                    terms: vec![(name, 1.0)],
                    constant: 0.0,
                }
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(&Tok::RParen, "`)`")?;
                e
            }
            _ => return Err(self.error("expected expression")),
        };
        self.depth -= 1;
        Ok(out)
    }

    fn interval(&mut self) -> Result<Interval, StlError> {
        let start = self.offset();
        self.expect(&Tok::LBracket, "`[`")?;
        let lo = match self.peek() {
            Some(Tok::Num(v)) => *v,
            _ => return Err(self.error("expected interval lower bound")),
        };
        self.pos += 1;
        self.expect(&Tok::Comma, "`,`")?;
        let hi = match self.peek() {
            Some(Tok::Num(v)) => *v,
            Some(Tok::Ident(s)) if s == "inf" => f64::INFINITY,
            _ => return Err(self.error("expected interval upper bound")),
        };
        self.pos += 1;
        self.expect(&Tok::RBracket, "`]`")?;
        Interval::new(lo, hi).ok_or(StlError::SingularInterval { pos: start, lo, hi })
    }
}

/// Parses an STL formula from text.
pub fn parse_formula(text: &str) -> Result<Formula, StlError> {
    let toks = lex(text)?;
    let mut p = Parser {
        toks,
        pos: 0,
        end: text.len(),
        depth: 0,
    };
    let f = p.formula()?;
    if p.pos != p.toks.len() {
        return Err(p.error("unexpected trailing input"));
    }
    Ok(f)
}
