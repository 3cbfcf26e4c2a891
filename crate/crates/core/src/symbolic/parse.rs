//! Parser for the printed expression syntax (`x[i-1]`, `sum(j=1..i, ..)`,
//! `E[.. | F(i-1)]`, `Pr[..]`, `pi_3(s[i])`). Used for fact files and to
//! round-trip the pretty-printer.

use std::collections::BTreeSet;

use num_bigint::BigInt;

use super::index::{IndexExpr, TimeVar};
use super::poly::{CmpOp, Poly, Rational};
use super::ratfn::RatFn;
use super::term::{normalize, normalize_ratfn, Term, TermFormula};
use super::SymbolicError;

/// Name resolution for bare and indexed identifiers.
#[derive(Clone, Debug, Default)]
pub struct ParseCtx {
    /// Indexed names that denote sample variables (everything else indexed is a process).
    pub samples: BTreeSet<String>,
    /// Bare names that denote time symbols; `tau` is always one.
    pub time_vars: Vec<String>,
    /// When set, bare names outside this set are rejected.
    pub params: Option<BTreeSet<String>>,
}

impl ParseCtx {
    pub fn new() -> Self {
        ParseCtx { time_vars: vec!["i".to_string()], ..Default::default() }
    }

    pub fn with_samples<I: IntoIterator<Item = String>>(mut self, s: I) -> Self {
        self.samples.extend(s);
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(BigInt),
    Ident(String),
    Sym(&'static str),
}

const SYMBOLS: [&str; 21] =
    ["..", "<=", ">=", "!=", "==", "&&", "||", "+", "-", "*", "/", "^", "(", ")", "[", "]", ",", "|", "=", "<", ">"];

fn lex(s: &str) -> Result<Vec<(Tok, usize)>, SymbolicError> {
    let chars: Vec<char> = s.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    'outer: while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let text: String = chars[start..i].iter().collect();
            out.push((Tok::Num(text.parse().unwrap()), start + 1));
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push((Tok::Ident(chars[start..i].iter().collect()), start + 1));
            continue;
        }
        if c == '!' && chars.get(i + 1) != Some(&'=') {
            out.push((Tok::Sym("!"), i + 1));
            i += 1;
            continue;
        }
        for sym in SYMBOLS {
            let n = sym.chars().count();
            if chars[i..].iter().take(n).copied().eq(sym.chars()) {
                out.push((Tok::Sym(sym), i + 1));
                i += n;
                continue 'outer;
            }
        }
        return Err(SymbolicError::Parse { col: i + 1, msg: format!("unexpected character `{c}`") });
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    ctx: &'a ParseCtx,
    bound: Vec<String>,
    end_col: usize,
}

type PResult<T> = Result<T, SymbolicError>;

impl<'a> Parser<'a> {
    fn new(text: &str, ctx: &'a ParseCtx) -> PResult<Self> {
        Ok(Parser { toks: lex(text)?, pos: 0, ctx, bound: Vec::new(), end_col: text.chars().count() + 1 })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn peek_at(&self, k: usize) -> Option<&Tok> {
        self.toks.get(self.pos + k).map(|(t, _)| t)
    }

    fn col(&self) -> usize {
        self.toks.get(self.pos).map(|(_, c)| *c).unwrap_or(self.end_col)
    }

    fn err<T>(&self, msg: impl Into<String>) -> PResult<T> {
        Err(SymbolicError::Parse { col: self.col(), msg: msg.into() })
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Some(Tok::Sym(x)) if *x == s)
    }

    fn eat(&mut self, s: &str) -> bool {
        if self.is_sym(s) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, s: &str) -> PResult<()> {
        if self.eat(s) {
            Ok(())
        } else {
            self.err(format!("expected `{s}`"))
        }
    }

    fn ident(&mut self) -> PResult<String> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => self.err("expected identifier"),
        }
    }

    fn number(&mut self) -> PResult<BigInt> {
        match self.peek() {
            Some(Tok::Num(n)) => {
                let n = n.clone();
                self.pos += 1;
                Ok(n)
            }
            _ => self.err("expected number"),
        }
    }

    fn small(&mut self) -> PResult<i64> {
        let n = self.number()?;
        i64::try_from(n).or_else(|_| self.err("number out of range"))
    }

    fn done(&self) -> PResult<()> {
        if self.pos < self.toks.len() {
            self.err("unexpected trailing input")
        } else {
            Ok(())
        }
    }

    fn expr(&mut self) -> PResult<Term> {
        let mut parts = vec![self.product()?];
        loop {
            if self.eat("+") {
                parts.push(self.product()?);
            } else if self.eat("-") {
                parts.push(Term::Neg(Box::new(self.product()?)));
            } else {
                break;
            }
        }
        Ok(if parts.len() == 1 { parts.pop().unwrap() } else { Term::Add(parts) })
    }

    fn product(&mut self) -> PResult<Term> {
        let mut acc = self.unary()?;
        loop {
            if self.eat("*") {
                acc = Term::mul(acc, self.unary()?);
            } else if self.eat("/") {
                acc = Term::Div(Box::new(acc), Box::new(self.unary()?));
            } else {
                break;
            }
        }
        Ok(acc)
    }

    fn unary(&mut self) -> PResult<Term> {
        if self.eat("-") {
            return Ok(Term::Neg(Box::new(self.unary()?)));
        }
        let base = self.primary()?;
        if self.eat("^") {
            let k = self.small()?;
            if k < 0 || k > u32::MAX as i64 {
                return self.err("exponent must be a natural number");
            }
            return Ok(Term::Pow(Box::new(base), k as u32));
        }
        Ok(base)
    }

    fn primary(&mut self) -> PResult<Term> {
        match self.peek().cloned() {
            Some(Tok::Num(n)) => {
                self.pos += 1;
                Ok(Term::Num(Rational::from_integer(n)))
            }
            Some(Tok::Sym("(")) => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(")")?;
                Ok(e)
            }
            Some(Tok::Sym("[")) => {
                self.pos += 1;
                let f = self.formula()?;
                self.expect("]")?;
                Ok(Term::Indicator(Box::new(f)))
            }
            Some(Tok::Ident(name)) => self.named(name),
            _ => self.err("expected expression"),
        }
    }

    fn named(&mut self, name: String) -> PResult<Term> {
        let next_is = |p: &Self, s: &str| matches!(p.peek_at(1), Some(Tok::Sym(x)) if *x == s);
        if name == "E" && next_is(self, "[") {
            self.pos += 2;
            let body = self.expr()?;
            if self.eat("|") {
                let f = self.ident()?;
                if f != "F" {
                    return self.err("expected `F(..)` filtration");
                }
                self.expect("(")?;
                let ix = self.index()?;
                self.expect(")")?;
                self.expect("]")?;
                return Ok(Term::CondExp { body: Box::new(body), filtration: ix });
            }
            self.expect("]")?;
            return Ok(Term::Exp(Box::new(body)));
        }
        if name == "Pr" && next_is(self, "[") {
            self.pos += 2;
            let f = self.formula()?;
            self.expect("]")?;
            return Ok(Term::Exp(Box::new(Term::Indicator(Box::new(f)))));
        }
        if name == "sum" && next_is(self, "(") {
            self.pos += 2;
            let var = self.ident()?;
            self.expect("=")?;
            let lo = self.index()?;
            self.expect("..")?;
            let hi = self.index()?;
            self.expect(",")?;
            self.bound.push(var.clone());
            let body = self.expr();
            self.bound.pop();
            let body = body?;
            self.expect(")")?;
            return Ok(Term::Sum { var, lo, hi, body: Box::new(body) });
        }
        if let Some(k) = name.strip_prefix("pi_").and_then(|k| k.parse::<u32>().ok()) {
            if next_is(self, "(") {
                self.pos += 2;
                let s = self.ident()?;
                self.expect("[")?;
                let ix = self.index()?;
                self.expect("]")?;
                self.expect(")")?;
                if k == 0 {
                    return self.err("projections are numbered from 1");
                }
                return Ok(Term::Sample(s, ix, Some(k)));
            }
        }
        self.pos += 1;
        if self.eat("[") {
            let ix = self.index()?;
            self.expect("]")?;
            return Ok(if self.ctx.samples.contains(&name) {
                Term::Sample(name, ix, None)
            } else {
                Term::Process(name, ix)
            });
        }
        if name == "tau" {
            return Ok(Term::Time(TimeVar::Tau));
        }
        if self.bound.contains(&name) || self.ctx.time_vars.contains(&name) {
            return Ok(Term::Time(TimeVar::Named(name)));
        }
        if let Some(ps) = &self.ctx.params {
            if !ps.contains(&name) {
                self.pos -= 1;
                return self.err(format!("unknown identifier `{name}`"));
            }
        }
        Ok(Term::Param(name))
    }

    fn index(&mut self) -> PResult<IndexExpr> {
        if self.eat("-") {
            return Ok(IndexExpr::abs(-self.small()?));
        }
        if let Some(Tok::Num(_)) = self.peek() {
            return Ok(IndexExpr::abs(self.small()?));
        }
        let name = self.ident()?;
        let base = if name == "tau" { TimeVar::Tau } else { TimeVar::Named(name) };
        let offset = if self.eat("+") {
            self.small()?
        } else if self.eat("-") {
            -self.small()?
        } else {
            0
        };
        Ok(IndexExpr::var(base, offset))
    }

    fn formula(&mut self) -> PResult<TermFormula> {
        let mut parts = vec![self.conj()?];
        while self.eat("||") {
            parts.push(self.conj()?);
        }
        Ok(if parts.len() == 1 { parts.pop().unwrap() } else { TermFormula::Or(parts) })
    }

    fn conj(&mut self) -> PResult<TermFormula> {
        let mut parts = vec![self.literal()?];
        while self.eat("&&") {
            parts.push(self.literal()?);
        }
        Ok(if parts.len() == 1 { parts.pop().unwrap() } else { TermFormula::And(parts) })
    }

    fn literal(&mut self) -> PResult<TermFormula> {
        if self.eat("!") {
            return Ok(TermFormula::Not(Box::new(self.literal()?)));
        }
        if let Some(Tok::Ident(w)) = self.peek() {
            let w = w.clone();
            if w == "true" || w == "false" {
                self.pos += 1;
                return Ok(if w == "true" { TermFormula::True } else { TermFormula::False });
            }
        }
        if self.is_sym("(") {
            let save = self.pos;
            self.pos += 1;
            if let Ok(f) = self.formula() {
                if self.eat(")") && !self.at_comparison_or_arith() {
                    return Ok(f);
                }
            }
            self.pos = save;
        }
        let lhs = self.expr()?;
        let op = match self.peek() {
            Some(Tok::Sym(s)) => *s,
            _ => return self.err("expected comparison"),
        };
        self.pos += 1;
        let rhs = self.expr()?;
        Ok(match op {
            "=" | "==" => TermFormula::Cmp(CmpOp::Eq, lhs, rhs),
            "!=" => TermFormula::Cmp(CmpOp::Ne, lhs, rhs),
            "<" => TermFormula::Cmp(CmpOp::Lt, lhs, rhs),
            "<=" => TermFormula::Cmp(CmpOp::Le, lhs, rhs),
            ">" => TermFormula::Cmp(CmpOp::Lt, rhs, lhs),
            ">=" => TermFormula::Cmp(CmpOp::Le, rhs, lhs),
            _ => {
                self.pos -= 1;
                return self.err("expected comparison");
            }
        })
    }

    fn at_comparison_or_arith(&self) -> bool {
        matches!(self.peek(), Some(Tok::Sym("=" | "==" | "!=" | "<" | "<=" | ">" | ">=" | "+" | "-" | "*" | "/" | "^")))
    }
}

pub fn parse_term(text: &str, ctx: &ParseCtx) -> Result<Term, SymbolicError> {
    let mut p = Parser::new(text, ctx)?;
    let t = p.expr()?;
    p.done()?;
    Ok(t)
}

pub fn parse_poly(text: &str, ctx: &ParseCtx) -> Result<Poly, SymbolicError> {
    normalize(&parse_term(text, ctx)?)
}

pub fn parse_ratfn(text: &str, ctx: &ParseCtx) -> Result<RatFn, SymbolicError> {
    normalize_ratfn(&parse_term(text, ctx)?)
}

/// Parse `lhs = rhs`, where the right side may divide by parameter polynomials.
pub fn parse_equation(text: &str, ctx: &ParseCtx) -> Result<(Poly, RatFn), SymbolicError> {
    let mut p = Parser::new(text, ctx)?;
    let lhs = p.expr()?;
    p.expect("=")?;
    let rhs = p.expr()?;
    p.done()?;
    Ok((normalize(&lhs)?, normalize_ratfn(&rhs)?))
}
