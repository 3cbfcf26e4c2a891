use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};

use super::ast::*;
use super::lexer::{Tok, Token};
use super::FrontendError;
use crate::symbolic::Rational;

/// Where an expression occurs; decides how names resolve.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Ctx {
    Init,
    Dist,
    Guard,
    Body,
    Seed,
    Hint(HintScope),
    Variant,
}

#[derive(Clone, Debug, Default)]
pub(crate) struct Scope {
    pub params: BTreeSet<String>,
    pub process: BTreeSet<String>,
    /// Sample name -> (arity, tuple-valued).
    pub samples: BTreeMap<String, (usize, bool)>,
    pub init_len: usize,
    pub assigned: BTreeSet<String>,
    /// Names sampled somewhere in the loop, known before their sampling.
    pub pending_samples: BTreeSet<String>,
}

impl Scope {
    pub fn of_program(p: &Program) -> Scope {
        Scope {
            params: p.params.iter().map(|d| d.node.name.clone()).collect(),
            process: p.process_vars().into_iter().collect(),
            samples: p
                .samples
                .iter()
                .map(|s| (s.node.var.clone(), (s.node.dist.arity(), s.node.dist.is_tuple())))
                .collect(),
            init_len: p.init_len(),
            assigned: BTreeSet::new(),
            pending_samples: BTreeSet::new(),
        }
    }
}

const RESERVED: &[&str] = &["param", "in", "int", "rat", "while", "do", "end", "true", "false", "inf", "t"];

pub(crate) struct Parser {
    toks: Vec<Token>,
    pos: usize,
    pub scope: Scope,
}

type PResult<T> = Result<T, FrontendError>;

impl Parser {
    pub fn new(toks: Vec<Token>, scope: Scope) -> Self {
        Parser { toks, pos: 0, scope }
    }

    /// Parser for a whole program; notes every sampled name up front.
    pub fn for_program(toks: Vec<Token>) -> Self {
        let mut scope = Scope::default();
        for w in toks.windows(2) {
            if let (Tok::Ident(n), Tok::Sym("~")) = (&w[0].tok, &w[1].tok) {
                scope.pending_samples.insert(n.clone());
            }
        }
        Parser::new(toks, scope)
    }

    pub fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    pub fn span(&self) -> Span {
        self.toks[self.pos].span
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    pub fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(x) if *x == s)
    }

    fn is_kw(&self, k: &str) -> bool {
        matches!(self.peek(), Tok::Ident(x) if x == k)
    }

    pub fn eat_sym(&mut self, s: &str) -> bool {
        if self.is_sym(s) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn describe(t: &Tok) -> String {
        match t {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Int(n) => format!("`{n}`"),
            Tok::Str(s) => format!("\"{s}\""),
            Tok::Sym(s) => format!("`{s}`"),
            Tok::Eof => "end of input".to_string(),
        }
    }

    fn expected(&self, what: &str) -> FrontendError {
        FrontendError::syntax(self.span(), format!("expected {what}, found {}", Self::describe(self.peek())))
    }

    pub fn expect_sym(&mut self, s: &str) -> PResult<Span> {
        if self.is_sym(s) {
            Ok(self.bump().span)
        } else {
            Err(self.expected(&format!("`{s}`")))
        }
    }

    fn expect_kw(&mut self, k: &str) -> PResult<Span> {
        if self.is_kw(k) {
            Ok(self.bump().span)
        } else {
            Err(self.expected(&format!("`{k}`")))
        }
    }

    fn expect_ident(&mut self) -> PResult<(String, Span)> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                let sp = self.bump().span;
                Ok((s, sp))
            }
            _ => Err(self.expected("identifier")),
        }
    }

    fn expect_int(&mut self) -> PResult<BigInt> {
        match self.peek().clone() {
            Tok::Int(n) => {
                self.bump();
                Ok(n)
            }
            _ => Err(self.expected("integer")),
        }
    }

    fn signed_int(&mut self) -> PResult<BigInt> {
        let neg = self.eat_sym("-");
        let n = self.expect_int()?;
        Ok(if neg { -n } else { n })
    }

    pub fn expect_eof(&mut self) -> PResult<()> {
        if matches!(self.peek(), Tok::Eof) {
            Ok(())
        } else {
            Err(self.expected("end of input"))
        }
    }

    // ---- programs ----

    pub fn program(&mut self, pragmas: Pragmas) -> PResult<Program> {
        let mut params: Vec<Spanned<ParamDecl>> = Vec::new();
        let mut init: Vec<Spanned<InitAssign>> = Vec::new();
        loop {
            if self.is_kw("param") {
                let d = self.param_decl()?;
                if self.scope.params.contains(&d.node.name) {
                    return Err(FrontendError::invalid(d.span, format!("parameter `{}` declared twice", d.node.name)));
                }
                self.scope.params.insert(d.node.name.clone());
                params.push(d);
            } else if self.is_kw("while") {
                break;
            } else if matches!(self.peek(), Tok::Ident(_)) {
                init.push(self.init_assign()?);
            } else {
                return Err(self.expected("`param`, an initial assignment, or `while`"));
            }
        }
        let while_span = self.span();
        self.scope.init_len = check_init(&init, while_span)?;
        self.scope.process = init.iter().map(|i| i.node.var.clone()).collect();

        self.expect_kw("while")?;
        self.expect_sym("(")?;
        let guard_start = self.pos;
        self.skip_balanced()?;
        self.expect_kw("do")?;

        let mut samples: Vec<Spanned<Sampling>> = Vec::new();
        let mut body: Vec<Spanned<Assign>> = Vec::new();
        while !self.is_kw("end") {
            let (name, sp) = self.expect_ident()?;
            if self.eat_sym("~") {
                if !body.is_empty() {
                    return Err(FrontendError::invalid(
                        sp,
                        format!("sampling of `{name}` after an assignment; samples must come first"),
                    ));
                }
                if self.scope.process.contains(&name) || self.scope.params.contains(&name) {
                    return Err(FrontendError::invalid(sp, format!("`{name}` is not a sample variable")));
                }
                if self.scope.samples.contains_key(&name) {
                    return Err(FrontendError::invalid(sp, format!("sample variable `{name}` sampled twice")));
                }
                check_not_reserved(&name, sp)?;
                let dist = self.dist()?;
                self.scope.samples.insert(name.clone(), (dist.arity(), dist.is_tuple()));
                samples.push(Spanned::new(Sampling { var: name, dist }, sp));
            } else if self.is_sym(":=") || self.is_sym("[") {
                if self.is_sym("[") {
                    return Err(FrontendError::invalid(
                        sp,
                        format!("assign to `{name}` without an index inside the loop"),
                    ));
                }
                self.bump();
                if self.scope.samples.contains_key(&name) {
                    return Err(FrontendError::invalid(sp, format!("cannot assign to sample variable `{name}`")));
                }
                if !self.scope.process.contains(&name) {
                    if self.scope.params.contains(&name) {
                        return Err(FrontendError::invalid(sp, format!("cannot assign to parameter `{name}`")));
                    }
                    return Err(FrontendError::invalid(sp, format!("process variable `{name}` has no initial value")));
                }
                if self.scope.assigned.contains(&name) {
                    return Err(FrontendError::invalid(sp, format!("`{name}` assigned twice in the loop body")));
                }
                let value = self.expr(Ctx::Body)?;
                self.scope.assigned.insert(name.clone());
                body.push(Spanned::new(Assign { var: name, value }, sp));
            } else {
                return Err(self.expected("`~` or `:=`"));
            }
            if !self.eat_sym(";") && !self.is_kw("end") {
                return Err(self.expected("`;`"));
            }
        }
        self.expect_kw("end")?;
        self.eat_sym(";");
        self.expect_eof()?;

        let end_pos = self.pos;
        self.pos = guard_start;
        let gspan = self.span();
        let guard = self.guard(Ctx::Guard)?;
        self.expect_sym(")")?;
        self.pos = end_pos;

        Ok(Program { params, init, guard: Spanned::new(guard, gspan), samples, body, pragmas })
    }

    fn skip_balanced(&mut self) -> PResult<()> {
        let mut depth = 1usize;
        loop {
            match self.peek() {
                Tok::Eof => return Err(self.expected("`)` closing the loop guard")),
                Tok::Sym("(") => depth += 1,
                Tok::Sym(")") => {
                    depth -= 1;
                    if depth == 0 {
                        self.bump();
                        return Ok(());
                    }
                }
                _ => {}
            }
            self.bump();
        }
    }

    fn param_decl(&mut self) -> PResult<Spanned<ParamDecl>> {
        self.expect_kw("param")?;
        let (name, sp) = self.expect_ident()?;
        check_not_reserved(&name, sp)?;
        let mut integer = false;
        if self.eat_sym(":") {
            if self.is_kw("int") {
                integer = true;
                self.bump();
            } else if self.is_kw("rat") {
                self.bump();
            } else {
                return Err(self.expected("`int` or `rat`"));
            }
        }
        let mut range = None;
        if self.is_kw("in") {
            self.bump();
            let lo_closed = if self.eat_sym("[") {
                true
            } else {
                self.expect_sym("(")?;
                false
            };
            let lo = self.endpoint()?;
            self.expect_sym(",")?;
            let hi = self.endpoint()?;
            let hi_closed = if self.eat_sym("]") {
                true
            } else {
                self.expect_sym(")")?;
                false
            };
            if let (Some(l), Some(h)) = (&lo, &hi) {
                if l > h {
                    return Err(FrontendError::invalid(sp, format!("empty range for parameter `{name}`")));
                }
            }
            range = Some((
                Endpoint { closed: lo_closed && lo.is_some(), value: lo },
                Endpoint { closed: hi_closed && hi.is_some(), value: hi },
            ));
        }
        self.expect_sym(";")?;
        Ok(Spanned::new(ParamDecl { name, integer, range }, sp))
    }

    fn endpoint(&mut self) -> PResult<Option<Rational>> {
        let neg = self.eat_sym("-");
        if self.is_kw("inf") {
            self.bump();
            return Ok(None);
        }
        let n = self.expect_int()?;
        let d = if self.eat_sym("/") { self.expect_int()? } else { BigInt::from(1) };
        if d.is_zero() {
            return Err(FrontendError::invalid(self.span(), "zero denominator in range"));
        }
        let r = Rational::new(n, d);
        Ok(Some(if neg { -r } else { r }))
    }

    fn init_assign(&mut self) -> PResult<Spanned<InitAssign>> {
        let (var, sp) = self.expect_ident()?;
        check_not_reserved(&var, sp)?;
        if self.scope.params.contains(&var) {
            return Err(FrontendError::invalid(sp, format!("cannot assign to parameter `{var}`")));
        }
        if !self.is_sym("[") {
            return Err(FrontendError::invalid(
                sp,
                format!("initial assignment needs a history index, e.g. `{var}[0] := ...`"),
            ));
        }
        self.bump();
        let k = self.expect_int()?;
        self.expect_sym("]")?;
        self.expect_sym(":=")?;
        let value = self.expr(Ctx::Init)?;
        self.expect_sym(";")?;
        let index = k
            .to_usize()
            .filter(|k| *k < 1 << 16)
            .ok_or_else(|| FrontendError::invalid(sp, "history index too large"))?;
        Ok(Spanned::new(InitAssign { var, index, value }, sp))
    }

    fn dist(&mut self) -> PResult<DistExpr> {
        let (name, sp) = self.expect_ident()?;
        match name.as_str() {
            "Bern" => {
                self.expect_sym("(")?;
                let prob = self.expr(Ctx::Dist)?;
                self.expect_sym(",")?;
                self.expect_sym("{")?;
                let v1 = self.signed_int()?;
                self.expect_sym(",")?;
                let v0 = self.signed_int()?;
                self.expect_sym("}")?;
                self.expect_sym(")")?;
                Ok(DistExpr::Bern { prob, v1, v0 })
            }
            "Unif" => {
                self.expect_sym("{")?;
                let mut vs = vec![self.signed_int()?];
                while self.eat_sym(",") {
                    vs.push(self.signed_int()?);
                }
                self.expect_sym("}")?;
                Ok(DistExpr::Unif(vs))
            }
            "Matches" => {
                self.expect_sym("(")?;
                let pattern = match self.peek().clone() {
                    Tok::Str(s) => {
                        self.bump();
                        s
                    }
                    _ => return Err(self.expected("pattern string")),
                };
                if pattern.is_empty() {
                    return Err(FrontendError::invalid(sp, "Matches needs a non-empty pattern"));
                }
                self.expect_sym(",")?;
                let alphabet = self.expr(Ctx::Dist)?;
                self.expect_sym(")")?;
                Ok(DistExpr::Matches { pattern, alphabet })
            }
            "Table" => {
                self.expect_sym("{")?;
                let mut rows = Vec::new();
                loop {
                    let rsp = self.expect_sym("(")?;
                    let mut v = vec![self.signed_int()?];
                    while self.eat_sym(",") {
                        v.push(self.signed_int()?);
                    }
                    self.expect_sym(")")?;
                    self.expect_sym("->")?;
                    let p = self.expr(Ctx::Dist)?;
                    if let Some((first, _)) = rows.first() {
                        let first: &Vec<BigInt> = first;
                        if first.len() != v.len() {
                            return Err(FrontendError::invalid(rsp, "table rows have different arities"));
                        }
                    }
                    rows.push((v, p));
                    if !self.eat_sym(",") {
                        break;
                    }
                }
                self.expect_sym("}")?;
                Ok(DistExpr::Table(rows))
            }
            _ => Err(FrontendError::invalid(
                sp,
                format!("unknown distribution `{name}` (expected Bern, Unif, Matches or Table)"),
            )),
        }
    }

    // ---- guards ----

    pub fn guard(&mut self, ctx: Ctx) -> PResult<Guard> {
        let lhs = self.guard_or(ctx)?;
        if self.eat_sym("->") {
            let rhs = self.guard(ctx)?;
            return Ok(Guard::Implies(Box::new(lhs), Box::new(rhs)));
        }
        Ok(lhs)
    }

    fn guard_or(&mut self, ctx: Ctx) -> PResult<Guard> {
        let mut g = self.guard_and(ctx)?;
        while self.eat_sym("||") {
            let r = self.guard_and(ctx)?;
            g = Guard::Or(Box::new(g), Box::new(r));
        }
        Ok(g)
    }

    fn guard_and(&mut self, ctx: Ctx) -> PResult<Guard> {
        let mut g = self.guard_not(ctx)?;
        while self.eat_sym("&&") {
            let r = self.guard_not(ctx)?;
            g = Guard::And(Box::new(g), Box::new(r));
        }
        Ok(g)
    }

    fn guard_not(&mut self, ctx: Ctx) -> PResult<Guard> {
        if self.eat_sym("!") {
            return Ok(Guard::Not(Box::new(self.guard_not(ctx)?)));
        }
        if self.is_kw("true") {
            self.bump();
            return Ok(Guard::True);
        }
        if self.is_kw("false") {
            self.bump();
            return Ok(Guard::False);
        }
        if self.is_sym("(") {
            let save = self.pos;
            self.bump();
            if let Ok(g) = self.guard(ctx) {
                if self.eat_sym(")") && !self.continues_expr() {
                    return Ok(g);
                }
            }
            self.pos = save;
        }
        self.comparison(ctx)
    }

    fn continues_expr(&self) -> bool {
        matches!(self.peek(), Tok::Sym("+" | "-" | "*" | "/" | "^" | "<" | "<=" | ">" | ">=" | "=" | "!="))
    }

    fn relop(&self) -> Option<RelOp> {
        Some(match self.peek() {
            Tok::Sym("<") => RelOp::Lt,
            Tok::Sym("<=") => RelOp::Le,
            Tok::Sym(">") => RelOp::Gt,
            Tok::Sym(">=") => RelOp::Ge,
            Tok::Sym("=") => RelOp::Eq,
            Tok::Sym("!=") => RelOp::Ne,
            _ => return None,
        })
    }

    fn comparison(&mut self, ctx: Ctx) -> PResult<Guard> {
        let mut lhs = self.expr(ctx)?;
        let Some(op) = self.relop() else {
            return Err(self.expected("comparison operator"));
        };
        self.bump();
        let mut rhs = self.expr(ctx)?;
        let mut g = Guard::Cmp(op, lhs, rhs.clone());
        while let Some(op) = self.relop() {
            self.bump();
            lhs = rhs;
            rhs = self.expr(ctx)?;
            g = Guard::And(Box::new(g), Box::new(Guard::Cmp(op, lhs, rhs.clone())));
        }
        Ok(g)
    }

    // ---- arithmetic ----

    pub fn expr(&mut self, ctx: Ctx) -> PResult<Expr> {
        let mut e = self.term(ctx)?;
        loop {
            if self.eat_sym("+") {
                e = Expr::add(e, self.term(ctx)?);
            } else if self.eat_sym("-") {
                e = Expr::sub(e, self.term(ctx)?);
            } else {
                return Ok(e);
            }
        }
    }

    fn term(&mut self, ctx: Ctx) -> PResult<Expr> {
        let mut e = self.unary(ctx)?;
        loop {
            if self.eat_sym("*") {
                e = Expr::mul(e, self.unary(ctx)?);
            } else if self.is_sym("/") {
                let sp = self.bump().span;
                let d = self.unary(ctx)?;
                let mut state = false;
                d.walk(&mut |x| {
                    state |= matches!(x, Expr::Process { .. } | Expr::Sample(_) | Expr::Proj(..) | Expr::Time)
                });
                if state {
                    return Err(FrontendError::invalid(sp, "division by a non-constant expression"));
                }
                if matches!(&d, Expr::Int(n) if n.is_zero()) {
                    return Err(FrontendError::invalid(sp, "division by zero"));
                }
                e = Expr::Div(Box::new(e), Box::new(d));
            } else {
                return Ok(e);
            }
        }
    }

    fn unary(&mut self, ctx: Ctx) -> PResult<Expr> {
        if self.eat_sym("-") {
            return Ok(Expr::Neg(Box::new(self.unary(ctx)?)));
        }
        let base = self.atom(ctx)?;
        if self.is_sym("^") {
            let sp = self.bump().span;
            let k = self.expect_int()?;
            let k = k
                .to_u32()
                .filter(|k| *k <= 64)
                .ok_or_else(|| FrontendError::invalid(sp, "exponent must be a natural number at most 64"))?;
            return Ok(Expr::Pow(Box::new(base), k));
        }
        Ok(base)
    }

    fn atom(&mut self, ctx: Ctx) -> PResult<Expr> {
        match self.peek().clone() {
            Tok::Int(n) => {
                self.bump();
                Ok(Expr::Int(n))
            }
            Tok::Sym("(") => {
                self.bump();
                let e = self.expr(ctx)?;
                self.expect_sym(")")?;
                Ok(e)
            }
            Tok::Ident(name) => {
                let sp = self.bump().span;
                if let Some(k) = projection_index(&name) {
                    if self.is_sym("(") {
                        return self.projection(k, sp, ctx);
                    }
                }
                if name == "t" {
                    return self.time(sp, ctx);
                }
                if self.is_sym("[") {
                    self.bump();
                    let neg = self.eat_sym("-");
                    let n = self.expect_int()?;
                    self.expect_sym("]")?;
                    if !neg || n.is_zero() {
                        return Err(FrontendError::invalid(
                            sp,
                            format!(
                                "history references look like `{name}[-1]`; use bare `{name}` for the current value"
                            ),
                        ));
                    }
                    let n = n.to_i64().filter(|n| *n < 1 << 16).unwrap_or(1 << 16);
                    return self.process_ref(&name, n, sp, ctx);
                }
                self.name_ref(&name, sp, ctx)
            }
            _ => Err(self.expected("expression")),
        }
    }

    fn time(&mut self, sp: Span, ctx: Ctx) -> PResult<Expr> {
        match ctx {
            Ctx::Hint(HintScope::EveryIteration) => {
                Err(FrontendError::invalid(sp, "`t` may not appear in an every-iteration hint"))
            }
            Ctx::Hint(_) => Ok(Expr::Time),
            _ => Err(FrontendError::invalid(sp, "`t` is reserved for hints")),
        }
    }

    fn projection(&mut self, k: u32, sp: Span, ctx: Ctx) -> PResult<Expr> {
        self.expect_sym("(")?;
        let (s, ssp) = self.expect_ident()?;
        self.expect_sym(")")?;
        let Some(&(arity, tuple)) = self.scope.samples.get(&s) else {
            if self.scope.process.contains(&s) || self.scope.params.contains(&s) {
                return Err(FrontendError::invalid(ssp, format!("projection applied to non-sample `{s}`")));
            }
            return Err(FrontendError::Undeclared { name: s, line: ssp.line, col: ssp.col });
        };
        if !tuple {
            return Err(FrontendError::invalid(sp, format!("projection of scalar sample `{s}`")));
        }
        if k == 0 || k as usize > arity {
            return Err(FrontendError::invalid(
                sp,
                format!("projection pi_{k} out of range for `{s}` of arity {arity}"),
            ));
        }
        let e = self.sample_ref(&s, ssp, ctx)?;
        Ok(Expr::Proj(k, Box::new(e)))
    }

    fn name_ref(&mut self, name: &str, sp: Span, ctx: Ctx) -> PResult<Expr> {
        if self.scope.params.contains(name) {
            return Ok(Expr::Param(name.to_string()));
        }
        if self.scope.process.contains(name) {
            let offset = match ctx {
                Ctx::Body if !self.scope.assigned.contains(name) => 1,
                _ => 0,
            };
            return self.process_ref(name, offset, sp, ctx);
        }
        if let Some(&(_, tuple)) = self.scope.samples.get(name) {
            if tuple {
                return Err(FrontendError::invalid(
                    sp,
                    format!("tuple-valued sample `{name}` needs a projection, e.g. pi_1({name})"),
                ));
            }
            return self.sample_ref(name, sp, ctx);
        }
        if self.scope.pending_samples.contains(name) {
            return Err(FrontendError::SampleBeforeSampling { name: name.to_string(), line: sp.line, col: sp.col });
        }
        Err(FrontendError::Undeclared { name: name.to_string(), line: sp.line, col: sp.col })
    }

    fn process_ref(&mut self, name: &str, depth: i64, sp: Span, ctx: Ctx) -> PResult<Expr> {
        if !self.scope.process.contains(name) {
            if self.scope.samples.contains_key(name) {
                return Err(FrontendError::invalid(sp, format!("sample variable `{name}` has no history")));
            }
            return Err(FrontendError::Undeclared { name: name.to_string(), line: sp.line, col: sp.col });
        }
        let allowed = match ctx {
            Ctx::Init => return Err(FrontendError::invalid(sp, "initial values may only mention parameters")),
            Ctx::Dist => {
                return Err(FrontendError::invalid(sp, "distribution parameters may not depend on the program state"))
            }
            Ctx::Body | Ctx::Hint(HintScope::AtExit) | Ctx::Hint(HintScope::Implication) => self.scope.init_len,
            _ => self.scope.init_len.saturating_sub(1),
        } as i64;
        if depth > allowed {
            return Err(FrontendError::HistoryDepth {
                name: name.to_string(),
                depth,
                have: self.scope.init_len,
                line: sp.line,
                col: sp.col,
            });
        }
        Ok(Expr::Process { name: name.to_string(), offset: -depth })
    }

    fn sample_ref(&mut self, name: &str, sp: Span, ctx: Ctx) -> PResult<Expr> {
        match ctx {
            Ctx::Dist => Err(FrontendError::invalid(sp, "distribution parameters may not depend on the program state")),
            Ctx::Hint(_) => {
                Err(FrontendError::invalid(sp, format!("sample variable `{name}` may not appear in a hint")))
            }
            _ => Ok(Expr::Sample(name.to_string())),
        }
    }
}

/// `pi_3` -> 3.
pub(crate) fn projection_index(name: &str) -> Option<u32> {
    let digits = name.strip_prefix("pi_")?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

fn check_not_reserved(name: &str, sp: Span) -> PResult<()> {
    if RESERVED.contains(&name) || projection_index(name).is_some() {
        return Err(FrontendError::invalid(sp, format!("`{name}` is a reserved word")));
    }
    Ok(())
}

/// Every process variable must be initialized at indices `0..m` for one
/// common `m`. Returns `m`.
fn check_init(init: &[Spanned<InitAssign>], while_span: Span) -> PResult<usize> {
    if init.is_empty() {
        return Err(FrontendError::invalid(while_span, "the program initializes no process variable"));
    }
    let mut by_var: BTreeMap<&str, Vec<&Spanned<InitAssign>>> = BTreeMap::new();
    for i in init {
        let slot = by_var.entry(&i.node.var).or_default();
        if slot.iter().any(|j| j.node.index == i.node.index) {
            return Err(FrontendError::invalid(
                i.span,
                format!("`{}[{}]` initialized twice", i.node.var, i.node.index),
            ));
        }
        slot.push(i);
    }
    let mut m: Option<(usize, &str)> = None;
    for (var, items) in &by_var {
        let n = items.len();
        for k in 0..n {
            if !items.iter().any(|i| i.node.index == k) {
                return Err(FrontendError::invalid(items[0].span, format!("missing initial value `{var}[{k}]`")));
            }
        }
        match m {
            None => m = Some((n, var)),
            Some((n0, v0)) if n0 != n => {
                let msg = format!("`{var}` has {n} initial values but `{v0}` has {n0}");
                return Err(FrontendError::invalid(
                    items[0].span,
                    msg + "; all variables need the same history length",
                ));
            }
            _ => {}
        }
    }
    Ok(m.map(|(n, _)| n).unwrap_or(0))
}
