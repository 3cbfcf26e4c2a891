//! The program DSL: lexing, parsing, validation and printing.

pub mod ast;
pub mod lexer;
mod parser;
pub mod printer;

use thiserror::Error;

pub use ast::*;
pub use printer::print_program;

use lexer::{lex_at, Tok};
use parser::{Ctx, Parser, Scope};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FrontendError {
    #[error("{line}:{col}: syntax error: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("{line}:{col}: undeclared identifier `{name}`")]
    Undeclared { name: String, line: usize, col: usize },
    #[error("{line}:{col}: sample variable `{name}` used before sampling")]
    SampleBeforeSampling { name: String, line: usize, col: usize },
    #[error("{line}:{col}: history depth exceeds init: `{name}[-{depth}]` but only {have} initial value(s)")]
    HistoryDepth { name: String, depth: i64, have: usize, line: usize, col: usize },
    #[error("{line}:{col}: comparison or logical operator in seed expression")]
    GuardInSeed { line: usize, col: usize },
    #[error("{line}:{col}: {msg}")]
    Invalid { line: usize, col: usize, msg: String },
}

impl FrontendError {
    pub fn syntax(span: Span, msg: impl Into<String>) -> Self {
        FrontendError::Syntax { line: span.line, col: span.col, msg: msg.into() }
    }

    pub fn invalid(span: Span, msg: impl Into<String>) -> Self {
        FrontendError::Invalid { line: span.line, col: span.col, msg: msg.into() }
    }

    pub fn span(&self) -> Span {
        let (line, col) = match self {
            FrontendError::Syntax { line, col, .. }
            | FrontendError::Undeclared { line, col, .. }
            | FrontendError::SampleBeforeSampling { line, col, .. }
            | FrontendError::HistoryDepth { line, col, .. }
            | FrontendError::GuardInSeed { line, col }
            | FrontendError::Invalid { line, col, .. } => (*line, *col),
        };
        Span { line, col }
    }
}

const PRAGMAS: &[&str] = &["seed", "hint", "variant", "solve-for", "use-fact", "assume-ost", "sim-params"];

/// Pull `#keyword ...` lines out of the source, leaving blank lines behind.
fn split_pragmas(text: &str) -> Result<(String, Pragmas), FrontendError> {
    let mut pragmas = Pragmas::default();
    let mut code = String::with_capacity(text.len());
    for (n, line) in text.lines().enumerate() {
        let indent = line.len() - line.trim_start().len();
        let trimmed = line.trim_start();
        let Some(rest) = trimmed.strip_prefix('#') else {
            code.push_str(line);
            code.push('\n');
            continue;
        };
        code.push('\n');
        if !rest.starts_with(|c: char| c.is_ascii_alphabetic()) {
            continue;
        }
        let kw_len = rest.find(|c: char| !(c.is_ascii_alphanumeric() || c == '-')).unwrap_or(rest.len());
        let kw = &rest[..kw_len];
        let span = Span { line: n + 1, col: indent + 1 };
        if !PRAGMAS.contains(&kw) {
            return Err(FrontendError::invalid(span, format!("unknown pragma `#{kw}`")));
        }
        let arg = rest[kw_len..].trim_start();
        let arg = arg.strip_prefix(':').unwrap_or(arg).trim();
        let offset = arg.as_ptr() as usize - line.as_ptr() as usize;
        let arg_col = line[..offset].chars().count() + 1;
        let value = Spanned::new(arg.to_string(), Span { line: n + 1, col: arg_col });
        let need_arg = |v: &Spanned<String>| {
            if v.node.is_empty() {
                Err(FrontendError::invalid(span, format!("pragma `#{kw}` needs an argument")))
            } else {
                Ok(())
            }
        };
        let once = |slot: &Option<Spanned<String>>| {
            if slot.is_some() {
                Err(FrontendError::invalid(span, format!("pragma `#{kw}` given twice")))
            } else {
                Ok(())
            }
        };
        match kw {
            "seed" => {
                need_arg(&value)?;
                once(&pragmas.seed)?;
                pragmas.seed = Some(value);
            }
            "hint" => {
                need_arg(&value)?;
                pragmas.hints.push(value);
            }
            "variant" => {
                need_arg(&value)?;
                once(&pragmas.variant)?;
                pragmas.variant = Some(value);
            }
            "solve-for" => {
                need_arg(&value)?;
                once(&pragmas.solve_for)?;
                pragmas.solve_for = Some(value);
            }
            "use-fact" => {
                need_arg(&value)?;
                pragmas.use_facts.push(value);
            }
            "sim-params" => {
                need_arg(&value)?;
                once(&pragmas.sim_params)?;
                pragmas.sim_params = Some(value);
            }
            _ => {
                if !value.node.is_empty() {
                    return Err(FrontendError::invalid(span, "pragma `#assume-ost` takes no argument"));
                }
                pragmas.assume_ost = true;
            }
        }
    }
    Ok((code, pragmas))
}

/// Parse and validate a program.
pub fn parse_program(text: &str) -> Result<Program, FrontendError> {
    let (code, pragmas) = split_pragmas(text)?;
    let toks = lex_at(&code, 1, 1)?;
    Parser::for_program(toks).program(pragmas)
}

fn sub_parser(text: &str, program: &Program, at: Span) -> Result<Parser, FrontendError> {
    Ok(Parser::new(lex_at(text, at.line, at.col)?, Scope::of_program(program)))
}

/// Parse a seed expression over `program`'s variables.
pub fn parse_seed(text: &str, program: &Program) -> Result<Expr, FrontendError> {
    parse_seed_at(text, program, Span { line: 1, col: 1 })
}

pub fn parse_seed_at(text: &str, program: &Program, at: Span) -> Result<Expr, FrontendError> {
    parse_arith(text, program, at, Ctx::Seed)
}

fn parse_arith(text: &str, program: &Program, at: Span, ctx: Ctx) -> Result<Expr, FrontendError> {
    let mut p = sub_parser(text, program, at)?;
    let e = p.expr(ctx)?;
    if let Tok::Sym("<" | "<=" | ">" | ">=" | "=" | "!=" | "&&" | "||" | "!" | "->") = p.peek() {
        let sp = p.span();
        return Err(FrontendError::GuardInSeed { line: sp.line, col: sp.col });
    }
    p.expect_eof()?;
    Ok(e)
}

/// Parse one or more hints, separated by newlines or `;`. Each hint is
/// `at-exit: F`, `every: F` or `implication: A -> B`; without a scope
/// keyword a hint is taken to hold at exit.
pub fn parse_hints(text: &str, program: &Program) -> Result<Vec<Hint>, FrontendError> {
    parse_hints_at(text, program, Span { line: 1, col: 1 })
}

pub fn parse_hints_at(text: &str, program: &Program, at: Span) -> Result<Vec<Hint>, FrontendError> {
    let mut out = Vec::new();
    for (ln, line) in text.split('\n').enumerate() {
        let mut col = if ln == 0 { at.col } else { 1 };
        for piece in line.split(';') {
            let start = col + (piece.len() - piece.trim_start().len());
            col += piece.chars().count() + 1;
            let piece = piece.trim();
            if piece.is_empty() {
                continue;
            }
            let span = Span { line: at.line + ln, col: start };
            out.push(parse_one_hint(piece, program, span)?);
        }
    }
    Ok(out)
}

fn parse_one_hint(text: &str, program: &Program, at: Span) -> Result<Hint, FrontendError> {
    let scopes = [
        ("at-exit:", HintScope::AtExit),
        ("every:", HintScope::EveryIteration),
        ("implication:", HintScope::Implication),
    ];
    let (scope, body, offset) = scopes
        .iter()
        .find_map(|(kw, sc)| {
            text.strip_prefix(kw).map(|rest| {
                let body = rest.trim_start();
                (*sc, body, text.len() - body.len())
            })
        })
        .unwrap_or((HintScope::AtExit, text, 0));
    let body_at = Span { line: at.line, col: at.col + offset };
    let mut p = sub_parser(body, program, body_at)?;
    let formula = p.guard(Ctx::Hint(scope))?;
    p.expect_eof()?;
    if scope == HintScope::Implication && !matches!(formula, Guard::Implies(..)) {
        return Err(FrontendError::invalid(at, "an implication hint must have the form `A -> B`"));
    }
    Ok(Hint { scope, formula })
}

/// A bounded variant `v, K[, eps]`.
#[derive(Clone, Debug, PartialEq)]
pub struct VariantSpec {
    pub expr: Expr,
    pub bound: Expr,
    pub eps: Option<Expr>,
}

pub fn parse_variant(text: &str, program: &Program) -> Result<VariantSpec, FrontendError> {
    parse_variant_at(text, program, Span { line: 1, col: 1 })
}

pub fn parse_variant_at(text: &str, program: &Program, at: Span) -> Result<VariantSpec, FrontendError> {
    let mut p = sub_parser(text, program, at)?;
    let expr = p.expr(Ctx::Variant)?;
    p.expect_sym(",")?;
    let bound = p.expr(Ctx::Variant)?;
    let eps = if p.eat_sym(",") { Some(p.expr(Ctx::Variant)?) } else { None };
    p.expect_eof()?;
    for e in std::iter::once(&bound).chain(eps.iter()) {
        let mut state = false;
        e.walk(&mut |x| {
            state |= !matches!(
                x,
                Expr::Int(_)
                    | Expr::Param(_)
                    | Expr::Add(..)
                    | Expr::Sub(..)
                    | Expr::Mul(..)
                    | Expr::Div(..)
                    | Expr::Neg(_)
                    | Expr::Pow(..)
            )
        });
        if state {
            return Err(FrontendError::invalid(at, "variant bound and epsilon must only mention parameters"));
        }
    }
    Ok(VariantSpec { expr, bound, eps })
}

/// Parse an arithmetic expression over the program's current state (process
/// values at the current index, samples, parameters).
pub fn parse_state_expr(text: &str, program: &Program) -> Result<Expr, FrontendError> {
    parse_arith(text, program, Span { line: 1, col: 1 }, Ctx::Variant)
}
