//! Canonical concrete syntax. `parse_program(&print_program(p)) == p`.

use std::fmt::{self, Display, Write};

use super::ast::*;
use crate::symbolic::Rational;

fn expr_prec(e: &Expr) -> u8 {
    match e {
        Expr::Add(..) | Expr::Sub(..) => 1,
        Expr::Mul(..) | Expr::Div(..) => 2,
        Expr::Neg(_) => 3,
        Expr::Pow(..) => 4,
        _ => 5,
    }
}

fn write_expr(f: &mut fmt::Formatter<'_>, e: &Expr, min: u8) -> fmt::Result {
    let p = expr_prec(e);
    if p < min {
        f.write_char('(')?;
        write_expr(f, e, 0)?;
        return f.write_char(')');
    }
    match e {
        Expr::Int(n) => write!(f, "{n}"),
        Expr::Param(s) | Expr::Sample(s) => f.write_str(s),
        Expr::Process { name, offset: 0 } => f.write_str(name),
        Expr::Process { name, offset } => write!(f, "{name}[{offset}]"),
        Expr::Proj(k, s) => {
            write!(f, "pi_{k}(")?;
            write_expr(f, s, 0)?;
            f.write_char(')')
        }
        Expr::Time => f.write_char('t'),
        Expr::Add(a, b) | Expr::Sub(a, b) => {
            write_expr(f, a, 1)?;
            f.write_str(if matches!(e, Expr::Add(..)) { " + " } else { " - " })?;
            write_expr(f, b, 2)
        }
        Expr::Mul(a, b) | Expr::Div(a, b) => {
            write_expr(f, a, 2)?;
            f.write_str(if matches!(e, Expr::Mul(..)) { "*" } else { "/" })?;
            write_expr(f, b, 3)
        }
        Expr::Neg(a) => {
            f.write_char('-')?;
            write_expr(f, a, 3)
        }
        Expr::Pow(a, k) => {
            write_expr(f, a, 5)?;
            write!(f, "^{k}")
        }
    }
}

impl Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_expr(f, self, 0)
    }
}

fn guard_prec(g: &Guard) -> u8 {
    match g {
        Guard::Implies(..) => 0,
        Guard::Or(..) => 1,
        Guard::And(..) => 2,
        Guard::Not(_) => 3,
        _ => 4,
    }
}

fn write_guard(f: &mut fmt::Formatter<'_>, g: &Guard, min: u8) -> fmt::Result {
    if guard_prec(g) < min {
        f.write_char('(')?;
        write_guard(f, g, 0)?;
        return f.write_char(')');
    }
    match g {
        Guard::True => f.write_str("true"),
        Guard::False => f.write_str("false"),
        Guard::Cmp(op, a, b) => write!(f, "{a} {} {b}", op.symbol()),
        Guard::Implies(a, b) => {
            write_guard(f, a, 1)?;
            f.write_str(" -> ")?;
            write_guard(f, b, 0)
        }
        Guard::Or(a, b) => {
            write_guard(f, a, 1)?;
            f.write_str(" || ")?;
            write_guard(f, b, 2)
        }
        Guard::And(a, b) => {
            write_guard(f, a, 2)?;
            f.write_str(" && ")?;
            write_guard(f, b, 3)
        }
        Guard::Not(a) => {
            f.write_char('!')?;
            // Comparisons are bracketed for readability.
            write_guard(f, a, if matches!(**a, Guard::Cmp(..)) { 5 } else { 3 })
        }
    }
}

impl Display for Guard {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_guard(f, self, 0)
    }
}

impl Display for DistExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &[num_bigint::BigInt]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ");
        match self {
            DistExpr::Bern { prob, v1, v0 } => write!(f, "Bern({prob}, {{{v1}, {v0}}})"),
            DistExpr::Unif(vs) => write!(f, "Unif{{{}}}", join(vs)),
            DistExpr::Matches { pattern, alphabet } => write!(f, "Matches(\"{pattern}\", {alphabet})"),
            DistExpr::Table(rows) => {
                f.write_str("Table{")?;
                for (n, (v, p)) in rows.iter().enumerate() {
                    if n > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "({}) -> {p}", join(v))?;
                }
                f.write_char('}')
            }
        }
    }
}

fn fmt_rat(r: &Rational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

impl Display for ParamDecl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "param {}", self.name)?;
        if self.integer {
            f.write_str(": int")?;
        }
        if let Some((lo, hi)) = &self.range {
            f.write_str(" in ")?;
            f.write_char(if lo.closed { '[' } else { '(' })?;
            match &lo.value {
                Some(v) => f.write_str(&fmt_rat(v))?,
                None => f.write_str("-inf")?,
            }
            f.write_str(", ")?;
            match &hi.value {
                Some(v) => f.write_str(&fmt_rat(v))?,
                None => f.write_str("inf")?,
            }
            f.write_char(if hi.closed { ']' } else { ')' })?;
        }
        f.write_char(';')
    }
}

impl Display for Hint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.scope.keyword(), self.formula)
    }
}

impl Display for Pragmas {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(s) = &self.seed {
            writeln!(f, "#seed: {}", s.node)?;
        }
        for h in &self.hints {
            writeln!(f, "#hint {}", h.node)?;
        }
        if let Some(v) = &self.variant {
            writeln!(f, "#variant: {}", v.node)?;
        }
        if let Some(s) = &self.solve_for {
            writeln!(f, "#solve-for: {}", s.node)?;
        }
        for u in &self.use_facts {
            writeln!(f, "#use-fact: {}", u.node)?;
        }
        if self.assume_ost {
            writeln!(f, "#assume-ost")?;
        }
        if let Some(s) = &self.sim_params {
            writeln!(f, "#sim-params: {}", s.node)?;
        }
        Ok(())
    }
}

impl Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.pragmas)?;
        for p in &self.params {
            writeln!(f, "{}", p.node)?;
        }
        for i in &self.init {
            writeln!(f, "{}[{}] := {};", i.node.var, i.node.index, i.node.value)?;
        }
        writeln!(f, "while ({}) do", self.guard.node)?;
        for s in &self.samples {
            writeln!(f, "    {} ~ {};", s.node.var, s.node.dist)?;
        }
        for a in &self.body {
            writeln!(f, "    {} := {};", a.node.var, a.node.value)?;
        }
        writeln!(f, "end")
    }
}

pub fn print_program(p: &Program) -> String {
    p.to_string()
}
