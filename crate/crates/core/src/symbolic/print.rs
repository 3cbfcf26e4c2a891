use std::fmt::{self, Write};

use num_traits::{One, Signed};

use super::poly::{Atom, Formula, Monomial, Poly, Rational};

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return f.write_str("0");
        }
        for (n, (m, c)) in self.terms().enumerate() {
            let neg = c.is_negative();
            match (n, neg) {
                (0, true) => f.write_str("-")?,
                (0, false) => {}
                (_, true) => f.write_str(" - ")?,
                (_, false) => f.write_str(" + ")?,
            }
            f.write_str(&term_string(m, &c.abs()))?;
        }
        Ok(())
    }
}

/// Render `c * m` for a non-negative coefficient `c`.
fn term_string(m: &Monomial, c: &Rational) -> String {
    let mut num: Vec<String> = Vec::new();
    let mut den: Vec<String> = Vec::new();
    let numer = c.numer().clone();
    let denom = c.denom().clone();
    if !numer.is_one() {
        num.push(numer.to_string());
    }
    if !denom.is_one() {
        den.push(denom.to_string());
    }
    for (p, k) in m.params() {
        let s = power(p, k.unsigned_abs());
        if *k > 0 {
            num.push(s);
        } else {
            den.push(s);
        }
    }
    for (a, k) in m.atoms() {
        num.push(power(&a.to_string(), *k));
    }
    let mut out = if num.is_empty() { "1".to_string() } else { num.join("*") };
    match den.len() {
        0 => {}
        1 => {
            out.push('/');
            out.push_str(&den[0]);
        }
        _ => {
            let _ = write!(out, "/({})", den.join("*"));
        }
    }
    out
}

fn power(base: &str, k: u32) -> String {
    if k == 1 {
        base.to_string()
    } else {
        format!("{base}^{k}")
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&term_string(self, &Rational::one()))
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Atom::Process { name, index } => write!(f, "{name}[{index}]"),
            Atom::Sample { name, index, proj: None } => write!(f, "{name}[{index}]"),
            Atom::Sample { name, index, proj: Some(k) } => write!(f, "pi_{k}({name}[{index}])"),
            Atom::Time(v) => write!(f, "{v}"),
            Atom::Sum(s) => write!(f, "sum({}={}..{}, {})", s.var, s.lo, s.hi, s.body),
            Atom::CondExp(c) => write!(f, "E[{} | F({})]", c.body, c.filtration),
            Atom::Exp(body) => match body.as_atom() {
                Some(Atom::Indicator(fm)) => write!(f, "Pr[{fm}]"),
                _ => write!(f, "E[{body}]"),
            },
            Atom::Indicator(fm) => write!(f, "[{fm}]"),
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::True => f.write_str("true"),
            Formula::False => f.write_str("false"),
            Formula::Cmp(op, a, b) => write!(f, "{a} {} {b}", op.symbol()),
            Formula::And(v) => join(f, v, " && "),
            Formula::Or(v) => join(f, v, " || "),
            Formula::Not(x) => write!(f, "!({x})"),
        }
    }
}

fn join(f: &mut fmt::Formatter<'_>, parts: &[Formula], sep: &str) -> fmt::Result {
    for (n, p) in parts.iter().enumerate() {
        if n > 0 {
            f.write_str(sep)?;
        }
        match p {
            Formula::And(_) | Formula::Or(_) => write!(f, "({p})")?,
            _ => write!(f, "{p}")?,
        }
    }
    Ok(())
}

/// Parenthesized s-expression dump, for debugging canonical structure.
pub fn sexpr(p: &Poly) -> String {
    let mut out = String::from("(+");
    for (m, c) in p.terms() {
        let _ = write!(out, " (* {c}");
        for (name, k) in m.params() {
            let _ = write!(out, " (^ {name} {k})");
        }
        for (a, k) in m.atoms() {
            let _ = write!(out, " (^ {} {k})", atom_sexpr(a));
        }
        out.push(')');
    }
    out.push(')');
    out
}

fn atom_sexpr(a: &Atom) -> String {
    match a {
        Atom::Process { name, index } => format!("(proc {name} {index})"),
        Atom::Sample { name, index, proj } => match proj {
            Some(k) => format!("(sample {name} {index} {k})"),
            None => format!("(sample {name} {index})"),
        },
        Atom::Time(v) => format!("(time {v})"),
        Atom::Sum(s) => format!("(sum {} {} {} {})", s.var, s.lo, s.hi, sexpr(&s.body)),
        Atom::CondExp(c) => format!("(condexp {} {})", sexpr(&c.body), c.filtration),
        Atom::Exp(b) => format!("(exp {})", sexpr(b)),
        Atom::Indicator(fm) => format!("(ind {fm})"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbolic::index::{IndexExpr, TimeVar};
    use crate::symbolic::poly::{int, rat};

    #[test]
    fn prints_canonical_order() {
        let x = Poly::process("x", IndexExpr::named("i", 0));
        let e = x - &Poly::param("p") * &Poly::time(TimeVar::named("i"));
        assert_eq!(e.to_string(), "x[i] - p*i");
    }

    #[test]
    fn prints_negative_parameter_powers_as_division() {
        let inv = Poly::monomial(Monomial::from_param("L", -1));
        assert_eq!(inv.to_string(), "1/L");
        let e = Poly::constant(rat(3, 2)) * Poly::process("x", IndexExpr::abs(0));
        assert_eq!(e.to_string(), "3*x[0]/2");
    }

    #[test]
    fn prints_probability_of_indicator() {
        let f = Formula::eq(Poly::process("x", IndexExpr::tau(0)), Poly::param("b"));
        let pr = Poly::exp(Poly::indicator(f));
        assert_eq!(pr.to_string(), "Pr[x[tau] = b]");
        assert_eq!((pr.scale(&int(-2)) + Poly::one()).to_string(), "-2*Pr[x[tau] = b] + 1");
    }
}
