//! Raw (non-canonical) expression trees and their normalization into [`Poly`].

use num_traits::{One, Zero};

use super::index::{IndexExpr, TimeVar};
use super::poly::{Atom, CmpOp, CondExpNode, Formula, Monomial, Poly, Rational, SumNode};
use super::ratfn::RatFn;
use super::SymbolicError;

pub const DEFAULT_DEGREE_CAP: u32 = 64;

#[derive(Clone, Debug, PartialEq)]
pub enum Term {
    Num(Rational),
    Param(String),
    Time(TimeVar),
    Process(String, IndexExpr),
    Sample(String, IndexExpr, Option<u32>),
    Sum { var: String, lo: IndexExpr, hi: IndexExpr, body: Box<Term> },
    CondExp { body: Box<Term>, filtration: IndexExpr },
    Exp(Box<Term>),
    Indicator(Box<TermFormula>),
    Add(Vec<Term>),
    Mul(Vec<Term>),
    Neg(Box<Term>),
    Pow(Box<Term>, u32),
    Div(Box<Term>, Box<Term>),
}

#[derive(Clone, Debug, PartialEq)]
pub enum TermFormula {
    True,
    False,
    Cmp(CmpOp, Term, Term),
    And(Vec<TermFormula>),
    Or(Vec<TermFormula>),
    Not(Box<TermFormula>),
}

#[allow(clippy::should_implement_trait)]
impl Term {
    pub fn int(n: i64) -> Term {
        Term::Num(super::poly::int(n))
    }

    pub fn add(a: Term, b: Term) -> Term {
        Term::Add(vec![a, b])
    }

    pub fn mul(a: Term, b: Term) -> Term {
        Term::Mul(vec![a, b])
    }

    pub fn sub(a: Term, b: Term) -> Term {
        Term::Add(vec![a, Term::Neg(Box::new(b))])
    }
}

/// Normalize with the default degree cap.
pub fn normalize(t: &Term) -> Result<Poly, SymbolicError> {
    normalize_capped(t, DEFAULT_DEGREE_CAP)
}

pub fn normalize_capped(t: &Term, cap: u32) -> Result<Poly, SymbolicError> {
    let p = Normalizer { cap }.poly(t)?;
    check_cap(&p, cap)?;
    Ok(p)
}

/// Normalize a term that may divide by parameter polynomials.
pub fn normalize_ratfn(t: &Term) -> Result<RatFn, SymbolicError> {
    Normalizer { cap: DEFAULT_DEGREE_CAP }.ratfn(t)
}

fn check_cap(p: &Poly, cap: u32) -> Result<(), SymbolicError> {
    let got = p.max_exponent();
    if got > cap {
        Err(SymbolicError::DegreeCap { cap, got })
    } else {
        Ok(())
    }
}

struct Normalizer {
    cap: u32,
}

impl Normalizer {
    fn poly(&self, t: &Term) -> Result<Poly, SymbolicError> {
        Ok(match t {
            Term::Num(r) => Poly::constant(r.clone()),
            Term::Param(p) => Poly::param(p),
            Term::Time(v) => Poly::time(v.clone()),
            Term::Process(n, ix) => Poly::process(n, ix.clone()),
            Term::Sample(n, ix, k) => Poly::sample(n, ix.clone(), *k),
            Term::Sum { var, lo, hi, body } => {
                let body = self.poly(body)?;
                if body.is_zero() {
                    Poly::zero()
                } else {
                    Poly::atom(Atom::Sum(Box::new(SumNode { var: var.clone(), lo: lo.clone(), hi: hi.clone(), body })))
                }
            }
            Term::CondExp { body, filtration } => Poly::atom(Atom::CondExp(Box::new(CondExpNode {
                body: self.poly(body)?,
                filtration: filtration.clone(),
            }))),
            Term::Exp(body) => Poly::exp(self.poly(body)?),
            Term::Indicator(f) => Poly::indicator(self.formula(f)?),
            Term::Add(v) => {
                let mut acc = Poly::zero();
                for x in v {
                    acc = acc + self.poly(x)?;
                }
                acc
            }
            Term::Mul(v) => {
                let mut acc = Poly::one();
                for x in v {
                    acc = &acc * &self.poly(x)?;
                    check_cap(&acc, self.cap)?;
                }
                acc
            }
            Term::Neg(x) => -self.poly(x)?,
            Term::Pow(x, k) => {
                if *k > self.cap {
                    return Err(SymbolicError::DegreeCap { cap: self.cap, got: *k });
                }
                let base = self.poly(x)?;
                check_cap(&base, self.cap)?;
                if base.max_exponent().saturating_mul(*k) > self.cap {
                    return Err(SymbolicError::DegreeCap {
                        cap: self.cap,
                        got: base.max_exponent().saturating_mul(*k),
                    });
                }
                base.pow(*k)
            }
            Term::Div(a, b) => {
                let num = self.poly(a)?;
                let den = self.poly(b)?;
                divide_by_monomial(&num, &den)?
            }
        })
    }

    fn ratfn(&self, t: &Term) -> Result<RatFn, SymbolicError> {
        Ok(match t {
            Term::Add(v) => {
                let mut acc = RatFn::zero();
                for x in v {
                    acc = acc.add(&self.ratfn(x)?);
                }
                acc
            }
            Term::Mul(v) => {
                let mut acc = RatFn::one();
                for x in v {
                    acc = acc.mul(&self.ratfn(x)?);
                }
                acc
            }
            Term::Neg(x) => self.ratfn(x)?.neg(),
            Term::Pow(x, k) => {
                let base = self.ratfn(x)?;
                let mut acc = RatFn::one();
                for _ in 0..*k {
                    acc = acc.mul(&base);
                }
                acc
            }
            Term::Div(a, b) => self.ratfn(a)?.div(&self.ratfn(b)?)?,
            other => RatFn::from_poly(self.poly(other)?),
        })
    }

    fn formula(&self, f: &TermFormula) -> Result<Formula, SymbolicError> {
        Ok(match f {
            TermFormula::True => Formula::True,
            TermFormula::False => Formula::False,
            TermFormula::Cmp(op, a, b) => Formula::Cmp(*op, self.poly(a)?, self.poly(b)?),
            TermFormula::And(v) => Formula::And(v.iter().map(|x| self.formula(x)).collect::<Result<_, _>>()?),
            TermFormula::Or(v) => Formula::Or(v.iter().map(|x| self.formula(x)).collect::<Result<_, _>>()?),
            TermFormula::Not(x) => Formula::Not(Box::new(self.formula(x)?)),
        })
    }
}

/// Divide by a nonzero constant or by a single parameter monomial.
pub fn divide_by_monomial(num: &Poly, den: &Poly) -> Result<Poly, SymbolicError> {
    if den.is_zero() {
        return Err(SymbolicError::DivisionByZero);
    }
    if den.len() == 1 {
        let (m, c) = den.terms().next().unwrap();
        if m.is_param_only() {
            let inv = Rational::one() / c;
            let inv_m = Monomial::one().div_params(m);
            return Ok(num.mul_monomial(&inv_m, &inv));
        }
    }
    Err(SymbolicError::NonPolynomialDivision(den.to_string()))
}

/// Rebuild a term tree from a canonical polynomial.
pub fn to_term(p: &Poly) -> Term {
    let mut terms = Vec::new();
    for (m, c) in p.terms() {
        let mut factors = vec![Term::Num(c.clone())];
        for (name, k) in m.params() {
            let base = Term::Param(name.clone());
            if *k > 0 {
                factors.push(Term::Pow(Box::new(base), *k as u32));
            } else {
                factors.push(Term::Div(
                    Box::new(Term::Num(Rational::one())),
                    Box::new(Term::Pow(Box::new(base), k.unsigned_abs())),
                ));
            }
        }
        for (a, k) in m.atoms() {
            factors.push(Term::Pow(Box::new(atom_term(a)), *k));
        }
        terms.push(Term::Mul(factors));
    }
    if terms.is_empty() {
        Term::Num(Rational::zero())
    } else {
        Term::Add(terms)
    }
}

fn atom_term(a: &Atom) -> Term {
    match a {
        Atom::Process { name, index } => Term::Process(name.clone(), index.clone()),
        Atom::Sample { name, index, proj } => Term::Sample(name.clone(), index.clone(), *proj),
        Atom::Time(v) => Term::Time(v.clone()),
        Atom::Sum(s) => {
            Term::Sum { var: s.var.clone(), lo: s.lo.clone(), hi: s.hi.clone(), body: Box::new(to_term(&s.body)) }
        }
        Atom::CondExp(c) => Term::CondExp { body: Box::new(to_term(&c.body)), filtration: c.filtration.clone() },
        Atom::Exp(b) => Term::Exp(Box::new(to_term(b))),
        Atom::Indicator(f) => Term::Indicator(Box::new(formula_term(f))),
    }
}

fn formula_term(f: &Formula) -> TermFormula {
    match f {
        Formula::True => TermFormula::True,
        Formula::False => TermFormula::False,
        Formula::Cmp(op, a, b) => TermFormula::Cmp(*op, to_term(a), to_term(b)),
        Formula::And(v) => TermFormula::And(v.iter().map(formula_term).collect()),
        Formula::Or(v) => TermFormula::Or(v.iter().map(formula_term).collect()),
        Formula::Not(x) => TermFormula::Not(Box::new(formula_term(x))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xi() -> Term {
        Term::Process("x".into(), IndexExpr::named("i", 0))
    }

    #[test]
    fn difference_of_squares_normalizes() {
        let t = Term::mul(Term::add(xi(), Term::int(1)), Term::sub(xi(), Term::int(1)));
        assert_eq!(normalize(&t).unwrap().to_string(), "x[i]^2 - 1");
    }

    #[test]
    fn degree_cap_is_enforced() {
        let t = Term::Pow(Box::new(xi()), 65);
        assert!(matches!(normalize(&t), Err(SymbolicError::DegreeCap { cap: 64, .. })));
        let nested = Term::Pow(Box::new(Term::Pow(Box::new(xi()), 10)), 10);
        assert!(matches!(normalize(&nested), Err(SymbolicError::DegreeCap { .. })));
        assert!(normalize(&Term::Pow(Box::new(xi()), 64)).is_ok());
    }

    #[test]
    fn division_by_non_monomial_is_rejected_for_polynomials() {
        let t = Term::Div(Box::new(Term::int(1)), Box::new(Term::sub(Term::int(1), Term::Param("p".into()))));
        assert!(matches!(normalize(&t), Err(SymbolicError::NonPolynomialDivision(_))));
        assert_eq!(normalize_ratfn(&t).unwrap().to_string(), "1/(1 - p)");
    }

    #[test]
    fn to_term_round_trips() {
        let t = Term::mul(
            Term::add(xi(), Term::Param("p".into())),
            Term::Div(Box::new(xi()), Box::new(Term::Param("L".into()))),
        );
        let p = normalize(&t).unwrap();
        assert_eq!(normalize(&to_term(&p)).unwrap(), p);
    }
}
