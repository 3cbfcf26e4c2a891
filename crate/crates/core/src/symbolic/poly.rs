//! Canonical exact polynomials over time-indexed atoms.
//!
//! A [`Poly`] is a sum of monomials with exact rational coefficients. Every
//! monomial is a product of a parameter part (parameters with integer, possibly
//! negative, exponents) and an atom part (atoms with positive exponents).
//! Compound atoms (sums, conditional expectations, expectations, indicators)
//! carry canonical polynomials inside, so structural equality of two `Poly`
//! values coincides with equality of their canonical forms.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use super::index::{IndexExpr, TimeVar};

pub type Rational = BigRational;

pub fn rat(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CmpOp {
    Lt,
    Le,
    Eq,
    Ne,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
        }
    }

    pub fn holds(self, ord: Ordering) -> bool {
        match self {
            CmpOp::Lt => ord == Ordering::Less,
            CmpOp::Le => ord != Ordering::Greater,
            CmpOp::Eq => ord == Ordering::Equal,
            CmpOp::Ne => ord != Ordering::Equal,
        }
    }
}

/// Propositional formula over polynomial comparisons, used by indicators.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Formula {
    True,
    False,
    Cmp(CmpOp, Poly, Poly),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Not(Box<Formula>),
}

impl Formula {
    pub fn eq(lhs: Poly, rhs: Poly) -> Self {
        Formula::Cmp(CmpOp::Eq, lhs, rhs)
    }

    pub fn and(parts: Vec<Formula>) -> Self {
        let mut flat = Vec::new();
        for p in parts {
            match p {
                Formula::True => {}
                Formula::And(inner) => flat.extend(inner),
                other => flat.push(other),
            }
        }
        match flat.len() {
            0 => Formula::True,
            1 => flat.pop().unwrap(),
            _ => Formula::And(flat),
        }
    }

    /// Apply `f` to every polynomial in the formula.
    pub fn map_polys(&self, f: &mut dyn FnMut(&Poly) -> Poly) -> Formula {
        match self {
            Formula::True => Formula::True,
            Formula::False => Formula::False,
            Formula::Cmp(op, a, b) => Formula::Cmp(*op, f(a), f(b)),
            Formula::And(v) => Formula::And(v.iter().map(|x| x.map_polys(f)).collect()),
            Formula::Or(v) => Formula::Or(v.iter().map(|x| x.map_polys(f)).collect()),
            Formula::Not(x) => Formula::Not(Box::new(x.map_polys(f))),
        }
    }

    pub fn for_each_poly(&self, f: &mut dyn FnMut(&Poly)) {
        match self {
            Formula::True | Formula::False => {}
            Formula::Cmp(_, a, b) => {
                f(a);
                f(b);
            }
            Formula::And(v) | Formula::Or(v) => v.iter().for_each(|x| x.for_each_poly(f)),
            Formula::Not(x) => x.for_each_poly(f),
        }
    }
}

/// `sum(var = lo .. hi, body)`; `var` is bound in `body`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SumNode {
    pub var: String,
    pub lo: IndexExpr,
    pub hi: IndexExpr,
    pub body: Poly,
}

impl SumNode {
    pub fn bound(&self) -> TimeVar {
        TimeVar::Named(self.var.clone())
    }
}

/// Conditional expectation of `body` given the filtration at `filtration`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CondExpNode {
    pub body: Poly,
    pub filtration: IndexExpr,
}

/// Polynomial variable. Variant order is the canonical kind order: process
/// atoms, sample atoms, time symbols, then compound nodes.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Atom {
    Process { name: String, index: IndexExpr },
    Sample { name: String, index: IndexExpr, proj: Option<u32> },
    Time(TimeVar),
    Sum(Box<SumNode>),
    CondExp(Box<CondExpNode>),
    Exp(Box<Poly>),
    Indicator(Box<Formula>),
}

impl Atom {
    pub fn process(name: &str, index: IndexExpr) -> Self {
        Atom::Process { name: name.to_string(), index }
    }

    pub fn sample(name: &str, index: IndexExpr, proj: Option<u32>) -> Self {
        Atom::Sample { name: name.to_string(), index, proj }
    }

    pub fn index(&self) -> Option<&IndexExpr> {
        match self {
            Atom::Process { index, .. } | Atom::Sample { index, .. } => Some(index),
            _ => None,
        }
    }

    pub fn is_compound(&self) -> bool {
        matches!(self, Atom::Sum(_) | Atom::CondExp(_) | Atom::Exp(_) | Atom::Indicator(_))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct Monomial {
    atoms: Vec<(Atom, u32)>,
    params: Vec<(String, i32)>,
}

impl Monomial {
    pub fn one() -> Self {
        Monomial::default()
    }

    pub fn from_atom(a: Atom, k: u32) -> Self {
        if k == 0 {
            return Monomial::one();
        }
        Monomial { atoms: vec![(a, k)], params: Vec::new() }
    }

    pub fn from_param(name: &str, k: i32) -> Self {
        if k == 0 {
            return Monomial::one();
        }
        Monomial { atoms: Vec::new(), params: vec![(name.to_string(), k)] }
    }

    pub fn from_parts(atoms: Vec<(Atom, u32)>, params: Vec<(String, i32)>) -> Self {
        let mut m = Monomial::one();
        for (a, k) in atoms {
            m = m.mul(&Monomial::from_atom(a, k));
        }
        for (p, k) in params {
            m = m.mul(&Monomial::from_param(&p, k));
        }
        m
    }

    pub fn atoms(&self) -> &[(Atom, u32)] {
        &self.atoms
    }

    pub fn params(&self) -> &[(String, i32)] {
        &self.params
    }

    pub fn is_one(&self) -> bool {
        self.atoms.is_empty() && self.params.is_empty()
    }

    pub fn is_param_only(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn atom_degree(&self) -> u32 {
        self.atoms.iter().map(|(_, k)| *k).sum()
    }

    pub fn max_exponent(&self) -> u32 {
        let a = self.atoms.iter().map(|(_, k)| *k).max().unwrap_or(0);
        let p = self.params.iter().map(|(_, k)| k.unsigned_abs()).max().unwrap_or(0);
        a.max(p)
    }

    pub fn exponent_of(&self, atom: &Atom) -> u32 {
        self.atoms.iter().find(|(a, _)| a == atom).map(|(_, k)| *k).unwrap_or(0)
    }

    pub fn param_exponent(&self, name: &str) -> i32 {
        self.params.iter().find(|(p, _)| p == name).map(|(_, k)| *k).unwrap_or(0)
    }

    /// The monomial with `atom` removed entirely.
    pub fn without_atom(&self, atom: &Atom) -> Monomial {
        Monomial { atoms: self.atoms.iter().filter(|(a, _)| a != atom).cloned().collect(), params: self.params.clone() }
    }

    pub fn without_param(&self, name: &str) -> Monomial {
        Monomial { atoms: self.atoms.clone(), params: self.params.iter().filter(|(p, _)| p != name).cloned().collect() }
    }

    pub fn param_part(&self) -> Monomial {
        Monomial { atoms: Vec::new(), params: self.params.clone() }
    }

    pub fn atom_part(&self) -> Monomial {
        Monomial { atoms: self.atoms.clone(), params: Vec::new() }
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        Monomial {
            atoms: merge(&self.atoms, &other.atoms, |a, b| Some(a + b)),
            params: merge(&self.params, &other.params, |a, b| {
                let s = a + b;
                (s != 0).then_some(s)
            }),
        }
    }

    pub fn pow(&self, k: u32) -> Monomial {
        Monomial {
            atoms: self.atoms.iter().map(|(a, e)| (a.clone(), e * k)).collect(),
            params: if k == 0 {
                Vec::new()
            } else {
                self.params.iter().map(|(p, e)| (p.clone(), e * k as i32)).collect()
            },
        }
        .normalized_zero(k)
    }

    fn normalized_zero(self, k: u32) -> Monomial {
        if k == 0 {
            Monomial::one()
        } else {
            self
        }
    }

    /// Divide by a parameter monomial (exponents may go negative).
    pub fn div_params(&self, other: &Monomial) -> Monomial {
        let inv = Monomial { atoms: Vec::new(), params: other.params.iter().map(|(p, e)| (p.clone(), -e)).collect() };
        self.mul(&inv)
    }
}

fn merge<K: Ord + Clone, E: Copy>(a: &[(K, E)], b: &[(K, E)], combine: impl Fn(E, E) -> Option<E>) -> Vec<(K, E)> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            Ordering::Less => {
                out.push(a[i].clone());
                i += 1;
            }
            Ordering::Greater => {
                out.push(b[j].clone());
                j += 1;
            }
            Ordering::Equal => {
                if let Some(e) = combine(a[i].1, b[j].1) {
                    out.push((a[i].0.clone(), e));
                }
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

// Monomials with atoms come before pure parameter monomials; within each
// group, atom parts compare lexicographically, then parameter parts.
impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self.atoms.is_empty(), other.atoms.is_empty()) {
            (false, true) => Ordering::Less,
            (true, false) => Ordering::Greater,
            _ => self.atoms.cmp(&other.atoms).then_with(|| self.params.cmp(&other.params)),
        }
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Poly {
    terms: BTreeMap<Monomial, Rational>,
}

impl Poly {
    pub fn zero() -> Self {
        Poly::default()
    }

    pub fn one() -> Self {
        Poly::constant(Rational::one())
    }

    pub fn constant(c: Rational) -> Self {
        Poly::term(Monomial::one(), c)
    }

    pub fn int(n: i64) -> Self {
        Poly::constant(int(n))
    }

    pub fn term(m: Monomial, c: Rational) -> Self {
        let mut p = Poly::zero();
        p.add_term(m, c);
        p
    }

    pub fn monomial(m: Monomial) -> Self {
        Poly::term(m, Rational::one())
    }

    pub fn param(name: &str) -> Self {
        Poly::monomial(Monomial::from_param(name, 1))
    }

    pub fn atom(a: Atom) -> Self {
        Poly::monomial(Monomial::from_atom(a, 1))
    }

    pub fn process(name: &str, index: IndexExpr) -> Self {
        Poly::atom(Atom::process(name, index))
    }

    pub fn sample(name: &str, index: IndexExpr, proj: Option<u32>) -> Self {
        Poly::atom(Atom::sample(name, index, proj))
    }

    pub fn time(v: TimeVar) -> Self {
        Poly::atom(Atom::Time(v))
    }

    /// `v + offset` as a polynomial; absolute indices become constants.
    pub fn from_index(ix: &IndexExpr) -> Self {
        let c = Poly::int(ix.offset);
        match &ix.base {
            None => c,
            Some(v) => Poly::time(v.clone()) + c,
        }
    }

    pub fn exp(body: Poly) -> Self {
        Poly::atom(Atom::Exp(Box::new(body)))
    }

    pub fn cond_exp(body: Poly, filtration: IndexExpr) -> Self {
        Poly::atom(Atom::CondExp(Box::new(CondExpNode { body, filtration })))
    }

    pub fn indicator(f: Formula) -> Self {
        match f {
            Formula::True => Poly::one(),
            Formula::False => Poly::zero(),
            f => Poly::atom(Atom::Indicator(Box::new(f))),
        }
    }

    pub fn sum(var: &str, lo: IndexExpr, hi: IndexExpr, body: Poly) -> Self {
        if body.is_zero() {
            return Poly::zero();
        }
        Poly::atom(Atom::Sum(Box::new(SumNode { var: var.to_string(), lo, hi, body })))
    }

    pub fn add_term(&mut self, m: Monomial, c: Rational) {
        if c.is_zero() {
            return;
        }
        let entry = self.terms.entry(m);
        match entry {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let s = o.get() + &c;
                if s.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = s;
                }
            }
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &Rational)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, m: &Monomial) -> Rational {
        self.terms.get(m).cloned().unwrap_or_else(Rational::zero)
    }

    /// The rational value if this polynomial is a plain constant.
    pub fn as_constant(&self) -> Option<Rational> {
        match self.terms.len() {
            0 => Some(Rational::zero()),
            1 => {
                let (m, c) = self.terms.iter().next().unwrap();
                m.is_one().then(|| c.clone())
            }
            _ => None,
        }
    }

    /// The single atom `a` when this polynomial is exactly `1 * a`.
    pub fn as_atom(&self) -> Option<&Atom> {
        if self.terms.len() != 1 {
            return None;
        }
        let (m, c) = self.terms.iter().next().unwrap();
        if c.is_one() && m.params.is_empty() && m.atoms.len() == 1 && m.atoms[0].1 == 1 {
            Some(&m.atoms[0].0)
        } else {
            None
        }
    }

    pub fn constant_term(&self) -> Rational {
        self.coeff(&Monomial::one())
    }

    /// No atoms at all: a rational function of parameters (Laurent polynomial).
    pub fn is_param_only(&self) -> bool {
        self.terms.keys().all(|m| m.is_param_only())
    }

    pub fn scale(&self, c: &Rational) -> Poly {
        if c.is_zero() {
            return Poly::zero();
        }
        Poly { terms: self.terms.iter().map(|(m, v)| (m.clone(), v * c)).collect() }
    }

    pub fn mul_monomial(&self, m: &Monomial, c: &Rational) -> Poly {
        let mut out = Poly::zero();
        for (mm, v) in &self.terms {
            out.add_term(mm.mul(m), v * c);
        }
        out
    }

    pub fn pow(&self, k: u32) -> Poly {
        let mut acc = Poly::one();
        let mut base = self.clone();
        let mut e = k;
        while e > 0 {
            if e & 1 == 1 {
                acc = &acc * &base;
            }
            e >>= 1;
            if e > 0 {
                base = &base * &base;
            }
        }
        acc
    }

    /// Top-level atoms (not descending into compound atoms).
    pub fn atoms(&self) -> BTreeSet<Atom> {
        self.terms.keys().flat_map(|m| m.atoms.iter().map(|(a, _)| a.clone())).collect()
    }

    pub fn params(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for m in self.terms.keys() {
            for (p, _) in &m.params {
                out.insert(p.clone());
            }
            for (a, _) in &m.atoms {
                match a {
                    Atom::Sum(s) => out.extend(s.body.params()),
                    Atom::CondExp(c) => out.extend(c.body.params()),
                    Atom::Exp(b) => out.extend(b.params()),
                    Atom::Indicator(f) => f.for_each_poly(&mut |p| out.extend(p.params())),
                    _ => {}
                }
            }
        }
        out
    }

    /// Visit every atom, including atoms nested inside compound atoms.
    pub fn visit_atoms_deep(&self, f: &mut dyn FnMut(&Atom)) {
        for m in self.terms.keys() {
            for (a, _) in &m.atoms {
                f(a);
                match a {
                    Atom::Sum(s) => s.body.visit_atoms_deep(f),
                    Atom::CondExp(c) => c.body.visit_atoms_deep(f),
                    Atom::Exp(b) => b.visit_atoms_deep(f),
                    Atom::Indicator(fm) => fm.for_each_poly(&mut |p| p.visit_atoms_deep(f)),
                    _ => {}
                }
            }
        }
    }

    pub fn contains_atom_deep(&self, pred: &dyn Fn(&Atom) -> bool) -> bool {
        let mut found = false;
        self.visit_atoms_deep(&mut |a| found |= pred(a));
        found
    }

    pub fn count_cond_exp(&self) -> usize {
        let mut n = 0;
        self.visit_atoms_deep(&mut |a| n += matches!(a, Atom::CondExp(_)) as usize);
        n
    }

    pub fn degree_in(&self, atom: &Atom) -> u32 {
        self.terms.keys().map(|m| m.exponent_of(atom)).max().unwrap_or(0)
    }

    /// Coefficients of `atom^k` for k = 0..=degree.
    pub fn coefficients_in(&self, atom: &Atom) -> Vec<Poly> {
        let d = self.degree_in(atom) as usize;
        let mut out = vec![Poly::zero(); d + 1];
        for (m, c) in &self.terms {
            let k = m.exponent_of(atom) as usize;
            out[k].add_term(m.without_atom(atom), c.clone());
        }
        out
    }

    /// Rebuild the polynomial, replacing each monomial by `f(monomial, coeff)`.
    pub fn map_terms(&self, mut f: impl FnMut(&Monomial, &Rational) -> Poly) -> Poly {
        let mut out = Poly::zero();
        for (m, c) in &self.terms {
            out = out + f(m, c);
        }
        out
    }

    /// Evaluate every atom through `f` and multiply out.
    pub fn map_atoms(&self, f: &mut dyn FnMut(&Atom) -> Poly) -> Poly {
        let mut out = Poly::zero();
        let mut cache: BTreeMap<Atom, Poly> = BTreeMap::new();
        for (m, c) in &self.terms {
            let mut t = Poly::term(m.param_part(), c.clone());
            for (a, k) in &m.atoms {
                let img = match cache.get(a) {
                    Some(p) => p.clone(),
                    None => {
                        let p = f(a);
                        cache.insert(a.clone(), p.clone());
                        p
                    }
                };
                t = &t * &img.pow(*k);
                if t.is_zero() {
                    break;
                }
            }
            out = out + t;
        }
        out
    }

    pub fn max_exponent(&self) -> u32 {
        let mut mx = 0;
        for m in self.terms.keys() {
            mx = mx.max(m.max_exponent());
        }
        mx
    }

    pub fn leading_sign_positive(&self) -> bool {
        self.terms.values().next().map(|c| c.is_positive()).unwrap_or(true)
    }
}

impl Add for Poly {
    type Output = Poly;
    fn add(mut self, rhs: Poly) -> Poly {
        for (m, c) in rhs.terms {
            self.add_term(m, c);
        }
        self
    }
}

impl Add for &Poly {
    type Output = Poly;
    fn add(self, rhs: &Poly) -> Poly {
        self.clone() + rhs.clone()
    }
}

impl Neg for Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        Poly { terms: self.terms.into_iter().map(|(m, c)| (m, -c)).collect() }
    }
}

impl Neg for &Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        -self.clone()
    }
}

impl Sub for Poly {
    type Output = Poly;
    fn sub(self, rhs: Poly) -> Poly {
        self + (-rhs)
    }
}

impl Sub for &Poly {
    type Output = Poly;
    fn sub(self, rhs: &Poly) -> Poly {
        self.clone() - rhs.clone()
    }
}

impl Mul for &Poly {
    type Output = Poly;
    fn mul(self, rhs: &Poly) -> Poly {
        let mut out = Poly::zero();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &rhs.terms {
                out.add_term(ma.mul(mb), ca * cb);
            }
        }
        out
    }
}

impl Mul for Poly {
    type Output = Poly;
    fn mul(self, rhs: Poly) -> Poly {
        &self * &rhs
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x(off: i64) -> Poly {
        Poly::process("x", IndexExpr::named("i", off))
    }

    #[test]
    fn difference_of_squares() {
        let a = x(0) + Poly::one();
        let b = x(0) - Poly::one();
        assert_eq!(&a * &b, x(0).pow(2) - Poly::one());
    }

    #[test]
    fn like_terms_collect() {
        let s = Poly::sample("z", IndexExpr::named("i", 0), None);
        let e = x(-1) + s.clone() + x(-1);
        assert_eq!(e, x(-1).scale(&int(2)) + s);
    }

    #[test]
    fn parameters_cancel_with_negative_exponents() {
        let l = Poly::param("L");
        let inv = Poly::monomial(Monomial::from_param("L", -1));
        assert_eq!(&l * &inv, Poly::one());
    }

    #[test]
    fn monomials_with_atoms_sort_before_constants() {
        let p = Poly::param("p");
        let e = Poly::one() - p.clone() + x(0);
        let first = e.terms().next().unwrap().0.clone();
        assert!(!first.is_param_only());
    }
}
