use num_bigint::BigInt;

use crate::symbolic::Rational;

/// Source position (1-based).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord)]
pub struct Span {
    pub line: usize,
    pub col: usize,
}

/// A node with a source position. Equality ignores the position so that
/// re-parsed programs compare equal to their originals.
#[derive(Clone, Debug)]
pub struct Spanned<T> {
    pub node: T,
    pub span: Span,
}

impl<T: PartialEq> PartialEq for Spanned<T> {
    fn eq(&self, other: &Self) -> bool {
        self.node == other.node
    }
}

impl<T> Spanned<T> {
    pub fn new(node: T, span: Span) -> Self {
        Spanned { node, span }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Int(BigInt),
    Param(String),
    /// `x` (offset 0) or `x[-n]`.
    Process {
        name: String,
        offset: i64,
    },
    Sample(String),
    /// `pi_k(s)`, 1-based.
    Proj(u32, Box<Expr>),
    /// The loop counter / stopping time `t` (hints only).
    Time,
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Pow(Box<Expr>, u32),
}

#[allow(clippy::should_implement_trait)]
impl Expr {
    pub fn process(name: &str, offset: i64) -> Expr {
        Expr::Process { name: name.to_string(), offset }
    }

    pub fn int(n: i64) -> Expr {
        Expr::Int(BigInt::from(n))
    }

    pub fn add(a: Expr, b: Expr) -> Expr {
        Expr::Add(Box::new(a), Box::new(b))
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        Expr::Sub(Box::new(a), Box::new(b))
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        Expr::Mul(Box::new(a), Box::new(b))
    }

    /// Visit every sub-expression, parents first.
    pub fn walk(&self, f: &mut dyn FnMut(&Expr)) {
        f(self);
        match self {
            Expr::Proj(_, e) | Expr::Neg(e) | Expr::Pow(e, _) => e.walk(f),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.walk(f);
                b.walk(f);
            }
            _ => {}
        }
    }

    pub fn mentions_sample(&self) -> bool {
        let mut found = false;
        self.walk(&mut |e| found |= matches!(e, Expr::Sample(_)));
        found
    }

    pub fn mentions_time(&self) -> bool {
        let mut found = false;
        self.walk(&mut |e| found |= matches!(e, Expr::Time));
        found
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RelOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

impl RelOp {
    pub fn symbol(self) -> &'static str {
        match self {
            RelOp::Lt => "<",
            RelOp::Le => "<=",
            RelOp::Gt => ">",
            RelOp::Ge => ">=",
            RelOp::Eq => "=",
            RelOp::Ne => "!=",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Guard {
    True,
    False,
    Cmp(RelOp, Expr, Expr),
    And(Box<Guard>, Box<Guard>),
    Or(Box<Guard>, Box<Guard>),
    Not(Box<Guard>),
    Implies(Box<Guard>, Box<Guard>),
}

impl Guard {
    pub fn for_each_expr(&self, f: &mut dyn FnMut(&Expr)) {
        match self {
            Guard::True | Guard::False => {}
            Guard::Cmp(_, a, b) => {
                f(a);
                f(b);
            }
            Guard::And(a, b) | Guard::Or(a, b) | Guard::Implies(a, b) => {
                a.for_each_expr(f);
                b.for_each_expr(f);
            }
            Guard::Not(a) => a.for_each_expr(f),
        }
    }

    pub fn mentions_sample(&self) -> bool {
        let mut found = false;
        self.for_each_expr(&mut |e| found |= e.mentions_sample());
        found
    }

    pub fn mentions_time(&self) -> bool {
        let mut found = false;
        self.for_each_expr(&mut |e| found |= e.mentions_time());
        found
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum DistExpr {
    /// `Bern(theta, {v1, v0})`.
    Bern { prob: Expr, v1: BigInt, v0: BigInt },
    /// `Unif{v, ...}`.
    Unif(Vec<BigInt>),
    /// `Matches("PATTERN", L)`.
    Matches { pattern: String, alphabet: Expr },
    /// `Table{(v, ...) -> prob, ...}`.
    Table(Vec<(Vec<BigInt>, Expr)>),
}

impl DistExpr {
    pub fn is_tuple(&self) -> bool {
        matches!(self, DistExpr::Matches { .. } | DistExpr::Table(_))
    }

    pub fn arity(&self) -> usize {
        match self {
            DistExpr::Bern { .. } | DistExpr::Unif(_) => 1,
            DistExpr::Matches { pattern, .. } => pattern.chars().count(),
            DistExpr::Table(rows) => rows.first().map(|(v, _)| v.len()).unwrap_or(0),
        }
    }
}

/// Range endpoint of a parameter declaration; `None` is infinite.
#[derive(Clone, Debug, PartialEq)]
pub struct Endpoint {
    pub value: Option<Rational>,
    pub closed: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamDecl {
    pub name: String,
    pub integer: bool,
    pub range: Option<(Endpoint, Endpoint)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InitAssign {
    pub var: String,
    pub index: usize,
    pub value: Expr,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sampling {
    pub var: String,
    pub dist: DistExpr,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Assign {
    pub var: String,
    pub value: Expr,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HintScope {
    AtExit,
    EveryIteration,
    Implication,
}

impl HintScope {
    pub fn keyword(self) -> &'static str {
        match self {
            HintScope::AtExit => "at-exit",
            HintScope::EveryIteration => "every",
            HintScope::Implication => "implication",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Hint {
    pub scope: HintScope,
    pub formula: Guard,
}

/// Raw pragma lines, kept as text and parsed against the finished program.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Pragmas {
    pub seed: Option<Spanned<String>>,
    pub hints: Vec<Spanned<String>>,
    pub variant: Option<Spanned<String>>,
    pub solve_for: Option<Spanned<String>>,
    pub use_facts: Vec<Spanned<String>>,
    pub assume_ost: bool,
    pub sim_params: Option<Spanned<String>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Program {
    pub params: Vec<Spanned<ParamDecl>>,
    pub init: Vec<Spanned<InitAssign>>,
    pub guard: Spanned<Guard>,
    pub samples: Vec<Spanned<Sampling>>,
    pub body: Vec<Spanned<Assign>>,
    pub pragmas: Pragmas,
}

impl Program {
    pub fn param(&self, name: &str) -> Option<&ParamDecl> {
        self.params.iter().map(|p| &p.node).find(|p| p.name == name)
    }

    pub fn sampling(&self, name: &str) -> Option<&Sampling> {
        self.samples.iter().map(|s| &s.node).find(|s| s.var == name)
    }

    /// Process variables in order of first initialization.
    pub fn process_vars(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for i in &self.init {
            if !out.contains(&i.node.var) {
                out.push(i.node.var.clone());
            }
        }
        out
    }

    /// Number of initialized history slots (the same for every variable).
    pub fn init_len(&self) -> usize {
        let vars = self.process_vars();
        vars.first().map(|v| self.init.iter().filter(|i| &i.node.var == v).count()).unwrap_or(0)
    }

    pub fn is_process(&self, name: &str) -> bool {
        self.init.iter().any(|i| i.node.var == name)
    }

    pub fn is_sample(&self, name: &str) -> bool {
        self.sampling(name).is_some()
    }

    /// Whether the loop is entered unconditionally once (guard reads samples).
    pub fn do_while(&self) -> bool {
        self.guard.node.mentions_sample()
    }
}
