//! SMT-LIB 2 QF_FP frontend: parsing, normalization into clause form, and a
//! bit-exact IEEE-754 evaluator used for model validation.

mod eval;
mod normalize;
mod parse;
mod print;
mod sexpr;

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::lattice::{FpFormat, FpScalar, LatticeError, Relation};

pub use eval::{atom_holds, eval_term, eval_term_with, is_model, nnf_holds};
pub use normalize::{normalize, BoolExpr, NormalizeError, NormalizeOptions, DEFAULT_CLAUSE_GUARD};
pub use parse::{parse, parse_with, ParseOptions};
pub use print::{format_model, to_smtlib};

/// Position in the source text (1-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FrontendError {
    #[error("{pos}: syntax error: {message}")]
    Syntax { pos: Pos, message: String },
    #[error("{pos}: unsupported feature `{symbol}`")]
    Unsupported { pos: Pos, symbol: String },
    #[error("{pos}: {message}")]
    Type { pos: Pos, message: String },
    #[error(transparent)]
    Normalize(#[from] NormalizeError),
}

/// Floating-point term. Arithmetic nodes round to nearest, ties to even.
#[derive(Debug, Clone, PartialEq)]
pub enum Term {
    Var { index: usize, format: FpFormat },
    Const(FpScalar),
    Neg(Box<Term>),
    Add(Box<Term>, Box<Term>),
    Sub(Box<Term>, Box<Term>),
    Mul(Box<Term>, Box<Term>),
    Div(Box<Term>, Box<Term>),
}

impl Term {
    pub fn var(index: usize, format: FpFormat) -> Term {
        Term::Var { index, format }
    }

    pub fn constant(value: FpScalar) -> Term {
        Term::Const(value)
    }

    pub fn neg(t: Term) -> Term {
        Term::Neg(Box::new(t))
    }

    pub fn add(l: Term, r: Term) -> Term {
        Term::Add(Box::new(l), Box::new(r))
    }

    pub fn sub(l: Term, r: Term) -> Term {
        Term::Sub(Box::new(l), Box::new(r))
    }

    pub fn mul(l: Term, r: Term) -> Term {
        Term::Mul(Box::new(l), Box::new(r))
    }

    pub fn div(l: Term, r: Term) -> Term {
        Term::Div(Box::new(l), Box::new(r))
    }

    pub fn format(&self) -> FpFormat {
        match self {
            Term::Var { format, .. } => *format,
            Term::Const(c) => c.format(),
            Term::Neg(t) => t.format(),
            Term::Add(l, _) | Term::Sub(l, _) | Term::Mul(l, _) | Term::Div(l, _) => l.format(),
        }
    }

    /// Calls `f` on every constant in the term.
    pub fn for_each_constant(&self, f: &mut impl FnMut(FpScalar)) {
        match self {
            Term::Var { .. } => {}
            Term::Const(c) => f(*c),
            Term::Neg(t) => t.for_each_constant(f),
            Term::Add(l, r) | Term::Sub(l, r) | Term::Mul(l, r) | Term::Div(l, r) => {
                l.for_each_constant(f);
                r.for_each_constant(f);
            }
        }
    }
}

/// `lhs rel rhs` over terms of one format.
#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub lhs: Term,
    pub rhs: Term,
    pub rel: Relation,
}

impl Atom {
    pub fn new(lhs: Term, rel: Relation, rhs: Term) -> Atom {
        Atom { lhs, rhs, rel }
    }

    /// An atom that no assignment satisfies (`+0 < +0`); stands in for a
    /// literal `false`.
    pub fn falsum() -> Atom {
        let zero = Term::Const(FpScalar::from_f64(0.0));
        Atom::new(zero.clone(), Relation::Lt, zero)
    }
}

/// Disjunction of atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct Clause {
    pub atoms: Vec<Atom>,
}

impl Clause {
    pub fn new(atoms: Vec<Atom>) -> Clause {
        debug_assert!(!atoms.is_empty());
        Clause { atoms }
    }

    pub fn is_unit(&self) -> bool {
        self.atoms.len() == 1
    }
}

/// Negation-free boolean structure over atoms, used for conjuncts whose
/// clause form would exceed the normalization guard.
#[derive(Debug, Clone, PartialEq)]
pub enum Nnf {
    Atom(Atom),
    And(Vec<Nnf>),
    Or(Vec<Nnf>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Variable {
    pub name: String,
    pub format: FpFormat,
}

/// Commands seen in the script besides declarations and assertions.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ScriptInfo {
    pub logic: Option<String>,
    pub check_sat: bool,
    pub get_model: bool,
    pub exit: bool,
}

/// A normalized constraint: a conjunction of clauses plus any conjuncts kept
/// in negation normal form. Variable order fixes the assignment layout.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Formula {
    pub variables: Vec<Variable>,
    pub clauses: Vec<Clause>,
    pub nnf: Vec<Nnf>,
    pub info: ScriptInfo,
}

impl Formula {
    pub fn dim(&self) -> usize {
        self.variables.len()
    }

    pub fn formats(&self) -> Vec<FpFormat> {
        self.variables.iter().map(|v| v.format).collect()
    }

    /// Every atom in the formula, clause atoms first.
    pub fn atoms(&self) -> Vec<&Atom> {
        fn walk<'a>(n: &'a Nnf, out: &mut Vec<&'a Atom>) {
            match n {
                Nnf::Atom(a) => out.push(a),
                Nnf::And(v) | Nnf::Or(v) => v.iter().for_each(|c| walk(c, out)),
            }
        }
        let mut out: Vec<&Atom> = self.clauses.iter().flat_map(|c| c.atoms.iter()).collect();
        self.nnf.iter().for_each(|n| walk(n, &mut out));
        out
    }

    pub fn constants(&self) -> Vec<FpScalar> {
        let mut out = Vec::new();
        for atom in self.atoms() {
            atom.lhs.for_each_constant(&mut |c| out.push(c));
            atom.rhs.for_each_constant(&mut |c| out.push(c));
        }
        out
    }

    pub fn into_shared(self) -> Arc<Formula> {
        Arc::new(self)
    }
}

/// Values for every variable of a formula, in declaration order. All entries
/// are finite.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Assignment {
    values: Vec<FpScalar>,
}

impl Assignment {
    pub fn new(values: Vec<FpScalar>) -> Result<Assignment, LatticeError> {
        for v in &values {
            if v.is_nan() {
                return Err(LatticeError::NotANumber);
            }
            if !v.is_finite() {
                return Err(LatticeError::NonFinite(format!("{v:?}")));
            }
        }
        Ok(Assignment { values })
    }

    pub fn values(&self) -> &[FpScalar] {
        &self.values
    }

    pub fn get(&self, i: usize) -> FpScalar {
        self.values[i]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn to_f64s(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.to_f64()).collect()
    }
}
