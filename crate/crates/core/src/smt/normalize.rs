use thiserror::Error;

use crate::lattice::Relation;

use super::{Atom, Clause, Formula, Nnf, ScriptInfo, Variable};

/// Clause-count limit for distributing conjunctions over disjunctions.
pub const DEFAULT_CLAUSE_GUARD: usize = 10_000;

/// Boolean structure as written in the source, before normalization.
#[derive(Debug, Clone, PartialEq)]
pub enum BoolExpr {
    Const(bool),
    Atom(Atom),
    Not(Box<BoolExpr>),
    And(Vec<BoolExpr>),
    Or(Vec<BoolExpr>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NormalizeOptions {
    pub clause_guard: usize,
    /// Keep over-sized conjuncts in negation normal form instead of failing.
    pub nnf_fallback: bool,
}

impl Default for NormalizeOptions {
    fn default() -> Self {
        NormalizeOptions {
            clause_guard: DEFAULT_CLAUSE_GUARD,
            nnf_fallback: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NormalizeError {
    #[error(
        "clause form would exceed {guard} clauses; enable NNF evaluation mode to keep the conjunct unexpanded"
    )]
    ClauseExplosion { guard: usize },
}

/// Negation-free tree that still carries boolean constants.
enum Pos {
    True,
    False,
    Atom(Atom),
    And(Vec<Pos>),
    Or(Vec<Pos>),
}

fn negate_atom(a: &Atom) -> Pos {
    let flip = |rel| Pos::Atom(Atom::new(a.lhs.clone(), rel, a.rhs.clone()));
    match a.rel {
        // Finite floats are totally ordered, so a != b splits into a < b or a > b.
        Relation::Eq => Pos::Or(vec![flip(Relation::Lt), flip(Relation::Gt)]),
        Relation::Le => flip(Relation::Gt),
        Relation::Lt => flip(Relation::Ge),
        Relation::Ge => flip(Relation::Lt),
        Relation::Gt => flip(Relation::Le),
    }
}

fn push_negations(e: &BoolExpr, negated: bool) -> Pos {
    match (e, negated) {
        (BoolExpr::Const(b), n) => {
            if *b != n {
                Pos::True
            } else {
                Pos::False
            }
        }
        (BoolExpr::Atom(a), false) => Pos::Atom(a.clone()),
        (BoolExpr::Atom(a), true) => negate_atom(a),
        (BoolExpr::Not(inner), n) => push_negations(inner, !n),
        (BoolExpr::And(v), false) | (BoolExpr::Or(v), true) => {
            Pos::And(v.iter().map(|c| push_negations(c, negated)).collect())
        }
        (BoolExpr::Or(v), false) | (BoolExpr::And(v), true) => {
            Pos::Or(v.iter().map(|c| push_negations(c, negated)).collect())
        }
    }
}

/// Flattens nested connectives and folds constants. `Err(b)` means the
/// subtree is the constant `b`.
fn simplify(p: Pos) -> Result<Nnf, bool> {
    match p {
        Pos::True => Err(true),
        Pos::False => Err(false),
        Pos::Atom(a) => Ok(Nnf::Atom(a)),
        Pos::And(children) => {
            let mut out = Vec::new();
            for c in children {
                match simplify(c) {
                    Err(true) => {}
                    Err(false) => return Err(false),
                    Ok(Nnf::And(inner)) => out.extend(inner),
                    Ok(n) => out.push(n),
                }
            }
            match out.len() {
                0 => Err(true),
                1 => Ok(out.pop().unwrap()),
                _ => Ok(Nnf::And(out)),
            }
        }
        Pos::Or(children) => {
            let mut out = Vec::new();
            for c in children {
                match simplify(c) {
                    Err(false) => {}
                    Err(true) => return Err(true),
                    Ok(Nnf::Or(inner)) => out.extend(inner),
                    Ok(n) => out.push(n),
                }
            }
            match out.len() {
                0 => Err(false),
                1 => Ok(out.pop().unwrap()),
                _ => Ok(Nnf::Or(out)),
            }
        }
    }
}

/// Clause form of `n`, or `None` if it would exceed `budget` clauses.
fn clausify(n: &Nnf, budget: usize) -> Option<Vec<Vec<Atom>>> {
    match n {
        Nnf::Atom(a) => (budget >= 1).then(|| vec![vec![a.clone()]]),
        Nnf::And(children) => {
            let mut out = Vec::new();
            for c in children {
                let part = clausify(c, budget - out.len())?;
                out.extend(part);
                if out.len() > budget {
                    return None;
                }
            }
            Some(out)
        }
        Nnf::Or(children) => {
            let mut acc: Vec<Vec<Atom>> = vec![Vec::new()];
            for c in children {
                let part = clausify(c, budget)?;
                if acc.len().saturating_mul(part.len()) > budget {
                    return None;
                }
                let mut next = Vec::with_capacity(acc.len() * part.len());
                for left in &acc {
                    for right in &part {
                        let mut clause = left.clone();
                        clause.extend(right.iter().cloned());
                        next.push(clause);
                    }
                }
                acc = next;
            }
            Some(acc)
        }
    }
}

/// Pushes negations to the atoms, folds constants and distributes into
/// clause form. Top-level conjuncts whose expansion would push the clause
/// count past the guard are kept as NNF trees when `nnf_fallback` is set.
pub fn normalize(
    raw: &BoolExpr,
    variables: Vec<Variable>,
    opts: NormalizeOptions,
) -> Result<Formula, NormalizeError> {
    let mut formula = Formula {
        variables,
        clauses: Vec::new(),
        nnf: Vec::new(),
        info: ScriptInfo::default(),
    };
    let root = match simplify(push_negations(raw, false)) {
        Err(true) => return Ok(formula),
        Err(false) => {
            formula.clauses.push(Clause::new(vec![Atom::falsum()]));
            return Ok(formula);
        }
        Ok(n) => n,
    };
    let conjuncts = match root {
        Nnf::And(v) => v,
        n => vec![n],
    };
    for conjunct in conjuncts {
        let budget = opts.clause_guard.saturating_sub(formula.clauses.len());
        match clausify(&conjunct, budget) {
            Some(clauses) => formula
                .clauses
                .extend(clauses.into_iter().map(Clause::new)),
            None if opts.nnf_fallback => formula.nnf.push(conjunct),
            None => {
                return Err(NormalizeError::ClauseExplosion {
                    guard: opts.clause_guard,
                })
            }
        }
    }
    Ok(formula)
}
