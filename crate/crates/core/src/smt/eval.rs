use crate::lattice::{FpFormat, FpScalar};

use super::{Assignment, Atom, Formula, Nnf, Term};

/// Evaluates `t` under IEEE-754 round-to-nearest-even in the term's format.
/// Subnormals, overflow to infinity and NaN propagation follow the host FPU,
/// which implements the standard for `f32`/`f64` basic operations.
pub fn eval_term(t: &Term, a: &Assignment) -> FpScalar {
    eval_term_with(t, a.values())
}

/// Like [`eval_term`] but over a raw value slice, which may hold any bits.
pub fn eval_term_with(t: &Term, values: &[FpScalar]) -> FpScalar {
    match t {
        Term::Var { index, .. } => values[*index],
        Term::Const(c) => *c,
        Term::Neg(x) => {
            let v = eval_term_with(x, values);
            let sign = 1u64 << (v.format().width() - 1);
            FpScalar::from_bits(v.bits() ^ sign, v.format())
        }
        Term::Add(l, r) => binary(l, r, values, |x, y| x + y, |x, y| x + y),
        Term::Sub(l, r) => binary(l, r, values, |x, y| x - y, |x, y| x - y),
        Term::Mul(l, r) => binary(l, r, values, |x, y| x * y, |x, y| x * y),
        Term::Div(l, r) => binary(l, r, values, |x, y| x / y, |x, y| x / y),
    }
}

fn binary(
    l: &Term,
    r: &Term,
    values: &[FpScalar],
    op32: impl Fn(f32, f32) -> f32,
    op64: impl Fn(f64, f64) -> f64,
) -> FpScalar {
    let a = eval_term_with(l, values);
    let b = eval_term_with(r, values);
    match a.format() {
        FpFormat::Binary32 => FpScalar::from_f32(op32(a.to_f32(), b.to_f32())),
        FpFormat::Binary64 => FpScalar::from_f64(op64(a.to_f64(), b.to_f64())),
    }
}

pub fn atom_holds(atom: &Atom, values: &[FpScalar]) -> bool {
    let l = eval_term_with(&atom.lhs, values);
    let r = eval_term_with(&atom.rhs, values);
    atom.rel.holds(l, r)
}

pub fn nnf_holds(n: &Nnf, values: &[FpScalar]) -> bool {
    match n {
        Nnf::Atom(a) => atom_holds(a, values),
        Nnf::And(v) => v.iter().all(|c| nnf_holds(c, values)),
        Nnf::Or(v) => v.iter().any(|c| nnf_holds(c, values)),
    }
}

/// True iff every clause has a satisfied atom and every NNF conjunct holds.
pub fn is_model(f: &Formula, a: &Assignment) -> bool {
    debug_assert_eq!(a.len(), f.dim());
    let values = a.values();
    f.clauses
        .iter()
        .all(|c| c.atoms.iter().any(|atom| atom_holds(atom, values)))
        && f.nnf.iter().all(|n| nnf_holds(n, values))
}
