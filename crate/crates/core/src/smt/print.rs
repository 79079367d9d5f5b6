use std::fmt::Write;

use super::{Assignment, Atom, Formula, Nnf, Term};

fn quote(name: &str) -> String {
    let simple = !name.is_empty()
        && !name.starts_with(|c: char| c.is_ascii_digit())
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || "~!@$%^&*_-+=<>.?/".contains(c));
    if simple {
        name.to_string()
    } else {
        format!("|{name}|")
    }
}

fn write_term(out: &mut String, t: &Term, f: &Formula) {
    let bin = |out: &mut String, op: &str, l: &Term, r: &Term| {
        write!(out, "({op} RNE ").unwrap();
        write_term(out, l, f);
        out.push(' ');
        write_term(out, r, f);
        out.push(')');
    };
    match t {
        Term::Var { index, .. } => out.push_str(&quote(&f.variables[*index].name)),
        Term::Const(c) => write!(out, "{c}").unwrap(),
        Term::Neg(x) => {
            out.push_str("(fp.neg ");
            write_term(out, x, f);
            out.push(')');
        }
        Term::Add(l, r) => bin(out, "fp.add", l, r),
        Term::Sub(l, r) => bin(out, "fp.sub", l, r),
        Term::Mul(l, r) => bin(out, "fp.mul", l, r),
        Term::Div(l, r) => bin(out, "fp.div", l, r),
    }
}

fn write_atom(out: &mut String, a: &Atom, f: &Formula) {
    write!(out, "({} ", a.rel.smt_symbol()).unwrap();
    write_term(out, &a.lhs, f);
    out.push(' ');
    write_term(out, &a.rhs, f);
    out.push(')');
}

fn write_nnf(out: &mut String, n: &Nnf, f: &Formula) {
    match n {
        Nnf::Atom(a) => write_atom(out, a, f),
        Nnf::And(v) | Nnf::Or(v) => {
            out.push_str(if matches!(n, Nnf::And(_)) { "(and" } else { "(or" });
            for c in v {
                out.push(' ');
                write_nnf(out, c, f);
            }
            out.push(')');
        }
    }
}

/// Renders a normalized formula as an SMT-LIB script that parses back to the
/// same clauses.
pub fn to_smtlib(f: &Formula) -> String {
    let mut out = String::from("(set-logic QF_FP)\n");
    for v in &f.variables {
        writeln!(out, "(declare-fun {} () {})", quote(&v.name), v.format).unwrap();
    }
    for clause in &f.clauses {
        out.push_str("(assert ");
        if clause.is_unit() {
            write_atom(&mut out, &clause.atoms[0], f);
        } else {
            out.push_str("(or");
            for a in &clause.atoms {
                out.push(' ');
                write_atom(&mut out, a, f);
            }
            out.push(')');
        }
        out.push_str(")\n");
    }
    for n in &f.nnf {
        out.push_str("(assert ");
        write_nnf(&mut out, n, f);
        out.push_str(")\n");
    }
    out.push_str("(check-sat)\n");
    out
}

/// The `(model ...)` block with one bit-exact `define-fun` per variable.
pub fn format_model(f: &Formula, a: &Assignment) -> String {
    let mut out = String::from("(model\n");
    for (v, value) in f.variables.iter().zip(a.values()) {
        writeln!(out, "  (define-fun {} () {} {})", quote(&v.name), v.format, value).unwrap();
    }
    out.push(')');
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::FpScalar;
    use crate::smt::parse;

    #[test]
    fn model_block_is_bit_exact() {
        let f = parse("(declare-fun x () Float64)(declare-fun |odd name| () Float32)").unwrap();
        let a = Assignment::new(vec![FpScalar::from_f64(1.0), FpScalar::from_f32(-0.0)]).unwrap();
        let expected = format!(
            "(model\n  (define-fun x () (_ FloatingPoint 11 53) (fp #b0 #b01111111111 #b{}))\n  \
             (define-fun |odd name| () (_ FloatingPoint 8 24) (fp #b1 #b00000000 #b{}))\n)",
            "0".repeat(52),
            "0".repeat(23)
        );
        assert_eq!(format_model(&f, &a), expected);
    }

    #[test]
    fn script_round_trips() {
        let src = "(declare-fun x () Float64)(declare-fun y () Float64)\
            (assert (or (fp.lt (fp.add RNE x y) ((_ to_fp 11 53) RNE 0.1)) (not (fp.eq x (fp.neg y)))))\
            (assert (fp.geq (fp.div RNE x ((_ to_fp 11 53) RNE 3.0)) (fp.sub RNE y (_ +zero 11 53))))";
        let f = parse(src).unwrap();
        let again = parse(&to_smtlib(&f)).unwrap();
        assert_eq!(again.variables, f.variables);
        assert_eq!(again.clauses, f.clauses);
    }
}
