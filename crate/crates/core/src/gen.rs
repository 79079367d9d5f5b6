//! Random formula generators: satisfiable ones built around a planted model,
//! and unsatisfiable ones built around a contradiction.

use rand::seq::IndexedRandom;
use rand::Rng;

use crate::bench::Expected;
use crate::lattice::{n_ulp, FpFormat, FpScalar, Relation};
use crate::smt::{eval_term_with, Term};

#[derive(Debug, Clone)]
pub struct GenOptions {
    pub max_vars: usize,
    pub max_atoms: usize,
    pub max_depth: usize,
    /// Probability that a variable is binary32.
    pub binary32_share: f64,
}

impl Default for GenOptions {
    fn default() -> Self {
        GenOptions { max_vars: 4, max_atoms: 5, max_depth: 2, binary32_share: 0.5 }
    }
}

#[derive(Debug, Clone)]
pub struct Generated {
    pub source: String,
    /// The planted model, for satisfiable instances.
    pub planted: Option<Vec<FpScalar>>,
    pub expected: Expected,
}

struct Ctx {
    formats: Vec<FpFormat>,
    values: Vec<FpScalar>,
}

fn sort(fmt: FpFormat) -> &'static str {
    match fmt {
        FpFormat::Binary32 => "Float32",
        FpFormat::Binary64 => "Float64",
    }
}

fn text(t: &Term) -> String {
    match t {
        Term::Var { index, .. } => format!("v{index}"),
        Term::Const(c) => c.to_string(),
        Term::Neg(x) => format!("(fp.neg {})", text(x)),
        Term::Add(l, r) => format!("(fp.add RNE {} {})", text(l), text(r)),
        Term::Sub(l, r) => format!("(fp.sub RNE {} {})", text(l), text(r)),
        Term::Mul(l, r) => format!("(fp.mul RNE {} {})", text(l), text(r)),
        Term::Div(l, r) => format!("(fp.div RNE {} {})", text(l), text(r)),
    }
}

fn atom_text(l: &Term, rel: Relation, r: &Term) -> String {
    format!("({} {} {})", rel.smt_symbol(), text(l), text(r))
}

/// A finite value from a mixture of small, huge, tiny and subnormal
/// magnitudes.
pub fn random_value<R: Rng + ?Sized>(rng: &mut R, fmt: FpFormat) -> FpScalar {
    let v = match rng.random_range(0..6) {
        0 => rng.random_range(-10.0..10.0),
        1 => rng.random_range(-10i32..=10) as f64,
        2 => rng.random_range(-1e6..1e6),
        3 => {
            let e = match fmt {
                FpFormat::Binary32 => rng.random_range(-40.0..38.0),
                FpFormat::Binary64 => rng.random_range(-310.0..308.0),
            };
            let s = if rng.random::<bool>() { 1.0 } else { -1.0 };
            s * 10f64.powf(e)
        }
        4 => {
            let limit = fmt.max_finite_index();
            let i = rng.random_range(-limit..=limit);
            return crate::lattice::from_index(crate::lattice::LatticeIndex(i), fmt);
        }
        _ => *[0.0, 1.0, -1.0, 0.5, 2.0].choose(rng).expect("non-empty"),
    };
    let max = fmt.max_finite();
    FpScalar::round_from_f64(v.clamp(-max, max), fmt)
}

fn random_term<R: Rng + ?Sized>(rng: &mut R, cx: &Ctx, fmt: FpFormat, depth: usize) -> Term {
    let vars: Vec<usize> = (0..cx.formats.len()).filter(|&i| cx.formats[i] == fmt).collect();
    if depth == 0 || rng.random_bool(0.35) {
        if !vars.is_empty() && rng.random_bool(0.8) {
            return Term::var(*vars.choose(rng).expect("non-empty"), fmt);
        }
        return Term::constant(random_value(rng, fmt));
    }
    let l = random_term(rng, cx, fmt, depth - 1);
    match rng.random_range(0..5) {
        0 => Term::neg(l),
        1 => Term::add(l, random_term(rng, cx, fmt, depth - 1)),
        2 => Term::sub(l, random_term(rng, cx, fmt, depth - 1)),
        3 => Term::mul(l, random_term(rng, cx, fmt, depth - 1)),
        _ => Term::div(l, random_term(rng, cx, fmt, depth - 1)),
    }
}

/// A term over at least one variable whose value at the planted point is
/// finite.
fn planted_term<R: Rng + ?Sized>(rng: &mut R, cx: &Ctx, fmt: FpFormat, depth: usize) -> (Term, FpScalar) {
    loop {
        let t = random_term(rng, cx, fmt, depth);
        let mut has_var = false;
        visit_vars(&t, &mut |_| has_var = true);
        if !has_var && cx.formats.contains(&fmt) {
            continue;
        }
        let v = eval_term_with(&t, &cx.values);
        if v.is_finite() {
            return (t, v);
        }
    }
}

fn visit_vars(t: &Term, f: &mut impl FnMut(usize)) {
    match t {
        Term::Var { index, .. } => f(*index),
        Term::Const(_) => {}
        Term::Neg(x) => visit_vars(x, f),
        Term::Add(l, r) | Term::Sub(l, r) | Term::Mul(l, r) | Term::Div(l, r) => {
            visit_vars(l, f);
            visit_vars(r, f);
        }
    }
}

fn negated(rel: Relation) -> Relation {
    match rel {
        Relation::Le => Relation::Gt,
        Relation::Lt => Relation::Ge,
        Relation::Ge => Relation::Lt,
        Relation::Gt => Relation::Le,
        Relation::Eq => Relation::Eq,
    }
}

/// An atom true at the planted point, possibly disguised.
fn true_assertion<R: Rng + ?Sized>(rng: &mut R, cx: &Ctx, opts: &GenOptions) -> String {
    let fmt = *cx.formats.choose(rng).expect("at least one variable");
    let (t, v) = planted_term(rng, cx, fmt, opts.max_depth);
    let (rel, rhs) = if rng.random_bool(0.3) {
        let (u, w) = planted_term(rng, cx, fmt, opts.max_depth);
        let rel = if t.format() == u.format() && v.ieee_eq(w) {
            *[Relation::Eq, Relation::Le, Relation::Ge].choose(rng).expect("non-empty")
        } else if v.to_f64() < w.to_f64() {
            *[Relation::Lt, Relation::Le].choose(rng).expect("non-empty")
        } else {
            *[Relation::Gt, Relation::Ge].choose(rng).expect("non-empty")
        };
        (rel, u)
    } else {
        let k: i128 = rng.random_range(0..4);
        let (rel, c) = match rng.random_range(0..5) {
            0 => (Relation::Eq, v),
            1 => (Relation::Le, n_ulp(k, v)),
            2 => (Relation::Lt, n_ulp(k + 1, v)),
            3 => (Relation::Ge, n_ulp(-k, v)),
            _ => (Relation::Gt, n_ulp(-k - 1, v)),
        };
        (rel, Term::constant(c))
    };
    let plain = atom_text(&t, rel, &rhs);
    match rng.random_range(0..6) {
        0 if rel != Relation::Eq => format!("(not {})", atom_text(&t, negated(rel), &rhs)),
        1 if rel == Relation::Eq => format!(
            "(and {} {})",
            atom_text(&t, Relation::Le, &rhs),
            atom_text(&t, Relation::Ge, &rhs)
        ),
        2 => {
            let other = random_atom(rng, cx, opts);
            if rng.random::<bool>() {
                format!("(or {plain} {other})")
            } else {
                format!("(or {other} {plain})")
            }
        }
        3 => format!("(=> {} {plain})", random_atom(rng, cx, opts)),
        4 => format!(
            "(let ((tmp {})) ({} tmp {}))",
            text(&t),
            rel.smt_symbol(),
            text(&rhs)
        ),
        _ => plain,
    }
}

fn random_atom<R: Rng + ?Sized>(rng: &mut R, cx: &Ctx, opts: &GenOptions) -> String {
    let fmt = *cx.formats.choose(rng).expect("at least one variable");
    let l = random_term(rng, cx, fmt, opts.max_depth);
    let r = random_term(rng, cx, fmt, opts.max_depth);
    let rel = *[Relation::Eq, Relation::Le, Relation::Lt, Relation::Ge, Relation::Gt]
        .choose(rng)
        .expect("non-empty");
    atom_text(&l, rel, &r)
}

fn context<R: Rng + ?Sized>(rng: &mut R, opts: &GenOptions) -> Ctx {
    let n = rng.random_range(1..=opts.max_vars.max(1));
    let formats: Vec<FpFormat> = (0..n)
        .map(|_| if rng.random_bool(opts.binary32_share) { FpFormat::Binary32 } else { FpFormat::Binary64 })
        .collect();
    let values = formats.iter().map(|&f| random_value(rng, f)).collect();
    Ctx { formats, values }
}

fn script(cx: &Ctx, asserts: &[String]) -> String {
    let mut s = String::from("(set-logic QF_FP)\n");
    for (i, f) in cx.formats.iter().enumerate() {
        s.push_str(&format!("(declare-fun v{i} () {})\n", sort(*f)));
    }
    for a in asserts {
        s.push_str(&format!("(assert {a})\n"));
    }
    s.push_str("(check-sat)\n");
    s
}

/// A formula satisfied by a random planted assignment.
pub fn planted_sat<R: Rng + ?Sized>(rng: &mut R, opts: &GenOptions) -> Generated {
    let cx = context(rng, opts);
    let m = rng.random_range(1..=opts.max_atoms.max(1));
    let asserts: Vec<String> = (0..m).map(|_| true_assertion(rng, &cx, opts)).collect();
    Generated { source: script(&cx, &asserts), planted: Some(cx.values.clone()), expected: Expected::Sat }
}

/// A formula containing a contradiction that no assignment satisfies,
/// padded with assertions true at a random point.
pub fn contradiction<R: Rng + ?Sized>(rng: &mut R, opts: &GenOptions) -> Generated {
    let cx = context(rng, opts);
    let fmt = *cx.formats.choose(rng).expect("at least one variable");
    let (t, v) = planted_term(rng, &cx, fmt, opts.max_depth);
    let c = if rng.random_bool(0.5) { v } else { random_value(rng, fmt) };
    let tc = Term::constant(c);
    let core: Vec<String> = match rng.random_range(0..5) {
        0 => vec![atom_text(&t, Relation::Lt, &tc), atom_text(&t, Relation::Gt, &tc)],
        1 => vec![atom_text(&t, Relation::Lt, &tc), format!("(not {})", atom_text(&t, Relation::Lt, &tc))],
        2 => {
            // t <= lo and t >= hi with lo strictly below hi; step away from
            // whichever end of the range could clamp the offset.
            let k = rng.random_range(1..5);
            let (lo, hi) = if c.to_f64() > 0.0 { (n_ulp(-k, c), c) } else { (c, n_ulp(k, c)) };
            vec![
                atom_text(&t, Relation::Le, &Term::constant(lo)),
                atom_text(&t, Relation::Ge, &Term::constant(hi)),
            ]
        }
        3 => {
            let u = random_term(rng, &cx, fmt, opts.max_depth);
            vec![atom_text(&t, Relation::Lt, &u), atom_text(&u, Relation::Lt, &t)]
        }
        _ => {
            let zero = Term::constant(FpScalar::round_from_f64(0.0, fmt));
            vec![atom_text(&Term::mul(t.clone(), t.clone()), Relation::Lt, &zero)]
        }
    };
    let pad = rng.random_range(0..opts.max_atoms.max(1));
    let mut asserts: Vec<String> = (0..pad).map(|_| true_assertion(rng, &cx, opts)).collect();
    for a in core {
        let at = rng.random_range(0..=asserts.len());
        asserts.insert(at, a);
    }
    Generated { source: script(&cx, &asserts), planted: None, expected: Expected::Unsat }
}
