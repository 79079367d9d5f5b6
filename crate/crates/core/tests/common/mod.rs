//! Reference IEEE-754 evaluator over exact rationals.
//!
//! Reads SMT-LIB text on its own (it shares no code with the crate) and
//! evaluates assertions under an assignment given as a `(model ...)` block.
//! Every arithmetic result is computed exactly and then rounded to nearest,
//! ties to even, by integer arithmetic.

#![allow(dead_code)]

use std::cell::Cell;
use std::collections::HashMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

#[derive(Debug, Clone, PartialEq)]
pub enum Sx {
    Atom(String),
    List(Vec<Sx>),
}

pub fn read(src: &str) -> Vec<Sx> {
    let chars: Vec<char> = src.chars().collect();
    let mut i = 0;
    let mut stack: Vec<Vec<Sx>> = vec![Vec::new()];
    while i < chars.len() {
        let c = chars[i];
        match c {
            ';' => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
            }
            '(' => {
                stack.push(Vec::new());
                i += 1;
            }
            ')' => {
                let done = stack.pop().expect("balanced");
                stack.last_mut().expect("balanced").push(Sx::List(done));
                i += 1;
            }
            '|' => {
                let end = i + 1 + chars[i + 1..].iter().position(|&c| c == '|').expect("closed");
                stack.last_mut().unwrap().push(Sx::Atom(chars[i + 1..end].iter().collect()));
                i = end + 1;
            }
            c if c.is_whitespace() => i += 1,
            _ => {
                let start = i;
                while i < chars.len() && !chars[i].is_whitespace() && !"();|".contains(chars[i]) {
                    i += 1;
                }
                stack.last_mut().unwrap().push(Sx::Atom(chars[start..i].iter().collect()));
            }
        }
    }
    assert_eq!(stack.len(), 1, "unbalanced input");
    stack.pop().unwrap()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Fmt {
    pub ebits: u32,
    pub sbits: u32,
}

pub const F32: Fmt = Fmt { ebits: 8, sbits: 24 };
pub const F64: Fmt = Fmt { ebits: 11, sbits: 53 };

impl Fmt {
    fn bias(self) -> i64 {
        (1i64 << (self.ebits - 1)) - 1
    }
    fn emin(self) -> i64 {
        1 - self.bias()
    }
}

/// A floating-point datum. `neg` is only meaningful for zeros and infinities.
#[derive(Debug, Clone, PartialEq)]
pub enum Val {
    Nan,
    Inf { neg: bool },
    Fin { q: BigRational, neg_zero: bool },
}

fn pow2(e: i64) -> BigRational {
    let one = BigInt::one();
    if e >= 0 {
        BigRational::from_integer(one << e as usize)
    } else {
        BigRational::new(one.clone(), one << (-e) as usize)
    }
}

impl Val {
    pub fn zero(neg: bool) -> Val {
        Val::Fin { q: BigRational::zero(), neg_zero: neg }
    }

    pub fn is_negative(&self) -> bool {
        match self {
            Val::Nan => false,
            Val::Inf { neg } => *neg,
            Val::Fin { q, neg_zero } => q.is_negative() || (q.is_zero() && *neg_zero),
        }
    }

    fn is_zero(&self) -> bool {
        matches!(self, Val::Fin { q, .. } if q.is_zero())
    }

    /// Bitwise identity of the IEEE datum (NaNs are all identical here).
    pub fn same(&self, other: &Val) -> bool {
        match (self, other) {
            (Val::Fin { q: a, .. }, Val::Fin { q: b, .. }) => a == b && self.is_negative() == other.is_negative(),
            _ => self == other,
        }
    }
}

/// Rounds a real to the format, ties to even. `neg_if_zero` is the sign a
/// zero result takes.
pub fn round(q: &BigRational, fmt: Fmt, neg_if_zero: bool) -> Val {
    if q.is_zero() {
        return Val::zero(neg_if_zero);
    }
    let neg = q.is_negative();
    let a = q.abs();
    let p = fmt.sbits as i64;
    let mut e = a.numer().bits() as i64 - a.denom().bits() as i64;
    while pow2(e) > a {
        e -= 1;
    }
    while pow2(e + 1) <= a {
        e += 1;
    }
    let mut e = e.max(fmt.emin());
    let scaled = &a * pow2(p - 1 - e);
    let floor = scaled.floor();
    let rem = &scaled - &floor;
    let mut m = floor.to_integer();
    let half = BigRational::new(BigInt::one(), BigInt::from(2));
    if rem > half || (rem == half && m.bit(0)) {
        m += 1;
    }
    if m == BigInt::one() << p as usize {
        m = BigInt::one() << (p - 1) as usize;
        e += 1;
    }
    if e > fmt.bias() {
        return Val::Inf { neg };
    }
    let v = BigRational::from_integer(m) * pow2(e - p + 1);
    if v.is_zero() {
        return Val::zero(neg);
    }
    Val::Fin { q: if neg { -v } else { v }, neg_zero: false }
}

/// Decodes `(fp #b.. #b.. #b..)` field strings.
pub fn decode(sign: &str, exp: &str, frac: &str) -> (Val, Fmt) {
    let fmt = Fmt { ebits: exp.len() as u32, sbits: frac.len() as u32 + 1 };
    let neg = sign == "1";
    let e = i64::from_str_radix(exp, 2).unwrap();
    let f = BigInt::parse_bytes(frac.as_bytes(), 2).unwrap_or_default();
    let all_ones = (1i64 << fmt.ebits) - 1;
    let val = if e == all_ones {
        if f.is_zero() {
            Val::Inf { neg }
        } else {
            Val::Nan
        }
    } else {
        let p = fmt.sbits as i64;
        let (m, ex) = if e == 0 { (f, fmt.emin()) } else { (f + (BigInt::one() << (p - 1) as usize), e - fmt.bias()) };
        let q = BigRational::from_integer(m) * pow2(ex - p + 1);
        if q.is_zero() {
            Val::zero(neg)
        } else {
            Val::Fin { q: if neg { -q } else { q }, neg_zero: false }
        }
    };
    (val, fmt)
}

fn add(x: &Val, y: &Val, fmt: Fmt) -> Val {
    match (x, y) {
        (Val::Nan, _) | (_, Val::Nan) => Val::Nan,
        (Val::Inf { neg: a }, Val::Inf { neg: b }) => {
            if a == b {
                x.clone()
            } else {
                Val::Nan
            }
        }
        (Val::Inf { .. }, _) => x.clone(),
        (_, Val::Inf { .. }) => y.clone(),
        (Val::Fin { q: a, .. }, Val::Fin { q: b, .. }) => {
            let both_neg_zero = x.is_zero() && y.is_zero() && x.is_negative() && y.is_negative();
            round(&(a + b), fmt, both_neg_zero)
        }
    }
}

fn neg(x: &Val) -> Val {
    match x {
        Val::Nan => Val::Nan,
        Val::Inf { neg } => Val::Inf { neg: !neg },
        Val::Fin { q, neg_zero } => Val::Fin { q: -q.clone(), neg_zero: q.is_zero() && !neg_zero },
    }
}

fn mul(x: &Val, y: &Val, fmt: Fmt) -> Val {
    let s = x.is_negative() != y.is_negative();
    match (x, y) {
        (Val::Nan, _) | (_, Val::Nan) => Val::Nan,
        (Val::Inf { .. }, _) | (_, Val::Inf { .. }) => {
            if x.is_zero() || y.is_zero() {
                Val::Nan
            } else {
                Val::Inf { neg: s }
            }
        }
        (Val::Fin { q: a, .. }, Val::Fin { q: b, .. }) => round(&(a * b), fmt, s),
    }
}

fn div(x: &Val, y: &Val, fmt: Fmt) -> Val {
    let s = x.is_negative() != y.is_negative();
    match (x, y) {
        (Val::Nan, _) | (_, Val::Nan) => Val::Nan,
        (Val::Inf { .. }, Val::Inf { .. }) => Val::Nan,
        (Val::Inf { .. }, _) => Val::Inf { neg: s },
        (_, Val::Inf { .. }) => Val::zero(s),
        (Val::Fin { q: a, .. }, Val::Fin { q: b, .. }) => {
            if b.is_zero() {
                if a.is_zero() {
                    Val::Nan
                } else {
                    Val::Inf { neg: s }
                }
            } else {
                round(&(a / b), fmt, s)
            }
        }
    }
}

/// Extended-real key for comparisons; `None` for NaN.
fn key(v: &Val) -> Option<(i8, BigRational)> {
    match v {
        Val::Nan => None,
        Val::Inf { neg: true } => Some((-1, BigRational::zero())),
        Val::Inf { neg: false } => Some((1, BigRational::zero())),
        Val::Fin { q, .. } => Some((0, q.clone())),
    }
}

thread_local! {
    static SAW_NAN: Cell<bool> = const { Cell::new(false) };
}

fn compare(op: &str, x: &Val, y: &Val) -> bool {
    let (Some(a), Some(b)) = (key(x), key(y)) else {
        SAW_NAN.with(|c| c.set(true));
        return false;
    };
    let ord = a.cmp(&b);
    match op {
        "fp.eq" => ord.is_eq(),
        "fp.lt" => ord.is_lt(),
        "fp.leq" => ord.is_le(),
        "fp.gt" => ord.is_gt(),
        "fp.geq" => ord.is_ge(),
        _ => unreachable!(),
    }
}

fn parse_real(s: &Sx) -> BigRational {
    match s {
        Sx::List(items) if items.len() == 2 && items[0] == Sx::Atom("-".into()) => -parse_real(&items[1]),
        Sx::Atom(t) => {
            let (neg, t) = match t.strip_prefix('-') {
                Some(r) => (true, r),
                None => (false, t.as_str()),
            };
            let (int, frac) = t.split_once('.').unwrap_or((t, ""));
            let digits = format!("{int}{frac}");
            let n = BigInt::parse_bytes(digits.as_bytes(), 10).expect("decimal literal");
            let d = num_traits::pow(BigInt::from(10), frac.len());
            let q = BigRational::new(n, d);
            if neg {
                -q
            } else {
                q
            }
        }
        other => panic!("unsupported real {other:?}"),
    }
}

fn sort_fmt(s: &Sx) -> Fmt {
    match s {
        Sx::Atom(a) if a == "Float32" => F32,
        Sx::Atom(a) if a == "Float64" => F64,
        Sx::List(v) if v.len() == 4 => match (&v[2], &v[3]) {
            (Sx::Atom(e), Sx::Atom(m)) => Fmt { ebits: e.parse().unwrap(), sbits: m.parse().unwrap() },
            _ => panic!("bad sort"),
        },
        other => panic!("unsupported sort {other:?}"),
    }
}

#[derive(Debug, Clone)]
enum Bound {
    F(Val, Fmt),
    B(bool),
}

/// Declarations and assertions of a script.
pub struct Script {
    pub decls: Vec<(String, Fmt)>,
    pub asserts: Vec<Sx>,
}

impl Script {
    pub fn new(src: &str) -> Script {
        let mut decls = Vec::new();
        let mut asserts = Vec::new();
        for cmd in read(src) {
            let Sx::List(items) = cmd else { continue };
            match &items[0] {
                Sx::Atom(h) if h == "declare-fun" || h == "declare-const" => {
                    let Sx::Atom(name) = &items[1] else { panic!() };
                    decls.push((name.clone(), sort_fmt(items.last().unwrap())));
                }
                Sx::Atom(h) if h == "assert" => asserts.push(items[1].clone()),
                _ => {}
            }
        }
        Script { decls, asserts }
    }

    /// Parses a `(model (define-fun name () sort literal) ...)` block.
    pub fn model(&self, text: &str) -> HashMap<String, Val> {
        let mut out = HashMap::new();
        for top in read(text) {
            let Sx::List(items) = top else { continue };
            for def in &items[1..] {
                let Sx::List(d) = def else { continue };
                let Sx::Atom(name) = &d[1] else { panic!() };
                let (v, _) = literal(&d[4]).expect("fp literal");
                out.insert(name.clone(), v);
            }
        }
        out
    }

    /// Whether every assertion holds under the model text.
    pub fn holds(&self, model_text: &str) -> bool {
        let m = self.model(model_text);
        let mut env = HashMap::new();
        for (name, fmt) in &self.decls {
            let v = m.get(name).unwrap_or_else(|| panic!("model lacks {name}"));
            env.insert(name.clone(), Bound::F(v.clone(), *fmt));
        }
        self.asserts.iter().all(|a| boolean(a, &env))
    }

    /// Like [`Script::holds`], also reporting whether any comparison had a
    /// NaN operand.
    pub fn holds_traced(&self, model_text: &str) -> (bool, bool) {
        SAW_NAN.with(|c| c.set(false));
        let m = self.model(model_text);
        let mut env = HashMap::new();
        for (name, fmt) in &self.decls {
            env.insert(name.clone(), Bound::F(m[name].clone(), *fmt));
        }
        // Evaluate every assertion so the NaN trace covers all of them.
        let all = self.asserts.iter().fold(true, |acc, a| boolean_full(a, &env) && acc);
        (all, SAW_NAN.with(|c| c.get()))
    }

    /// Evaluates a term given as text under a model.
    pub fn term(&self, term: &str, model_text: &str) -> (Val, Fmt) {
        let m = self.model(model_text);
        let mut env = HashMap::new();
        for (name, fmt) in &self.decls {
            if let Some(v) = m.get(name) {
                env.insert(name.clone(), Bound::F(v.clone(), *fmt));
            }
        }
        float(&read(term)[0], &env)
    }
}

fn literal(s: &Sx) -> Option<(Val, Fmt)> {
    let Sx::List(v) = s else { return None };
    match v.as_slice() {
        [Sx::Atom(h), Sx::Atom(a), Sx::Atom(b), Sx::Atom(c)] if h == "fp" => {
            Some(decode(a.strip_prefix("#b")?, b.strip_prefix("#b")?, c.strip_prefix("#b")?))
        }
        _ => None,
    }
}

fn float(s: &Sx, env: &HashMap<String, Bound>) -> (Val, Fmt) {
    if let Some(l) = literal(s) {
        return l;
    }
    match s {
        Sx::Atom(name) => match env.get(name) {
            Some(Bound::F(v, f)) => (v.clone(), *f),
            other => panic!("unbound float {name}: {other:?}"),
        },
        Sx::List(items) => {
            let head = &items[0];
            if let Sx::List(ix) = head {
                // ((_ to_fp e s) RNE real)
                let fmt = Fmt {
                    ebits: match &ix[2] {
                        Sx::Atom(e) => e.parse().unwrap(),
                        _ => panic!(),
                    },
                    sbits: match &ix[3] {
                        Sx::Atom(m) => m.parse().unwrap(),
                        _ => panic!(),
                    },
                };
                let q = parse_real(&items[2]);
                return (round(&q, fmt, false), fmt);
            }
            let Sx::Atom(op) = head else { unreachable!() };
            match op.as_str() {
                "_" => {
                    let Sx::Atom(which) = &items[1] else { panic!() };
                    let fmt = Fmt {
                        ebits: match &items[2] {
                            Sx::Atom(e) => e.parse().unwrap(),
                            _ => panic!(),
                        },
                        sbits: match &items[3] {
                            Sx::Atom(m) => m.parse().unwrap(),
                            _ => panic!(),
                        },
                    };
                    let v = match which.as_str() {
                        "+zero" => Val::zero(false),
                        "-zero" => Val::zero(true),
                        "+oo" => Val::Inf { neg: false },
                        "-oo" => Val::Inf { neg: true },
                        "NaN" => Val::Nan,
                        w => panic!("unsupported constant {w}"),
                    };
                    (v, fmt)
                }
                "fp.neg" => {
                    let (x, f) = float(&items[1], env);
                    (neg(&x), f)
                }
                "fp.add" | "fp.sub" | "fp.mul" | "fp.div" => {
                    let (x, f) = float(&items[2], env);
                    let (y, g) = float(&items[3], env);
                    assert_eq!(f, g, "mixed formats");
                    let v = match op.as_str() {
                        "fp.add" => add(&x, &y, f),
                        "fp.sub" => add(&x, &neg(&y), f),
                        "fp.mul" => mul(&x, &y, f),
                        _ => div(&x, &y, f),
                    };
                    (v, f)
                }
                "let" => {
                    let env = bind(&items[1], env);
                    float(&items[2], &env)
                }
                other => panic!("unsupported float op {other}"),
            }
        }
    }
}

fn bind(bindings: &Sx, env: &HashMap<String, Bound>) -> HashMap<String, Bound> {
    let Sx::List(bs) = bindings else { panic!() };
    let mut out = env.clone();
    for b in bs {
        let Sx::List(pair) = b else { panic!() };
        let Sx::Atom(name) = &pair[0] else { panic!() };
        let value = if is_boolean(&pair[1], env) {
            Bound::B(boolean(&pair[1], env))
        } else {
            let (v, f) = float(&pair[1], env);
            Bound::F(v, f)
        };
        out.insert(name.clone(), value);
    }
    out
}

fn is_boolean(s: &Sx, env: &HashMap<String, Bound>) -> bool {
    match s {
        Sx::Atom(a) => a == "true" || a == "false" || matches!(env.get(a), Some(Bound::B(_))),
        Sx::List(items) => match &items[0] {
            Sx::Atom(h) => matches!(
                h.as_str(),
                "and" | "or" | "not" | "=>" | "fp.eq" | "fp.lt" | "fp.leq" | "fp.gt" | "fp.geq"
            ),
            _ => false,
        },
    }
}

/// Boolean evaluation without short-circuiting.
fn boolean_full(s: &Sx, env: &HashMap<String, Bound>) -> bool {
    if let Sx::List(items) = s {
        if let Sx::Atom(op) = &items[0] {
            match op.as_str() {
                "and" => return items[1..].iter().fold(true, |acc, c| boolean_full(c, env) && acc),
                "or" => return items[1..].iter().fold(false, |acc, c| boolean_full(c, env) || acc),
                "not" => return !boolean_full(&items[1], env),
                "=>" => {
                    let a = boolean_full(&items[1], env);
                    let b = boolean_full(&items[2], env);
                    return !a || b;
                }
                _ => {}
            }
        }
    }
    boolean(s, env)
}

fn boolean(s: &Sx, env: &HashMap<String, Bound>) -> bool {
    match s {
        Sx::Atom(a) => match a.as_str() {
            "true" => true,
            "false" => false,
            _ => match env.get(a) {
                Some(Bound::B(b)) => *b,
                other => panic!("unbound boolean {a}: {other:?}"),
            },
        },
        Sx::List(items) => {
            let Sx::Atom(op) = &items[0] else { panic!() };
            match op.as_str() {
                "and" => items[1..].iter().all(|c| boolean(c, env)),
                "or" => items[1..].iter().any(|c| boolean(c, env)),
                "not" => !boolean(&items[1], env),
                "=>" => !boolean(&items[1], env) || boolean(&items[2], env),
                "let" => {
                    let env = bind(&items[1], env);
                    boolean(&items[2], &env)
                }
                "fp.eq" | "fp.lt" | "fp.leq" | "fp.gt" | "fp.geq" => {
                    let vals: Vec<Val> = items[1..].iter().map(|t| float(t, env).0).collect();
                    vals.windows(2).all(|w| compare(op, &w[0], &w[1]))
                }
                other => panic!("unsupported boolean op {other}"),
            }
        }
    }
}
