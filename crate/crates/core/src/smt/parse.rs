use std::collections::HashMap;

use crate::lattice::{FpFormat, FpScalar, Relation};

use super::normalize::{normalize, BoolExpr, NormalizeOptions};
use super::sexpr::{read_all, Sexp};
use super::{Atom, Formula, FrontendError, Pos, ScriptInfo, Term, Variable};

#[derive(Debug, Clone, Copy, Default)]
pub struct ParseOptions {
    pub normalize: NormalizeOptions,
}

/// Parses an SMT-LIB 2 QF_FP script and normalizes its assertions.
pub fn parse(source: &str) -> Result<Formula, FrontendError> {
    parse_with(source, ParseOptions::default())
}

pub fn parse_with(source: &str, opts: ParseOptions) -> Result<Formula, FrontendError> {
    let mut st = Script::default();
    for cmd in read_all(source)? {
        st.command(&cmd)?;
    }
    let root = BoolExpr::And(st.asserts);
    let mut formula = normalize(&root, st.variables, opts.normalize)?;
    formula.info = st.info;
    Ok(formula)
}

#[derive(Debug, Clone)]
enum Value {
    Fp(Term),
    Bool(BoolExpr),
    RoundingMode,
}

#[derive(Default)]
struct Script {
    variables: Vec<Variable>,
    var_index: HashMap<String, usize>,
    defines: HashMap<String, Value>,
    scopes: Vec<HashMap<String, Value>>,
    asserts: Vec<BoolExpr>,
    info: ScriptInfo,
}

fn syntax(pos: Pos, message: impl Into<String>) -> FrontendError {
    FrontendError::Syntax { pos, message: message.into() }
}

fn unsupported(pos: Pos, symbol: impl Into<String>) -> FrontendError {
    FrontendError::Unsupported { pos, symbol: symbol.into() }
}

fn type_error(pos: Pos, message: impl Into<String>) -> FrontendError {
    FrontendError::Type { pos, message: message.into() }
}

const UNSUPPORTED_ROUNDING: &[&str] = &[
    "RNA",
    "RTP",
    "RTN",
    "RTZ",
    "roundNearestTiesToAway",
    "roundTowardPositive",
    "roundTowardNegative",
    "roundTowardZero",
];

fn atom_of(e: &Sexp) -> Result<&str, FrontendError> {
    e.as_atom().ok_or_else(|| syntax(e.pos(), "expected a symbol"))
}

fn parse_numeral(e: &Sexp) -> Result<u32, FrontendError> {
    atom_of(e)?
        .parse()
        .map_err(|_| syntax(e.pos(), "expected a numeral"))
}

fn parse_format(e_bits: &Sexp, s_bits: &Sexp) -> Result<FpFormat, FrontendError> {
    let (e, s) = (parse_numeral(e_bits)?, parse_numeral(s_bits)?);
    FpFormat::from_widths(e, s)
        .ok_or_else(|| unsupported(e_bits.pos(), format!("(_ FloatingPoint {e} {s})")))
}

fn parse_sort(e: &Sexp) -> Result<FpFormat, FrontendError> {
    match e {
        Sexp::Atom(s, pos) => match s.as_str() {
            "Float32" => Ok(FpFormat::Binary32),
            "Float64" => Ok(FpFormat::Binary64),
            other => Err(unsupported(*pos, other)),
        },
        Sexp::List(items, pos) => match items.as_slice() {
            [u, fp, e_bits, s_bits]
                if u.as_atom() == Some("_") && fp.as_atom() == Some("FloatingPoint") =>
            {
                parse_format(e_bits, s_bits)
            }
            _ => Err(unsupported(*pos, "sort")),
        },
    }
}

/// Bits of a `#b...` or `#x...` literal plus its width.
fn parse_bits(e: &Sexp) -> Result<(u64, u32), FrontendError> {
    let s = atom_of(e)?;
    let bad = || syntax(e.pos(), format!("malformed bit-vector literal `{s}`"));
    if let Some(b) = s.strip_prefix("#b") {
        if b.is_empty() || b.len() > 64 {
            return Err(bad());
        }
        Ok((u64::from_str_radix(b, 2).map_err(|_| bad())?, b.len() as u32))
    } else if let Some(h) = s.strip_prefix("#x") {
        if h.is_empty() || h.len() > 16 {
            return Err(bad());
        }
        Ok((u64::from_str_radix(h, 16).map_err(|_| bad())?, 4 * h.len() as u32))
    } else {
        Err(bad())
    }
}

fn is_decimal(s: &str) -> bool {
    let digits = s.strip_prefix('-').unwrap_or(s);
    !digits.is_empty()
        && digits.chars().all(|c| c.is_ascii_digit() || c == '.')
        && digits.chars().filter(|&c| c == '.').count() <= 1
        && !digits.starts_with('.')
        && !digits.ends_with('.')
}

/// Correctly rounded (RNE) conversion of a decimal literal.
fn decimal_to_fp(s: &str, format: FpFormat) -> Option<FpScalar> {
    if !is_decimal(s) {
        return None;
    }
    match format {
        FpFormat::Binary32 => s.parse::<f32>().ok().map(FpScalar::from_f32),
        FpFormat::Binary64 => s.parse::<f64>().ok().map(FpScalar::from_f64),
    }
}

impl Script {
    fn command(&mut self, cmd: &Sexp) -> Result<(), FrontendError> {
        let Sexp::List(items, pos) = cmd else {
            return Err(syntax(cmd.pos(), "expected a command"));
        };
        let Some(head) = items.first() else {
            return Err(syntax(*pos, "empty command"));
        };
        let args = &items[1..];
        match atom_of(head)? {
            "set-logic" => {
                let [logic] = args else {
                    return Err(syntax(*pos, "set-logic takes one argument"));
                };
                self.info.logic = Some(atom_of(logic)?.to_string());
            }
            "set-info" | "set-option" | "get-info" | "get-value" | "echo" => {}
            "check-sat" => self.info.check_sat = true,
            "get-model" => self.info.get_model = true,
            "exit" => self.info.exit = true,
            "declare-const" => {
                let [name, sort] = args else {
                    return Err(syntax(*pos, "declare-const takes a name and a sort"));
                };
                self.declare(name, sort)?;
            }
            "declare-fun" => {
                let [name, params, sort] = args else {
                    return Err(syntax(*pos, "declare-fun takes a name, parameters and a sort"));
                };
                match params {
                    Sexp::List(p, _) if p.is_empty() => self.declare(name, sort)?,
                    _ => return Err(unsupported(params.pos(), "declare-fun with parameters")),
                }
            }
            "define-fun" => {
                let [name, params, sort, body] = args else {
                    return Err(syntax(*pos, "define-fun takes a name, parameters, a sort and a body"));
                };
                if !matches!(params, Sexp::List(p, _) if p.is_empty()) {
                    return Err(unsupported(params.pos(), "define-fun with parameters"));
                }
                let name = atom_of(name)?.to_string();
                let value = self.value(body)?;
                match (&value, sort.as_atom()) {
                    (Value::Bool(_), Some("Bool")) => {}
                    (Value::Fp(t), _) if parse_sort(sort)? == t.format() => {}
                    _ => return Err(type_error(body.pos(), format!("body of `{name}` does not match its sort"))),
                }
                self.defines.insert(name, value);
            }
            "assert" => {
                let [body] = args else {
                    return Err(syntax(*pos, "assert takes one argument"));
                };
                let e = self.boolean(body)?;
                self.asserts.push(e);
            }
            other => return Err(unsupported(head.pos(), other)),
        }
        Ok(())
    }

    fn declare(&mut self, name: &Sexp, sort: &Sexp) -> Result<(), FrontendError> {
        let n = atom_of(name)?.to_string();
        if let Some("Bool") = sort.as_atom() {
            return Err(unsupported(sort.pos(), "Bool variables"));
        }
        let format = parse_sort(sort)?;
        if self.var_index.contains_key(&n) || self.defines.contains_key(&n) {
            return Err(type_error(name.pos(), format!("`{n}` is already declared")));
        }
        self.var_index.insert(n.clone(), self.variables.len());
        self.variables.push(Variable { name: n, format });
        Ok(())
    }

    fn lookup(&self, name: &str) -> Option<Value> {
        for scope in self.scopes.iter().rev() {
            if let Some(v) = scope.get(name) {
                return Some(v.clone());
            }
        }
        if let Some(v) = self.defines.get(name) {
            return Some(v.clone());
        }
        self.var_index.get(name).map(|&i| Value::Fp(Term::var(i, self.variables[i].format)))
    }

    fn fp(&mut self, e: &Sexp) -> Result<Term, FrontendError> {
        match self.value(e)? {
            Value::Fp(t) => Ok(t),
            _ => Err(type_error(e.pos(), "expected a floating-point term")),
        }
    }

    fn boolean(&mut self, e: &Sexp) -> Result<BoolExpr, FrontendError> {
        match self.value(e)? {
            Value::Bool(b) => Ok(b),
            _ => Err(type_error(e.pos(), "expected a Boolean term")),
        }
    }

    fn rounding_mode(&mut self, e: &Sexp) -> Result<(), FrontendError> {
        match self.value(e)? {
            Value::RoundingMode => Ok(()),
            _ => Err(type_error(e.pos(), "expected a rounding mode")),
        }
    }

    fn same_format(pos: Pos, l: &Term, r: &Term) -> Result<(), FrontendError> {
        if l.format() != r.format() {
            return Err(type_error(
                pos,
                format!("operands have different formats: {} vs {}", l.format(), r.format()),
            ));
        }
        Ok(())
    }

    fn value(&mut self, e: &Sexp) -> Result<Value, FrontendError> {
        match e {
            Sexp::Atom(s, pos) => self.symbol(s, *pos),
            Sexp::List(items, pos) => {
                let Some(head) = items.first() else {
                    return Err(syntax(*pos, "empty application"));
                };
                let args = &items[1..];
                match head {
                    Sexp::List(..) => self.indexed_application(head, args, *pos),
                    Sexp::Atom(h, hpos) if h == "_" => self.indexed_constant(args, *hpos),
                    Sexp::Atom(h, hpos) => self.application(h, *hpos, args, *pos),
                }
            }
        }
    }

    fn symbol(&mut self, s: &str, pos: Pos) -> Result<Value, FrontendError> {
        match s {
            "true" => Ok(Value::Bool(BoolExpr::Const(true))),
            "false" => Ok(Value::Bool(BoolExpr::Const(false))),
            "RNE" | "roundNearestTiesToEven" => Ok(Value::RoundingMode),
            _ if UNSUPPORTED_ROUNDING.contains(&s) => Err(unsupported(pos, s)),
            _ => self
                .lookup(s)
                .ok_or_else(|| type_error(pos, format!("unknown symbol `{s}`"))),
        }
    }

    /// `(_ +zero e s)` and friends.
    fn indexed_constant(&mut self, args: &[Sexp], pos: Pos) -> Result<Value, FrontendError> {
        let [name, e_bits, s_bits] = args else {
            let sym = args.first().and_then(Sexp::as_atom).unwrap_or("_");
            return Err(unsupported(pos, sym));
        };
        let sym = atom_of(name)?;
        let format = match sym {
            "+zero" | "-zero" | "+oo" | "-oo" | "NaN" => parse_format(e_bits, s_bits)?,
            other => return Err(unsupported(name.pos(), other)),
        };
        let v = match sym {
            "+zero" => 0.0,
            "-zero" => -0.0,
            "+oo" => f64::INFINITY,
            "-oo" => f64::NEG_INFINITY,
            _ => f64::NAN,
        };
        Ok(Value::Fp(Term::Const(FpScalar::round_from_f64(v, format))))
    }

    /// `((_ to_fp e s) ...)`.
    fn indexed_application(&mut self, head: &Sexp, args: &[Sexp], pos: Pos) -> Result<Value, FrontendError> {
        let Sexp::List(idx, hpos) = head else { unreachable!() };
        let format = match idx.as_slice() {
            [u, op, e_bits, s_bits] if u.as_atom() == Some("_") && op.as_atom() == Some("to_fp") => {
                parse_format(e_bits, s_bits)?
            }
            [u, op, ..] if u.as_atom() == Some("_") => {
                return Err(unsupported(op.pos(), atom_of(op)?));
            }
            _ => return Err(syntax(*hpos, "malformed indexed identifier")),
        };
        match args {
            [bv] => {
                let (bits, width) = parse_bits(bv)?;
                if width != format.width() {
                    return Err(type_error(bv.pos(), "bit-vector width does not match the format"));
                }
                Ok(Value::Fp(Term::Const(FpScalar::from_bits(bits, format))))
            }
            [rm, arg] => {
                self.rounding_mode(rm)?;
                self.to_fp_operand(arg, format)
            }
            _ => Err(syntax(pos, "to_fp takes one or two arguments")),
        }
    }

    fn to_fp_operand(&mut self, arg: &Sexp, format: FpFormat) -> Result<Value, FrontendError> {
        if let Some(s) = arg.as_atom() {
            if let Some(c) = decimal_to_fp(s, format) {
                return Ok(Value::Fp(Term::Const(c)));
            }
        }
        if let Sexp::List(items, _) = arg {
            if let [minus, lit] = items.as_slice() {
                if minus.as_atom() == Some("-") {
                    if let Some(c) = lit.as_atom().and_then(|s| decimal_to_fp(s, format)) {
                        let sign = 1u64 << (format.width() - 1);
                        return Ok(Value::Fp(Term::Const(FpScalar::from_bits(c.bits() ^ sign, format))));
                    }
                }
            }
        }
        // Constant floating-point operands are converted at parse time.
        match self.value(arg) {
            Ok(Value::Fp(Term::Const(c))) => Ok(Value::Fp(Term::Const(FpScalar::round_from_f64(c.to_f64(), format)))),
            Ok(Value::Fp(_)) => Err(unsupported(arg.pos(), "to_fp of a non-constant term")),
            Ok(_) => Err(type_error(arg.pos(), "to_fp expects a real literal or a floating-point constant")),
            Err(FrontendError::Type { .. }) => Err(unsupported(arg.pos(), "to_fp operand")),
            Err(e) => Err(e),
        }
    }

    fn application(&mut self, head: &str, hpos: Pos, args: &[Sexp], pos: Pos) -> Result<Value, FrontendError> {
        let arity = |n: usize| {
            if args.len() == n {
                Ok(())
            } else {
                Err(syntax(pos, format!("`{head}` expects {n} arguments, got {}", args.len())))
            }
        };
        match head {
            "fp" => {
                arity(3)?;
                let (s, sw) = parse_bits(&args[0])?;
                let (e, ew) = parse_bits(&args[1])?;
                let (m, mw) = parse_bits(&args[2])?;
                if sw != 1 {
                    return Err(syntax(args[0].pos(), "sign field must be one bit"));
                }
                let format = FpFormat::from_widths(ew, mw + 1)
                    .ok_or_else(|| unsupported(pos, format!("(_ FloatingPoint {ew} {})", mw + 1)))?;
                let bits = (s << (ew + mw)) | (e << mw) | m;
                Ok(Value::Fp(Term::Const(FpScalar::from_bits(bits, format))))
            }
            "fp.neg" => {
                arity(1)?;
                Ok(Value::Fp(Term::neg(self.fp(&args[0])?)))
            }
            "fp.add" | "fp.sub" | "fp.mul" | "fp.mult" | "fp.div" => {
                arity(3)?;
                self.rounding_mode(&args[0])?;
                let l = self.fp(&args[1])?;
                let r = self.fp(&args[2])?;
                Self::same_format(pos, &l, &r)?;
                Ok(Value::Fp(match head {
                    "fp.add" => Term::add(l, r),
                    "fp.sub" => Term::sub(l, r),
                    "fp.div" => Term::div(l, r),
                    _ => Term::mul(l, r),
                }))
            }
            "fp.eq" | "fp.leq" | "fp.lt" | "fp.geq" | "fp.gt" => {
                if args.len() < 2 {
                    return Err(syntax(pos, format!("`{head}` expects at least 2 arguments")));
                }
                let rel = match head {
                    "fp.eq" => Relation::Eq,
                    "fp.leq" => Relation::Le,
                    "fp.lt" => Relation::Lt,
                    "fp.geq" => Relation::Ge,
                    _ => Relation::Gt,
                };
                let terms = args.iter().map(|a| self.fp(a)).collect::<Result<Vec<_>, _>>()?;
                let mut atoms = Vec::new();
                for w in terms.windows(2) {
                    Self::same_format(pos, &w[0], &w[1])?;
                    atoms.push(BoolExpr::Atom(Atom::new(w[0].clone(), rel, w[1].clone())));
                }
                Ok(Value::Bool(if atoms.len() == 1 { atoms.pop().unwrap() } else { BoolExpr::And(atoms) }))
            }
            "and" | "or" => {
                let parts = args.iter().map(|a| self.boolean(a)).collect::<Result<Vec<_>, _>>()?;
                Ok(Value::Bool(if head == "and" { BoolExpr::And(parts) } else { BoolExpr::Or(parts) }))
            }
            "not" => {
                arity(1)?;
                Ok(Value::Bool(BoolExpr::Not(Box::new(self.boolean(&args[0])?))))
            }
            "=>" => {
                if args.len() < 2 {
                    return Err(syntax(pos, "`=>` expects at least 2 arguments"));
                }
                // Right associative: a => b => c is a => (b => c).
                let mut parts = args.iter().map(|a| self.boolean(a)).collect::<Result<Vec<_>, _>>()?;
                let mut acc = parts.pop().unwrap();
                while let Some(p) = parts.pop() {
                    acc = BoolExpr::Or(vec![BoolExpr::Not(Box::new(p)), acc]);
                }
                Ok(Value::Bool(acc))
            }
            "let" => {
                arity(2)?;
                let Sexp::List(bindings, _) = &args[0] else {
                    return Err(syntax(args[0].pos(), "let expects a binding list"));
                };
                let mut scope = HashMap::new();
                for b in bindings {
                    let Sexp::List(pair, bpos) = b else {
                        return Err(syntax(b.pos(), "malformed let binding"));
                    };
                    let [name, value] = pair.as_slice() else {
                        return Err(syntax(*bpos, "malformed let binding"));
                    };
                    scope.insert(atom_of(name)?.to_string(), self.value(value)?);
                }
                self.scopes.push(scope);
                let body = self.value(&args[1]);
                self.scopes.pop();
                body
            }
            other => Err(unsupported(hpos, other)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smt::{is_model, Assignment};

    const HEADER: &str = "(set-logic QF_FP)\n(declare-fun x () Float64)\n(declare-fun y () (_ FloatingPoint 11 53))\n";

    fn rels(f: &Formula) -> Vec<Vec<Relation>> {
        f.clauses.iter().map(|c| c.atoms.iter().map(|a| a.rel).collect()).collect()
    }

    #[test]
    fn equality_is_one_unit_clause() {
        let f = parse(&format!("{HEADER}(assert (fp.eq x y))(check-sat)")).unwrap();
        assert_eq!(f.variables.len(), 2);
        assert_eq!(rels(&f), vec![vec![Relation::Eq]]);
        assert_eq!(f.info.logic.as_deref(), Some("QF_FP"));
        assert!(f.info.check_sat);
    }

    #[test]
    fn disjunction_is_one_clause() {
        let src = format!(
            "{HEADER}(assert (or (fp.lt x ((_ to_fp 11 53) RNE 1.5)) (fp.gt x ((_ to_fp 11 53) RNE (- 2.0)))))"
        );
        let f = parse(&src).unwrap();
        assert_eq!(rels(&f), vec![vec![Relation::Lt, Relation::Gt]]);
        let Term::Const(c) = &f.clauses[0].atoms[1].rhs else { panic!() };
        assert_eq!(c.to_f64(), -2.0);
    }

    #[test]
    fn negation_rewrites_the_atom() {
        let f = parse(&format!("{HEADER}(assert (not (fp.leq x y)))")).unwrap();
        assert_eq!(rels(&f), vec![vec![Relation::Gt]]);
    }

    #[test]
    fn literals_decode_bit_exactly() {
        let src = "(declare-const z Float32)\
            (assert (fp.eq z (fp #b0 #b01111111 #b00000000000000000000000)))\
            (assert (fp.lt z ((_ to_fp 8 24) #x40490fdb)))\
            (assert (fp.gt z (_ -zero 8 24)))";
        let f = parse(src).unwrap();
        let consts: Vec<f32> = f.constants().iter().map(|c| c.to_f32()).collect();
        assert_eq!(consts, vec![1.0, std::f32::consts::PI, -0.0]);
        let a = Assignment::new(vec![FpScalar::from_f32(1.0)]).unwrap();
        assert!(is_model(&f, &a));
    }

    #[test]
    fn decimal_conversion_rounds_per_format() {
        let src = "(declare-const z Float32)(assert (fp.eq z ((_ to_fp 8 24) RNE 0.1)))";
        let f = parse(src).unwrap();
        assert_eq!(f.constants()[0].to_f32(), 0.1f32);
        let src = format!("{HEADER}(assert (fp.eq x ((_ to_fp 11 53) RNE 0.1)))");
        assert_eq!(parse(&src).unwrap().constants()[0].to_f64(), 0.1f64);
    }

    #[test]
    fn arithmetic_and_let() {
        let src = format!(
            "{HEADER}(define-fun one () Float64 ((_ to_fp 11 53) RNE 1.0))\
             (assert (let ((s (fp.add RNE x one))) (fp.leq (fp.mul RNE s s) (fp.neg (fp.div RNE y one)))))"
        );
        let f = parse(&src).unwrap();
        assert_eq!(f.clauses.len(), 1);
        assert!(matches!(f.clauses[0].atoms[0].lhs, Term::Mul(..)));
        assert!(matches!(f.clauses[0].atoms[0].rhs, Term::Neg(..)));
    }

    #[test]
    fn chained_comparison_conjoins() {
        let f = parse(&format!("{HEADER}(assert (fp.leq x y x))")).unwrap();
        assert_eq!(rels(&f), vec![vec![Relation::Le], vec![Relation::Le]]);
    }

    #[test]
    fn other_rounding_modes_are_rejected() {
        match parse(&format!("{HEADER}(assert (fp.eq (fp.add RTZ x y) y))")) {
            Err(FrontendError::Unsupported { symbol, pos }) => {
                assert_eq!(symbol, "RTZ");
                assert_eq!(pos.line, 4);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unsupported_operations_name_the_symbol() {
        for op in ["fp.sqrt RNE x", "fp.abs x", "fp.rem x y", "fp.fma RNE x y y"] {
            match parse(&format!("{HEADER}(assert (fp.eq ({op}) y))")) {
                Err(FrontendError::Unsupported { symbol, .. }) => {
                    assert_eq!(symbol, op.split(' ').next().unwrap())
                }
                other => panic!("{op}: {other:?}"),
            }
        }
        assert!(matches!(
            parse("(push 1)"),
            Err(FrontendError::Unsupported { symbol, .. }) if symbol == "push"
        ));
    }

    #[test]
    fn format_mismatch_is_a_type_error() {
        let src = "(declare-const a Float32)(declare-const b Float64)(assert (fp.eq a b))";
        assert!(matches!(parse(src), Err(FrontendError::Type { .. })));
    }

    #[test]
    fn malformed_syntax_reports_position() {
        match parse("(declare-const a Float32)\n(assert (fp.eq a a)") {
            Err(FrontendError::Syntax { pos, .. }) => assert_eq!(pos, Pos { line: 2, col: 1 }),
            other => panic!("{other:?}"),
        }
    }
}
