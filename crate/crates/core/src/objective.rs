//! The three staged objectives.
//!
//! All of them aggregate per-literal distances the same way: product inside
//! a disjunction, sum across conjuncts. S1 measures squared real residuals
//! plus the exact squared distance to the linear-equality manifold; S2
//! measures squared ULP distances and is zero exactly on IEEE models; S3 is
//! S2 evaluated at an anchor stepped by integer ULP offsets.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use thiserror::Error;

use crate::lattice::{from_index, n_ulp, ulp_distance, FpFormat, FpScalar, Relation};
use crate::linalg::{extract_linear, Projector, DEFAULT_RANK_TOL};
use crate::smt::{eval_term_with, Assignment, Atom, Formula, Nnf};

/// S1 contribution of a literal whose sides evaluate to NaN.
pub const NAN_PENALTY: f64 = 1e300;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ObjectiveError {
    #[error("point has {got} coordinates, objective expects {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("unknown ablation flag `{0}`")]
    UnknownAblation(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectiveKind {
    S1,
    S2,
    S3,
}

/// Components that can be switched off for ablation runs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct Ablation {
    /// Skip stage 1 and start stage 2 from a sampled point.
    pub no_s1: bool,
    /// Skip the lattice refinement stage.
    pub no_s3: bool,
    /// Drop the projection term; linear equalities become plain residuals.
    pub no_projection: bool,
    /// Use |residual| in S1 instead of residual².
    pub absolute_residuals: bool,
    /// Sum literal distances inside a clause instead of multiplying them.
    pub no_clause_product: bool,
}

impl Ablation {
    pub const FLAGS: [&'static str; 5] = [
        "no_s1",
        "no_s3",
        "no_projection",
        "absolute_residuals",
        "no_clause_product",
    ];

    /// The full pipeline followed by each single-component ablation.
    pub fn study_variants() -> Vec<(String, Ablation)> {
        let mut out = vec![("full".to_string(), Ablation::default())];
        for flag in Ablation::FLAGS {
            out.push((flag.to_string(), flag.parse().expect("known flag")));
        }
        out
    }

    pub fn is_full(&self) -> bool {
        *self == Ablation::default()
    }

    fn flags(&self) -> [bool; 5] {
        [
            self.no_s1,
            self.no_s3,
            self.no_projection,
            self.absolute_residuals,
            self.no_clause_product,
        ]
    }
}

impl FromStr for Ablation {
    type Err = ObjectiveError;

    /// Comma-separated flag names; empty or `full` means no ablation.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut a = Ablation::default();
        for flag in s.split(',').map(str::trim).filter(|f| !f.is_empty() && *f != "full") {
            match flag {
                "no_s1" => a.no_s1 = true,
                "no_s3" => a.no_s3 = true,
                "no_projection" => a.no_projection = true,
                "absolute_residuals" => a.absolute_residuals = true,
                "no_clause_product" => a.no_clause_product = true,
                other => return Err(ObjectiveError::UnknownAblation(other.to_string())),
            }
        }
        Ok(a)
    }
}

impl fmt::Display for Ablation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let on: Vec<&str> = Ablation::FLAGS
            .iter()
            .zip(self.flags())
            .filter_map(|(name, set)| set.then_some(*name))
            .collect();
        if on.is_empty() {
            f.write_str("full")
        } else {
            f.write_str(&on.join(","))
        }
    }
}

/// Objective value plus the integer-exact zero flag. Only the ULP objectives
/// ever set `exact_zero`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub value: f64,
    pub exact_zero: bool,
}

fn sat_add(a: f64, b: f64) -> f64 {
    (a + b).min(f64::MAX)
}

fn sat_mul(a: f64, b: f64) -> f64 {
    if a == 0.0 || b == 0.0 {
        0.0
    } else {
        (a * b).min(f64::MAX)
    }
}

/// Per-literal distance: `(value, is_zero)`.
type Literal<'a> = dyn Fn(&Atom) -> (f64, bool) + 'a;

/// Product-in-or / sum-over-and aggregation. `sum_in_or` replaces the
/// product with a sum (zero only when every literal is zero).
fn aggregate_or(atoms: impl Iterator<Item = (f64, bool)>, sum_in_or: bool) -> (f64, bool) {
    if sum_in_or {
        atoms.fold((0.0, true), |(v, z), (lv, lz)| (sat_add(v, lv), z && lz))
    } else {
        atoms.fold((1.0, false), |(v, z), (lv, lz)| (sat_mul(v, lv), z || lz))
    }
}

fn eval_nnf(n: &Nnf, lit: &Literal<'_>, sum_in_or: bool) -> (f64, bool) {
    match n {
        Nnf::Atom(a) => lit(a),
        Nnf::And(v) => v
            .iter()
            .map(|c| eval_nnf(c, lit, sum_in_or))
            .fold((0.0, true), |(v, z), (cv, cz)| (sat_add(v, cv), z && cz)),
        Nnf::Or(v) => aggregate_or(v.iter().map(|c| eval_nnf(c, lit, sum_in_or)), sum_in_or),
    }
}

/// Real-valued residual of a literal, squared (or absolute). Strict and
/// non-strict inequalities are treated alike.
fn residual(atom: &Atom, values: &[FpScalar], absolute: bool) -> (f64, bool) {
    let l = eval_term_with(&atom.lhs, values);
    let r = eval_term_with(&atom.rhs, values);
    if l.is_nan() || r.is_nan() {
        return (NAN_PENALTY, false);
    }
    let (x, y) = (l.to_f64(), r.to_f64());
    let gap = match atom.rel {
        Relation::Eq if x == y => 0.0,
        Relation::Eq => (x - y).abs(),
        Relation::Le | Relation::Lt if x <= y => 0.0,
        Relation::Le | Relation::Lt => x - y,
        Relation::Ge | Relation::Gt if x >= y => 0.0,
        Relation::Ge | Relation::Gt => y - x,
    };
    let d = if absolute { gap } else { gap * gap };
    (d.min(f64::MAX), false)
}

/// Squared ULP distance of a literal; zero-ness is decided on the integer.
fn ulp_literal(atom: &Atom, values: &[FpScalar]) -> (f64, bool) {
    let l = eval_term_with(&atom.lhs, values);
    let r = eval_term_with(&atom.rhs, values);
    let d = ulp_distance(l, r, atom.rel);
    let df = d as f64;
    ((df * df).min(f64::MAX), d == 0)
}

/// Rounds to the nearest integer with ties going towards zero, saturating.
pub fn round_half_toward_zero(x: f64) -> i128 {
    if x.is_nan() {
        return 0;
    }
    let t = x.trunc();
    let r = if (x - t).abs() > 0.5 { t + x.signum() } else { t };
    r as i128
}

/// Rounds a search coordinate into a variable's format; NaN is rejected and
/// overflow clamps to the largest finite value.
fn snap(x: f64, format: FpFormat) -> Option<FpScalar> {
    if x.is_nan() {
        return None;
    }
    let v = FpScalar::round_from_f64(x, format);
    Some(if v.is_finite() {
        v
    } else {
        let limit = format.max_finite_index();
        from_index(crate::lattice::LatticeIndex(if x > 0.0 { limit } else { -limit }), format)
    })
}

/// An evaluatable staged objective over one formula.
#[derive(Debug, Clone)]
pub struct Objective {
    kind: ObjectiveKind,
    formula: Arc<Formula>,
    formats: Vec<FpFormat>,
    projector: Option<Projector>,
    /// S1 only: clauses evaluated as residual terms.
    residual_clauses: Vec<usize>,
    anchor: Option<Vec<FpScalar>>,
    ablation: Ablation,
}

impl Objective {
    /// Projection-aided squared-residual objective. Unit linear equalities
    /// feed the projection term; if there are none, or the Gram matrix is
    /// unusable, or projection is ablated, they stay as residuals.
    pub fn s1(formula: Arc<Formula>, ablation: Ablation) -> Objective {
        let split = extract_linear(&formula);
        let projector = if ablation.no_projection {
            None
        } else {
            Projector::new(&split.system, DEFAULT_RANK_TOL)
        };
        let residual_clauses = if projector.is_some() {
            split.remainder
        } else {
            (0..formula.clauses.len()).collect()
        };
        Objective {
            kind: ObjectiveKind::S1,
            formats: formula.formats(),
            formula,
            projector,
            residual_clauses,
            anchor: None,
            ablation,
        }
    }

    /// Squared-ULP objective over every clause.
    pub fn s2(formula: Arc<Formula>, ablation: Ablation) -> Objective {
        Objective {
            kind: ObjectiveKind::S2,
            formats: formula.formats(),
            formula,
            projector: None,
            residual_clauses: Vec::new(),
            anchor: None,
            ablation,
        }
    }

    /// S2 evaluated at `anchor` stepped by per-coordinate ULP offsets.
    pub fn s3(formula: Arc<Formula>, anchor: &Assignment, ablation: Ablation) -> Objective {
        let mut o = Objective::s2(formula, ablation);
        o.kind = ObjectiveKind::S3;
        o.anchor = Some(anchor.values().to_vec());
        o
    }

    pub fn kind(&self) -> ObjectiveKind {
        self.kind
    }

    pub fn formula(&self) -> &Arc<Formula> {
        &self.formula
    }

    pub fn projector(&self) -> Option<&Projector> {
        self.projector.as_ref()
    }

    pub fn anchor(&self) -> Option<&[FpScalar]> {
        self.anchor.as_deref()
    }

    pub fn ablation(&self) -> Ablation {
        self.ablation
    }

    pub fn dim(&self) -> usize {
        self.formats.len()
    }

    /// Replaces the S3 anchor.
    pub fn set_anchor(&mut self, anchor: Vec<FpScalar>) {
        assert_eq!(self.kind, ObjectiveKind::S3, "only S3 has an anchor");
        assert_eq!(anchor.len(), self.dim());
        self.anchor = Some(anchor);
    }

    /// Float values represented by a search point: snapped reals for S1/S2,
    /// stepped anchor for S3. `None` if a real coordinate is NaN.
    pub fn values_at(&self, x: &[f64]) -> Option<Vec<FpScalar>> {
        match &self.anchor {
            Some(anchor) => Some(
                anchor
                    .iter()
                    .zip(x)
                    .map(|(&a, &o)| n_ulp(round_half_toward_zero(o), a))
                    .collect(),
            ),
            None => self.formats.iter().zip(x).map(|(&f, &v)| snap(v, f)).collect(),
        }
    }

    /// The assignment a search point stands for.
    pub fn assignment_at(&self, x: &[f64]) -> Option<Assignment> {
        self.values_at(x).and_then(|v| Assignment::new(v).ok())
    }

    /// Evaluates a point: reals for S1/S2, ULP offsets for S3.
    pub fn evaluate(&self, x: &[f64]) -> Result<Evaluation, ObjectiveError> {
        if x.len() != self.dim() {
            return Err(ObjectiveError::Dimension { expected: self.dim(), got: x.len() });
        }
        Ok(match self.values_at(x) {
            Some(values) => self.evaluate_values(&values),
            None => Evaluation { value: f64::MAX, exact_zero: false },
        })
    }

    /// Evaluates directly at float values (no snapping or stepping).
    pub fn evaluate_values(&self, values: &[FpScalar]) -> Evaluation {
        debug_assert_eq!(values.len(), self.dim());
        let sum_in_or = self.ablation.no_clause_product && self.kind != ObjectiveKind::S1;
        let absolute = self.ablation.absolute_residuals;
        let (value, exact_zero) = match self.kind {
            ObjectiveKind::S1 => {
                let lit = |a: &Atom| residual(a, values, absolute);
                let mut total = match &self.projector {
                    Some(p) => {
                        let reals: Vec<f64> = values.iter().map(|v| v.to_f64()).collect();
                        let sq = p.sq_dist(&reals).expect("dimension checked");
                        let term = if absolute { sq.sqrt() } else { sq };
                        if term.is_nan() { f64::MAX } else { term.min(f64::MAX) }
                    }
                    None => 0.0,
                };
                for &i in &self.residual_clauses {
                    let atoms = self.formula.clauses[i].atoms.iter().map(&lit);
                    total = sat_add(total, aggregate_or(atoms, false).0);
                }
                for n in &self.formula.nnf {
                    total = sat_add(total, eval_nnf(n, &lit, false).0);
                }
                (total, false)
            }
            ObjectiveKind::S2 | ObjectiveKind::S3 => {
                let lit = |a: &Atom| ulp_literal(a, values);
                let mut total = 0.0;
                let mut zero = true;
                for clause in &self.formula.clauses {
                    let (v, z) = aggregate_or(clause.atoms.iter().map(&lit), sum_in_or);
                    total = sat_add(total, v);
                    zero &= z;
                }
                for n in &self.formula.nnf {
                    let (v, z) = eval_nnf(n, &lit, sum_in_or);
                    total = sat_add(total, v);
                    zero &= z;
                }
                (total, zero)
            }
        };
        Evaluation { value, exact_zero }
    }
}
