//! Linear-equality extraction, Moore–Penrose pseudoinverse of the Gram
//! matrix, and orthogonal projection onto `{x : A x = b}`.

use std::fmt;

use thiserror::Error;

use crate::smt::{Formula, Term};
use crate::lattice::Relation;

/// Relative eigenvalue cutoff for the pseudoinverse.
pub const DEFAULT_RANK_TOL: f64 = 1e-12;

const SYMMETRY_TOL: f64 = 1e-9;
const JACOBI_MAX_SWEEPS: usize = 100;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
}

/// Dense row-major matrix.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list()
            .entries((0..self.rows).map(|i| self.row(i)))
            .finish()
    }
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Matrix {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Matrix {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Matrix {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        Matrix {
            rows: rows.len(),
            cols,
            data: rows.iter().flatten().copied().collect(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "inner dimensions differ");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, x.len());
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Largest absolute entry of `self - other`.
    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Eigenvalues and eigenvectors (as columns) of a symmetric matrix by the
/// cyclic Jacobi method.
pub fn symmetric_eigen(g: &Matrix) -> (Vec<f64>, Matrix) {
    let n = g.rows;
    let mut a = g.clone();
    let mut v = Matrix::identity(n);
    let total: f64 = a.data.iter().map(|x| x * x).sum();
    for _ in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum();
        if off <= f64::EPSILON * f64::EPSILON * total || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| a[(i, i)]).collect(), v)
}

/// Pseudoinverse of a symmetric positive semidefinite matrix together with
/// its numerical rank. Eigenvalues at or below `tol * λ_max` count as zero.
pub fn pseudoinverse_with_rank(g: &Matrix, tol: f64) -> Result<(Matrix, usize), LinalgError> {
    if g.rows != g.cols {
        return Err(LinalgError::NotSquare { rows: g.rows, cols: g.cols });
    }
    let n = g.rows;
    let scale = g.max_abs().max(1.0);
    let asym = g.max_abs_diff(&g.transpose());
    if asym > SYMMETRY_TOL * scale || !asym.is_finite() {
        return Err(LinalgError::NotSymmetric(asym));
    }
    let (values, vectors) = symmetric_eigen(g);
    let lambda_max = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut out = Matrix::zeros(n, n);
    let mut rank = 0;
    if lambda_max == 0.0 {
        return Ok((out, 0));
    }
    for (k, &lambda) in values.iter().enumerate() {
        if lambda <= tol * lambda_max {
            continue;
        }
        rank += 1;
        for i in 0..n {
            let vi = vectors[(i, k)] / lambda;
            for j in 0..n {
                out[(i, j)] += vi * vectors[(j, k)];
            }
        }
    }
    Ok((out, rank))
}

pub fn pseudoinverse(g: &Matrix, tol: f64) -> Result<Matrix, LinalgError> {
    pseudoinverse_with_rank(g, tol).map(|(m, _)| m)
}

/// `coeffs · x + constant`, folded in real arithmetic.
#[derive(Debug, Clone, PartialEq)]
struct Affine {
    coeffs: Vec<f64>,
    constant: f64,
}

impl Affine {
    fn is_constant(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    fn scale(mut self, k: f64) -> Affine {
        self.coeffs.iter_mut().for_each(|c| *c *= k);
        self.constant *= k;
        self
    }

    fn combine(mut self, other: Affine, sign: f64) -> Affine {
        for (c, o) in self.coeffs.iter_mut().zip(other.coeffs) {
            *c += sign * o;
        }
        self.constant += sign * other.constant;
        self
    }
}

fn affine(t: &Term, d: usize) -> Option<Affine> {
    let a = match t {
        Term::Var { index, .. } => {
            let mut coeffs = vec![0.0; d];
            coeffs[*index] = 1.0;
            Affine { coeffs, constant: 0.0 }
        }
        Term::Const(c) => {
            let v = c.to_f64();
            if !v.is_finite() {
                return None;
            }
            Affine { coeffs: vec![0.0; d], constant: v }
        }
        Term::Neg(x) => affine(x, d)?.scale(-1.0),
        Term::Add(l, r) => affine(l, d)?.combine(affine(r, d)?, 1.0),
        Term::Sub(l, r) => affine(l, d)?.combine(affine(r, d)?, -1.0),
        Term::Mul(l, r) => {
            let (l, r) = (affine(l, d)?, affine(r, d)?);
            if l.is_constant() {
                r.scale(l.constant)
            } else if r.is_constant() {
                l.scale(r.constant)
            } else {
                return None;
            }
        }
        Term::Div(l, r) => {
            let (l, r) = (affine(l, d)?, affine(r, d)?);
            if !r.is_constant() || r.constant == 0.0 {
                return None;
            }
            l.scale(1.0 / r.constant)
        }
    };
    let finite = a.constant.is_finite() && a.coeffs.iter().all(|c| c.is_finite());
    finite.then_some(a)
}

/// `A x = b` over all variables of a formula.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    pub a: Matrix,
    pub b: Vec<f64>,
    /// Variables with a nonzero coefficient in some row.
    pub var_map: Vec<usize>,
}

impl LinearSystem {
    pub fn is_empty(&self) -> bool {
        self.b.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.a.cols
    }
}

/// Result of splitting a formula into linear equalities and the rest.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSplit {
    pub system: LinearSystem,
    /// Clause indices compiled into rows of the system, in row order.
    pub linear_clauses: Vec<usize>,
    /// Clause indices that stay as residual terms.
    pub remainder: Vec<usize>,
}

/// Compiles unit-clause equalities between affine terms into `A x = b`.
/// Coefficients are the exact constants read from the source, combined in
/// real arithmetic; every other clause lands in the remainder.
pub fn extract_linear(f: &Formula) -> LinearSplit {
    let d = f.dim();
    let mut rows = Vec::new();
    let mut b = Vec::new();
    let mut linear_clauses = Vec::new();
    let mut remainder = Vec::new();
    for (i, clause) in f.clauses.iter().enumerate() {
        let row = match clause.atoms.as_slice() {
            [atom] if atom.rel == Relation::Eq => affine(&atom.lhs, d)
                .zip(affine(&atom.rhs, d))
                .map(|(l, r)| l.combine(r, -1.0))
                .filter(|row| !row.is_constant() && row.constant.is_finite()),
            _ => None,
        };
        match row {
            Some(row) => {
                b.push(-row.constant);
                rows.push(row.coeffs);
                linear_clauses.push(i);
            }
            None => remainder.push(i),
        }
    }
    let a = if rows.is_empty() { Matrix::zeros(0, d) } else { Matrix::from_rows(&rows) };
    let var_map = (0..d).filter(|&j| rows.iter().any(|r| r[j] != 0.0)).collect();
    LinearSplit {
        system: LinearSystem { a, b, var_map },
        linear_clauses,
        remainder,
    }
}

/// Point on the manifold and its squared distance from the query.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub point: Vec<f64>,
    pub sq_dist: f64,
}

/// Lower Cholesky factor of a symmetric positive definite matrix, or `None`
/// if a pivot is not positive.
fn cholesky(g: &Matrix) -> Option<Matrix> {
    let n = g.rows;
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut diag = g[(j, j)];
        for k in 0..j {
            diag -= l[(j, k)] * l[(j, k)];
        }
        if !(diag > 0.0) {
            return None;
        }
        let ljj = diag.sqrt();
        l[(j, j)] = ljj;
        for i in j + 1..n {
            let mut s = g[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Some(l)
}

fn cholesky_solve(l: &Matrix, r: &[f64]) -> Vec<f64> {
    let n = l.rows;
    let mut z = vec![0.0; n];
    for i in 0..n {
        let s: f64 = (0..i).map(|k| l[(i, k)] * z[k]).sum();
        z[i] = (r[i] - s) / l[(i, i)];
    }
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| l[(k, i)] * z[k]).sum();
        z[i] = (z[i] - s) / l[(i, i)];
    }
    z
}

/// How the correction `Aᵀ (A Aᵀ)† r` is computed.
#[derive(Debug, Clone)]
enum GramSolver {
    /// Full row rank: triangular solves with the Cholesky factor of `A Aᵀ`.
    Cholesky(Matrix),
    /// Rank deficient: the cached matrix `Aᵀ (A Aᵀ)†`.
    Pseudoinverse(Matrix),
}

/// Cached factorization for repeated projections onto `{x : A x = b}`.
#[derive(Debug, Clone)]
pub struct Projector {
    a: Matrix,
    b: Vec<f64>,
    solver: GramSolver,
    rank: usize,
    tol: f64,
}

impl Projector {
    /// `None` when the system is empty, its Gram matrix has rank zero, or the
    /// factorization is not finite.
    pub fn new(sys: &LinearSystem, tol: f64) -> Option<Projector> {
        if sys.is_empty() {
            return None;
        }
        let gram = sys.a.matmul(&sys.a.transpose());
        if !gram.is_finite() {
            return None;
        }
        let (g_pinv, rank) = pseudoinverse_with_rank(&gram, tol).ok()?;
        if rank == 0 {
            return None;
        }
        let solver = match cholesky(&gram) {
            Some(l) if rank == gram.rows => GramSolver::Cholesky(l),
            _ => {
                let p = sys.a.transpose().matmul(&g_pinv);
                if !p.is_finite() {
                    return None;
                }
                GramSolver::Pseudoinverse(p)
            }
        };
        Some(Projector { a: sys.a.clone(), b: sys.b.clone(), solver, rank, tol })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn dim(&self) -> usize {
        self.a.cols
    }

    /// Orthogonal projection `x - Aᵀ(AAᵀ)†(Ax - b)` and its squared gap.
    pub fn project(&self, x: &[f64]) -> Result<Projection, LinalgError> {
        if x.len() != self.a.cols {
            return Err(LinalgError::Dimension { expected: self.a.cols, got: x.len() });
        }
        let mut residual = self.a.mul_vec(x);
        residual.iter_mut().zip(&self.b).for_each(|(r, b)| *r -= b);
        let correction = match &self.solver {
            GramSolver::Cholesky(l) => {
                let y = cholesky_solve(l, &residual);
                (0..self.a.cols)
                    .map(|j| (0..self.a.rows).map(|i| self.a[(i, j)] * y[i]).sum())
                    .collect()
            }
            GramSolver::Pseudoinverse(p) => p.mul_vec(&residual),
        };
        let sq_dist = correction.iter().map(|c| c * c).sum();
        let point = x.iter().zip(&correction).map(|(x, c)| x - c).collect();
        Ok(Projection { point, sq_dist })
    }

    /// Squared distance only.
    pub fn sq_dist(&self, x: &[f64]) -> Result<f64, LinalgError> {
        self.project(x).map(|p| p.sq_dist)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smt::parse;

    const TOY: &str = "(declare-fun x () Float64)(declare-fun y () Float64)\
        (assert (fp.eq x ((_ to_fp 11 53) RNE 1.0)))(assert (fp.eq y x))";

    #[test]
    fn pseudoinverse_of_identity_and_zero() {
        let i = Matrix::identity(3);
        assert!(pseudoinverse(&i, DEFAULT_RANK_TOL).unwrap().max_abs_diff(&i) < 1e-15);
        let z = Matrix::zeros(2, 2);
        assert_eq!(pseudoinverse(&z, DEFAULT_RANK_TOL).unwrap(), z);
    }

    #[test]
    fn pseudoinverse_of_rank_one() {
        // G = 4 u uᵀ with u = (1,1)/√2, so G† = u uᵀ / 4.
        let g = Matrix::from_rows(&[vec![2.0, 2.0], vec![2.0, 2.0]]);
        let (p, rank) = pseudoinverse_with_rank(&g, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(rank, 1);
        let expected = Matrix::from_rows(&[vec![0.125, 0.125], vec![0.125, 0.125]]);
        assert!(p.max_abs_diff(&expected) < 1e-15, "{p:?}");
    }

    #[test]
    fn asymmetric_input_is_rejected() {
        let g = Matrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]);
        assert!(matches!(pseudoinverse(&g, DEFAULT_RANK_TOL), Err(LinalgError::NotSymmetric(_))));
    }

    #[test]
    fn toy_extraction() {
        let f = parse(TOY).unwrap();
        let split = extract_linear(&f);
        assert_eq!(split.system.a, Matrix::from_rows(&[vec![1.0, 0.0], vec![-1.0, 1.0]]));
        assert_eq!(split.system.b, vec![1.0, 0.0]);
        assert!(split.remainder.is_empty());
        assert_eq!(split.system.var_map, vec![0, 1]);
    }

    #[test]
    fn no_equalities_means_empty_system() {
        let f = parse("(declare-fun x () Float64)(assert (fp.lt x (_ +zero 11 53)))").unwrap();
        let split = extract_linear(&f);
        assert!(split.system.is_empty());
        assert_eq!(split.remainder, vec![0]);
        assert!(Projector::new(&split.system, DEFAULT_RANK_TOL).is_none());
    }

    #[test]
    fn disjunctive_equalities_stay_in_the_remainder() {
        let src = "(declare-fun x () Float64)(declare-fun y () Float64)\
            (assert (or (fp.eq x ((_ to_fp 11 53) RNE 1.0)) (fp.eq y ((_ to_fp 11 53) RNE 1.0))))";
        let split = extract_linear(&parse(src).unwrap());
        assert!(split.system.is_empty());
        assert_eq!(split.remainder, vec![0]);
    }

    #[test]
    fn nonlinear_and_scaled_terms() {
        let src = "(declare-fun x () Float64)(declare-fun y () Float64)\
            (define-fun two () Float64 ((_ to_fp 11 53) RNE 2.0))\
            (assert (fp.eq (fp.div RNE (fp.mul RNE two (fp.sub RNE x y)) two) (fp.neg y)))\
            (assert (fp.eq (fp.mul RNE x y) two))\
            (assert (fp.eq (fp.div RNE x (_ +zero 11 53)) two))";
        let split = extract_linear(&parse(src).unwrap());
        assert_eq!(split.system.a, Matrix::from_rows(&[vec![1.0, 0.0]]));
        assert_eq!(split.system.b, vec![0.0]);
        assert_eq!(split.remainder, vec![1, 2]);
    }

    #[test]
    fn toy_projection() {
        let split = extract_linear(&parse(TOY).unwrap());
        let proj = Projector::new(&split.system, DEFAULT_RANK_TOL).unwrap();
        for x in [[2.0, 2.0], [-3.0, 7.5], [1.0, 1.0]] {
            let p = proj.project(&x).unwrap();
            assert!((p.point[0] - 1.0).abs() < 1e-14 && (p.point[1] - 1.0).abs() < 1e-14);
        }
        assert_eq!(proj.project(&[1.0, 1.0]).unwrap().sq_dist, 0.0);
        assert_eq!(proj.project(&[2.0, 2.0]).unwrap().sq_dist, 2.0);
        assert_eq!(proj.project(&[2.0, 1.0]).unwrap().sq_dist, 1.0);
        assert!(matches!(proj.project(&[1.0]), Err(LinalgError::Dimension { .. })));
    }

    #[test]
    fn rank_deficient_system_projects_onto_the_consistent_manifold() {
        // x + y = 2 stated twice: rank one, manifold is the line x + y = 2.
        let sys = LinearSystem {
            a: Matrix::from_rows(&[vec![1.0, 1.0], vec![2.0, 2.0]]),
            b: vec![2.0, 4.0],
            var_map: vec![0, 1],
        };
        let proj = Projector::new(&sys, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(proj.rank(), 1);
        let p = proj.project(&[3.0, 3.0]).unwrap();
        assert!((p.point[0] - 1.0).abs() < 1e-12 && (p.point[1] - 1.0).abs() < 1e-12);
        assert!((p.sq_dist - 8.0).abs() < 1e-12);
        let again = proj.project(&p.point).unwrap();
        assert!(again.sq_dist < 1e-24);
    }
}
