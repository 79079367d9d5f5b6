//! Floating-point satisfiability by staged numerical optimization.
//!
//! A QF_FP formula is turned into three objectives that are minimized in
//! sequence: a projection-aided squared-residual objective for fast descent,
//! a squared-ULP objective that is zero exactly on IEEE-754 models, and a
//! bounded n-ULP lattice search around the best point found so far. Only
//! the ULP stages may report `sat`, and every model is re-validated with a
//! bit-exact evaluator before it is returned.

pub mod lattice;
pub mod smt;
pub mod linalg;
pub mod objective;
pub mod optimizer;
pub mod engine;
pub mod bench;
pub mod corpus;
pub mod gen;
pub mod selftest;
