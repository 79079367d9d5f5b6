//! The bundled desk-scale corpus with ground-truth statuses.

use std::collections::HashMap;

use crate::bench::Expected;

macro_rules! bundle {
    ($($name:literal),* $(,)?) => {
        &[$(($name, include_str!(concat!("../corpus/", $name)))),*]
    };
}

/// `(file name, SMT-LIB source)` pairs.
pub const FILES: &[(&str, &str)] = bundle!(
    "chain20.smt2",
    "contradictory.smt2",
    "distinct_close.smt2",
    "equal_not_equal.smt2",
    "mixed_widths.smt2",
    "negative_square.smt2",
    "outside_band.smt2",
    "reciprocal.smt2",
    "shifted_bound_f32.smt2",
    "squeeze.smt2",
    "subnormal_trap.smt2",
    "sum_split_f32.smt2",
    "three_way_f32.smt2",
    "tiny_positive.smt2",
    "toy.smt2",
);

/// The `path,status` table shipped with the corpus.
pub const EXPECTED_CSV: &str = include_str!("../corpus/expected.csv");

pub fn expected() -> HashMap<String, Expected> {
    crate::bench::parse_expected(EXPECTED_CSV.as_bytes()).expect("bundled table is well formed")
}

pub fn source(name: &str) -> Option<&'static str> {
    FILES.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_file_parses_and_has_a_status() {
        let exp = expected();
        assert_eq!(exp.len(), FILES.len());
        for (name, src) in FILES {
            crate::smt::parse(src).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert!(exp.contains_key(*name), "{name}");
        }
    }
}
