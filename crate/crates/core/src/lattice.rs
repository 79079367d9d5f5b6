//! Bit-exact IEEE-754 lattice arithmetic for binary32 and binary64.
//!
//! Every non-NaN float is mapped to a signed ordinal ("lattice index") such
//! that the map is strictly monotone in IEEE order, `+0` and `-0` share index
//! zero, and adjacent representable values differ by exactly one. Distances
//! between floats and n-ULP stepping then reduce to integer arithmetic.

use std::fmt;

use thiserror::Error;

/// Supported IEEE-754 binary interchange formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FpFormat {
    Binary32,
    Binary64,
}

impl FpFormat {
    /// Width of the biased exponent field.
    pub const fn exponent_bits(self) -> u32 {
        match self {
            FpFormat::Binary32 => 8,
            FpFormat::Binary64 => 11,
        }
    }

    /// Significand precision including the hidden bit.
    pub const fn significand_bits(self) -> u32 {
        match self {
            FpFormat::Binary32 => 24,
            FpFormat::Binary64 => 53,
        }
    }

    pub const fn width(self) -> u32 {
        self.exponent_bits() + self.significand_bits()
    }

    /// Looks up a format by its SMT-LIB `(_ FloatingPoint e s)` parameters.
    pub fn from_widths(exponent: u32, significand: u32) -> Option<FpFormat> {
        match (exponent, significand) {
            (8, 24) => Some(FpFormat::Binary32),
            (11, 53) => Some(FpFormat::Binary64),
            _ => None,
        }
    }

    const fn sign_mask(self) -> u64 {
        1 << (self.width() - 1)
    }

    const fn magnitude_mask(self) -> u64 {
        self.sign_mask() - 1
    }

    /// Magnitude bits of +infinity; also the ordinal of +infinity.
    const fn infinity_magnitude(self) -> u64 {
        ((1u64 << self.exponent_bits()) - 1) << (self.significand_bits() - 1)
    }

    /// Ordinal of the largest finite value.
    pub const fn max_finite_index(self) -> i128 {
        self.infinity_magnitude() as i128 - 1
    }

    /// Distance reported for any atom with a NaN operand: one more than the
    /// number of ordinals between -inf and +inf, so it dominates every
    /// finite gap.
    pub const fn nan_sentinel(self) -> u128 {
        2 * self.infinity_magnitude() as u128 + 2
    }

    /// Largest finite magnitude, as an `f64`.
    pub fn max_finite(self) -> f64 {
        match self {
            FpFormat::Binary32 => f32::MAX as f64,
            FpFormat::Binary64 => f64::MAX,
        }
    }

    /// Smallest positive normal value, as an `f64`.
    pub fn min_positive_normal(self) -> f64 {
        match self {
            FpFormat::Binary32 => f32::MIN_POSITIVE as f64,
            FpFormat::Binary64 => f64::MIN_POSITIVE,
        }
    }
}

impl fmt::Display for FpFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "(_ FloatingPoint {} {})",
            self.exponent_bits(),
            self.significand_bits()
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LatticeError {
    #[error("NaN has no position on the floating-point lattice")]
    NotANumber,
    #[error("non-finite value {0} is outside the search domain")]
    NonFinite(String),
}

/// A floating-point value stored as raw bits plus its format.
///
/// Equality and hashing are bitwise; use [`FpScalar::ieee_eq`] for IEEE
/// `fp.eq` semantics.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct FpScalar {
    bits: u64,
    format: FpFormat,
}

impl FpScalar {
    /// Builds a scalar from raw bits; bits above the format width are dropped.
    pub const fn from_bits(bits: u64, format: FpFormat) -> FpScalar {
        let mask = if format.width() == 64 {
            u64::MAX
        } else {
            (1u64 << format.width()) - 1
        };
        FpScalar {
            bits: bits & mask,
            format,
        }
    }

    pub fn from_f64(value: f64) -> FpScalar {
        FpScalar {
            bits: value.to_bits(),
            format: FpFormat::Binary64,
        }
    }

    pub fn from_f32(value: f32) -> FpScalar {
        FpScalar {
            bits: value.to_bits() as u64,
            format: FpFormat::Binary32,
        }
    }

    /// Rounds `value` into `format` (RNE). May produce infinities.
    pub fn round_from_f64(value: f64, format: FpFormat) -> FpScalar {
        match format {
            FpFormat::Binary64 => FpScalar::from_f64(value),
            FpFormat::Binary32 => FpScalar::from_f32(value as f32),
        }
    }

    /// Solver-facing constructor: rounds into `format` and rejects NaN and
    /// infinities (including overflow produced by the rounding).
    pub fn finite(value: f64, format: FpFormat) -> Result<FpScalar, LatticeError> {
        let x = FpScalar::round_from_f64(value, format);
        if x.is_finite() {
            Ok(x)
        } else {
            Err(LatticeError::NonFinite(format!("{value}")))
        }
    }

    pub const fn bits(self) -> u64 {
        self.bits
    }

    pub const fn format(self) -> FpFormat {
        self.format
    }

    /// Exact widening to `f64` (binary32 values embed exactly).
    pub fn to_f64(self) -> f64 {
        match self.format {
            FpFormat::Binary64 => f64::from_bits(self.bits),
            FpFormat::Binary32 => f32::from_bits(self.bits as u32) as f64,
        }
    }

    /// The value as `f32`. Only meaningful for binary32 scalars.
    pub fn to_f32(self) -> f32 {
        match self.format {
            FpFormat::Binary32 => f32::from_bits(self.bits as u32),
            FpFormat::Binary64 => f64::from_bits(self.bits) as f32,
        }
    }

    fn magnitude(self) -> u64 {
        self.bits & self.format.magnitude_mask()
    }

    pub fn is_sign_negative(self) -> bool {
        self.bits & self.format.sign_mask() != 0
    }

    pub fn is_nan(self) -> bool {
        self.magnitude() > self.format.infinity_magnitude()
    }

    pub fn is_infinite(self) -> bool {
        self.magnitude() == self.format.infinity_magnitude()
    }

    pub fn is_finite(self) -> bool {
        self.magnitude() < self.format.infinity_magnitude()
    }

    pub fn is_zero(self) -> bool {
        self.magnitude() == 0
    }

    /// IEEE `fp.eq`: false on NaN, true for `+0 == -0`.
    pub fn ieee_eq(self, other: FpScalar) -> bool {
        self.to_f64() == other.to_f64()
    }

    /// The sign, exponent and significand fields as bit strings.
    pub fn fields(self) -> (String, String, String) {
        let fmt = self.format;
        let ebits = fmt.exponent_bits() as usize;
        let mbits = fmt.significand_bits() as usize - 1;
        let sign = if self.is_sign_negative() { "1" } else { "0" };
        let exp = (self.bits >> mbits) & ((1u64 << ebits) - 1);
        let man = self.bits & ((1u64 << mbits) - 1);
        (
            sign.to_string(),
            format!("{exp:0ebits$b}"),
            format!("{man:0mbits$b}"),
        )
    }
}

impl fmt::Debug for FpScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.format {
            FpFormat::Binary32 => write!(f, "{:e}f32", self.to_f32()),
            FpFormat::Binary64 => write!(f, "{:e}", self.to_f64()),
        }
    }
}

impl fmt::Display for FpScalar {
    /// SMT-LIB `(fp #b.. #b.. #b..)` literal.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (s, e, m) = self.fields();
        write!(f, "(fp #b{s} #b{e} #b{m})")
    }
}

/// Signed ordinal position of a float on its format's lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LatticeIndex(pub i128);

impl LatticeIndex {
    pub const fn value(self) -> i128 {
        self.0
    }
}

/// Maps a non-NaN float to its lattice index. Infinities map one past the
/// largest/smallest finite ordinal.
pub fn to_index(x: FpScalar) -> Result<LatticeIndex, LatticeError> {
    if x.is_nan() {
        return Err(LatticeError::NotANumber);
    }
    let mag = x.magnitude() as i128;
    Ok(LatticeIndex(if x.is_sign_negative() { -mag } else { mag }))
}

/// Inverse of [`to_index`] on the finite range; indices past either end clamp
/// to the extreme finite value. Index zero yields `+0`.
pub fn from_index(index: LatticeIndex, format: FpFormat) -> FpScalar {
    let limit = format.max_finite_index();
    let i = index.0.clamp(-limit, limit);
    if i >= 0 {
        FpScalar::from_bits(i as u64, format)
    } else {
        FpScalar::from_bits(format.sign_mask() | (-i) as u64, format)
    }
}

/// Moves `x` by `k` lattice positions (positive: towards +inf), clamping at
/// the finite extremes. NaN and infinite inputs are returned unchanged.
pub fn n_ulp(k: i128, x: FpScalar) -> FpScalar {
    if k == 0 || !x.is_finite() {
        return x;
    }
    match to_index(x) {
        Ok(i) => from_index(LatticeIndex(i.0.saturating_add(k)), x.format()),
        Err(_) => x,
    }
}

/// Atom relations over floating-point terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Relation {
    Eq,
    Le,
    Lt,
    Ge,
    Gt,
}

impl Relation {
    /// IEEE comparison; every relation is false when either side is NaN.
    pub fn holds(self, a: FpScalar, b: FpScalar) -> bool {
        let (x, y) = (a.to_f64(), b.to_f64());
        match self {
            Relation::Eq => x == y,
            Relation::Le => x <= y,
            Relation::Lt => x < y,
            Relation::Ge => x >= y,
            Relation::Gt => x > y,
        }
    }

    /// The SMT-LIB predicate symbol.
    pub fn smt_symbol(self) -> &'static str {
        match self {
            Relation::Eq => "fp.eq",
            Relation::Le => "fp.leq",
            Relation::Lt => "fp.lt",
            Relation::Ge => "fp.geq",
            Relation::Gt => "fp.gt",
        }
    }
}

/// Number of lattice steps separating `a` and `b`; zero iff `fp.eq(a, b)`.
pub fn ulp_distance_eq(a: FpScalar, b: FpScalar) -> u128 {
    debug_assert_eq!(a.format(), b.format());
    match (to_index(a), to_index(b)) {
        (Ok(i), Ok(j)) => i.0.abs_diff(j.0),
        _ => a.format().nan_sentinel(),
    }
}

/// Minimal number of lattice steps (moving `a` towards `b`, or `b` towards
/// `a`) that makes `a rel b` hold; zero iff it already holds.
pub fn ulp_distance_cmp(a: FpScalar, b: FpScalar, rel: Relation) -> u128 {
    debug_assert_eq!(a.format(), b.format());
    let (i, j) = match (to_index(a), to_index(b)) {
        (Ok(i), Ok(j)) => (i.0, j.0),
        _ => return a.format().nan_sentinel(),
    };
    match rel {
        Relation::Eq => i.abs_diff(j),
        Relation::Le if i <= j => 0,
        Relation::Le => (i - j) as u128,
        Relation::Lt if i < j => 0,
        Relation::Lt => (i - j) as u128 + 1,
        Relation::Ge if i >= j => 0,
        Relation::Ge => (j - i) as u128,
        Relation::Gt if i > j => 0,
        Relation::Gt => (j - i) as u128 + 1,
    }
}

/// Dispatches to [`ulp_distance_eq`] or [`ulp_distance_cmp`].
pub fn ulp_distance(a: FpScalar, b: FpScalar, rel: Relation) -> u128 {
    ulp_distance_cmp(a, b, rel)
}
