//! Random starting points.

use rand::Rng;

use crate::lattice::{FpFormat, FpScalar};
use crate::smt::Formula;

/// Per-coordinate sampler: a fifth of the draws come from a pool of special
/// values and formula constants, two fifths are uniform in [-10, 10], the
/// rest are `±10^u` with `u` uniform in [-300, 300]. Every draw is rounded
/// into the coordinate's format and clamped to its finite range.
#[derive(Debug, Clone)]
pub struct StartBox {
    formats: Vec<FpFormat>,
    pools: Vec<Vec<f64>>,
}

impl StartBox {
    pub fn new(f: &Formula) -> StartBox {
        let formats = f.formats();
        let constants = f.constants();
        let pools = formats
            .iter()
            .map(|&fmt| {
                let tiny = fmt.min_positive_normal();
                let mut pool = vec![0.0, 1.0, -1.0, tiny, -tiny];
                for c in &constants {
                    if c.is_finite() {
                        let v = fit(c.to_f64(), fmt);
                        if !pool.iter().any(|p| p.to_bits() == v.to_bits()) {
                            pool.push(v);
                        }
                    }
                }
                pool
            })
            .collect();
        StartBox { formats, pools }
    }

    /// Special values and constants offered to coordinate `i`.
    pub fn pool(&self, i: usize) -> &[f64] {
        &self.pools[i]
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.formats
            .iter()
            .zip(&self.pools)
            .map(|(&fmt, pool)| {
                let pick: f64 = rng.random();
                let raw = if pick < 0.2 {
                    pool[rng.random_range(0..pool.len())]
                } else if pick < 0.6 {
                    rng.random_range(-10.0..=10.0)
                } else {
                    let u: f64 = rng.random_range(-300.0..=300.0);
                    let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                    sign * 10f64.powf(u)
                };
                fit(raw, fmt)
            })
            .collect()
    }
}

fn fit(v: f64, fmt: FpFormat) -> f64 {
    let max = fmt.max_finite();
    FpScalar::round_from_f64(v.clamp(-max, max), fmt).to_f64()
}

/// One draw from the start distribution of `f`.
pub fn sample_start_box<R: Rng + ?Sized>(f: &Formula, rng: &mut R) -> Vec<f64> {
    StartBox::new(f).sample(rng)
}
