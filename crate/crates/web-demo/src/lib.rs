//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Each export is a thin wrapper over a plain function so the logic can be
//! tested natively.

use std::sync::Arc;
use std::time::Duration;

use wasm_bindgen::prelude::*;

use ulpsat::engine::{render, solve, EngineConfig};
use ulpsat::lattice::{n_ulp, to_index, FpFormat, FpScalar};
use ulpsat::objective::{Ablation, Objective};
use ulpsat::optimizer::OptimizerConfig;
use ulpsat::smt::parse;

const TOY: &str = "(declare-fun x () Float64)(declare-fun y () Float64)\
    (assert (fp.eq x ((_ to_fp 11 53) RNE 1.0)))(assert (fp.eq y x))";

/// Which objective of the `x == 1 and y == x` example to sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Surface {
    /// Projection-aided squared residuals.
    Projected,
    /// Plain squared residuals, no projection.
    Naive,
    /// log10(1 + squared ULP distances).
    Ulp,
}

impl Surface {
    pub fn from_name(name: &str) -> Option<Surface> {
        match name {
            "projected" => Some(Surface::Projected),
            "naive" => Some(Surface::Naive),
            "ulp" => Some(Surface::Ulp),
            _ => None,
        }
    }
}

/// Row-major `ny × nx` samples over `[x0, x1] × [y0, y1]`; row 0 is `y0`.
pub fn toy_grid(surface: Surface, nx: usize, ny: usize, x0: f64, x1: f64, y0: f64, y1: f64) -> Vec<f64> {
    let f = Arc::new(parse(TOY).expect("toy parses"));
    let obj = match surface {
        Surface::Projected => Objective::s1(f, Ablation::default()),
        Surface::Naive => Objective::s1(f, Ablation { no_projection: true, ..Ablation::default() }),
        Surface::Ulp => Objective::s2(f, Ablation::default()),
    };
    let step = |a: f64, b: f64, n: usize, i: usize| if n < 2 { a } else { a + (b - a) * i as f64 / (n - 1) as f64 };
    let mut out = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let p = [step(x0, x1, nx, i), step(y0, y1, ny, j)];
            let v = obj.evaluate(&p).map(|e| e.value).unwrap_or(f64::NAN);
            out.push(if surface == Surface::Ulp { (1.0 + v).log10() } else { v });
        }
    }
    out
}

/// Steps `value` (rounded into the format) by `k` lattice positions and
/// describes the result: decimal value, lattice index, and bit fields.
pub fn describe_step(value: f64, binary32: bool, k: i64) -> Result<String, String> {
    let fmt = if binary32 { FpFormat::Binary32 } else { FpFormat::Binary64 };
    let x = FpScalar::finite(value, fmt).map_err(|e| e.to_string())?;
    let y = n_ulp(k as i128, x);
    let index = to_index(y).map_err(|e| e.to_string())?;
    let (s, e, m) = y.fields();
    let shown = if binary32 { format!("{:e}", y.to_f32()) } else { format!("{:e}", y.to_f64()) };
    Ok(format!("value {shown}\nindex {}\nsign {s}\nexponent {e}\nsignificand {m}", index.0))
}

/// Solves an SMT-LIB script and returns the solver's printed output.
pub fn solve_text(src: &str, timeout_ms: u32, seed: u64) -> String {
    let f = match parse(src) {
        Ok(f) => Arc::new(f),
        Err(e) => return format!("error\n{e}"),
    };
    let cfg = EngineConfig {
        timeout: Some(Duration::from_millis(timeout_ms as u64)),
        optimizer: OptimizerConfig { rng_seed: seed, ..OptimizerConfig::default() },
        ..EngineConfig::default()
    };
    match solve(&f, &cfg) {
        Ok(v) => format!("{}\n; {:.1} ms", render(&f, &v, true), v.elapsed.as_secs_f64() * 1e3),
        Err(e) => format!("error\n{e}"),
    }
}

#[wasm_bindgen]
pub fn landscape(surface: &str, nx: usize, ny: usize, x0: f64, x1: f64, y0: f64, y1: f64) -> Result<Vec<f64>, JsError> {
    let s = Surface::from_name(surface).ok_or_else(|| JsError::new("surface must be projected, naive or ulp"))?;
    Ok(toy_grid(s, nx, ny, x0, x1, y0, y1))
}

#[wasm_bindgen]
pub fn lattice_step(value: f64, binary32: bool, k: i64) -> Result<String, JsError> {
    describe_step(value, binary32, k).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn solve_smt(src: &str, timeout_ms: u32, seed: u64) -> String {
    solve_text(src, timeout_ms, seed)
}
