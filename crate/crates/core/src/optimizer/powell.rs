//! Powell's conjugate-direction method with bracketing and golden-section
//! line searches.

use super::{Budget, Landscape, OptResult, Probe, StageConfig};

const GOLD: f64 = 1.618_033_988_749_895;
const CGOLD: f64 = 0.381_966_011_250_105;
const GLIMIT: f64 = 100.0;
const TINY: f64 = 1e-20;
const MAX_BRACKET_STEPS: usize = 80;
const MAX_SECTION_STEPS: usize = 120;
const RESCALE_RATIO: f64 = 1e3;
const MAX_RESETS: usize = 32;

/// Minimizes from `start` with a per-coordinate direction set. Stops on a
/// sweep whose relative improvement is below `local_tol`, after
/// `local_max_iters` sweeps, on an exact zero, or when the budget runs out.
pub fn local_minimize<L: Landscape + ?Sized>(
    l: &L,
    start: &[f64],
    cfg: &StageConfig,
    budget: &Budget,
) -> OptResult {
    assert_eq!(start.len(), l.dim(), "start dimension");
    let mut probe = Probe::new(l, budget, start);
    if !probe.stopped() {
        powell(&mut probe, start, cfg);
    }
    probe.finish()
}

fn powell<L: Landscape + ?Sized>(p: &mut Probe<'_, L>, start: &[f64], cfg: &StageConfig) {
    let n = start.len();
    if n == 0 {
        return;
    }
    let axes = |scale: &[f64]| -> Vec<Vec<f64>> {
        (0..n)
            .map(|i| {
                let mut d = vec![0.0; n];
                d[i] = scale[i];
                d
            })
            .collect()
    };
    let mut scale = p.landscape().scale(start);
    let mut dirs = axes(&scale);
    let mut resets = 0;
    let mut x = start.to_vec();
    let mut fx = p.landscape().evaluate(start).value;
    if fx.is_nan() {
        fx = f64::INFINITY;
    }
    let mut pt = x.clone();
    for _ in 0..cfg.local_max_iters {
        let fp = fx;
        let mut ibig = 0;
        let mut del = 0.0;
        for (i, d) in dirs.iter().enumerate() {
            let before = fx;
            fx = line_min(p, &mut x, d, fx);
            if p.stopped() {
                return;
            }
            if before - fx > del {
                del = before - fx;
                ibig = i;
            }
        }
        if 2.0 * (fp - fx) <= cfg.local_tol * (fp.abs() + fx.abs()) + TINY {
            // Directions sized for a far-away start cannot resolve the
            // neighbourhood we ended up in; start over at the local scale.
            let here = p.landscape().scale(&x);
            let rescaled = here
                .iter()
                .zip(&scale)
                .any(|(a, b)| a / b > RESCALE_RATIO || b / a > RESCALE_RATIO);
            if !rescaled || resets >= MAX_RESETS {
                return;
            }
            resets += 1;
            scale = here;
            dirs = axes(&scale);
            pt.clone_from(&x);
            continue;
        }
        let ptt: Vec<f64> = x.iter().zip(&pt).map(|(a, b)| 2.0 * a - b).collect();
        let xit: Vec<f64> = x.iter().zip(&pt).map(|(a, b)| a - b).collect();
        pt.clone_from(&x);
        if xit.iter().all(|v| *v == 0.0) || !xit.iter().all(|v| v.is_finite()) {
            continue;
        }
        let fptt = p.eval(&ptt);
        if p.stopped() {
            return;
        }
        if fptt < fp {
            let t = 2.0 * (fp - 2.0 * fx + fptt) * (fp - fx - del).powi(2) - del * (fp - fptt).powi(2);
            if t < 0.0 {
                fx = line_min(p, &mut x, &xit, fx);
                if p.stopped() {
                    return;
                }
                dirs[ibig] = dirs[n - 1].clone();
                dirs[n - 1] = xit;
            }
        }
    }
}

/// Moves `x` to the best point found along `dir` and returns its value.
fn line_min<L: Landscape + ?Sized>(p: &mut Probe<'_, L>, x: &mut [f64], dir: &[f64], fx: f64) -> f64 {
    let mut point = vec![0.0; x.len()];
    let mut best = (0.0, fx);
    let mut f = |t: f64, p: &mut Probe<'_, L>| -> f64 {
        if t == 0.0 {
            return fx;
        }
        if !t.is_finite() {
            return f64::INFINITY;
        }
        for ((q, xi), di) in point.iter_mut().zip(x.iter()).zip(dir) {
            *q = xi + t * di;
        }
        let v = p.eval(&point);
        if v < best.1 {
            best = (t, v);
        }
        v
    };

    // Bracket a minimum.
    let (mut a, mut b) = (0.0, 1.0);
    let (mut fa, mut fb) = (fx, f(b, p));
    if fb > fa {
        std::mem::swap(&mut a, &mut b);
        std::mem::swap(&mut fa, &mut fb);
    }
    let mut c = b + GOLD * (b - a);
    let mut fc = f(c, p);
    let mut steps = 0;
    while fb > fc && !p.stopped() && steps < MAX_BRACKET_STEPS && c.is_finite() {
        steps += 1;
        let r = (b - a) * (fb - fc);
        let q = (b - c) * (fb - fa);
        let denom = 2.0 * (q - r).abs().max(TINY).copysign(q - r);
        let mut u = b - ((b - c) * q - (b - a) * r) / denom;
        let ulim = b + GLIMIT * (c - b);
        if !u.is_finite() {
            u = c + GOLD * (c - b);
        }
        let fu;
        if (b - u) * (u - c) > 0.0 {
            let v = f(u, p);
            if v < fc {
                (a, fa, b, fb) = (b, fb, u, v);
                break;
            } else if v > fb {
                (c, fc) = (u, v);
                break;
            }
            u = c + GOLD * (c - b);
            fu = f(u, p);
        } else if (c - u) * (u - ulim) > 0.0 {
            let v = f(u, p);
            if v < fc {
                let next = u + GOLD * (u - c);
                (b, fb, c, fc) = (c, fc, u, v);
                u = next;
                fu = f(u, p);
            } else {
                fu = v;
            }
        } else if (u - ulim) * (ulim - c) >= 0.0 {
            u = ulim;
            fu = f(u, p);
        } else {
            u = c + GOLD * (c - b);
            fu = f(u, p);
        }
        (a, fa, b, fb, c, fc) = (b, fb, c, fc, u, fu);
    }
    let _ = (fa, fc);

    // Golden-section refinement inside [a, c] around b.
    if !p.stopped() && fb <= fa.min(fc) {
        let reach = dir.iter().fold(0.0f64, |m, d| m.max(d.abs()));
        let tol = if reach > 0.0 { p.landscape().resolution() / reach } else { 0.0 };
        let (mut x0, mut x3) = (a, c);
        let (mut x1, mut x2);
        if (c - b).abs() > (b - a).abs() {
            x1 = b;
            x2 = b + CGOLD * (c - b);
        } else {
            x2 = b;
            x1 = b - CGOLD * (b - a);
        }
        let mut f1 = if x1 == b { fb } else { f(x1, p) };
        let mut f2 = if x2 == b { fb } else { f(x2, p) };
        let rel = 1e-10;
        let mut steps = 0;
        while (x3 - x0).abs() > rel * (x1.abs() + x2.abs()) + tol
            && !p.stopped()
            && steps < MAX_SECTION_STEPS
        {
            steps += 1;
            if f2 < f1 {
                x0 = x1;
                x1 = x2;
                x2 = GOLD.recip() * x2 + CGOLD * x3;
                f1 = f2;
                f2 = f(x2, p);
            } else {
                x3 = x2;
                x2 = x1;
                x1 = GOLD.recip() * x1 + CGOLD * x0;
                f2 = f1;
                f1 = f(x1, p);
            }
        }
    }

    let (t, v) = best;
    if v < fx {
        for (xi, di) in x.iter_mut().zip(dir) {
            *xi += t * di;
        }
        v
    } else {
        fx
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::Evaluation;
    use crate::optimizer::tests::Func;
    use crate::optimizer::OptStatus;

    fn cfg() -> StageConfig {
        StageConfig::with_hops(1)
    }

    #[test]
    fn convex_quadratic() {
        let f = Func(2, |x: &[f64]| (x[0] - 1.0).powi(2) + (x[1] - 1.0).powi(2));
        let r = local_minimize(&f, &[2.0, 2.0], &cfg(), &Budget::unlimited());
        assert!(r.best_value <= 1e-12, "{r:?}");
        assert!((r.best_point[0] - 1.0).abs() < 1e-5 && (r.best_point[1] - 1.0).abs() < 1e-5);
    }

    #[test]
    fn correlated_quadratic_uses_conjugate_directions() {
        let f = Func(3, |x: &[f64]| {
            let (a, b, c) = (x[0] - 1.0, x[1] + 2.0, x[2] - 0.5);
            a * a + 10.0 * (a + b).powi(2) + 5.0 * (b - c).powi(2) + c * c
        });
        let r = local_minimize(&f, &[10.0, 10.0, 10.0], &cfg(), &Budget::unlimited());
        assert!(r.best_value < 1e-10, "{r:?}");
    }

    #[test]
    fn rosenbrock_descends() {
        let rosen = |x: &[f64]| 100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2);
        let f = Func(2, rosen);
        let start = [-1.2, 1.0];
        let r = local_minimize(&f, &start, &cfg(), &Budget::unlimited());
        assert!(r.best_value < rosen(&start));
        assert!(r.best_value < 1e-6, "{r:?}");
    }

    struct ZeroAt;
    impl Landscape for ZeroAt {
        fn dim(&self) -> usize {
            1
        }
        fn evaluate(&self, x: &[f64]) -> Evaluation {
            let v = (x[0] - 4.0).abs().floor();
            Evaluation { value: v * v, exact_zero: v == 0.0 }
        }
    }

    #[test]
    fn exact_zero_start_returns_after_one_evaluation() {
        let r = local_minimize(&ZeroAt, &[4.5], &cfg(), &Budget::unlimited());
        assert_eq!(r.status, OptStatus::ZeroFound);
        assert_eq!(r.evaluations, 1);
    }

    #[test]
    fn step_function_reaches_zero() {
        let r = local_minimize(&ZeroAt, &[100.0], &cfg(), &Budget::unlimited());
        assert_eq!(r.status, OptStatus::ZeroFound);
        assert!(r.exact_zero && r.best_value == 0.0);
    }

    #[test]
    fn non_finite_values_are_treated_as_infinite() {
        let f = Func(1, |x: &[f64]| if x[0] > 3.0 { f64::NAN } else { (x[0] - 2.0).powi(2) });
        let r = local_minimize(&f, &[0.0], &cfg(), &Budget::unlimited());
        assert!(r.best_value < 1e-12);
    }

    #[test]
    fn spent_budget_stops_the_search() {
        let f = Func(2, |x: &[f64]| x[0] * x[0] + x[1] * x[1]);
        let r = local_minimize(&f, &[3.0, 4.0], &cfg(), &Budget::new(std::time::Duration::ZERO));
        assert_eq!(r.status, OptStatus::BudgetExhausted);
        assert_eq!(r.evaluations, 1);
        assert_eq!(r.best_value, 25.0);
    }

    #[test]
    fn huge_starting_magnitudes() {
        let f = Func(1, |x: &[f64]| (x[0] - 1e-3).powi(2));
        let r = local_minimize(&f, &[1e100], &cfg(), &Budget::unlimited());
        assert!(r.best_value < 1e-12, "{r:?}");
    }
}
