//! Bounded search over integer ULP offsets around an anchor.

use std::collections::HashSet;

use rand::Rng;
use web_time::Instant;

use super::{basin_hop, Budget, Landscape, OptResult, OptStatus, StageConfig};
use crate::objective::{Evaluation, Objective, ObjectiveKind};

/// Offsets clamped to the search box before evaluation.
struct Boxed<'a> {
    objective: &'a Objective,
    bound: f64,
}

impl Landscape for Boxed<'_> {
    fn dim(&self) -> usize {
        self.objective.dim()
    }

    fn evaluate(&self, x: &[f64]) -> Evaluation {
        let clamped: Vec<f64> = x.iter().map(|v| v.clamp(-self.bound, self.bound)).collect();
        Landscape::evaluate(self.objective, &clamped)
    }

    fn scale(&self, x: &[f64]) -> Vec<f64> {
        vec![1.0; x.len()]
    }

    fn resolution(&self) -> f64 {
        0.25
    }
}

/// Searches offsets in `[-bound, bound]^d` around the objective's anchor.
///
/// First a coordinate descent over integer offsets that takes the best
/// strictly improving value per coordinate. When a sweep stalls, groups of
/// coordinates with identical values are shifted together, and failing
/// that an equal-valued move to an unvisited point is taken. If that ends above zero, basin
/// hopping over real offsets (rounded inside the objective) continues from
/// the best integer point. The returned point is a vector of offsets.
pub fn lattice_refine<R: Rng + ?Sized>(
    obj: &Objective,
    bound: u32,
    cfg: &StageConfig,
    rng: &mut R,
    budget: &Budget,
) -> OptResult {
    assert_eq!(obj.kind(), ObjectiveKind::S3, "lattice search needs an anchored objective");
    let started = Instant::now();
    let d = obj.dim();
    let bound_i = bound as i64;
    let eval = |x: &[i64]| -> Evaluation {
        let real: Vec<f64> = x.iter().map(|&v| v as f64).collect();
        Landscape::evaluate(obj, &real)
    };

    let mut x = vec![0i64; d];
    budget.tick();
    let mut cur = eval(&x);
    let mut evaluations = 1u64;
    let mut visited: HashSet<Vec<i64>> = HashSet::new();
    visited.insert(x.clone());
    let mut plateau_moves = 0usize;
    let max_plateau = 4 * d.max(1);
    let mut out_of_budget = false;

    'sweeps: while !cur.exact_zero {
        let mut changed = false;
        let mut tie: Option<Vec<i64>> = None;
        for i in 0..d {
            let original = x[i];
            let mut best_here: Option<(i64, Evaluation)> = None;
            for step in 1..=2 * bound_i {
                for delta in [-step, step] {
                    let v = original + delta;
                    if v.abs() > bound_i {
                        continue;
                    }
                    if !budget.tick() {
                        out_of_budget = true;
                        x[i] = original;
                        break 'sweeps;
                    }
                    x[i] = v;
                    let e = eval(&x);
                    evaluations += 1;
                    let incumbent = best_here.map_or(cur.value, |(_, b)| b.value);
                    if e.exact_zero || e.value < incumbent {
                        best_here = Some((v, e));
                    } else if e.value == cur.value && tie.is_none() && !visited.contains(&x) {
                        tie = Some(x.clone());
                    }
                    if e.exact_zero {
                        break;
                    }
                }
                if best_here.is_some_and(|(_, e)| e.exact_zero) {
                    break;
                }
            }
            x[i] = original;
            if let Some((v, e)) = best_here {
                x[i] = v;
                cur = e;
                visited.insert(x.clone());
                changed = true;
                if cur.exact_zero {
                    break 'sweeps;
                }
            }
        }
        if !changed && !cur.exact_zero {
            // Joint moves: coordinates with identical values, and every upper
            // and lower level set of the current values, shift together, so
            // equalities and orderings inside the set survive the step.
            let groups = match obj.values_at(&x.iter().map(|&v| v as f64).collect::<Vec<_>>()) {
                Some(values) => joint_sets(&values.iter().map(|v| v.to_f64()).collect::<Vec<_>>()),
                None => Vec::new(),
            };
            'groups: for g in &groups {
                for step in 1..=2 * bound_i {
                    for delta in [-step, step] {
                        if g.iter().any(|&i| (x[i] + delta).abs() > bound_i) {
                            continue;
                        }
                        if !budget.tick() {
                            out_of_budget = true;
                            break 'sweeps;
                        }
                        let mut y = x.clone();
                        g.iter().for_each(|&i| y[i] += delta);
                        let e = eval(&y);
                        evaluations += 1;
                        if e.exact_zero || e.value < cur.value {
                            x = y;
                            cur = e;
                            visited.insert(x.clone());
                            changed = true;
                            if cur.exact_zero {
                                break 'sweeps;
                            }
                            break 'groups;
                        }
                    }
                }
            }
        }
        if !changed {
            match tie {
                Some(t) if plateau_moves < max_plateau => {
                    plateau_moves += 1;
                    visited.insert(t.clone());
                    x = t;
                }
                _ => break,
            }
        }
    }

    let point: Vec<f64> = x.iter().map(|&v| v as f64).collect();
    let mut best = OptResult {
        best_point: point.clone(),
        best_value: cur.value,
        exact_zero: cur.exact_zero,
        evaluations,
        elapsed: started.elapsed(),
        status: if cur.exact_zero {
            OptStatus::ZeroFound
        } else if out_of_budget {
            OptStatus::BudgetExhausted
        } else {
            OptStatus::Converged
        },
        trace: Vec::new(),
    };

    if !best.exact_zero && !out_of_budget {
        let mut boxed = Boxed { objective: obj, bound: bound as f64 };
        let relaxed = basin_hop(&mut boxed, &point, cfg, rng, budget);
        best.evaluations += relaxed.evaluations;
        best.status = relaxed.status;
        if relaxed.better_than(&best) {
            best.best_point = relaxed.best_point.iter().map(|v| v.clamp(-(bound as f64), bound as f64)).collect();
            best.best_value = relaxed.best_value;
            best.exact_zero = relaxed.exact_zero;
        }
        best.trace = relaxed.trace;
    }
    best.elapsed = started.elapsed();
    best
}

/// Candidate sets for joint moves: classes of equal values and the upper
/// and lower level sets of the value ordering. Singletons are left to the
/// coordinate sweep.
fn joint_sets(values: &[f64]) -> Vec<Vec<usize>> {
    let mut levels: Vec<f64> = values.to_vec();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let mut sets: Vec<Vec<usize>> = Vec::new();
    let mut push = |set: Vec<usize>| {
        if set.len() > 1 && !sets.contains(&set) {
            sets.push(set);
        }
    };
    let members = |keep: &dyn Fn(f64) -> bool| -> Vec<usize> {
        (0..values.len()).filter(|&i| keep(values[i])).collect()
    };
    for &t in &levels {
        push(members(&|v| v == t));
    }
    for &t in &levels {
        push(members(&|v| v >= t));
        push(members(&|v| v <= t));
    }
    sets
}
