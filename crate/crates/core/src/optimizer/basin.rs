//! Basin hopping and multi-start.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use web_time::Instant;

use super::{local_minimize, Budget, Landscape, OptResult, OptStatus, StageConfig};

/// Consecutive rejections (acceptances) before the step is doubled (halved).
const STREAK: u32 = 2;
const MIN_STEP_FACTOR: f64 = 1.0 / 1048576.0;
const MAX_STEP_FACTOR: f64 = 1e12;

/// Independent random stream for start `index` under `seed`.
pub fn start_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn is_zero(r: &OptResult) -> bool {
    r.exact_zero || r.best_value == 0.0
}

/// Alternates local minimization with Gaussian perturbation of the
/// incumbent, accepting strict improvements only. Zero hops evaluates
/// `init` and nothing else.
pub fn basin_hop<L: Landscape + ?Sized, R: Rng + ?Sized>(
    l: &mut L,
    init: &[f64],
    cfg: &StageConfig,
    rng: &mut R,
    budget: &Budget,
) -> OptResult {
    let started = Instant::now();
    if cfg.hops == 0 {
        let mut no_search = cfg.clone();
        no_search.local_max_iters = 0;
        return local_minimize(l, init, &no_search, budget);
    }
    let mut best = local_minimize(l, init, cfg, budget);
    let mut evaluations = best.evaluations;
    if let Some(y) = l.recenter(&best.best_point) {
        best.best_point = y;
    }
    let mut trace = vec![best.best_value];
    let mut step = cfg.perturbation_scale;
    let (mut accepted, mut rejected) = (0, 0);
    for _ in 1..cfg.hops {
        if is_zero(&best) || budget.is_expired() || budget.is_cancelled() {
            break;
        }
        let scale = l.scale(&best.best_point);
        let trial: Vec<f64> = best
            .best_point
            .iter()
            .zip(&scale)
            .map(|(x, s)| {
                let z: f64 = rng.sample(StandardNormal);
                x + z * step * s
            })
            .collect();
        let r = local_minimize(l, &trial, cfg, budget);
        evaluations += r.evaluations;
        if r.better_than(&best) {
            best = r;
            if let Some(y) = l.recenter(&best.best_point) {
                best.best_point = y;
            }
            accepted += 1;
            rejected = 0;
            if accepted >= STREAK {
                step = (step / 2.0).max(cfg.perturbation_scale * MIN_STEP_FACTOR);
                accepted = 0;
            }
        } else {
            if r.status == OptStatus::BudgetExhausted {
                best.status = OptStatus::BudgetExhausted;
            }
            rejected += 1;
            accepted = 0;
            if rejected >= STREAK {
                step = (step * 2.0).min(cfg.perturbation_scale * MAX_STEP_FACTOR);
                rejected = 0;
            }
        }
        trace.push(best.best_value);
    }
    if best.status != OptStatus::ZeroFound && budget.is_expired() {
        best.status = OptStatus::BudgetExhausted;
    }
    best.evaluations = evaluations;
    best.elapsed = started.elapsed();
    best.trace = trace;
    best
}

/// Basin hopping from `starts` sampled points, each with its own random
/// stream. Sequential runs are deterministic for a fixed seed; the first
/// zero ends the search.
pub fn multi_start<L, S>(
    l: &L,
    sampler: S,
    cfg: &StageConfig,
    starts: usize,
    seed: u64,
    parallel: bool,
    budget: &Budget,
) -> OptResult
where
    L: Landscape + Clone + Send + Sync,
    S: Fn(&mut ChaCha8Rng) -> Vec<f64> + Sync,
{
    let started = Instant::now();
    let shared = budget.child(None);
    let run = |i: usize| {
        let mut rng = start_rng(seed, i as u64);
        let init = sampler(&mut rng);
        let mut local = l.clone();
        let r = basin_hop(&mut local, &init, cfg, &mut rng, &shared);
        if is_zero(&r) {
            shared.cancel();
        }
        (i, r)
    };
    let starts = starts.max(1);
    let results: Vec<(usize, OptResult)> = if parallel && cfg!(feature = "parallel") {
        run_parallel(starts, &run)
    } else {
        let mut out = Vec::new();
        for i in 0..starts {
            let (i, r) = run(i);
            let stop = is_zero(&r) || shared.is_expired();
            out.push((i, r));
            if stop {
                break;
            }
        }
        out
    };
    let evaluations = results.iter().map(|(_, r)| r.evaluations).sum();
    let mut best: Option<(usize, OptResult)> = None;
    for (i, r) in results {
        let replace = match &best {
            None => true,
            Some((j, b)) => r.better_than(b) || (!b.better_than(&r) && i < *j),
        };
        if replace {
            best = Some((i, r));
        }
    }
    let mut best = best.expect("at least one start").1;
    if budget.is_expired() || shared.is_expired() {
        if best.status != OptStatus::ZeroFound {
            best.status = OptStatus::BudgetExhausted;
        }
    } else if best.status == OptStatus::BudgetExhausted && is_zero(&best) {
        best.status = OptStatus::Converged;
    }
    best.evaluations = evaluations;
    best.elapsed = started.elapsed();
    best
}

#[cfg(feature = "parallel")]
fn run_parallel<F>(starts: usize, run: &F) -> Vec<(usize, OptResult)>
where
    F: Fn(usize) -> (usize, OptResult) + Sync,
{
    use rayon::prelude::*;
    (0..starts).into_par_iter().map(run).collect()
}

#[cfg(not(feature = "parallel"))]
fn run_parallel<F>(starts: usize, run: &F) -> Vec<(usize, OptResult)>
where
    F: Fn(usize) -> (usize, OptResult) + Sync,
{
    (0..starts).map(run).collect()
}
