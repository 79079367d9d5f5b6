//! The staged pipeline: S1 multi-start, S2 basin hopping, S3 lattice search,
//! inside an outer restart loop.

use std::fmt;
use std::sync::Arc;
use std::time::Duration;

use thiserror::Error;
use web_time::Instant;

use crate::lattice::FpScalar;
use crate::objective::{Ablation, Objective};
use crate::optimizer::{
    basin_hop, lattice_refine, multi_start, start_rng, Budget, OffsetChart, OptResult, OptStatus,
    OptimizerConfig, StartBox,
};
use crate::smt::{format_model, is_model, Assignment, Formula};

#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    pub optimizer: OptimizerConfig,
    /// Wall-clock limit for the whole solve.
    pub timeout: Option<Duration>,
    /// Outer restarts, each running all three stages from a fresh start.
    pub n_start_over: usize,
    pub ablation: Ablation,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            optimizer: OptimizerConfig::default(),
            timeout: Some(Duration::from_secs(1200)),
            n_start_over: 10,
            ablation: Ablation::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VerdictKind {
    Sat,
    UnsatGuess,
    Timeout,
}

impl VerdictKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            VerdictKind::Sat => "sat",
            VerdictKind::UnsatGuess => "unsat-guess",
            VerdictKind::Timeout => "timeout",
        }
    }
}

impl fmt::Display for VerdictKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stage {
    S1,
    S2,
    S3,
}

/// Outcome of one stage of one restart.
#[derive(Debug, Clone, PartialEq)]
pub struct StageSummary {
    pub restart: usize,
    pub stage: Stage,
    pub best_value: f64,
    pub exact_zero: bool,
    pub evaluations: u64,
    pub elapsed: Duration,
    pub status: OptStatus,
}

impl StageSummary {
    fn new(restart: usize, stage: Stage, r: &OptResult) -> Self {
        StageSummary {
            restart,
            stage,
            best_value: r.best_value,
            exact_zero: r.exact_zero,
            evaluations: r.evaluations,
            elapsed: r.elapsed,
            status: r.status,
        }
    }
}

impl fmt::Display for StageSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "restart {} {:?}: value {:e} zero {} evals {} time {:.3}s {:?}",
            self.restart,
            self.stage,
            self.best_value,
            self.exact_zero,
            self.evaluations,
            self.elapsed.as_secs_f64(),
            self.status
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub kind: VerdictKind,
    /// Present for `Sat` only.
    pub model: Option<Assignment>,
    /// Smallest ULP-stage value seen; present for `UnsatGuess` only.
    pub score: Option<f64>,
    pub stage_trace: Vec<StageSummary>,
    pub elapsed: Duration,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    /// An exact zero was reported at a point that is not a model.
    #[error("internal inconsistency: zero objective at a non-model\n{model}")]
    Inconsistent { model: String },
    #[error("candidate is not a model")]
    NotAModel,
}

/// Checks a candidate with the bit-exact evaluator and hands it back
/// unchanged.
pub fn validate_and_emit(f: &Formula, candidate: Assignment) -> Result<Assignment, EngineError> {
    if candidate.len() == f.dim() && is_model(f, &candidate) {
        Ok(candidate)
    } else {
        Err(EngineError::NotAModel)
    }
}

fn restart_seed(seed: u64, restart: usize) -> u64 {
    seed ^ (restart as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

fn accept(f: &Formula, values: Vec<FpScalar>) -> Result<Assignment, EngineError> {
    let inconsistent = |values: &[FpScalar]| EngineError::Inconsistent {
        model: values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" "),
    };
    let a = Assignment::new(values.clone()).map_err(|_| inconsistent(&values))?;
    validate_and_emit(f, a).map_err(|_| inconsistent(&values))
}

/// Replaces the S1 incumbent by its projection onto the linear-equality
/// manifold when that is no worse. The projection is the exact minimizer of
/// the distance term, which the line searches only approach.
fn polish(s1: &Objective, x: Vec<f64>, value: f64) -> Vec<f64> {
    let Some(p) = s1.projector().and_then(|p| p.project(&x).ok()) else {
        return x;
    };
    if !p.point.iter().all(|v| v.is_finite()) {
        return x;
    }
    match s1.evaluate(&p.point) {
        Ok(e) if e.value <= value => p.point,
        _ => x,
    }
}

/// Runs the pipeline. Only the ULP stages can produce `Sat`, and only after
/// the model passes the bit-exact check.
pub fn solve(f: &Arc<Formula>, cfg: &EngineConfig) -> Result<Verdict, EngineError> {
    let started = Instant::now();
    let budget = match cfg.timeout {
        Some(t) => Budget::new(t),
        None => Budget::unlimited(),
    };
    let opt = &cfg.optimizer;
    let ablation = cfg.ablation;
    let mut trace = Vec::new();
    let finish = |kind, model, score, trace| Verdict {
        kind,
        model,
        score,
        stage_trace: trace,
        elapsed: started.elapsed(),
    };

    if f.dim() == 0 {
        let s2 = Objective::s2(f.clone(), ablation);
        let e = s2.evaluate_values(&[]);
        return Ok(if e.exact_zero {
            finish(VerdictKind::Sat, Some(accept(f, Vec::new())?), None, trace)
        } else {
            finish(VerdictKind::UnsatGuess, None, Some(e.value), trace)
        });
    }

    let s1 = Objective::s1(f.clone(), ablation);
    let sampler = StartBox::new(f);
    let mut score = f64::INFINITY;

    for restart in 0..cfg.n_start_over.max(1) {
        if budget.check_clock() {
            return Ok(finish(VerdictKind::Timeout, None, None, trace));
        }
        let seed = restart_seed(opt.rng_seed, restart);
        let mut rng = start_rng(seed, u64::MAX);

        // S1: real-valued descent. Never decides satisfiability.
        let x1 = if ablation.no_s1 {
            sampler.sample(&mut rng)
        } else {
            let b = budget.child(opt.stages[0].time_budget);
            let r = multi_start(
                &s1,
                |rng: &mut rand_chacha::ChaCha8Rng| sampler.sample(rng),
                &opt.stages[0],
                opt.n_restarts,
                seed,
                opt.parallel,
                &b,
            );
            trace.push(StageSummary::new(restart, Stage::S1, &r));
            polish(&s1, r.best_point, r.best_value)
        };
        if budget.check_clock() {
            return Ok(finish(VerdictKind::Timeout, None, None, trace));
        }

        // S2: ULP objective in offset coordinates around the S1 point.
        let anchor = s1
            .assignment_at(&x1)
            .unwrap_or_else(|| Assignment::new(vec![FpScalar::from_f64(0.0); f.dim()]).expect("finite"));
        let mut chart = OffsetChart::new(Objective::s3(f.clone(), &anchor, ablation));
        let b = budget.child(opt.stages[1].time_budget);
        let r2 = basin_hop(&mut chart, &vec![0.0; f.dim()], &opt.stages[1], &mut rng, &b);
        trace.push(StageSummary::new(restart, Stage::S2, &r2));
        let x2 = chart.objective().values_at(&r2.best_point).expect("offsets are never NaN");
        if r2.exact_zero {
            let model = accept(f, x2)?;
            return Ok(finish(VerdictKind::Sat, Some(model), None, trace));
        }
        score = score.min(r2.best_value);
        if budget.check_clock() {
            return Ok(finish(VerdictKind::Timeout, None, None, trace));
        }

        // S3: bounded lattice search around the S2 point.
        if !ablation.no_s3 {
            let s3 = Objective::s3(f.clone(), &Assignment::new(x2).expect("finite"), ablation);
            let b = budget.child(opt.stages[2].time_budget);
            let r3 = lattice_refine(&s3, opt.s3_bound, &opt.stages[2], &mut rng, &b);
            trace.push(StageSummary::new(restart, Stage::S3, &r3));
            if r3.exact_zero {
                let values = s3.values_at(&r3.best_point).expect("offsets are never NaN");
                let model = accept(f, values)?;
                return Ok(finish(VerdictKind::Sat, Some(model), None, trace));
            }
            score = score.min(r3.best_value);
        }
        if budget.check_clock() {
            return Ok(finish(VerdictKind::Timeout, None, None, trace));
        }
    }
    Ok(finish(VerdictKind::UnsatGuess, None, Some(score), trace))
}

/// Solver output: the verdict line, then the model block or score.
pub fn render(f: &Formula, v: &Verdict, verbose: bool) -> String {
    let mut out = String::from(v.kind.as_str());
    match (&v.model, v.score) {
        (Some(m), _) => {
            out.push('\n');
            out.push_str(&format_model(f, m));
        }
        (None, Some(s)) if verbose => out.push_str(&format!("\n; score {s:e}")),
        _ => {}
    }
    out
}
