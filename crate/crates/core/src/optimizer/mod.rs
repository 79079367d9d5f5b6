//! Derivative-free minimization: Powell local search, basin hopping,
//! multi-start, and the bounded lattice search over ULP offsets.

use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::time::Duration;

use web_time::Instant;

use crate::lattice::FpScalar;
use crate::objective::{Evaluation, Objective, ObjectiveKind};

mod basin;
mod lattice_search;
mod powell;
mod sampling;

pub use basin::{basin_hop, multi_start, start_rng};
pub use lattice_search::lattice_refine;
pub use powell::local_minimize;
pub use sampling::{sample_start_box, StartBox};

/// The deadline is checked once per this many evaluations.
pub const CLOCK_CHECK_INTERVAL: u64 = 1024;

/// Largest direction length used in offset coordinates (about the span of
/// the binary64 lattice).
const MAX_OFFSET_SCALE: f64 = 1.9e19;

/// Something a minimizer can search over.
pub trait Landscape {
    fn dim(&self) -> usize;

    fn evaluate(&self, x: &[f64]) -> Evaluation;

    /// Per-coordinate length used for initial directions and perturbations.
    fn scale(&self, x: &[f64]) -> Vec<f64> {
        x.iter().map(|v| v.abs().max(1.0)).collect()
    }

    /// Smallest line-search step worth resolving.
    fn resolution(&self) -> f64 {
        0.0
    }

    /// Re-expresses the search around an accepted point and returns that
    /// point's new coordinates; `None` keeps the current chart.
    fn recenter(&mut self, _x: &[f64]) -> Option<Vec<f64>> {
        None
    }
}

impl Landscape for Objective {
    fn dim(&self) -> usize {
        Objective::dim(self)
    }

    fn evaluate(&self, x: &[f64]) -> Evaluation {
        Objective::evaluate(self, x).expect("optimizer keeps dimensions consistent")
    }

    fn scale(&self, x: &[f64]) -> Vec<f64> {
        match self.kind() {
            ObjectiveKind::S3 => vec![1.0; x.len()],
            _ => x.iter().map(|v| v.abs().max(1.0)).collect(),
        }
    }

    fn resolution(&self) -> f64 {
        match self.kind() {
            ObjectiveKind::S3 => 0.25,
            _ => 0.0,
        }
    }
}

/// A ULP objective searched in offset coordinates around a moving anchor.
/// Every accepted point becomes the new anchor, so coordinates stay small
/// and integral steps stay exact whatever the magnitude of the values.
#[derive(Debug, Clone)]
pub struct OffsetChart {
    objective: Objective,
}

impl OffsetChart {
    pub fn new(objective: Objective) -> OffsetChart {
        assert_eq!(objective.kind(), ObjectiveKind::S3, "offset chart needs an anchored objective");
        OffsetChart { objective }
    }

    pub fn objective(&self) -> &Objective {
        &self.objective
    }

    pub fn anchor(&self) -> &[FpScalar] {
        self.objective.anchor().expect("anchored")
    }
}

impl Landscape for OffsetChart {
    fn dim(&self) -> usize {
        self.objective.dim()
    }

    fn evaluate(&self, x: &[f64]) -> Evaluation {
        Landscape::evaluate(&self.objective, x)
    }

    /// Far from a zero, one-ULP steps change the squared distances by less
    /// than their rounding error; steps of about the root value do not.
    fn scale(&self, x: &[f64]) -> Vec<f64> {
        let v = Landscape::evaluate(&self.objective, x).value;
        vec![v.sqrt().clamp(1.0, MAX_OFFSET_SCALE); x.len()]
    }

    fn resolution(&self) -> f64 {
        0.25
    }

    fn recenter(&mut self, x: &[f64]) -> Option<Vec<f64>> {
        let values = self.objective.values_at(x)?;
        self.objective.set_anchor(values);
        Some(vec![0.0; x.len()])
    }
}

/// Settings for one stage.
#[derive(Debug, Clone, PartialEq)]
pub struct StageConfig {
    /// Local minimizations per basin-hopping run, the first included.
    pub hops: usize,
    pub perturbation_scale: f64,
    pub local_max_iters: usize,
    /// Relative improvement below which a Powell sweep counts as converged.
    pub local_tol: f64,
    pub time_budget: Option<Duration>,
}

impl StageConfig {
    pub fn with_hops(hops: usize) -> StageConfig {
        StageConfig {
            hops,
            perturbation_scale: 1.0,
            local_max_iters: 100,
            local_tol: 1e-10,
            time_budget: None,
        }
    }
}

/// Optimizer settings for all three stages.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    /// Starts per multi-start run.
    pub n_restarts: usize,
    pub stages: [StageConfig; 3],
    pub rng_seed: u64,
    /// Per-coordinate radius of the lattice search.
    pub s3_bound: u32,
    /// Run multi-start starts on a thread pool.
    pub parallel: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        let mut s2 = StageConfig::with_hops(10);
        s2.perturbation_scale = 16.0;
        OptimizerConfig {
            n_restarts: 4,
            stages: [StageConfig::with_hops(30), s2, StageConfig::with_hops(10)],
            rng_seed: 0,
            s3_bound: 8,
            parallel: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptStatus {
    /// The integer-exact zero check passed at the best point.
    ZeroFound,
    Converged,
    BudgetExhausted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptResult {
    pub best_point: Vec<f64>,
    pub best_value: f64,
    pub exact_zero: bool,
    pub evaluations: u64,
    pub elapsed: Duration,
    pub status: OptStatus,
    /// Incumbent value after each hop (basin hopping only).
    pub trace: Vec<f64>,
}

impl OptResult {
    fn better_than(&self, other: &OptResult) -> bool {
        (self.exact_zero && !other.exact_zero)
            || (self.exact_zero == other.exact_zero && self.best_value < other.best_value)
    }
}

/// Cooperative wall-clock budget shared by every evaluation of a stage.
#[derive(Debug)]
pub struct Budget {
    deadline: Option<Instant>,
    evals: AtomicU64,
    expired: AtomicBool,
    cancelled: AtomicBool,
}

impl Budget {
    pub fn unlimited() -> Budget {
        Budget::until(None)
    }

    pub fn new(limit: Duration) -> Budget {
        Budget::until(Instant::now().checked_add(limit))
    }

    pub fn until(deadline: Option<Instant>) -> Budget {
        Budget {
            deadline,
            evals: AtomicU64::new(0),
            expired: AtomicBool::new(false),
            cancelled: AtomicBool::new(false),
        }
    }

    /// A budget ending at the earlier of this deadline and `limit` from now.
    pub fn child(&self, limit: Option<Duration>) -> Budget {
        let local = limit.and_then(|d| Instant::now().checked_add(d));
        let deadline = match (self.deadline, local) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        let child = Budget::until(deadline);
        if self.is_expired() {
            child.expired.store(true, Ordering::Relaxed);
        }
        child
    }

    pub fn deadline(&self) -> Option<Instant> {
        self.deadline
    }

    /// Accounts for one evaluation; false once the budget is spent or the
    /// search has been cancelled.
    pub fn tick(&self) -> bool {
        if self.is_expired() || self.is_cancelled() {
            return false;
        }
        let n = self.evals.fetch_add(1, Ordering::Relaxed);
        if n.is_multiple_of(CLOCK_CHECK_INTERVAL) {
            return !self.check_clock();
        }
        true
    }

    /// Reads the clock now; true if the deadline has passed.
    pub fn check_clock(&self) -> bool {
        if let Some(d) = self.deadline {
            if Instant::now() >= d {
                self.expired.store(true, Ordering::Relaxed);
            }
        }
        self.is_expired()
    }

    pub fn is_expired(&self) -> bool {
        self.expired.load(Ordering::Relaxed)
    }

    pub fn cancel(&self) {
        self.cancelled.store(true, Ordering::Relaxed);
    }

    pub fn is_cancelled(&self) -> bool {
        self.cancelled.load(Ordering::Relaxed)
    }

    pub fn evaluations(&self) -> u64 {
        self.evals.load(Ordering::Relaxed)
    }
}

/// Evaluation wrapper that tracks the best point seen and stops the search
/// on a zero or an exhausted budget.
pub(crate) struct Probe<'a, L: ?Sized> {
    landscape: &'a L,
    budget: &'a Budget,
    best_x: Vec<f64>,
    best: Evaluation,
    evals: u64,
    stop: bool,
    out_of_budget: bool,
    started: Instant,
}

impl<'a, L: Landscape + ?Sized> Probe<'a, L> {
    /// Always evaluates `start`, even on a spent budget.
    pub(crate) fn new(landscape: &'a L, budget: &'a Budget, start: &[f64]) -> Self {
        let started = Instant::now();
        budget.tick();
        let mut e = landscape.evaluate(start);
        if e.value.is_nan() {
            e.value = f64::INFINITY;
        }
        let mut p = Probe {
            landscape,
            budget,
            best_x: start.to_vec(),
            best: e,
            evals: 1,
            stop: false,
            out_of_budget: false,
            started,
        };
        p.stop = e.exact_zero || e.value == 0.0;
        if !p.stop && (budget.is_expired() || budget.is_cancelled()) {
            p.stop = true;
            p.out_of_budget = true;
        }
        p
    }

    pub(crate) fn eval(&mut self, x: &[f64]) -> f64 {
        if self.stop {
            return f64::INFINITY;
        }
        if !self.budget.tick() {
            self.stop = true;
            self.out_of_budget = true;
            return f64::INFINITY;
        }
        let e = self.landscape.evaluate(x);
        self.evals += 1;
        let v = if e.value.is_nan() { f64::INFINITY } else { e.value };
        if v < self.best.value || (e.exact_zero && !self.best.exact_zero) {
            self.best = Evaluation { value: v, exact_zero: e.exact_zero };
            self.best_x.clear();
            self.best_x.extend_from_slice(x);
        }
        if e.exact_zero || v == 0.0 {
            self.stop = true;
        }
        v
    }

    pub(crate) fn stopped(&self) -> bool {
        self.stop
    }

    pub(crate) fn landscape(&self) -> &'a L {
        self.landscape
    }

    pub(crate) fn finish(self) -> OptResult {
        let status = if self.best.exact_zero {
            OptStatus::ZeroFound
        } else if self.out_of_budget {
            OptStatus::BudgetExhausted
        } else {
            OptStatus::Converged
        };
        OptResult {
            best_point: self.best_x,
            best_value: self.best.value,
            exact_zero: self.best.exact_zero,
            evaluations: self.evals,
            elapsed: self.started.elapsed(),
            status,
            trace: Vec::new(),
        }
    }
}
