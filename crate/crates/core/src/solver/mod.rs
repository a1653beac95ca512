//! Schedules over the shared update operator.
//!
//! Every solver starts from `+inf` everywhere except the seeds, which are
//! never updated, and commits proposals with a decrease-only write. What
//! differs is which node gets updated next:
//!
//! - [`Method::Fmm`]: exact priority queue keyed on arrival time.
//! - [`Method::Topological`]: full passes in index order until nothing changes.
//! - [`Method::Fsm`]: alternating-direction Gauss-Seidel sweeps.
//! - [`Method::Fim`]: two-list active band with a convergence threshold.
//! - [`Method::Amm`]: soft-priority concurrent worklist.

mod amm;
mod fim;
mod fmm;
mod fsm;
mod topological;

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::time::Instant;

use crate::error::{Error, Result};
use crate::grid::{init_arrivals, ArrivalGrid, SeedSet, VelocityGrid};
use crate::metrics::{classify_entry, TraceEntry, UpdateClass, UpdateCounters};
use crate::operator::{update_with, UpdateVariant};
use crate::worklist::DEFAULT_CHUNK_SIZE;

pub use amm::solve_amm;
pub use fim::solve_fim;
pub use fmm::solve_fmm;
pub use fsm::solve_fsm;
pub use topological::solve_topological;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Fmm,
    Topological,
    Fsm,
    Fim,
    Amm,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Fmm, Method::Topological, Method::Fsm, Method::Fim, Method::Amm];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Fmm => "fmm",
            Method::Topological => "topological",
            Method::Fsm => "fsm",
            Method::Fim => "fim",
            Method::Amm => "amm",
        }
    }

    pub fn is_parallel(&self) -> bool {
        matches!(self, Method::Fim | Method::Amm)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fmm" => Ok(Method::Fmm),
            "topological" | "topo" => Ok(Method::Topological),
            "fsm" => Ok(Method::Fsm),
            "fim" => Ok(Method::Fim),
            "amm" => Ok(Method::Amm),
            other => Err(Error::InvalidConfig(format!("unknown method '{other}'"))),
        }
    }
}

/// When a neighbor update re-activates a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Tracking {
    /// Only when its stored value decreased.
    DecreaseOnly,
    /// Whenever the proposal differs from the stored value. Storage stays
    /// decrease-only; a proposal above the stored value activates the node at
    /// most once until its next decrease.
    AnyChange,
}

impl Tracking {
    pub fn name(&self) -> &'static str {
        match self {
            Tracking::DecreaseOnly => "decrease",
            Tracking::AnyChange => "any",
        }
    }
}

impl fmt::Display for Tracking {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Tracking {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "decrease" | "decrease-only" => Ok(Tracking::DecreaseOnly),
            "any" | "any-change" => Ok(Tracking::AnyChange),
            other => Err(Error::InvalidConfig(format!("unknown tracking mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveConfig {
    pub method: Method,
    pub variant: UpdateVariant,
    /// Convergence threshold of the fast iterative method.
    pub epsilon: f64,
    /// Bin width of the soft-priority worklist; `None` picks `h / (4 max v)`.
    pub scale: Option<f64>,
    pub threads: usize,
    pub tracking: Tracking,
    pub chunk_size: usize,
    /// Keep every `(node, old, new)` update in the result.
    pub trace: bool,
    pub track_inversions: bool,
}

impl SolveConfig {
    pub fn new(method: Method, variant: UpdateVariant) -> Self {
        Self {
            method,
            variant,
            epsilon: 0.0,
            scale: None,
            threads: 1,
            tracking: Tracking::DecreaseOnly,
            chunk_size: DEFAULT_CHUNK_SIZE,
            trace: false,
            track_inversions: false,
        }
    }

    pub fn threads(mut self, threads: usize) -> Self {
        self.threads = threads;
        self
    }

    pub fn tracking(mut self, tracking: Tracking) -> Self {
        self.tracking = tracking;
        self
    }

    pub fn epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn scale(mut self, scale: f64) -> Self {
        self.scale = Some(scale);
        self
    }

    pub fn chunk_size(mut self, chunk_size: usize) -> Self {
        self.chunk_size = chunk_size;
        self
    }

    pub fn trace(mut self, on: bool) -> Self {
        self.trace = on;
        self
    }

    pub fn track_inversions(mut self, on: bool) -> Self {
        self.track_inversions = on;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.threads == 0 {
            return Err(Error::InvalidConfig("threads must be >= 1".into()));
        }
        if self.threads > 1 && !self.method.is_parallel() {
            return Err(Error::InvalidConfig(format!(
                "{} is single-threaded, got --threads {}",
                self.method, self.threads
            )));
        }
        if !(self.epsilon >= 0.0) {
            return Err(Error::InvalidConfig(format!("epsilon must be >= 0, got {}", self.epsilon)));
        }
        if let Some(scale) = self.scale {
            if !(scale > 0.0 && scale.is_finite()) {
                return Err(Error::InvalidConfig(format!("scale must be positive, got {scale}")));
            }
        }
        if self.chunk_size == 0 {
            return Err(Error::InvalidConfig("chunk size must be >= 1".into()));
        }
        Ok(())
    }
}

/// `h / (4 max v)`: a quarter of the fastest single-cell crossing time.
pub fn default_scale(velocity: &VelocityGrid) -> f64 {
    velocity.shape().h() / (4.0 * velocity.max_speed())
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub arrivals: ArrivalGrid,
    pub stats: UpdateCounters,
    pub wall_time: f64,
    /// Priority inversions observed by the worklist (AMM with tracking on).
    pub inversions: u64,
    /// Rounds, sweep cycles or worklist pops, depending on the method.
    pub iterations: u64,
    pub trace: Option<Vec<TraceEntry>>,
}

/// Runs the configured method. Update classification uses the solver's own
/// final values.
pub fn solve(velocity: &VelocityGrid, seeds: &SeedSet, config: &SolveConfig) -> Result<SolveResult> {
    solve_with_reference(velocity, seeds, config, None)
}

/// Runs the configured method, classifying each committed update as good
/// when it lands on `reference` (bitwise for monotone variants, `1e-12`
/// relative otherwise).
pub fn solve_with_reference(
    velocity: &VelocityGrid,
    seeds: &SeedSet,
    config: &SolveConfig,
    reference: Option<&ArrivalGrid>,
) -> Result<SolveResult> {
    match config.method {
        Method::Fmm => solve_fmm(velocity, seeds, config, reference),
        Method::Topological => solve_topological(velocity, seeds, config, reference),
        Method::Fsm => solve_fsm(velocity, seeds, config, reference),
        Method::Fim => solve_fim(velocity, seeds, config, reference),
        Method::Amm => solve_amm(velocity, seeds, config, reference),
    }
}

/// Arrival times shared between workers. Nonnegative doubles order the same
/// way as their bit patterns, so a decrease-only commit is an atomic integer
/// minimum.
pub(crate) struct SharedArrivals {
    cells: Vec<AtomicU64>,
}

impl SharedArrivals {
    fn new(grid: &ArrivalGrid) -> Self {
        Self { cells: grid.values().iter().map(|t| AtomicU64::new(t.to_bits())).collect() }
    }

    #[inline]
    pub(crate) fn load(&self, idx: usize) -> f64 {
        f64::from_bits(self.cells[idx].load(Ordering::Relaxed))
    }

    /// Decrease-only write; returns the value seen before the write.
    #[inline]
    pub(crate) fn commit_min(&self, idx: usize, proposal: f64) -> f64 {
        debug_assert!(proposal >= 0.0 && !proposal.is_sign_negative());
        f64::from_bits(self.cells[idx].fetch_min(proposal.to_bits(), Ordering::Relaxed))
    }

    /// Decrease-only write for single-threaded schedules.
    #[inline]
    pub(crate) fn commit_min_exclusive(&self, idx: usize, proposal: f64) -> f64 {
        let prev = self.load(idx);
        if proposal < prev {
            self.cells[idx].store(proposal.to_bits(), Ordering::Relaxed);
        }
        prev
    }

    fn into_grid(self, velocity: &VelocityGrid) -> ArrivalGrid {
        let values = self.cells.into_iter().map(|c| f64::from_bits(c.into_inner())).collect();
        ArrivalGrid::new(*velocity.shape(), values).expect("solver kept arrivals valid")
    }
}

/// Read-only context shared by all workers of one solve.
pub(crate) struct Problem<'a> {
    pub velocity: &'a VelocityGrid,
    pub seed_mask: Vec<bool>,
    pub arrivals: SharedArrivals,
    pub variant: UpdateVariant,
    pub tracking: Tracking,
    // Set once a proposal above the stored value activated the node; cleared
    // on its next decrease.
    spurious: Vec<AtomicBool>,
}

/// What one update did to one node.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Relaxation {
    pub prev: f64,
    pub proposal: f64,
}

impl Relaxation {
    #[inline]
    pub fn new_value(&self) -> f64 {
        self.prev.min(self.proposal)
    }

    #[inline]
    pub fn decreased(&self) -> bool {
        self.proposal < self.prev
    }
}

impl<'a> Problem<'a> {
    pub fn new(velocity: &'a VelocityGrid, seeds: &SeedSet, config: &SolveConfig) -> Result<Self> {
        config.validate()?;
        if seeds.is_empty() {
            return Err(Error::EmptySeeds);
        }
        let shape = velocity.shape();
        let seed_mask = seeds.mask(shape)?;
        let arrivals = SharedArrivals::new(&init_arrivals(shape, seeds)?);
        let spurious = match config.tracking {
            Tracking::AnyChange => (0..shape.len()).map(|_| AtomicBool::new(false)).collect(),
            Tracking::DecreaseOnly => Vec::new(),
        };
        Ok(Self {
            velocity,
            seed_mask,
            arrivals,
            variant: config.variant,
            tracking: config.tracking,
            spurious,
        })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.seed_mask.len()
    }

    #[inline]
    pub fn is_seed(&self, idx: usize) -> bool {
        self.seed_mask[idx]
    }

    #[inline]
    pub fn propose(&self, idx: usize) -> f64 {
        update_with(self.velocity, idx, self.variant, |n| self.arrivals.load(n))
    }

    /// Update `idx` under concurrent access.
    #[inline]
    pub fn relax(&self, idx: usize) -> Relaxation {
        let proposal = self.propose(idx);
        let prev = self.arrivals.commit_min(idx, proposal);
        Relaxation { prev, proposal }
    }

    /// Update `idx` when no other thread touches the grid.
    #[inline]
    pub fn relax_exclusive(&self, idx: usize) -> Relaxation {
        let proposal = self.propose(idx);
        let prev = self.arrivals.commit_min_exclusive(idx, proposal);
        Relaxation { prev, proposal }
    }

    /// Whether this update should (re)activate the node.
    #[inline]
    pub fn activates(&self, idx: usize, r: &Relaxation) -> bool {
        match self.tracking {
            Tracking::DecreaseOnly => r.decreased(),
            Tracking::AnyChange => {
                if r.decreased() {
                    self.spurious[idx].store(false, Ordering::Relaxed);
                    true
                } else if r.proposal != r.prev {
                    !self.spurious[idx].swap(true, Ordering::Relaxed)
                } else {
                    false
                }
            }
        }
    }

    pub fn finish(self) -> ArrivalGrid {
        self.arrivals.into_grid(self.velocity)
    }
}

/// Per-thread update accounting.
pub(crate) struct Recorder<'r> {
    total: u64,
    empty: u64,
    good: u64,
    bad: u64,
    reference: Option<&'r [f64]>,
    exact: bool,
    trace: Option<Vec<TraceEntry>>,
}

impl<'r> Recorder<'r> {
    pub fn new(reference: Option<&'r ArrivalGrid>, variant: UpdateVariant, trace: bool) -> Self {
        Self {
            total: 0,
            empty: 0,
            good: 0,
            bad: 0,
            reference: reference.map(|r| r.values()),
            exact: variant.is_monotone(),
            trace: trace.then(Vec::new),
        }
    }

    #[inline]
    pub fn record(&mut self, node: usize, r: &Relaxation) {
        let new = r.new_value();
        self.total += 1;
        if let Some(trace) = self.trace.as_mut() {
            trace.push(TraceEntry { node, old: r.prev, new });
        }
        if new == r.prev {
            self.empty += 1;
            return;
        }
        match self.reference {
            Some(reference) => match classify_entry(r.prev, new, reference[node], self.exact) {
                UpdateClass::Good => self.good += 1,
                UpdateClass::Bad => self.bad += 1,
                UpdateClass::Empty => self.empty += 1,
            },
            // Classified once the final values are known.
            None => self.bad += 1,
        }
    }

    pub fn merge(&mut self, other: Recorder<'r>) {
        self.total += other.total;
        self.empty += other.empty;
        self.good += other.good;
        self.bad += other.bad;
        if let (Some(mine), Some(theirs)) = (self.trace.as_mut(), other.trace) {
            mine.extend(theirs);
        }
    }

    /// Final counters. Without a reference, every node that ends finite and
    /// is not a seed received exactly one good update (its last, since stored
    /// values only decrease); all other value-changing updates were bad.
    fn finish(self, problem_seeds: &[bool], arrivals: &ArrivalGrid) -> (UpdateCounters, Option<Vec<TraceEntry>>) {
        let (good, bad) = if self.reference.is_some() {
            (self.good, self.bad)
        } else {
            let written = arrivals
                .values()
                .iter()
                .zip(problem_seeds)
                .filter(|(t, seed)| !**seed && t.is_finite())
                .count() as u64;
            (written, self.bad - written)
        };
        (UpdateCounters { good, empty: self.empty, bad, total: self.total }, self.trace)
    }
}

/// Shared epilogue: freeze the grid and build the result.
pub(crate) fn finish_solve(
    problem: Problem<'_>,
    recorder: Recorder<'_>,
    started: Instant,
    iterations: u64,
    inversions: u64,
) -> SolveResult {
    let wall_time = started.elapsed().as_secs_f64();
    let seeds = problem.seed_mask.clone();
    let arrivals = problem.finish();
    let (stats, trace) = recorder.finish(&seeds, &arrivals);
    SolveResult { arrivals, stats, wall_time, inversions, iterations, trace }
}

pub(crate) fn check_reference(velocity: &VelocityGrid, reference: Option<&ArrivalGrid>) -> Result<()> {
    match reference {
        Some(r) if r.shape() != velocity.shape() => {
            Err(Error::ShapeMismatch("reference solution has a different shape".into()))
        }
        _ => Ok(()),
    }
}
