use std::sync::atomic::{AtomicBool, Ordering};
use std::time::Instant;

use rayon::prelude::*;

use super::{check_reference, finish_solve, Problem, Recorder, Relaxation, SolveConfig, SolveResult};
use crate::error::{Error, Result};
use crate::grid::{ArrivalGrid, SeedSet, VelocityGrid};

const ROUND_CHUNK: usize = 256;

/// Fast iterative method.
///
/// Each round drains the active list `w` into the next list `w'`. A node
/// whose own update lowers it by at most `epsilon` is considered converged
/// and updates its neighbors (skipping those still listed in `w`), pushing the
/// ones that changed. A node that moved more than `epsilon`, including its
/// first finite value, goes back on `w'`. Rounds are processed in parallel
/// when `threads > 1`; round boundaries stay deterministic.
pub fn solve_fim(
    velocity: &VelocityGrid,
    seeds: &SeedSet,
    config: &SolveConfig,
    reference: Option<&ArrivalGrid>,
) -> Result<SolveResult> {
    check_reference(velocity, reference)?;
    let problem = Problem::new(velocity, seeds, config)?;
    let shape = *velocity.shape();
    let started = Instant::now();

    let flags = || (0..shape.len()).map(|_| AtomicBool::new(false)).collect::<Vec<_>>();
    let in_current = flags();
    let in_next = flags();
    let mut current: Vec<usize> = seeds.iter().map(|s| shape.index(s.i, s.j)).collect();
    for &n in &current {
        in_current[n].store(true, Ordering::Relaxed);
    }

    let round = Round {
        problem: &problem,
        in_current: &in_current,
        in_next: &in_next,
        epsilon: config.epsilon,
        concurrent: config.threads > 1,
    };
    let pool = if config.threads > 1 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(config.threads)
                .build()
                .map_err(|e| Error::InvalidConfig(format!("cannot start thread pool: {e}")))?,
        )
    } else {
        None
    };

    let mut recorder = Recorder::new(reference, config.variant, config.trace);
    let mut rounds = 0u64;
    while !current.is_empty() {
        rounds += 1;
        let next = match &pool {
            None => {
                let mut next = Vec::new();
                for &n in &current {
                    round.process(n, &mut recorder, &mut next);
                }
                next
            }
            Some(pool) => {
                let parts: Vec<(Recorder<'_>, Vec<usize>)> = pool.install(|| {
                    current
                        .par_chunks(ROUND_CHUNK)
                        .map(|chunk| {
                            let mut rec = Recorder::new(reference, config.variant, config.trace);
                            let mut next = Vec::new();
                            for &n in chunk {
                                round.process(n, &mut rec, &mut next);
                            }
                            (rec, next)
                        })
                        .collect()
                });
                let mut next = Vec::new();
                for (rec, part) in parts {
                    recorder.merge(rec);
                    next.extend(part);
                }
                next
            }
        };
        for &n in &current {
            in_current[n].store(false, Ordering::Relaxed);
        }
        for &n in &next {
            in_next[n].store(false, Ordering::Relaxed);
            in_current[n].store(true, Ordering::Relaxed);
        }
        current = next;
    }

    Ok(finish_solve(problem, recorder, started, rounds, 0))
}

struct Round<'p, 'a> {
    problem: &'p Problem<'a>,
    in_current: &'p [AtomicBool],
    in_next: &'p [AtomicBool],
    epsilon: f64,
    concurrent: bool,
}

impl Round<'_, '_> {
    #[inline]
    fn relax(&self, idx: usize) -> Relaxation {
        if self.concurrent {
            self.problem.relax(idx)
        } else {
            self.problem.relax_exclusive(idx)
        }
    }

    #[inline]
    fn enqueue(&self, idx: usize, next: &mut Vec<usize>) {
        if !self.in_next[idx].swap(true, Ordering::Relaxed) {
            next.push(idx);
        }
    }

    fn process(&self, n: usize, rec: &mut Recorder<'_>, next: &mut Vec<usize>) {
        let converged = if self.problem.is_seed(n) {
            true
        } else {
            let r = self.relax(n);
            rec.record(n, &r);
            r.prev.is_finite() && r.prev - r.new_value() <= self.epsilon
        };
        if !converged {
            self.enqueue(n, next);
            return;
        }
        let shape = self.problem.velocity.shape();
        for m in shape.neighbor_indices(n) {
            if self.in_current[m].load(Ordering::Relaxed) || self.problem.is_seed(m) {
                continue;
            }
            let r = self.relax(m);
            rec.record(m, &r);
            if self.problem.activates(m, &r) {
                self.enqueue(m, next);
            }
        }
    }
}
