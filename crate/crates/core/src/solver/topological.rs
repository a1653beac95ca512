use std::time::Instant;

use super::{check_reference, finish_solve, Problem, Recorder, SolveConfig, SolveResult};
use crate::error::Result;
use crate::grid::{ArrivalGrid, SeedSet, VelocityGrid};

/// Updates every non-seed node in linear-index order, round after round,
/// until a round activates nothing.
pub fn solve_topological(
    velocity: &VelocityGrid,
    seeds: &SeedSet,
    config: &SolveConfig,
    reference: Option<&ArrivalGrid>,
) -> Result<SolveResult> {
    check_reference(velocity, reference)?;
    let problem = Problem::new(velocity, seeds, config)?;
    let mut recorder = Recorder::new(reference, config.variant, config.trace);
    let started = Instant::now();

    let mut rounds = 0u64;
    loop {
        rounds += 1;
        let mut changed = false;
        for idx in 0..problem.len() {
            if problem.is_seed(idx) {
                continue;
            }
            let r = problem.relax_exclusive(idx);
            recorder.record(idx, &r);
            changed |= problem.activates(idx, &r);
        }
        if !changed {
            break;
        }
    }

    Ok(finish_solve(problem, recorder, started, rounds, 0))
}
