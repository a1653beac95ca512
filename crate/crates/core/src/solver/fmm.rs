use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::time::Instant;

use super::{check_reference, finish_solve, Problem, Recorder, SolveConfig, SolveResult};
use crate::error::Result;
use crate::grid::{ArrivalGrid, SeedSet, VelocityGrid};

/// Exact-priority marching: always expands the smallest enqueued arrival
/// time, ties broken by linear index. A popped entry whose key no longer
/// matches the node's stored value is stale and skipped; the fresher entry
/// already updated the same neighbors with the same value.
pub fn solve_fmm(
    velocity: &VelocityGrid,
    seeds: &SeedSet,
    config: &SolveConfig,
    reference: Option<&ArrivalGrid>,
) -> Result<SolveResult> {
    check_reference(velocity, reference)?;
    let problem = Problem::new(velocity, seeds, config)?;
    let shape = *velocity.shape();
    let mut recorder = Recorder::new(reference, config.variant, config.trace);
    let started = Instant::now();

    // Nonnegative doubles compare like their bit patterns.
    let mut heap: BinaryHeap<Reverse<(u64, usize)>> = seeds
        .iter()
        .map(|s| Reverse((s.t0.to_bits(), shape.index(s.i, s.j))))
        .collect();
    let mut pops = 0u64;

    while let Some(Reverse((key, node))) = heap.pop() {
        if key != problem.arrivals.load(node).to_bits() {
            continue;
        }
        pops += 1;
        for m in shape.neighbor_indices(node) {
            if problem.is_seed(m) {
                continue;
            }
            let r = problem.relax_exclusive(m);
            recorder.record(m, &r);
            if problem.activates(m, &r) {
                heap.push(Reverse((r.new_value().to_bits(), m)));
            }
        }
    }

    Ok(finish_solve(problem, recorder, started, pops, 0))
}
