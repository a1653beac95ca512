use std::time::Instant;

use super::{check_reference, finish_solve, Problem, Recorder, SolveConfig, SolveResult};
use crate::error::Result;
use crate::grid::{ArrivalGrid, SeedSet, VelocityGrid};

/// The four sweep directions as (x ascending, y ascending).
const SWEEPS: [(bool, bool); 4] = [(true, true), (false, true), (false, false), (true, false)];

/// Fast sweeping: Gauss-Seidel passes in the four diagonal orderings,
/// repeated until a whole cycle of four activates nothing.
pub fn solve_fsm(
    velocity: &VelocityGrid,
    seeds: &SeedSet,
    config: &SolveConfig,
    reference: Option<&ArrivalGrid>,
) -> Result<SolveResult> {
    check_reference(velocity, reference)?;
    let problem = Problem::new(velocity, seeds, config)?;
    let shape = *velocity.shape();
    let (nx, ny) = (shape.nx(), shape.ny());
    let mut recorder = Recorder::new(reference, config.variant, config.trace);
    let started = Instant::now();

    let mut cycles = 0u64;
    loop {
        cycles += 1;
        let mut changed = false;
        for (x_up, y_up) in SWEEPS {
            for jj in 0..ny {
                let j = if y_up { jj } else { ny - 1 - jj };
                for ii in 0..nx {
                    let i = if x_up { ii } else { nx - 1 - ii };
                    let idx = shape.index(i, j);
                    if problem.is_seed(idx) {
                        continue;
                    }
                    let r = problem.relax_exclusive(idx);
                    recorder.record(idx, &r);
                    changed |= problem.activates(idx, &r);
                }
            }
        }
        if !changed {
            break;
        }
    }

    Ok(finish_solve(problem, recorder, started, cycles, 0))
}
