use std::time::Instant;

use super::{
    check_reference, default_scale, finish_solve, Problem, Recorder, SolveConfig, SolveResult,
};
use crate::error::Result;
use crate::grid::{ArrivalGrid, SeedSet, VelocityGrid};
use crate::worklist::{WorkItem, Worklist, WorklistConfig};

/// Asynchronous marching: workers pop nodes from the soft-priority
/// worklist, update each neighbor, and push the neighbors that were
/// activated with bin `floor(t / scale)`. Runs until the worklist is
/// quiescent.
///
/// Popped items whose bin no longer matches the node's current value are
/// processed anyway; updating from a stale item only repeats work.
pub fn solve_amm(
    velocity: &VelocityGrid,
    seeds: &SeedSet,
    config: &SolveConfig,
    reference: Option<&ArrivalGrid>,
) -> Result<SolveResult> {
    check_reference(velocity, reference)?;
    let problem = Problem::new(velocity, seeds, config)?;
    let shape = *velocity.shape();
    let scale = config.scale.unwrap_or_else(|| default_scale(velocity));
    let wl_config = WorklistConfig::new(scale, config.chunk_size)?.with_inversions(config.track_inversions);
    let worklist = Worklist::new(wl_config);
    let concurrent = config.threads > 1;
    let started = Instant::now();

    let initial: Vec<WorkItem> = seeds
        .iter()
        .map(|s| WorkItem::new(shape.index(s.i, s.j), wl_config.bin(s.t0)))
        .collect();

    let (recorders, stats) = worklist.run_until_quiescent(
        initial,
        config.threads,
        |_| Recorder::new(reference, config.variant, config.trace),
        |rec, item, handle| {
            for m in shape.neighbor_indices(item.node) {
                if problem.is_seed(m) {
                    continue;
                }
                let r = if concurrent { problem.relax(m) } else { problem.relax_exclusive(m) };
                rec.record(m, &r);
                if problem.activates(m, &r) {
                    handle.push(WorkItem::new(m, wl_config.bin(r.new_value())));
                }
            }
        },
    );

    let mut recorders = recorders.into_iter();
    let mut recorder = recorders.next().expect("at least one worker");
    for rec in recorders {
        recorder.merge(rec);
    }
    Ok(finish_solve(problem, recorder, started, stats.pops, stats.inversions))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridShape;
    use crate::operator::UpdateVariant;
    use crate::solver::{solve_fmm, Method, Tracking};

    fn field() -> (VelocityGrid, SeedSet) {
        let shape = GridShape::new(24, 19, 1.0).unwrap();
        let speeds = (0..shape.len()).map(|k| 0.5 + ((k * 13) % 9) as f64 * 0.25).collect();
        (VelocityGrid::new(shape, speeds).unwrap(), SeedSet::from_tuples(&[(5, 5, 0.0), (20, 15, 1.0)]).unwrap())
    }

    #[test]
    fn single_thread_exact_bins_match_fmm() {
        let (vel, seeds) = field();
        let fmm = solve_fmm(&vel, &seeds, &SolveConfig::new(Method::Fmm, UpdateVariant::MonotoneRoot), None)
            .unwrap();
        let cfg = SolveConfig::new(Method::Amm, UpdateVariant::MonotoneRoot).chunk_size(1).track_inversions(true);
        let amm = solve_amm(&vel, &seeds, &cfg, None).unwrap();
        assert_eq!(amm.arrivals, fmm.arrivals);
        assert_eq!(amm.inversions, 0);
    }

    #[test]
    fn multithreaded_monotone_is_deterministic() {
        let (vel, seeds) = field();
        let base = solve_amm(&vel, &seeds, &SolveConfig::new(Method::Amm, UpdateVariant::MonotoneRoot), None)
            .unwrap();
        for threads in [2, 4] {
            for tracking in [Tracking::DecreaseOnly, Tracking::AnyChange] {
                let cfg = SolveConfig::new(Method::Amm, UpdateVariant::MonotoneRoot)
                    .threads(threads)
                    .chunk_size(4)
                    .tracking(tracking);
                let res = solve_amm(&vel, &seeds, &cfg, None).unwrap();
                assert_eq!(res.arrivals, base.arrivals);
                let s = res.stats;
                assert_eq!(s.good + s.empty + s.bad, s.total);
            }
        }
    }
}
