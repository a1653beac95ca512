mod common;

use common::*;
use eikonal::grid::init_arrivals;
use eikonal::metrics::{residual_with_seeds, UpdateCounters};
use eikonal::operator::update_node;
use eikonal::{solve, ArrivalGrid, GridShape, Method, SeedSet, SolveConfig, Tracking, UpdateVariant, VelocityGrid};
use proptest::prelude::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

fn all_configs() -> Vec<SolveConfig> {
    let v = UpdateVariant::MonotoneRoot;
    let mut out = vec![
        SolveConfig::new(Method::Fmm, v),
        SolveConfig::new(Method::Topological, v),
        SolveConfig::new(Method::Fsm, v),
        SolveConfig::new(Method::Fim, v),
        SolveConfig::new(Method::Fim, v).threads(3),
    ];
    for threads in [1, 2, 4] {
        for tracking in [Tracking::DecreaseOnly, Tracking::AnyChange] {
            out.push(SolveConfig::new(Method::Amm, v).threads(threads).tracking(tracking).chunk_size(2));
        }
    }
    out
}

/// Applies nontrivial updates in a random order until none is left. Returns
/// the fixed point and the number of updates applied.
fn random_order_run(velocity: &VelocityGrid, seeds: &SeedSet, rng: &mut ChaCha8Rng) -> (ArrivalGrid, usize) {
    let shape = *velocity.shape();
    let mask = seeds.mask(&shape).unwrap();
    let mut t = init_arrivals(&shape, seeds).unwrap();
    let mut steps = 0;
    loop {
        let mut enabled = Vec::new();
        for idx in 0..shape.len() {
            if mask[idx] {
                continue;
            }
            let (i, j) = shape.coords(idx);
            let p = update_node(&t, velocity, i, j, UpdateVariant::MonotoneRoot).unwrap();
            if p < t.at(idx) {
                enabled.push((i, j, p));
            }
        }
        if enabled.is_empty() {
            return (t, steps);
        }
        let (i, j, p) = enabled[rng.random_range(0..enabled.len())];
        t.set(i, j, p).unwrap();
        steps += 1;
    }
}

#[test]
fn every_scheduler_matches_gauss_seidel_on_small_grids() {
    let mut rng = rng(7);
    for case in 0..60 {
        let (velocity, seeds) = random_problem(&mut rng, 5, 5);
        let want = gauss_seidel(&velocity, &seeds);
        for cfg in all_configs() {
            let got = solve(&velocity, &seeds, &cfg).unwrap();
            assert_eq!(bits(got.arrivals.values()), bits(&want), "case {case} {cfg:?}");
            assert!(got.stats.is_balanced());
        }
    }
}

#[test]
fn random_orders_reach_one_fixed_point_within_the_bound() {
    let mut rng = rng(11);
    for _ in 0..40 {
        let (velocity, seeds) = random_problem(&mut rng, 3, 2);
        let non_seeds = velocity.shape().len() - seeds.len();
        let reference = solve(&velocity, &seeds, &SolveConfig::new(Method::Fmm, UpdateVariant::MonotoneRoot)).unwrap();
        for _ in 0..25 {
            let (t, steps) = random_order_run(&velocity, &seeds, &mut rng);
            assert!(same_bits(&t, &reference.arrivals));
            assert!(steps < 1 << non_seeds, "{steps} updates on {non_seeds} nodes");
        }
    }
}

#[test]
fn monotone_solutions_are_exact_fixed_points() {
    let mut rng = rng(3);
    for _ in 0..20 {
        let (velocity, seeds) = random_problem(&mut rng, 12, 9);
        for variant in [UpdateVariant::MonotoneRoot, UpdateVariant::NewtonRefined] {
            let r = solve(&velocity, &seeds, &SolveConfig::new(Method::Amm, variant).threads(2)).unwrap();
            let report = residual_with_seeds(&r.arrivals, &velocity, variant, &seeds).unwrap();
            assert!(report.is_fixed_point(), "{report:?}");
        }
    }
}

#[test]
fn newton_and_bisection_give_the_same_field() {
    let mut rng = rng(5);
    for _ in 0..10 {
        let (velocity, seeds) = random_problem(&mut rng, 10, 10);
        let a = solve(&velocity, &seeds, &SolveConfig::new(Method::Fmm, UpdateVariant::MonotoneRoot)).unwrap();
        let b = solve(&velocity, &seeds, &SolveConfig::new(Method::Fmm, UpdateVariant::NewtonRefined)).unwrap();
        assert!(same_bits(&a.arrivals, &b.arrivals));
    }
}

#[test]
fn non_monotone_variants_terminate_under_any_change_tracking() {
    let mut rng = rng(9);
    for _ in 0..10 {
        let (velocity, seeds) = random_problem(&mut rng, 16, 16);
        let reference = solve(&velocity, &seeds, &SolveConfig::new(Method::Fmm, UpdateVariant::MonotoneRoot)).unwrap();
        for variant in [UpdateVariant::Naive, UpdateVariant::Rearranged] {
            let cfg = SolveConfig::new(Method::Amm, variant).threads(2).tracking(Tracking::AnyChange);
            let r = solve(&velocity, &seeds, &cfg).unwrap();
            for (a, b) in r.arrivals.values().iter().zip(reference.arrivals.values()) {
                assert!((a - b).abs() <= 1e-9 * b.max(1.0), "{a} vs {b}");
            }
        }
    }
}

#[test]
fn traced_updates_classify_to_the_same_counters() {
    let mut rng = rng(13);
    for _ in 0..10 {
        let (velocity, seeds) = random_problem(&mut rng, 8, 8);
        for cfg in all_configs() {
            let r = solve(&velocity, &seeds, &cfg.clone().trace(true)).unwrap();
            let trace = r.trace.as_ref().unwrap();
            let c = eikonal::metrics::classify_updates(trace, &r.arrivals, cfg.variant).unwrap();
            assert_eq!(c, r.stats, "{cfg:?}");
            assert_eq!(trace.len() as u64, r.stats.total);
        }
    }
}

#[test]
fn fully_seeded_grid_does_no_work() {
    let shape = GridShape::new(2, 2, 1.0).unwrap();
    let velocity = VelocityGrid::constant(shape, 1.0).unwrap();
    let seeds = SeedSet::from_tuples(&[(0, 0, 0.0), (1, 0, 3.0), (0, 1, 1.0), (1, 1, 0.5)]).unwrap();
    for cfg in all_configs() {
        let r = solve(&velocity, &seeds, &cfg).unwrap();
        assert_eq!(r.arrivals.values(), &[0.0, 3.0, 1.0, 0.5]);
        assert_eq!(r.stats, UpdateCounters::default());
    }
}

#[test]
fn empty_seed_set_is_an_error() {
    let shape = GridShape::new(2, 2, 1.0).unwrap();
    let velocity = VelocityGrid::constant(shape, 1.0).unwrap();
    let seeds = SeedSet::new(Vec::new()).unwrap();
    assert!(solve(&velocity, &seeds, &SolveConfig::new(Method::Fmm, UpdateVariant::MonotoneRoot)).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn schedulers_agree_bitwise(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let (velocity, seeds) = random_problem(&mut rng, 24, 24);
        let reference = solve(&velocity, &seeds, &SolveConfig::new(Method::Fmm, UpdateVariant::MonotoneRoot)).unwrap();
        for cfg in all_configs() {
            let r = solve(&velocity, &seeds, &cfg).unwrap();
            prop_assert!(same_bits(&r.arrivals, &reference.arrivals), "{:?}", cfg);
        }
    }

    #[test]
    fn seeds_keep_their_times(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let (velocity, seeds) = random_problem(&mut rng, 10, 10);
        let r = solve(&velocity, &seeds, &SolveConfig::new(Method::Amm, UpdateVariant::MonotoneRoot).threads(2)).unwrap();
        for s in seeds.iter() {
            prop_assert_eq!(r.arrivals.get(s.i, s.j).to_bits(), s.t0.to_bits());
        }
    }
}
