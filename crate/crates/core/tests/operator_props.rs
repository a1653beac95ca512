mod common;

use common::*;
use eikonal::operator::{
    alpha, newton_refined, quadratic_monotone, quadratic_naive, quadratic_rearranged, update_from_stencil,
};
use eikonal::{StencilInputs, UpdateVariant};
use proptest::prelude::*;

/// Stencils in the two-sided regime, over a wide range of magnitudes.
fn two_sided() -> impl Strategy<Value = StencilInputs> {
    (0.0f64..1.0, -1.0f64..1.0, -3.0f64..3.0, -3.0f64..3.0, -2.0f64..2.0).prop_map(|(base, frac, lv, lh, lt)| {
        let v = 10f64.powf(lv);
        let h = 10f64.powf(lh);
        let r = h / v;
        let t_h = base * r * 10f64.powf(lt + 2.0);
        let t_v = (t_h + 0.999 * frac * r).max(0.0);
        StencilInputs::new(t_h, t_v, v, h)
    })
}

fn any_stencil() -> impl Strategy<Value = StencilInputs> {
    let time = prop_oneof![8 => 0.0f64..50.0, 1 => Just(INF), 1 => Just(0.0)];
    (time.clone(), time, 0.05f64..20.0, prop_oneof![Just(1.0), Just(0.5), 0.01f64..3.0])
        .prop_map(|(t_h, t_v, v, h)| StencilInputs::new(t_h, t_v, v, h))
}

fn bump(x: f64, ulps: u64) -> f64 {
    f64::from_bits(x.to_bits() + ulps)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4000))]

    #[test]
    fn monotone_root_matches_ulp_walk(s in two_sided()) {
        let got = quadratic_monotone(&s).unwrap();
        let want = dbar_walk(s.t_h, s.t_v, s.v, s.h);
        prop_assert_eq!(got.to_bits(), want.to_bits(), "{:?}", s);
    }

    #[test]
    fn monotone_root_brackets_zero(s in two_sided()) {
        let t = quadratic_monotone(&s).unwrap();
        prop_assert!(t >= s.t_h.max(s.t_v));
        prop_assert!(alpha(t, &s) >= 0.0);
        let pred = t.next_down();
        prop_assert!(pred < s.t_h.max(s.t_v) || alpha(pred, &s) < 0.0);
    }

    #[test]
    fn monotone_root_is_close_to_the_real_root(s in two_sided()) {
        let t = quadratic_monotone(&s).unwrap();
        prop_assert!(near_exact_root(t, s.t_h, s.t_v, s.v, s.h, 4), "{:?} -> {}", s, t);
    }

    #[test]
    fn newton_agrees_with_bisection(s in two_sided()) {
        prop_assert_eq!(newton_refined(&s).unwrap().to_bits(), quadratic_monotone(&s).unwrap().to_bits());
    }

    #[test]
    fn monotone_in_each_argument(s in any_stencil(), dh in 0u64..1 << 40, dv in 0u64..1 << 40) {
        for variant in [UpdateVariant::MonotoneRoot, UpdateVariant::NewtonRefined] {
            let base = update_from_stencil(&s, variant);
            let up_h = StencilInputs { t_h: if s.t_h.is_finite() { bump(s.t_h, dh) } else { s.t_h }, ..s };
            let up_v = StencilInputs { t_v: if s.t_v.is_finite() { bump(s.t_v, dv) } else { s.t_v }, ..s };
            prop_assert!(update_from_stencil(&up_h, variant) >= base, "{:?} {:?}", s, up_h);
            prop_assert!(update_from_stencil(&up_v, variant) >= base, "{:?} {:?}", s, up_v);
        }
    }

    #[test]
    fn monotone_under_single_ulp_steps(s in two_sided()) {
        let base = quadratic_monotone(&s).unwrap();
        for next in [
            StencilInputs { t_h: s.t_h.next_up(), ..s },
            StencilInputs { t_v: s.t_v.next_up(), ..s },
        ] {
            prop_assert!(update_from_stencil(&next, UpdateVariant::MonotoneRoot) >= base);
        }
    }

    #[test]
    fn every_variant_is_symmetric(s in any_stencil()) {
        let swapped = StencilInputs { t_h: s.t_v, t_v: s.t_h, ..s };
        for variant in UpdateVariant::ALL {
            prop_assert_eq!(
                update_from_stencil(&s, variant).to_bits(),
                update_from_stencil(&swapped, variant).to_bits()
            );
        }
    }

    #[test]
    fn update_is_causal(s in any_stencil()) {
        for variant in UpdateVariant::ALL {
            let t = update_from_stencil(&s, variant);
            let lo = s.t_h.min(s.t_v);
            if lo.is_finite() {
                prop_assert!(t > lo);
                prop_assert!(t <= lo + s.h / s.v);
            } else {
                prop_assert_eq!(t, INF);
            }
        }
    }

    #[test]
    fn full_update_matches_oracle(s in any_stencil()) {
        let got = update_from_stencil(&s, UpdateVariant::MonotoneRoot);
        prop_assert_eq!(got.to_bits(), update_oracle(s.t_h, s.t_v, s.v, s.h).to_bits());
    }

    #[test]
    fn explicit_formulas_are_within_a_few_ulps(s in two_sided()) {
        let exact = quadratic_monotone(&s).unwrap();
        let rearranged = quadratic_rearranged(&s).unwrap();
        prop_assert!((rearranged - exact).abs() <= 4.0 * exact * f64::EPSILON + f64::MIN_POSITIVE);
        if let Ok(naive) = quadratic_naive(&s) {
            prop_assert!(naive.is_finite());
        }
    }
}

#[test]
fn one_sided_inputs_are_rejected_by_the_two_sided_forms() {
    let s = StencilInputs::new(0.0, 2.0, 1.0, 1.0);
    assert!(quadratic_monotone(&s).is_err());
    assert!(newton_refined(&s).is_err());
    let s = StencilInputs::new(0.0, INF, 1.0, 1.0);
    assert!(quadratic_monotone(&s).is_err());
    assert_eq!(update_from_stencil(&s, UpdateVariant::MonotoneRoot), 1.0);
}

#[test]
fn exhaustive_neighborhood_of_small_stencils() {
    // Dyadic stencils on a coarse lattice, compared against the walk.
    for a in 0..=16 {
        for b in 0..=16 {
            for v in [0.5, 1.0, 3.0, 1500.0] {
                let (t_h, t_v) = (a as f64 / 16.0, b as f64 / 16.0);
                let got = update_from_stencil(&StencilInputs::new(t_h, t_v, v, 1.0), UpdateVariant::MonotoneRoot);
                assert_eq!(got.to_bits(), update_oracle(t_h, t_v, v, 1.0).to_bits(), "{t_h} {t_v} {v}");
            }
        }
    }
}

#[test]
fn exact_alpha_agrees_on_the_square_root_of_one_half() {
    let t = quadratic_monotone(&StencilInputs::new(0.0, 0.0, 1.0, 1.0)).unwrap();
    assert!(alpha_exact(t, 0.0, 0.0, 1.0, 1.0) > rational(0));
    assert!(alpha_exact(t.next_down(), 0.0, 0.0, 1.0, 1.0) < rational(0));
}
