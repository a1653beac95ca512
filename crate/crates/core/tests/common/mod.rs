//! Reference implementations used only by tests. Nothing here calls the
//! operator under test.
#![allow(dead_code)]

use eikonal::{ArrivalGrid, GridShape, SeedSet, VelocityGrid};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const INF: f64 = f64::INFINITY;

/// Binary64 residual, written out independently of the crate.
pub fn alpha_f64(t: f64, t_h: f64, t_v: f64, v: f64, h: f64) -> f64 {
    let r = h / v;
    let dh = t - t_h;
    let dv = t - t_v;
    dh * dh + dv * dv - r * r
}

/// Exact residual of the real-valued quadratic at `t`, with `r` taken as the
/// rounded double `h / v` (the operator never sees the exact ratio).
pub fn alpha_exact(t: f64, t_h: f64, t_v: f64, v: f64, h: f64) -> BigRational {
    let q = |x: f64| BigRational::from_float(x).expect("finite");
    let r = q(h / v);
    let dh = q(t) - q(t_h);
    let dv = q(t) - q(t_v);
    &dh * &dh + &dv * &dv - &r * &r
}

/// Least double `t >= max(t_h, t_v)` with binary64 `alpha(t) >= 0`, found by
/// walking one ulp at a time from a coarse start.
pub fn dbar_walk(t_h: f64, t_v: f64, v: f64, h: f64) -> f64 {
    let floor = t_h.max(t_v);
    let r = h / v;
    let d = t_h - t_v;
    let disc = (2.0 * r * r - d * d).max(0.0);
    let mut t = (0.5 * (t_h + t_v + disc.sqrt())).max(floor);
    let mut steps = 0;
    while alpha_f64(t, t_h, t_v, v, h) < 0.0 {
        t = f64::from_bits(t.to_bits() + 1);
        steps += 1;
        assert!(steps < 1 << 20, "walk did not reach the root");
    }
    loop {
        if t == floor {
            return t;
        }
        let below = f64::from_bits(t.to_bits() - 1);
        if below < floor || alpha_f64(below, t_h, t_v, v, h) < 0.0 {
            return t;
        }
        t = below;
        steps += 1;
        assert!(steps < 1 << 20, "walk did not reach the root");
    }
}

/// Full local update built on [`dbar_walk`].
pub fn update_oracle(t_h: f64, t_v: f64, v: f64, h: f64) -> f64 {
    if t_h == INF && t_v == INF {
        return INF;
    }
    let r = h / v;
    if (t_h - t_v).abs() >= r {
        return t_h.min(t_v) + r;
    }
    dbar_walk(t_h, t_v, v, h)
}

fn stencil(t: &[f64], nx: usize, ny: usize, i: usize, j: usize) -> (f64, f64) {
    let mut t_h = INF;
    if i > 0 {
        t_h = t_h.min(t[j * nx + i - 1]);
    }
    if i + 1 < nx {
        t_h = t_h.min(t[j * nx + i + 1]);
    }
    let mut t_v = INF;
    if j > 0 {
        t_v = t_v.min(t[(j - 1) * nx + i]);
    }
    if j + 1 < ny {
        t_v = t_v.min(t[(j + 1) * nx + i]);
    }
    (t_h, t_v)
}

/// Plain Gauss-Seidel in index order until a full pass changes nothing.
pub fn gauss_seidel(velocity: &VelocityGrid, seeds: &SeedSet) -> Vec<f64> {
    let shape = velocity.shape();
    let (nx, ny, h) = (shape.nx(), shape.ny(), shape.h());
    let mut t = vec![INF; nx * ny];
    let mut fixed = vec![false; nx * ny];
    for s in seeds.iter() {
        t[s.j * nx + s.i] = s.t0;
        fixed[s.j * nx + s.i] = true;
    }
    loop {
        let mut changed = false;
        for j in 0..ny {
            for i in 0..nx {
                let k = j * nx + i;
                if fixed[k] {
                    continue;
                }
                let (t_h, t_v) = stencil(&t, nx, ny, i, j);
                let p = update_oracle(t_h, t_v, velocity.values()[k], h);
                if p < t[k] {
                    t[k] = p;
                    changed = true;
                }
            }
        }
        if !changed {
            return t;
        }
    }
}

pub fn bits(values: &[f64]) -> Vec<u64> {
    values.iter().map(|v| v.to_bits()).collect()
}

pub fn same_bits(a: &ArrivalGrid, b: &ArrivalGrid) -> bool {
    a.shape() == b.shape() && bits(a.values()) == bits(b.values())
}

/// Whether `t` is within `k` ulps of the exact root of the two-sided
/// quadratic (the larger root, above `max(t_h, t_v)`).
pub fn near_exact_root(t: f64, t_h: f64, t_v: f64, v: f64, h: f64, k: u64) -> bool {
    let floor = t_h.max(t_v);
    let above = f64::from_bits(t.to_bits() + k);
    let below = f64::from_bits(t.to_bits().saturating_sub(k));
    let above_ok = alpha_exact(above, t_h, t_v, v, h).is_positive()
        || alpha_exact(above, t_h, t_v, v, h).is_zero();
    let below_ok = below < floor || alpha_exact(below, t_h, t_v, v, h).is_negative();
    above_ok && below_ok
}

pub fn rational(x: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(x))
}

/// A random small problem: lognormal-ish speeds and one to three seeds.
pub fn random_problem(rng: &mut ChaCha8Rng, max_nx: usize, max_ny: usize) -> (VelocityGrid, SeedSet) {
    let nx = rng.random_range(1..=max_nx);
    let ny = rng.random_range(1..=max_ny);
    let h = [1.0, 0.5, 0.1, 1.25][rng.random_range(0..4)];
    let shape = GridShape::new(nx, ny, h).unwrap();
    let speeds = (0..nx * ny).map(|_| (rng.random_range(-1.0..1.0f64)).exp()).collect();
    let velocity = VelocityGrid::new(shape, speeds).unwrap();
    let count = rng.random_range(1..=3.min(nx * ny));
    let mut seeds = Vec::new();
    while seeds.len() < count {
        let s = (rng.random_range(0..nx), rng.random_range(0..ny));
        if !seeds.iter().any(|&(i, j, _)| (i, j) == s) {
            let t0 = if rng.random_bool(0.5) { 0.0 } else { rng.random_range(0.0..2.0) };
            seeds.push((s.0, s.1, t0));
        }
    }
    (velocity, SeedSet::from_tuples(&seeds).unwrap())
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
