//! The local upwind update and its finite-precision realizations.
//!
//! Given the smallest horizontal and vertical neighbor times `t_h`, `t_v`,
//! the two-sided update solves
//!
//! ```text
//! (t - t_h)^2 + (t - t_v)^2 = (h / v)^2,   t >= max(t_h, t_v)
//! ```
//!
//! and falls back to `min(t_h, t_v) + h / v` when `|t_h - t_v| >= h / v`.
//!
//! The explicit formulas ([`quadratic_naive`], [`quadratic_rearranged`]) are
//! evaluated in a fixed left-to-right order so results are reproducible bit
//! for bit; neither is monotone in binary64. [`quadratic_monotone`] returns the
//! least double `t >= max(t_h, t_v)` with [`alpha`]`(t) >= 0`, which is exactly
//! monotone because `alpha` itself is monotone under round-to-nearest.
//!
//! Rust never contracts `a * b + c` into a fused multiply-add, so every
//! expression here rounds after each operation.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::grid::{stencil_with, ArrivalGrid, VelocityGrid};

/// Inputs of one local update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StencilInputs {
    pub t_h: f64,
    pub t_v: f64,
    pub v: f64,
    pub h: f64,
}

impl StencilInputs {
    pub fn new(t_h: f64, t_v: f64, v: f64, h: f64) -> Self {
        Self { t_h, t_v, v, h }
    }

    /// Travel time across one cell, `h / v`.
    #[inline]
    pub fn cell_time(&self) -> f64 {
        self.h / self.v
    }

    #[cfg(test)]
    fn swapped(self) -> Self {
        Self { t_h: self.t_v, t_v: self.t_h, ..self }
    }

    #[inline]
    fn check_two_sided(&self) -> Result<()> {
        if self.t_h.is_finite()
            && self.t_v.is_finite()
            && (self.t_h - self.t_v).abs() < self.cell_time()
        {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "stencil (t_h={}, t_v={}, h/v={}) is not in the two-sided regime",
                self.t_h,
                self.t_v,
                self.cell_time()
            )))
        }
    }
}

/// Which finite-precision realization of the two-sided update to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UpdateVariant {
    /// Expanded explicit formula.
    Naive,
    /// Explicit formula with the radicand rewritten as `2(h/v)^2 - (t_h - t_v)^2`.
    Rearranged,
    /// Least double whose residual is nonnegative (bit-lattice bisection).
    MonotoneRoot,
    /// Newton on the residual from the rearranged guess, then an ulp walk to
    /// the same least double as `MonotoneRoot`.
    NewtonRefined,
}

impl UpdateVariant {
    pub const ALL: [UpdateVariant; 4] = [
        UpdateVariant::Naive,
        UpdateVariant::Rearranged,
        UpdateVariant::MonotoneRoot,
        UpdateVariant::NewtonRefined,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            UpdateVariant::Naive => "naive",
            UpdateVariant::Rearranged => "rearranged",
            UpdateVariant::MonotoneRoot => "monotone",
            UpdateVariant::NewtonRefined => "newton",
        }
    }

    /// True for the variants whose output is exactly monotone in binary64.
    pub fn is_monotone(&self) -> bool {
        matches!(self, UpdateVariant::MonotoneRoot | UpdateVariant::NewtonRefined)
    }
}

impl fmt::Display for UpdateVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for UpdateVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "naive" => Ok(UpdateVariant::Naive),
            "rearranged" => Ok(UpdateVariant::Rearranged),
            "monotone" | "monotone-root" => Ok(UpdateVariant::MonotoneRoot),
            "newton" | "newton-refined" => Ok(UpdateVariant::NewtonRefined),
            other => Err(Error::InvalidConfig(format!("unknown operator '{other}'"))),
        }
    }
}

pub fn one_sided_update(s: &StencilInputs) -> Result<f64> {
    let m = s.t_h.min(s.t_v);
    if m == f64::INFINITY {
        return Err(Error::NoInformation);
    }
    Ok(m + s.cell_time())
}

/// `(t_h + t_v + sqrt((t_h + t_v)^2 - 2 (t_h^2 + t_v^2 - (h/v)^2))) / 2`
pub fn quadratic_naive(s: &StencilInputs) -> Result<f64> {
    let r = s.cell_time();
    let sum = s.t_h + s.t_v;
    let radicand = sum * sum - 2.0 * (s.t_h * s.t_h + s.t_v * s.t_v - r * r);
    if radicand < 0.0 {
        return Err(Error::NegativeRadicand(radicand));
    }
    Ok(0.5 * (s.t_h + s.t_v + radicand.sqrt()))
}

/// `(t_h + t_v + sqrt(2 (h/v)^2 - (t_h - t_v)^2)) / 2`
pub fn quadratic_rearranged(s: &StencilInputs) -> Result<f64> {
    let radicand = rearranged_radicand(s);
    if radicand < 0.0 {
        return Err(Error::NegativeRadicand(radicand));
    }
    Ok(0.5 * (s.t_h + s.t_v + radicand.sqrt()))
}

#[inline]
fn rearranged_radicand(s: &StencilInputs) -> f64 {
    let r = s.cell_time();
    let d = s.t_h - s.t_v;
    2.0 * (r * r) - d * d
}

/// Residual `(t - t_h)^2 + (t - t_v)^2 - (h/v)^2`.
///
/// For `t >= max(t_h, t_v)` this is nondecreasing in `t` and nonincreasing in
/// `t_h` and `t_v` even in binary64: each input appears once and every step is
/// a monotone rounded operation.
#[inline]
pub fn alpha(t: f64, s: &StencilInputs) -> f64 {
    let r = s.cell_time();
    let a = t - s.t_h;
    let b = t - s.t_v;
    a * a + b * b - r * r
}

/// Order-preserving map from nonnegative doubles to integers.
#[inline]
fn ord(x: f64) -> u64 {
    x.to_bits()
}

#[inline]
fn from_ord(b: u64) -> f64 {
    f64::from_bits(b)
}

#[inline]
pub(crate) fn next_up(x: f64) -> f64 {
    x.next_up()
}

#[inline]
pub(crate) fn next_down(x: f64) -> f64 {
    x.next_down()
}

/// Least binary64 `r >= max(t_h, t_v)` with `alpha(r) >= 0`.
pub fn quadratic_monotone(s: &StencilInputs) -> Result<f64> {
    s.check_two_sided()?;
    Ok(monotone_root(s))
}

fn monotone_root(s: &StencilInputs) -> f64 {
    let floor = s.t_h.max(s.t_v);
    if alpha(floor, s) >= 0.0 {
        return floor;
    }
    // Tight bracket around the explicit estimate; any valid bracket gives the
    // same answer since alpha is monotone in t.
    let (mut lo, mut hi) = match estimate_bracket(s, floor) {
        Some(b) => b,
        None => full_bracket(s, floor),
    };
    // alpha(lo) < 0 <= alpha(hi), lo < hi, both >= floor.
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if alpha(from_ord(mid), s) >= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    from_ord(hi)
}

const BRACKET_ULPS: u64 = 16;

fn estimate_bracket(s: &StencilInputs, floor: f64) -> Option<(u64, u64)> {
    let radicand = rearranged_radicand(s);
    if !(radicand >= 0.0) {
        return None;
    }
    let guess = (0.5 * (s.t_h + s.t_v + radicand.sqrt())).max(floor);
    let g = ord(guess);
    let lo = g.saturating_sub(BRACKET_ULPS).max(ord(floor));
    let hi = g + BRACKET_ULPS;
    (alpha(from_ord(lo), s) < 0.0 && alpha(from_ord(hi), s) >= 0.0).then_some((lo, hi))
}

fn full_bracket(s: &StencilInputs, floor: f64) -> (u64, u64) {
    let mut width = 2.0 * s.cell_time();
    let mut top = floor + width;
    while alpha(top, s) < 0.0 {
        width *= 2.0;
        top = floor + width;
    }
    (ord(floor), ord(top))
}

const NEWTON_MAX_ITERS: usize = 8;

/// Newton's method on `alpha = 0` from the rearranged estimate, finished by
/// single-ulp steps to the least double with `alpha >= 0`.
pub fn newton_refined(s: &StencilInputs) -> Result<f64> {
    s.check_two_sided()?;
    Ok(newton_root(s))
}

fn newton_root(s: &StencilInputs) -> f64 {
    let floor = s.t_h.max(s.t_v);
    let radicand = rearranged_radicand(s).max(0.0);
    let mut t = (0.5 * (s.t_h + s.t_v + radicand.sqrt())).max(floor);
    for _ in 0..NEWTON_MAX_ITERS {
        let slope = 2.0 * (t - s.t_h) + 2.0 * (t - s.t_v);
        if !(slope > 0.0) {
            break;
        }
        let next = (t - alpha(t, s) / slope).max(floor);
        let step = (next - t).abs();
        t = next;
        if step == 0.0 || step < ulp(t) {
            break;
        }
    }
    while alpha(t, s) < 0.0 {
        t = next_up(t);
    }
    loop {
        let below = next_down(t);
        if below < floor || alpha(below, s) < 0.0 {
            break t;
        }
        t = below;
    }
}

#[inline]
fn ulp(x: f64) -> f64 {
    next_up(x) - x
}

/// Two-sided update for `variant`, assuming the stencil is in the two-sided
/// regime. All four forms are exactly symmetric in `t_h` and `t_v`.
#[inline]
fn two_sided(s: &StencilInputs, variant: UpdateVariant) -> f64 {
    match variant {
        UpdateVariant::Naive => {
            let r = s.cell_time();
            let sum = s.t_h + s.t_v;
            let radicand = sum * sum - 2.0 * (s.t_h * s.t_h + s.t_v * s.t_v - r * r);
            0.5 * (s.t_h + s.t_v + radicand.max(0.0).sqrt())
        }
        UpdateVariant::Rearranged => 0.5 * (s.t_h + s.t_v + rearranged_radicand(s).max(0.0).sqrt()),
        UpdateVariant::MonotoneRoot => monotone_root(s),
        UpdateVariant::NewtonRefined => newton_root(s),
    }
}

/// Proposed arrival time for a node with the given stencil. `+inf` if both
/// neighbor times are infinite.
#[inline]
pub fn update_from_stencil(s: &StencilInputs, variant: UpdateVariant) -> f64 {
    let r = s.cell_time();
    let lo = s.t_h.min(s.t_v);
    if lo == f64::INFINITY {
        return f64::INFINITY;
    }
    // inf - finite = inf, so a single infinite side always lands here.
    if (s.t_h - s.t_v).abs() >= r {
        return lo + r;
    }
    two_sided(s, variant)
}

/// Proposed value for node `(i, j)`; never writes. Commit policy belongs to
/// the schedulers.
pub fn update_node(
    arrivals: &ArrivalGrid,
    velocity: &VelocityGrid,
    i: usize,
    j: usize,
    variant: UpdateVariant,
) -> Result<f64> {
    let s = crate::grid::gather_stencil(arrivals, velocity, i, j)?;
    Ok(update_from_stencil(&s, variant))
}

/// Proposal for linear index `idx` from any arrival-time reader.
#[inline]
pub(crate) fn update_with(
    velocity: &VelocityGrid,
    idx: usize,
    variant: UpdateVariant,
    read: impl Fn(usize) -> f64,
) -> f64 {
    let s = stencil_with(velocity.shape(), velocity, idx, read);
    update_from_stencil(&s, variant)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridShape;

    const INF: f64 = f64::INFINITY;

    fn st(t_h: f64, t_v: f64, v: f64, h: f64) -> StencilInputs {
        StencilInputs::new(t_h, t_v, v, h)
    }

    #[test]
    fn one_sided_examples() {
        assert_eq!(one_sided_update(&st(0.0, INF, 1.0, 1.0)).unwrap(), 1.0);
        assert_eq!(one_sided_update(&st(5.0, 2.0, 2.0, 1.0)).unwrap(), 2.5);
        assert_eq!(one_sided_update(&st(0.0, 0.25, 1.0, 0.125)).unwrap(), 0.125);
        assert!(matches!(one_sided_update(&st(INF, INF, 1.0, 1.0)), Err(Error::NoInformation)));
    }

    #[test]
    fn explicit_formulas_on_symmetric_stencil() {
        let s = st(0.0, 0.0, 1.0, 1.0);
        assert_eq!(quadratic_naive(&s).unwrap(), 0.7071067811865476);
        assert_eq!(quadratic_rearranged(&s).unwrap(), 0.7071067811865476);
    }

    #[test]
    fn negative_radicand_is_an_error() {
        let s = st(0.0, 10.0, 1.0, 1.0);
        assert!(matches!(quadratic_rearranged(&s), Err(Error::NegativeRadicand(_))));
        assert!(matches!(quadratic_naive(&s), Err(Error::NegativeRadicand(_))));
        assert!(quadratic_monotone(&s).is_err());
        assert!(newton_refined(&s).is_err());
    }

    #[test]
    fn alpha_examples() {
        // Sign predicted with exact rational arithmetic: 2 t^2 - 1 > 0 exactly
        // and the binary64 evaluation rounds to one ulp of 1.
        assert_eq!(alpha(0.7071067811865476, &st(0.0, 0.0, 1.0, 1.0)), 2.220446049250313e-16);
        assert_eq!(alpha(1.0, &st(1.0, 1.0, 1.0, 1.0)), -1.0);
        assert_eq!(alpha(3.0, &st(1.0, 2.0, 1.0, 1.0)), 4.0);
    }

    #[test]
    fn monotone_root_on_symmetric_stencil() {
        let s = st(0.0, 0.0, 1.0, 1.0);
        let r = quadratic_monotone(&s).unwrap();
        assert_eq!(r.to_bits(), 0x3fe6a09e667f3bcd);
        assert!(alpha(r, &s) >= 0.0);
        assert!(alpha(next_down(r), &s) < 0.0);
        assert_eq!(newton_refined(&s).unwrap(), r);
    }

    #[test]
    fn nearly_one_sided_stencil() {
        let t_v = next_down(1.0);
        let s = st(0.0, t_v, 1.0, 1.0);
        let out = quadratic_monotone(&s).unwrap();
        assert!(out >= t_v && alpha(out, &s) >= 0.0);
        assert_eq!(newton_refined(&s).unwrap(), out);
    }

    #[test]
    fn update_node_dispatch() {
        let shape = GridShape::new(3, 3, 1.0).unwrap();
        let vel = VelocityGrid::constant(shape, 1.0).unwrap();
        let mut a = ArrivalGrid::infinite(shape);
        assert_eq!(update_node(&a, &vel, 1, 1, UpdateVariant::MonotoneRoot).unwrap(), INF);
        a.set(0, 1, 0.0).unwrap();
        for v in UpdateVariant::ALL {
            assert_eq!(update_node(&a, &vel, 1, 1, v).unwrap(), 1.0);
        }
        // (0.5 + sqrt(1.75)) / 2 evaluated in extended precision.
        let s = st(0.0, 0.5, 1.0, 1.0);
        for v in UpdateVariant::ALL {
            let t = update_from_stencil(&s, v);
            assert!((t - 0.9114378277661477).abs() <= 2.0 * f64::EPSILON, "{v}: {t}");
        }
        assert_eq!(update_from_stencil(&s, UpdateVariant::Rearranged), 0.9114378277661477);
    }

    #[test]
    fn variants_are_symmetric() {
        let cases = [
            st(2949.952952954425, 2951.6464609466993, 0.5860617808911898, 1.0),
            st(0.05752086379104517, 0.05795220293518381, 1500.0, 1.25),
            st(0.3, 0.9, 1.3, 1.0),
        ];
        for s in cases {
            for v in UpdateVariant::ALL {
                let a = update_from_stencil(&s, v);
                let b = update_from_stencil(&s.swapped(), v);
                assert_eq!(a.to_bits(), b.to_bits(), "{v}");
            }
        }
    }

    #[test]
    fn variant_names_round_trip() {
        for v in UpdateVariant::ALL {
            assert_eq!(v.name().parse::<UpdateVariant>().unwrap(), v);
        }
        assert!("fast".parse::<UpdateVariant>().is_err());
    }
}
