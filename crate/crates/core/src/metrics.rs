//! Work-efficiency accounting, fixed-point residuals and solution comparison.

use crate::error::{Error, Result};
use crate::grid::{stencil_with, ArrivalGrid, SeedSet, VelocityGrid};
use crate::operator::{update_from_stencil, UpdateVariant};

/// Relative tolerance for "landed on the final value" with non-monotone variants.
pub const GOOD_UPDATE_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct UpdateCounters {
    pub good: u64,
    pub empty: u64,
    pub bad: u64,
    pub total: u64,
}

impl UpdateCounters {
    pub fn is_balanced(&self) -> bool {
        self.good + self.empty + self.bad == self.total
    }
}

/// One application of the operator at `node`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry {
    pub node: usize,
    pub old: f64,
    pub new: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateClass {
    /// Set the node to its final value.
    Good,
    /// Left the node unchanged.
    Empty,
    /// Set the node to something other than its final value.
    Bad,
}

pub fn classify_entry(old: f64, new: f64, reference: f64, exact: bool) -> UpdateClass {
    if new.to_bits() == old.to_bits() {
        return UpdateClass::Empty;
    }
    let good = if exact || !reference.is_finite() {
        new.to_bits() == reference.to_bits()
    } else {
        (new - reference).abs() <= GOOD_UPDATE_RTOL * reference.abs()
    };
    if good {
        UpdateClass::Good
    } else {
        UpdateClass::Bad
    }
}

/// Tallies a trace against the converged `reference`. Trace order does not
/// matter.
pub fn classify_updates(
    trace: &[TraceEntry],
    reference: &ArrivalGrid,
    variant: UpdateVariant,
) -> Result<UpdateCounters> {
    let exact = variant.is_monotone();
    let mut c = UpdateCounters::default();
    for e in trace {
        let Some(&r) = reference.values().get(e.node) else {
            return Err(Error::ShapeMismatch(format!(
                "trace node {} outside a {}-node reference",
                e.node,
                reference.shape().len()
            )));
        };
        c.total += 1;
        match classify_entry(e.old, e.new, r, exact) {
            UpdateClass::Good => c.good += 1,
            UpdateClass::Empty => c.empty += 1,
            UpdateClass::Bad => c.bad += 1,
        }
    }
    Ok(c)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    /// Max over non-seed nodes of `|recomputed - stored| / max(stored, tiny)`.
    pub max_rel_error: f64,
    /// Node attaining the maximum (first in index order on ties); `None` when
    /// every node is a fixed point or a seed.
    pub argmax: Option<(usize, usize)>,
    pub variant: UpdateVariant,
    /// Nodes treated as seeds and skipped.
    pub seeds_skipped: usize,
}

impl ResidualReport {
    pub fn is_fixed_point(&self) -> bool {
        self.max_rel_error == 0.0
    }
}

/// Residual with the seeds given explicitly.
pub fn residual_with_seeds(
    solution: &ArrivalGrid,
    velocity: &VelocityGrid,
    variant: UpdateVariant,
    seeds: &SeedSet,
) -> Result<ResidualReport> {
    check_shapes(solution, velocity)?;
    let mask = seeds.mask(solution.shape())?;
    Ok(residual_masked(solution, velocity, variant, &mask))
}

/// Residual with seeds inferred: a finite node no larger than any of its
/// neighbors cannot be the output of the operator, so it is taken as a seed.
pub fn residual(
    solution: &ArrivalGrid,
    velocity: &VelocityGrid,
    variant: UpdateVariant,
) -> Result<ResidualReport> {
    check_shapes(solution, velocity)?;
    let mask = infer_sources(solution);
    Ok(residual_masked(solution, velocity, variant, &mask))
}

pub fn infer_sources(solution: &ArrivalGrid) -> Vec<bool> {
    let shape = solution.shape();
    (0..shape.len())
        .map(|idx| {
            let t = solution.at(idx);
            t.is_finite()
                && shape.neighbor_indices(idx).into_iter().all(|n| t <= solution.at(n))
        })
        .collect()
}

fn check_shapes(solution: &ArrivalGrid, velocity: &VelocityGrid) -> Result<()> {
    if solution.shape() != velocity.shape() {
        return Err(Error::ShapeMismatch("solution and velocity grids differ".into()));
    }
    Ok(())
}

fn residual_masked(
    solution: &ArrivalGrid,
    velocity: &VelocityGrid,
    variant: UpdateVariant,
    seed_mask: &[bool],
) -> ResidualReport {
    let shape = solution.shape();
    let mut max_rel_error = 0.0;
    let mut argmax = None;
    for idx in 0..shape.len() {
        if seed_mask[idx] {
            continue;
        }
        let stored = solution.at(idx);
        let s = stencil_with(shape, velocity, idx, |n| solution.at(n));
        let recomputed = update_from_stencil(&s, variant);
        let err = relative_error(recomputed, stored);
        if err > max_rel_error {
            max_rel_error = err;
            argmax = Some(shape.coords(idx));
        }
    }
    ResidualReport {
        max_rel_error,
        argmax,
        variant,
        seeds_skipped: seed_mask.iter().filter(|s| **s).count(),
    }
}

#[inline]
fn relative_error(a: f64, b: f64) -> f64 {
    if a.to_bits() == b.to_bits() {
        return 0.0;
    }
    if a.is_infinite() || b.is_infinite() {
        return f64::INFINITY;
    }
    (a - b).abs() / b.max(f64::MIN_POSITIVE)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Comparison {
    pub max_abs: f64,
    pub max_rel: f64,
    pub bitwise_equal: bool,
}

/// Elementwise comparison; `inf` equals `inf`, `inf` against a finite value
/// is an infinite difference.
pub fn compare_solutions(a: &ArrivalGrid, b: &ArrivalGrid) -> Result<Comparison> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch(format!(
            "{}x{} vs {}x{}",
            a.shape().nx(),
            a.shape().ny(),
            b.shape().nx(),
            b.shape().ny()
        )));
    }
    let mut out = Comparison { max_abs: 0.0, max_rel: 0.0, bitwise_equal: true };
    for (&x, &y) in a.values().iter().zip(b.values()) {
        if x.to_bits() == y.to_bits() {
            continue;
        }
        out.bitwise_equal = false;
        let (abs, rel) = if x.is_infinite() || y.is_infinite() {
            (f64::INFINITY, f64::INFINITY)
        } else {
            let abs = (x - y).abs();
            (abs, abs / x.abs().max(y.abs()).max(f64::MIN_POSITIVE))
        };
        out.max_abs = out.max_abs.max(abs);
        out.max_rel = out.max_rel.max(rel);
    }
    Ok(out)
}
