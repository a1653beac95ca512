//! Synthetic velocity fields.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};

use crate::error::{Error, Result};
use crate::grid::{GridShape, Seed, SeedSet, VelocityGrid};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FieldKind {
    Constant { speed: f64 },
    /// Square cells of `cell` nodes alternating between two speeds.
    Checkerboard { slow: f64, fast: f64, cell: usize },
    /// Independent per-node speeds, `exp(N(ln median, sigma^2))`.
    Lognormal { median: f64, sigma: f64 },
}

fn positive(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("{name} must be positive and finite, got {x}")))
    }
}

/// Deterministic for a fixed `rng_seed`.
pub fn generate(kind: FieldKind, shape: GridShape, rng_seed: u64) -> Result<VelocityGrid> {
    let n = shape.len();
    let values = match kind {
        FieldKind::Constant { speed } => {
            positive("speed", speed)?;
            vec![speed; n]
        }
        FieldKind::Checkerboard { slow, fast, cell } => {
            positive("slow speed", slow)?;
            positive("fast speed", fast)?;
            if cell == 0 {
                return Err(Error::InvalidConfig("checkerboard cell must be >= 1".into()));
            }
            (0..n)
                .map(|idx| {
                    let (i, j) = shape.coords(idx);
                    if (i / cell + j / cell) % 2 == 0 {
                        slow
                    } else {
                        fast
                    }
                })
                .collect()
        }
        FieldKind::Lognormal { median, sigma } => {
            positive("median speed", median)?;
            if !(sigma >= 0.0 && sigma.is_finite()) {
                return Err(Error::InvalidConfig(format!("sigma must be >= 0, got {sigma}")));
            }
            if sigma == 0.0 {
                vec![median; n]
            } else {
                let dist = LogNormal::new(median.ln(), sigma)
                    .map_err(|e| Error::InvalidConfig(format!("lognormal: {e}")))?;
                let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
                (0..n).map(|_| dist.sample(&mut rng)).collect()
            }
        }
    };
    VelocityGrid::new(shape, values)
}

/// Where to place point sources for generated problems.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedLayout {
    Corner,
    Center,
    /// `count` distinct nodes chosen from the rng, each with `t0 = 0`.
    Scattered { count: usize },
}

pub fn seed_layout(shape: &GridShape, layout: SeedLayout, rng_seed: u64) -> Result<SeedSet> {
    match layout {
        SeedLayout::Corner => Ok(SeedSet::point(0, 0)),
        SeedLayout::Center => Ok(SeedSet::point(shape.nx() / 2, shape.ny() / 2)),
        SeedLayout::Scattered { count } => {
            use rand::seq::index::sample;
            let count = count.clamp(1, shape.len());
            let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
            SeedSet::new(sample(&mut rng, shape.len(), count).into_iter().map(|idx| {
                let (i, j) = shape.coords(idx);
                Seed { i, j, t0: 0.0 }
            }))
        }
    }
}
