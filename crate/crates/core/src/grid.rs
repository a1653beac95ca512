//! Regular 2D grids, neighbor topology, boundary seeding and stencil extraction.
//!
//! Everything is stored row-major with `x` varying fastest: node `(i, j)` lives
//! at linear index `j * nx + i`.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::operator::StencilInputs;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridShape {
    nx: usize,
    ny: usize,
    h: f64,
}

impl GridShape {
    pub fn new(nx: usize, ny: usize, h: f64) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidShape(format!("dimensions must be >= 1, got {nx}x{ny}")));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidShape(format!("spacing must be positive and finite, got {h}")));
        }
        if nx.checked_mul(ny).is_none() {
            return Err(Error::InvalidShape(format!("{nx}x{ny} overflows the index space")));
        }
        Ok(Self { nx, ny, h })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        i < self.nx && j < self.ny
    }

    pub fn check(&self, i: usize, j: usize) -> Result<()> {
        if self.contains(i, j) {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange { i, j, nx: self.nx, ny: self.ny })
        }
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        debug_assert!(self.contains(i, j));
        j * self.nx + i
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> (usize, usize) {
        (idx % self.nx, idx / self.nx)
    }

    /// Axis-adjacent in-range neighbors of a linear index, in left, right,
    /// down, up order.
    #[inline]
    pub fn neighbor_indices(&self, idx: usize) -> Neighbors {
        let (i, j) = self.coords(idx);
        let mut out = Neighbors { buf: [0; 4], len: 0 };
        if i > 0 {
            out.push(idx - 1);
        }
        if i + 1 < self.nx {
            out.push(idx + 1);
        }
        if j > 0 {
            out.push(idx - self.nx);
        }
        if j + 1 < self.ny {
            out.push(idx + self.nx);
        }
        out
    }
}

/// Up to four neighbor indices, stored inline.
#[derive(Debug, Clone, Copy)]
pub struct Neighbors {
    buf: [usize; 4],
    len: u8,
}

impl Neighbors {
    #[inline]
    fn push(&mut self, idx: usize) {
        self.buf[self.len as usize] = idx;
        self.len += 1;
    }

    #[inline]
    pub fn as_slice(&self) -> &[usize] {
        &self.buf[..self.len as usize]
    }
}

impl IntoIterator for Neighbors {
    type Item = usize;
    type IntoIter = std::iter::Take<std::array::IntoIter<usize, 4>>;

    fn into_iter(self) -> Self::IntoIter {
        self.buf.into_iter().take(self.len as usize)
    }
}

/// In-range axis neighbors of `(i, j)` as coordinates: left, right, down, up.
pub fn neighbors(shape: &GridShape, i: usize, j: usize) -> Result<Vec<(usize, usize)>> {
    shape.check(i, j)?;
    Ok(shape
        .neighbor_indices(shape.index(i, j))
        .into_iter()
        .map(|n| shape.coords(n))
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct VelocityGrid {
    shape: GridShape,
    values: Vec<f64>,
}

impl VelocityGrid {
    pub fn new(shape: GridShape, values: Vec<f64>) -> Result<Self> {
        if values.len() != shape.len() {
            return Err(Error::ShapeMismatch(format!(
                "expected {} speeds, got {}",
                shape.len(),
                values.len()
            )));
        }
        if let Some((index, &value)) =
            values.iter().enumerate().find(|(_, v)| !(**v > 0.0 && v.is_finite()))
        {
            return Err(Error::InvalidSpeed { index, value });
        }
        Ok(Self { shape, values })
    }

    pub fn constant(shape: GridShape, v: f64) -> Result<Self> {
        Self::new(shape, vec![v; shape.len()])
    }

    pub fn shape(&self) -> &GridShape {
        &self.shape
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn at(&self, idx: usize) -> f64 {
        self.values[idx]
    }

    pub fn max_speed(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }
}

/// Arrival times: each entry is `>= 0` or `+inf`, never NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrivalGrid {
    shape: GridShape,
    values: Vec<f64>,
}

impl ArrivalGrid {
    pub fn new(shape: GridShape, values: Vec<f64>) -> Result<Self> {
        if values.len() != shape.len() {
            return Err(Error::ShapeMismatch(format!(
                "expected {} arrival times, got {}",
                shape.len(),
                values.len()
            )));
        }
        if let Some((idx, v)) = values.iter().enumerate().find(|(_, v)| !is_arrival(**v)) {
            return Err(Error::Format(format!("arrival time {v} at node {idx} is negative or NaN")));
        }
        Ok(Self { shape, values })
    }

    pub fn infinite(shape: GridShape) -> Self {
        Self { shape, values: vec![f64::INFINITY; shape.len()] }
    }

    pub fn shape(&self) -> &GridShape {
        &self.shape
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn at(&self, idx: usize) -> f64 {
        self.values[idx]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.shape.index(i, j)]
    }

    /// Overwrites one node. Only for building fixtures and perturbations;
    /// solvers never go through this.
    pub fn set(&mut self, i: usize, j: usize, t: f64) -> Result<()> {
        self.shape.check(i, j)?;
        if !is_arrival(t) {
            return Err(Error::Format(format!("arrival time {t} is negative or NaN")));
        }
        let idx = self.shape.index(i, j);
        self.values[idx] = t;
        Ok(())
    }
}

#[inline]
fn is_arrival(t: f64) -> bool {
    t >= 0.0 && !t.is_sign_negative()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Seed {
    pub i: usize,
    pub j: usize,
    pub t0: f64,
}

/// Boundary nodes with fixed initial arrival times.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SeedSet {
    seeds: Vec<Seed>,
}

impl SeedSet {
    pub fn new(seeds: impl IntoIterator<Item = Seed>) -> Result<Self> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for mut s in seeds {
            if !(s.t0.is_finite() && s.t0 >= 0.0) {
                return Err(Error::InvalidSeed {
                    i: s.i,
                    j: s.j,
                    reason: format!("t0 must be finite and >= 0, got {}", s.t0),
                });
            }
            // -0.0 would break the bitwise ordering of arrival times.
            s.t0 = s.t0.abs();
            if !seen.insert((s.i, s.j)) {
                return Err(Error::InvalidSeed { i: s.i, j: s.j, reason: "duplicate".into() });
            }
            out.push(s);
        }
        Ok(Self { seeds: out })
    }

    pub fn from_tuples(seeds: &[(usize, usize, f64)]) -> Result<Self> {
        Self::new(seeds.iter().map(|&(i, j, t0)| Seed { i, j, t0 }))
    }

    pub fn point(i: usize, j: usize) -> Self {
        Self { seeds: vec![Seed { i, j, t0: 0.0 }] }
    }

    pub fn iter(&self) -> impl Iterator<Item = &Seed> {
        self.seeds.iter()
    }

    pub fn len(&self) -> usize {
        self.seeds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seeds.is_empty()
    }

    pub fn validate_for(&self, shape: &GridShape) -> Result<()> {
        for s in &self.seeds {
            if !shape.contains(s.i, s.j) {
                return Err(Error::InvalidSeed {
                    i: s.i,
                    j: s.j,
                    reason: format!("outside {}x{} grid", shape.nx(), shape.ny()),
                });
            }
        }
        Ok(())
    }

    /// Per-node seed flags for `shape`.
    pub fn mask(&self, shape: &GridShape) -> Result<Vec<bool>> {
        self.validate_for(shape)?;
        let mut mask = vec![false; shape.len()];
        for s in &self.seeds {
            mask[shape.index(s.i, s.j)] = true;
        }
        Ok(mask)
    }

    /// Returns a copy with every seed time multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.seeds.iter().map(|s| Seed { t0: s.t0 * factor, ..*s }))
    }
}

pub fn init_arrivals(shape: &GridShape, seeds: &SeedSet) -> Result<ArrivalGrid> {
    seeds.validate_for(shape)?;
    let mut grid = ArrivalGrid::infinite(*shape);
    for s in seeds.iter() {
        grid.values[shape.index(s.i, s.j)] = s.t0;
    }
    Ok(grid)
}

/// Builds the stencil for node `idx` from any arrival-time reader.
#[inline]
pub(crate) fn stencil_with(
    shape: &GridShape,
    velocity: &VelocityGrid,
    idx: usize,
    read: impl Fn(usize) -> f64,
) -> StencilInputs {
    let (i, j) = shape.coords(idx);
    let nx = shape.nx();
    let mut t_h = f64::INFINITY;
    let mut t_v = f64::INFINITY;
    if i > 0 {
        t_h = read(idx - 1);
    }
    if i + 1 < nx {
        t_h = t_h.min(read(idx + 1));
    }
    if j > 0 {
        t_v = read(idx - nx);
    }
    if j + 1 < shape.ny() {
        t_v = t_v.min(read(idx + nx));
    }
    StencilInputs { t_h, t_v, v: velocity.at(idx), h: shape.h() }
}

pub fn gather_stencil(
    arrivals: &ArrivalGrid,
    velocity: &VelocityGrid,
    i: usize,
    j: usize,
) -> Result<StencilInputs> {
    let shape = arrivals.shape();
    if shape != velocity.shape() {
        return Err(Error::ShapeMismatch("arrival and velocity grids differ".into()));
    }
    shape.check(i, j)?;
    Ok(stencil_with(shape, velocity, shape.index(i, j), |n| arrivals.at(n)))
}
