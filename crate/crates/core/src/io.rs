//! Grid and seed file formats.
//!
//! Grid files (velocity and arrival alike) are little-endian:
//!
//! ```text
//! "EIKG" | version: u32 = 1 | nx: u64 | ny: u64 | h: f64 | nx*ny f64, row-major
//! ```
//!
//! Seed files are CSV with header `i,j,t0`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ArrivalGrid, GridShape, Seed, SeedSet, VelocityGrid};

pub const MAGIC: &[u8; 4] = b"EIKG";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 8 + 8 + 8;

/// Raw contents of a grid file.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFile {
    pub shape: GridShape,
    pub values: Vec<f64>,
}

impl GridFile {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 8 * self.values.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.shape.nx() as u64).to_le_bytes());
        out.extend_from_slice(&(self.shape.ny() as u64).to_le_bytes());
        out.extend_from_slice(&self.shape.h().to_le_bytes());
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::Format(format!("grid file too short ({} bytes)", bytes.len())));
        }
        if &bytes[0..4] != MAGIC {
            return Err(Error::Format("bad magic, expected EIKG".into()));
        }
        let word = |at: usize| -> [u8; 8] { bytes[at..at + 8].try_into().expect("8 bytes") };
        let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
        if version != VERSION {
            return Err(Error::Format(format!("unsupported grid file version {version}")));
        }
        let nx = u64::from_le_bytes(word(8));
        let ny = u64::from_le_bytes(word(16));
        let h = f64::from_le_bytes(word(24));
        let nx = usize::try_from(nx).map_err(|_| Error::Format(format!("nx {nx} too large")))?;
        let ny = usize::try_from(ny).map_err(|_| Error::Format(format!("ny {ny} too large")))?;
        let shape = GridShape::new(nx, ny, h)?;
        let payload = &bytes[HEADER_LEN..];
        let expected = shape.len().checked_mul(8).ok_or_else(|| Error::Format("payload size overflows".into()))?;
        if payload.len() != expected {
            return Err(Error::Format(format!(
                "payload has {} bytes, expected {expected} for {nx}x{ny}",
                payload.len()
            )));
        }
        let values = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        Ok(Self { shape, values })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let mut bytes = Vec::new();
        BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(&self.to_bytes())?;
        w.flush()?;
        Ok(())
    }

    pub fn into_velocity(self) -> Result<VelocityGrid> {
        VelocityGrid::new(self.shape, self.values)
    }

    pub fn into_arrivals(self) -> Result<ArrivalGrid> {
        ArrivalGrid::new(self.shape, self.values)
    }
}

impl From<&VelocityGrid> for GridFile {
    fn from(g: &VelocityGrid) -> Self {
        Self { shape: *g.shape(), values: g.values().to_vec() }
    }
}

impl From<&ArrivalGrid> for GridFile {
    fn from(g: &ArrivalGrid) -> Self {
        Self { shape: *g.shape(), values: g.values().to_vec() }
    }
}

pub fn read_velocity(path: impl AsRef<Path>) -> Result<VelocityGrid> {
    GridFile::read(path)?.into_velocity()
}

pub fn read_arrivals(path: impl AsRef<Path>) -> Result<ArrivalGrid> {
    GridFile::read(path)?.into_arrivals()
}

#[derive(Debug, Serialize, Deserialize)]
struct SeedRow {
    i: usize,
    j: usize,
    t0: f64,
}

pub fn parse_seeds(reader: impl Read) -> Result<SeedSet> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["i", "j", "t0"] {
        return Err(Error::Format(format!(
            "seed file header must be 'i,j,t0', got '{}'",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut seeds = Vec::new();
    for row in rdr.deserialize() {
        let row: SeedRow = row?;
        seeds.push(Seed { i: row.i, j: row.j, t0: row.t0 });
    }
    SeedSet::new(seeds)
}

pub fn read_seeds(path: impl AsRef<Path>) -> Result<SeedSet> {
    parse_seeds(BufReader::new(File::open(path)?))
}

pub fn write_seeds(path: impl AsRef<Path>, seeds: &SeedSet) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["i", "j", "t0"])?;
    for s in seeds.iter() {
        w.write_record([s.i.to_string(), s.j.to_string(), format_f64(s.t0)])?;
    }
    w.flush()?;
    Ok(())
}

/// CSV rendering of a double: `0` for zero, `inf` for infinity, otherwise
/// 17 significant digits in scientific notation.
pub fn format_f64(x: f64) -> String {
    if x == 0.0 {
        "0".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_string()
    } else if x.is_nan() {
        "nan".to_string()
    } else {
        format!("{x:.16e}")
    }
}
