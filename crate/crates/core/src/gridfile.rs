//! `BRG1` binary grid files.
//!
//! Layout, all little-endian:
//!
//! | offset | size | field |
//! |-------:|-----:|-------|
//! | 0  | 4 | magic `BRG1` |
//! | 4  | 8 | `n1` (u64, fast axis: depth or time) |
//! | 12 | 8 | `n2` (u64, slow axis) |
//! | 20 | 8 | `d1` (f64) |
//! | 28 | 8 | `d2` (f64) |
//! | 36 | 8 | `o1` (f64) |
//! | 44 | 8 | `o2` (f64) |
//! | 52 | 4 | kind (u32: 0 velocity, 1 reflectivity, 2 image, 3 gather) |
//! | 56 | `4·n1·n2` | samples, f32, fast axis contiguous |

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::Grid2D;

pub const MAGIC: &[u8; 4] = b"BRG1";
pub const HEADER_LEN: usize = 56;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridKind {
    Velocity,
    Reflectivity,
    Image,
    Gather,
}

impl GridKind {
    pub fn tag(self) -> u32 {
        match self {
            GridKind::Velocity => 0,
            GridKind::Reflectivity => 1,
            GridKind::Image => 2,
            GridKind::Gather => 3,
        }
    }

    pub fn from_tag(tag: u32) -> Result<Self> {
        match tag {
            0 => Ok(GridKind::Velocity),
            1 => Ok(GridKind::Reflectivity),
            2 => Ok(GridKind::Image),
            3 => Ok(GridKind::Gather),
            other => Err(Error::Format(format!("unknown kind tag {other}"))),
        }
    }
}

pub fn encode(grid: &Grid2D, kind: GridKind) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * grid.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(grid.n1 as u64).to_le_bytes());
    out.extend_from_slice(&(grid.n2 as u64).to_le_bytes());
    for v in [grid.d1, grid.d2, grid.o1, grid.o2] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&kind.tag().to_le_bytes());
    for &v in &grid.values {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<(Grid2D, GridKind)> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format(format!(
            "{} bytes is shorter than the header",
            bytes.len()
        )));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::Format("bad magic, expected BRG1".into()));
    }
    let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let n1 = usize::try_from(u64_at(4)).map_err(|_| Error::Format("n1 too large".into()))?;
    let n2 = usize::try_from(u64_at(12)).map_err(|_| Error::Format("n2 too large".into()))?;
    let (d1, d2, o1, o2) = (f64_at(20), f64_at(28), f64_at(36), f64_at(44));
    if ![d1, d2, o1, o2].iter().all(|v| v.is_finite()) {
        return Err(Error::Format("non-finite header value".into()));
    }
    let kind = GridKind::from_tag(u32::from_le_bytes(bytes[52..56].try_into().unwrap()))?;
    let expected = n1
        .checked_mul(n2)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::Format("payload size overflows".into()))?;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() != expected {
        return Err(Error::Format(format!(
            "payload is {} bytes, header promises {n1}x{n2} samples ({expected} bytes)",
            payload.len()
        )));
    }
    let values = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    let mut grid = Grid2D::new(n1, n2, d1, d2, values).map_err(|e| Error::Format(e.to_string()))?;
    grid.o1 = o1;
    grid.o2 = o2;
    Ok((grid, kind))
}

pub fn write_grid(path: impl AsRef<Path>, grid: &Grid2D, kind: GridKind) -> Result<()> {
    fs::write(path, encode(grid, kind))?;
    Ok(())
}

pub fn read_grid(path: impl AsRef<Path>) -> Result<(Grid2D, GridKind)> {
    decode(&fs::read(path)?)
}
