//! Binary wavefunction checkpoints.
//!
//! Layout (little-endian):
//!
//! | bytes | content                         |
//! |-------|---------------------------------|
//! | 8     | magic `GPECKPT\0`               |
//! | 4     | format version (u32)            |
//! | 8     | points (u64)                    |
//! | 8     | grid length (f64)               |
//! | 8     | g_eff (f64)                     |
//! | 8     | quartic K (f64)                 |
//! | 8     | energy (f64, NaN if unknown)    |
//! | 8     | time (f64)                      |
//! | 16·n  | amplitudes as (re, im) f64 pairs |
//!
//! Values are stored as raw IEEE-754 bits, so a reload is bit-exact.

use std::fs;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{Grid, Wavefunction};

pub const MAGIC: &[u8; 8] = b"GPECKPT\0";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 8 + 4 + 8 + 5 * 8;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub grid: Grid,
    pub g_eff: f64,
    pub quartic_k: f64,
    pub energy: f64,
    pub time: f64,
    pub amplitudes: Vec<Complex64>,
}

impl Checkpoint {
    pub fn wavefunction(&self) -> Result<Wavefunction> {
        Wavefunction::new(self.grid, self.amplitudes.clone())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 16 * self.amplitudes.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.grid.points() as u64).to_le_bytes());
        for v in [self.grid.length(), self.g_eff, self.quartic_k, self.energy, self.time] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for a in &self.amplitudes {
            out.extend_from_slice(&a.re.to_le_bytes());
            out.extend_from_slice(&a.im.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::Checkpoint(format!("truncated header ({} bytes)", bytes.len())));
        }
        if &bytes[..8] != MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported version {version} (expected {FORMAT_VERSION})"
            )));
        }
        let points = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
        let f = |i: usize| f64::from_le_bytes(bytes[20 + 8 * i..28 + 8 * i].try_into().unwrap());
        let (length, g_eff, quartic_k, energy, time) = (f(0), f(1), f(2), f(3), f(4));
        let grid = Grid::new(length, points).map_err(|e| Error::Checkpoint(e.to_string()))?;
        let body = &bytes[HEADER_LEN..];
        if body.len() != 16 * points {
            return Err(Error::Checkpoint(format!(
                "expected {} amplitude bytes, found {}",
                16 * points,
                body.len()
            )));
        }
        let amplitudes = body
            .chunks_exact(16)
            .map(|c| {
                Complex64::new(
                    f64::from_le_bytes(c[..8].try_into().unwrap()),
                    f64::from_le_bytes(c[8..].try_into().unwrap()),
                )
            })
            .collect();
        Ok(Checkpoint {
            grid,
            g_eff,
            quartic_k,
            energy,
            time,
            amplitudes,
        })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}
