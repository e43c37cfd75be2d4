use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Field, GridSpec, Physics, State};
use crate::error::{Error, Result};

/// Header of the binary snapshot: `d`, `n` as little-endian `u64`, then `L`,
/// `time`, `m`, `p` as little-endian `f64`, followed by `n^d` row-major values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnapshotHeader {
    pub dim: u64,
    pub n: u64,
    pub box_length: f64,
    pub time: f64,
    pub mass: f64,
    pub exponent: f64,
}

pub fn write_snapshot(path: &Path, field: &Field, time: f64, mass: f64, exponent: f64) -> Result<()> {
    let g = field.grid();
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&(g.dim() as u64).to_le_bytes())?;
    w.write_all(&(g.n() as u64).to_le_bytes())?;
    for v in [g.box_length(), time, mass, exponent] {
        w.write_all(&v.to_le_bytes())?;
    }
    for v in field.values() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<(Field, SnapshotHeader)> {
    let mut r = BufReader::new(File::open(path)?);
    let mut b8 = [0u8; 8];
    let mut next_u64 = |r: &mut BufReader<File>| -> Result<u64> {
        r.read_exact(&mut b8).map_err(|e| Error::Format(format!("truncated header: {e}")))?;
        Ok(u64::from_le_bytes(b8))
    };
    let dim = next_u64(&mut r)?;
    let n = next_u64(&mut r)?;
    let mut f = [0.0; 4];
    for slot in f.iter_mut() {
        *slot = f64::from_bits(next_u64(&mut r)?);
    }
    let grid = GridSpec::new(dim as usize, n as usize, f[0])?;
    let mut raw = Vec::with_capacity(grid.len() * 8);
    r.read_to_end(&mut raw)?;
    if raw.len() != grid.len() * 8 {
        return Err(Error::Format(format!("expected {} payload bytes, found {}", grid.len() * 8, raw.len())));
    }
    let values = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8"))).collect();
    let header = SnapshotHeader { dim, n, box_length: f[0], time: f[1], mass: f[2], exponent: f[3] };
    Ok((Field::new(grid, values)?, header))
}

/// Writes `u` and `u_t` as two snapshot files `<stem>.u.bin` and `<stem>.v.bin`.
pub fn write_state(dir: &Path, stem: &str, state: &State) -> Result<()> {
    let ph = state.physics;
    write_snapshot(&dir.join(format!("{stem}.u.bin")), &state.u, state.time, ph.mass, ph.exponent)?;
    write_snapshot(&dir.join(format!("{stem}.v.bin")), &state.v, state.time, ph.mass, ph.exponent)
}

/// Restores a checkpoint; the coupling is not part of the format and is
/// supplied by the caller.
pub fn read_state(dir: &Path, stem: &str, coupling: f64) -> Result<State> {
    let (u, hu) = read_snapshot(&dir.join(format!("{stem}.u.bin")))?;
    let (v, hv) = read_snapshot(&dir.join(format!("{stem}.v.bin")))?;
    if hu != hv {
        return Err(Error::Format("u and v headers disagree".into()));
    }
    let physics = Physics { mass: hu.mass, exponent: hu.exponent, coupling };
    State::new(u, v, hu.time, physics)
}
