//! Flat binary trajectory files.
//!
//! Layout: the 8 ASCII bytes `MFGTRAJ1`, then little-endian `u64 d`, `u64 n`,
//! `u64 steps`, `f64 T`, `f64 dt`, then `steps + 1` frames of `n^d` `f64`
//! values in row-major order (axis 0 slowest).

use crate::{CliError, CliResult};
use mfg_core::field::{Field, Trajectory};
use mfg_core::grid::TorusGrid;
use std::path::Path;

pub const MAGIC: &[u8; 8] = b"MFGTRAJ1";
pub const HEADER_LEN: usize = 8 + 5 * 8;

pub fn encode(traj: &Trajectory<f64>) -> Vec<u8> {
    let g = traj.grid();
    let mut out = Vec::with_capacity(HEADER_LEN + traj.len() * g.len() * 8);
    out.extend_from_slice(MAGIC);
    for v in [g.dim() as u64, g.n() as u64, g.steps() as u64] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&g.t_final().to_le_bytes());
    out.extend_from_slice(&g.dt().to_le_bytes());
    for frame in traj.frames() {
        for v in frame.values() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

fn word(bytes: &[u8], i: usize) -> [u8; 8] {
    bytes[8 + 8 * i..16 + 8 * i].try_into().expect("8-byte slice")
}

pub fn decode(bytes: &[u8]) -> CliResult<Trajectory<f64>> {
    if bytes.len() < HEADER_LEN {
        return Err(CliError::Format(format!(
            "file too short for header: expected at least {HEADER_LEN} bytes, found {}",
            bytes.len()
        )));
    }
    if &bytes[..8] != MAGIC {
        return Err(CliError::Format("bad magic, expected MFGTRAJ1".into()));
    }
    let [d, n, steps] = [0, 1, 2].map(|i| u64::from_le_bytes(word(bytes, i)));
    let t_final = f64::from_le_bytes(word(bytes, 3));
    let dt = f64::from_le_bytes(word(bytes, 4));
    let grid = TorusGrid::from_parts(d as usize, n as usize, t_final, dt, steps as usize)
        .map_err(|e| CliError::Format(format!("bad header: {e}")))?;
    let frame_len = grid.len();
    let expected = (steps as usize + 1)
        .checked_mul(frame_len)
        .and_then(|c| c.checked_mul(8))
        .and_then(|c| c.checked_add(HEADER_LEN))
        .ok_or_else(|| CliError::Format("header sizes overflow".into()))?;
    if bytes.len() != expected {
        return Err(CliError::Format(format!("size mismatch: expected {expected} bytes, found {}", bytes.len())));
    }
    let frames = bytes[HEADER_LEN..]
        .chunks_exact(frame_len * 8)
        .map(|chunk| {
            let vals = chunk.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
            Field::from_values(grid, vals)
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::Format(e.to_string()))?;
    Trajectory::new(grid, frames).map_err(|e| CliError::Format(e.to_string()))
}

pub fn write_trajectory(path: &Path, traj: &Trajectory<f64>) -> CliResult<()> {
    std::fs::write(path, encode(traj)).map_err(|e| CliError::io(path, e))
}

pub fn read_trajectory(path: &Path) -> CliResult<Trajectory<f64>> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    decode(&bytes).map_err(|e| match e {
        CliError::Format(msg) => CliError::Format(format!("{}: {msg}", path.display())),
        other => other,
    })
}
