//! Flat binary field snapshots: n (u64), L (f64), t (f64), then n² pairs of
//! f32 (re, im), row-major, all little-endian.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use super::{Field2D, Grid2D};
use crate::error::{Error, Result};

pub fn write_snapshot(path: &Path, field: &Field2D) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&(field.grid.n() as u64).to_le_bytes())?;
    w.write_all(&field.grid.half_width().to_le_bytes())?;
    w.write_all(&field.t.to_le_bytes())?;
    for v in &field.values {
        w.write_all(&(v.re as f32).to_le_bytes())?;
        w.write_all(&(v.im as f32).to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<Field2D> {
    let mut r = BufReader::new(File::open(path)?);
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b8)?;
    let n = usize::try_from(u64::from_le_bytes(b8)).map_err(|e| Error::Parse(e.to_string()))?;
    r.read_exact(&mut b8)?;
    let half_width = f64::from_le_bytes(b8);
    r.read_exact(&mut b8)?;
    let t = f64::from_le_bytes(b8);
    let grid = Grid2D::new(n, half_width).map_err(|e| Error::Parse(format!("snapshot header: {e}")))?;
    let mut raw = vec![0u8; n * n * 8];
    r.read_exact(&mut raw)?;
    let values = raw
        .chunks_exact(8)
        .map(|c| {
            let re = f32::from_le_bytes([c[0], c[1], c[2], c[3]]);
            let im = f32::from_le_bytes([c[4], c[5], c[6], c[7]]);
            Complex64::new(re.into(), im.into())
        })
        .collect();
    Field2D::new(grid, values, t)
}
