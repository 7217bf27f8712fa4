//! Binary field files.
//!
//! Layout (all numbers little-endian):
//!
//! | offset | size | content                                   |
//! |--------|------|-------------------------------------------|
//! | 0      | 8    | magic `AXIF1` padded with NUL             |
//! | 8      | 8    | `a` as f64 (NaN when not tied to an order)|
//! | 16     | 8    | `r_max` f64                               |
//! | 24     | 8    | `z_max` f64                               |
//! | 32     | 8    | `n_r` u64                                 |
//! | 40     | 8    | `n_z` u64                                 |
//! | 48     | 8    | trailer length in bytes, u64              |
//! | 56     | 8    | reserved, zero                            |
//! | 64     | 8·n_r·n_z | values, row-major (one row per radius) |
//! | ...    | trailer | UTF-8 run configuration (`key=value` lines) |

use super::{HalfPlaneGrid, ScalarField};
use crate::error::{Error, Result};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

pub const FIELD_MAGIC: &[u8; 8] = b"AXIF1\0\0\0";
pub const FIELD_HEADER_LEN: usize = 64;

/// Metadata stored alongside a field.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FieldMeta {
    pub a: Option<f64>,
    /// Resolved run configuration, embedded verbatim.
    pub config: String,
}

pub fn write_field<W: Write>(mut w: W, field: &ScalarField, meta: &FieldMeta) -> Result<()> {
    let g = field.grid();
    let mut header = [0u8; FIELD_HEADER_LEN];
    header[0..8].copy_from_slice(FIELD_MAGIC);
    header[8..16].copy_from_slice(&meta.a.unwrap_or(f64::NAN).to_le_bytes());
    header[16..24].copy_from_slice(&g.r_max().to_le_bytes());
    header[24..32].copy_from_slice(&g.z_max().to_le_bytes());
    header[32..40].copy_from_slice(&(g.n_r() as u64).to_le_bytes());
    header[40..48].copy_from_slice(&(g.n_z() as u64).to_le_bytes());
    header[48..56].copy_from_slice(&(meta.config.len() as u64).to_le_bytes());
    w.write_all(&header)?;
    let mut buf = Vec::with_capacity(8 * field.values().len());
    for v in field.values() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    w.write_all(meta.config.as_bytes())?;
    w.flush()?;
    Ok(())
}

fn f64_at(h: &[u8], off: usize) -> f64 {
    f64::from_le_bytes(h[off..off + 8].try_into().expect("8 bytes"))
}

fn u64_at(h: &[u8], off: usize) -> u64 {
    u64::from_le_bytes(h[off..off + 8].try_into().expect("8 bytes"))
}

fn read_exact_or<R: Read>(r: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Format(format!("truncated file ({what})")),
        _ => Error::Io(e),
    })
}

pub fn read_field<R: Read>(mut r: R) -> Result<(ScalarField, FieldMeta)> {
    let mut header = [0u8; FIELD_HEADER_LEN];
    read_exact_or(&mut r, &mut header, "header")?;
    if &header[0..4] != b"AXIF" {
        return Err(Error::Format("bad magic".into()));
    }
    if &header[0..8] != FIELD_MAGIC {
        return Err(Error::Format(format!(
            "unsupported format version {:?}",
            String::from_utf8_lossy(&header[0..8]).trim_end_matches('\0')
        )));
    }
    if header[56..64].iter().any(|&b| b != 0) {
        return Err(Error::Format("reserved header bytes are not zero".into()));
    }
    let a = f64_at(&header, 8);
    let r_max = f64_at(&header, 16);
    let z_max = f64_at(&header, 24);
    let n_r = u64_at(&header, 32) as usize;
    let n_z = u64_at(&header, 40) as usize;
    let trailer = u64_at(&header, 48) as usize;
    let grid = HalfPlaneGrid::new(n_r, n_z, r_max, z_max).map_err(|e| Error::Format(format!("bad grid: {e}")))?;
    let n = n_r
        .checked_mul(n_z)
        .and_then(|n| n.checked_mul(8))
        .ok_or_else(|| Error::Format("grid dimensions overflow".into()))?;
    let mut data = vec![0u8; n];
    read_exact_or(&mut r, &mut data, "values")?;
    let values: Vec<f64> = data.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    let mut cfg = vec![0u8; trailer];
    read_exact_or(&mut r, &mut cfg, "trailer")?;
    let mut extra = [0u8; 1];
    if r.read(&mut extra)? != 0 {
        return Err(Error::Format("trailing bytes after field data".into()));
    }
    let config = String::from_utf8(cfg).map_err(|_| Error::Format("configuration trailer is not UTF-8".into()))?;
    let field = ScalarField::new(grid, values).map_err(|e| Error::Format(format!("{e}")))?;
    Ok((field, FieldMeta { a: if a.is_nan() { None } else { Some(a) }, config }))
}

pub fn save_field(path: impl AsRef<Path>, field: &ScalarField, meta: &FieldMeta) -> Result<()> {
    write_field(BufWriter::new(File::create(path)?), field, meta)
}

pub fn load_field(path: impl AsRef<Path>) -> Result<(ScalarField, FieldMeta)> {
    read_field(BufReader::new(File::open(path)?))
}
