//! Binary and CSV encodings of [`SpectralField`].
//!
//! Binary layout, all little endian:
//!
//! | bytes | content |
//! |-------|---------|
//! | 8     | magic `SNLSFLD1` |
//! | 4     | dimension `d` (u32) |
//! | 4     | representation, 0 physical or 1 frequency (u32) |
//! | 8     | points per axis `N` (u64) |
//! | 8     | box side `L` (f64) |
//! | 16·N^d | values as (re, im) f64 pairs, last axis fastest |

use std::fs;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use snls_core::spectral::{GridSpec, Representation, SpectralField};

use crate::error::{LabError, LabResult};

pub const MAGIC: &[u8; 8] = b"SNLSFLD1";
const HEADER: usize = 32;

pub fn encode(field: &SpectralField) -> Vec<u8> {
    let grid = field.grid();
    let mut out = Vec::with_capacity(HEADER + 16 * grid.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(grid.dim() as u32).to_le_bytes());
    let tag: u32 = match field.representation() {
        Representation::Physical => 0,
        Representation::Frequency => 1,
    };
    out.extend_from_slice(&tag.to_le_bytes());
    out.extend_from_slice(&(grid.n() as u64).to_le_bytes());
    out.extend_from_slice(&grid.length().to_le_bytes());
    for v in field.values() {
        out.extend_from_slice(&v.re.to_le_bytes());
        out.extend_from_slice(&v.im.to_le_bytes());
    }
    out
}

fn take<const K: usize>(bytes: &[u8], at: usize) -> [u8; K] {
    bytes[at..at + K].try_into().expect("length checked by caller")
}

pub fn decode(bytes: &[u8], origin: &Path) -> LabResult<SpectralField> {
    let bad = |m: &str| LabError::format(origin, m.to_string());
    if bytes.len() < HEADER || &bytes[..8] != MAGIC {
        return Err(bad("not an SNLSFLD1 field file"));
    }
    let dim = u32::from_le_bytes(take(bytes, 8)) as usize;
    let repr = match u32::from_le_bytes(take(bytes, 12)) {
        0 => Representation::Physical,
        1 => Representation::Frequency,
        t => return Err(bad(&format!("unknown representation tag {t}"))),
    };
    let n = u64::from_le_bytes(take(bytes, 16)) as usize;
    let length = f64::from_le_bytes(take(bytes, 24));
    let grid = GridSpec::new(dim, length, n)?;
    if bytes.len() != HEADER + 16 * grid.len() {
        return Err(bad(&format!(
            "payload holds {} bytes, expected {}",
            bytes.len() - HEADER,
            16 * grid.len()
        )));
    }
    let values = bytes[HEADER..]
        .chunks_exact(16)
        .map(|c| Complex64::new(f64::from_le_bytes(take(c, 0)), f64::from_le_bytes(take(c, 8))))
        .collect();
    Ok(SpectralField::from_values(&grid, values, repr)?)
}

pub fn write_field(path: &Path, field: &SpectralField) -> LabResult<()> {
    let mut f = fs::File::create(path).map_err(|e| LabError::io(path, e))?;
    f.write_all(&encode(field)).map_err(|e| LabError::io(path, e))
}

pub fn read_field(path: &Path) -> LabResult<SpectralField> {
    let bytes = fs::read(path).map_err(|e| LabError::io(path, e))?;
    decode(&bytes, path)
}

/// Physical-side samples as CSV: one row per lattice point with its
/// coordinates and the real and imaginary parts.
pub fn field_csv(field: &SpectralField) -> LabResult<Vec<u8>> {
    let phys = field.to_physical();
    let grid = phys.grid();
    let d = grid.dim();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = ["x", "y", "z"][..d].iter().map(|s| s.to_string()).collect();
    header.extend(["re".into(), "im".into()]);
    w.write_record(&header).map_err(csv_err)?;
    for (i, v) in phys.values().iter().enumerate() {
        let x = grid.position(i);
        let mut row: Vec<String> = x[..d].iter().map(|c| c.to_string()).collect();
        row.push(v.re.to_string());
        row.push(v.im.to_string());
        w.write_record(&row).map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| LabError::format("<csv>", e.to_string()))
}

pub(crate) fn csv_err(e: csv::Error) -> LabError {
    LabError::format("<csv>", e.to_string())
}
