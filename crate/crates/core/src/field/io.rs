use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Field, GridSpec};
use crate::error::{Error, Result};

pub const FIELD_MAGIC: &[u8; 8] = b"VRNLSFLD";

/// 32-byte header (magic, `N` as u64, `M` as u64, `L` as f64), then the samples as f64,
/// all little-endian, in row-major lattice order.
pub fn write_field(u: &Field, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let g = u.grid();
    w.write_all(FIELD_MAGIC)?;
    w.write_u64::<LittleEndian>(g.dim as u64)?;
    w.write_u64::<LittleEndian>(g.points as u64)?;
    w.write_f64::<LittleEndian>(g.half_width)?;
    for &v in u.values() {
        w.write_f64::<LittleEndian>(v)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_field(path: &Path) -> Result<Field> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != FIELD_MAGIC {
        return Err(Error::InvalidInput("not a field file (bad magic)".into()));
    }
    let dim = r.read_u64::<LittleEndian>()? as usize;
    let points = r.read_u64::<LittleEndian>()? as usize;
    let half_width = r.read_f64::<LittleEndian>()?;
    let grid = GridSpec::with_decay_tol(dim, half_width, points, f64::INFINITY)?;
    let mut values = vec![0.0; grid.len()];
    r.read_f64_into::<LittleEndian>(&mut values)?;
    Field::from_values(grid, values)
}
