//! MVOL: a minimal volume container.
//!
//! ```text
//! offset  size  field
//! 0       4     magic "MVOL" (bytes 0x4D 0x56 0x4F 0x4C)
//! 4       4     version (u32) = 1
//! 8       12    dims x, y, z (3 × u32)
//! 20      12    spacing x, y, z in mm (3 × f32)
//! 32      1     orientation (0 axial, 1 coronal, 2 sagittal)
//! 33      1     dtype (0 = f32)
//! 34      2     reserved, zero
//! 36      4·N   voxels (f32), x fastest, N = x·y·z
//! ```
//!
//! Everything is little-endian.

use std::path::Path;

use crate::error::{Error, Result};
use crate::volume::{Grid, Orientation, Volume};

pub const MVOL_MAGIC: &[u8; 4] = b"MVOL";
pub const MVOL_VERSION: u32 = 1;
pub const MVOL_HEADER_LEN: usize = 36;
const DTYPE_F32: u8 = 0;

pub fn encode_mvol(v: &Volume) -> Vec<u8> {
    let mut out = Vec::with_capacity(MVOL_HEADER_LEN + 4 * v.data.len());
    out.extend_from_slice(MVOL_MAGIC);
    out.extend_from_slice(&MVOL_VERSION.to_le_bytes());
    for d in v.grid.dims {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for s in v.grid.spacing {
        out.extend_from_slice(&s.to_le_bytes());
    }
    out.push(v.grid.orientation.code());
    out.push(DTYPE_F32);
    out.extend_from_slice(&[0, 0]);
    for x in &v.data {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out
}

pub fn decode_mvol(bytes: &[u8]) -> Result<Volume> {
    if bytes.len() < MVOL_HEADER_LEN {
        return Err(Error::Truncated { expected: MVOL_HEADER_LEN, found: bytes.len() });
    }
    if &bytes[0..4] != MVOL_MAGIC {
        return Err(Error::Format("bad magic, expected MVOL".into()));
    }
    let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    let f32_at = |i: usize| f32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    let version = u32_at(4);
    if version != MVOL_VERSION {
        return Err(Error::Format(format!("unsupported MVOL version {version}")));
    }
    let dims = [u32_at(8) as usize, u32_at(12) as usize, u32_at(16) as usize];
    let spacing = [f32_at(20), f32_at(24), f32_at(28)];
    let orientation = Orientation::from_code(bytes[32])
        .ok_or_else(|| Error::Format(format!("unknown orientation code {}", bytes[32])))?;
    if bytes[33] != DTYPE_F32 {
        return Err(Error::Format(format!("unsupported dtype code {}", bytes[33])));
    }
    if bytes[34] != 0 || bytes[35] != 0 {
        return Err(Error::Format("reserved header bytes are not zero".into()));
    }
    let grid = Grid::new(dims, spacing, orientation).map_err(|e| Error::Format(e.to_string()))?;
    let expected = dims
        .iter()
        .try_fold(4usize, |acc, &d| acc.checked_mul(d))
        .and_then(|n| n.checked_add(MVOL_HEADER_LEN))
        .ok_or_else(|| Error::Format(format!("dims {dims:?} overflow")))?;
    if bytes.len() < expected {
        return Err(Error::Truncated { expected, found: bytes.len() });
    }
    if bytes.len() > expected {
        return Err(Error::Format(format!(
            "{} trailing bytes after declared payload",
            bytes.len() - expected
        )));
    }
    let data = bytes[MVOL_HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Volume::new(grid, data)
}

pub fn write_mvol(path: &Path, v: &Volume) -> Result<()> {
    super::write_atomic(path, &encode_mvol(v))
}

pub fn read_mvol(path: &Path) -> Result<Volume> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_mvol(&bytes)
}
