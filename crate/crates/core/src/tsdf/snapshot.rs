//! Volume snapshot file: a little-endian binary used for test fixtures.
//!
//! Layout:
//! - magic `DNTSDF01` (8 bytes)
//! - `u32` dims x, y, z
//! - `f32` voxel_size, origin x/y/z, truncation
//! - `f32` signed distances, x-fastest then y then z
//! - `f32` weights, same order

use std::io::{Read, Write};

use crate::geometry::Vec3;
use crate::scalar::{cast, Scalar};

use super::{TsdfError, TsdfVolume};

pub const SNAPSHOT_MAGIC: &[u8; 8] = b"DNTSDF01";

pub fn write_snapshot<S: Scalar, W: Write>(
    volume: &TsdfVolume<S>,
    out: &mut W,
) -> Result<(), TsdfError> {
    out.write_all(SNAPSHOT_MAGIC)?;
    for d in volume.dims() {
        out.write_all(&(d as u32).to_le_bytes())?;
    }
    out.write_all(&(volume.voxel_size().to_f64_lossy() as f32).to_le_bytes())?;
    let o = volume.origin();
    for c in [o.x, o.y, o.z] {
        out.write_all(&(c.to_f64_lossy() as f32).to_le_bytes())?;
    }
    out.write_all(&(volume.truncation().to_f64_lossy() as f32).to_le_bytes())?;
    let (sdf, weight) = volume.raw_fields();
    for field in [sdf, weight] {
        for v in field {
            out.write_all(&(v.to_f64_lossy() as f32).to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_snapshot<S: Scalar, R: Read>(input: &mut R) -> Result<TsdfVolume<S>, TsdfError> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != SNAPSHOT_MAGIC {
        return Err(TsdfError::BadSnapshot(format!(
            "bad magic {:?}, expected {:?}",
            magic, SNAPSHOT_MAGIC
        )));
    }
    let mut dims = [0usize; 3];
    for d in &mut dims {
        *d = read_u32(input)? as usize;
    }
    if dims.iter().any(|&d| d == 0) || dims.iter().product::<usize>() > (1 << 30) {
        return Err(TsdfError::BadSnapshot(format!("implausible dims {dims:?}")));
    }
    let voxel_size = read_f32(input)?;
    let ox = read_f32(input)?;
    let oy = read_f32(input)?;
    let oz = read_f32(input)?;
    let truncation = read_f32(input)?;
    if voxel_size <= 0.0 || truncation <= 0.0 {
        return Err(TsdfError::BadSnapshot(
            "non-positive voxel size or truncation".into(),
        ));
    }
    let mut volume = TsdfVolume::with_truncation(
        Vec3::new(cast(ox as f64), cast(oy as f64), cast(oz as f64)),
        cast(voxel_size as f64),
        dims,
        cast(truncation as f64),
    );
    let n = dims[0] * dims[1] * dims[2];
    {
        let (sdf, weight) = volume.raw_fields_mut();
        for field in [sdf, weight] {
            for v in field.iter_mut().take(n) {
                *v = cast(read_f32(input)? as f64);
            }
        }
    }
    Ok(volume)
}

fn read_u32<R: Read>(input: &mut R) -> Result<u32, TsdfError> {
    let mut buf = [0u8; 4];
    input.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_f32<R: Read>(input: &mut R) -> Result<f32, TsdfError> {
    let mut buf = [0u8; 4];
    input.read_exact(&mut buf)?;
    Ok(f32::from_le_bytes(buf))
}
