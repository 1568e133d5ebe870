//! Binary parameter files.
//!
//! Layout (little endian): magic `FRCK`, `u32` version, `u32` array count,
//! then for each array a `u32` name length, the UTF-8 name and `u32` rows and
//! columns; after this manifest, the arrays' entries as `f64` in row-major
//! order, one array after another.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;

use super::params::ParameterSet;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"FRCK";
pub const VERSION: u32 = 1;

pub fn write_checkpoint<W: Write>(params: &ParameterSet, mut out: W) -> Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&(params.len() as u32).to_le_bytes())?;
    for (name, v) in params.iter() {
        out.write_all(&(name.len() as u32).to_le_bytes())?;
        out.write_all(name.as_bytes())?;
        out.write_all(&(v.nrows() as u32).to_le_bytes())?;
        out.write_all(&(v.ncols() as u32).to_le_bytes())?;
    }
    for (_, v) in params.iter() {
        for x in v.iter() {
            out.write_all(&x.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_u32<R: Read>(input: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    input.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

pub fn read_checkpoint<R: Read>(mut input: R) -> Result<ParameterSet> {
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint("not a checkpoint file".into()));
    }
    let version = read_u32(&mut input)?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let count = read_u32(&mut input)? as usize;
    let mut manifest = Vec::with_capacity(count);
    for _ in 0..count {
        let len = read_u32(&mut input)? as usize;
        let mut name = vec![0u8; len];
        input.read_exact(&mut name)?;
        let name = String::from_utf8(name).map_err(|_| Error::Checkpoint("parameter name is not UTF-8".into()))?;
        let rows = read_u32(&mut input)? as usize;
        let cols = read_u32(&mut input)? as usize;
        manifest.push((name, rows, cols));
    }
    let mut params = ParameterSet::new();
    for (name, rows, cols) in manifest {
        let mut data = Vec::with_capacity(rows * cols);
        let mut b = [0u8; 8];
        for _ in 0..rows * cols {
            input.read_exact(&mut b)?;
            data.push(f64::from_le_bytes(b));
        }
        let array = Array2::from_shape_vec((rows, cols), data).map_err(|e| Error::Checkpoint(e.to_string()))?;
        if params.id(&name).is_some() {
            return Err(Error::Checkpoint(format!("duplicate parameter {name}")));
        }
        params.add(name, array);
    }
    Ok(params)
}

pub fn save_checkpoint(params: &ParameterSet, path: &Path) -> Result<()> {
    let file = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_checkpoint(params, file)
}

pub fn load_checkpoint(path: &Path) -> Result<ParameterSet> {
    read_checkpoint(std::io::BufReader::new(std::fs::File::open(path)?))
}

/// Copy values from `loaded` into `params`, which must have the same layout.
pub fn restore_into(params: &mut ParameterSet, loaded: &ParameterSet) -> Result<()> {
    if !params.same_layout(loaded) {
        return Err(Error::Checkpoint("checkpoint layout does not match the network".into()));
    }
    *params = loaded.clone();
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;

    #[test]
    fn round_trip() {
        let mut p = ParameterSet::new();
        p.add("a.w", arr2(&[[1.5, -2.0], [f64::MIN_POSITIVE, 1e300]]));
        p.add("b", Array2::zeros((0, 3)));
        let mut bytes = Vec::new();
        write_checkpoint(&p, &mut bytes).unwrap();
        assert_eq!(&bytes[..4], b"FRCK");
        let q = read_checkpoint(&bytes[..]).unwrap();
        assert_eq!(p, q);
        assert!(read_checkpoint(&bytes[..bytes.len() - 1]).is_err());
        bytes[0] = b'X';
        assert!(matches!(read_checkpoint(&bytes[..]), Err(Error::Checkpoint(_))));
    }
}
