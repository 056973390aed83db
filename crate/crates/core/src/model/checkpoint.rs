//! Binary parameter checkpoints.
//!
//! Layout: `b"NCGC"`, `u32` format version, then one record per parameter
//! until end of file: `u32` name length, UTF-8 name, `u64` rows, `u64` cols,
//! `rows * cols` little-endian `f64` values in row-major order.

use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::{DenseMatrix, ParamStore};

pub const MAGIC: &[u8; 4] = b"NCGC";
pub const FORMAT_VERSION: u32 = 1;

pub fn encode_checkpoint(store: &ParamStore) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    for p in store.iter() {
        out.extend_from_slice(&(p.name.len() as u32).to_le_bytes());
        out.extend_from_slice(p.name.as_bytes());
        out.extend_from_slice(&(p.value.rows() as u64).to_le_bytes());
        out.extend_from_slice(&(p.value.cols() as u64).to_le_bytes());
        for v in p.value.as_slice() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn write_checkpoint(path: &Path, store: &ParamStore) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(&encode_checkpoint(store))?;
    Ok(())
}

fn take<const N: usize>(r: &mut &[u8], what: &str) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf).map_err(|_| Error::Checkpoint(format!("truncated while reading {what}")))?;
    Ok(buf)
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Vec<(String, DenseMatrix)>> {
    let mut r = bytes;
    if &take::<4>(&mut r, "magic")? != MAGIC {
        return Err(Error::Checkpoint("bad magic bytes".into()));
    }
    let version = u32::from_le_bytes(take(&mut r, "version")?);
    if version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported format version {version}")));
    }
    let mut records = Vec::new();
    while !r.is_empty() {
        let len = u32::from_le_bytes(take(&mut r, "name length")?) as usize;
        if len > r.len() {
            return Err(Error::Checkpoint("truncated while reading name".into()));
        }
        let (name, rest) = r.split_at(len);
        r = rest;
        let name = String::from_utf8(name.to_vec()).map_err(|_| Error::Checkpoint("name is not UTF-8".into()))?;
        let rows = u64::from_le_bytes(take(&mut r, "rows")?) as usize;
        let cols = u64::from_le_bytes(take(&mut r, "cols")?) as usize;
        let count = rows
            .checked_mul(cols)
            .filter(|c| c.checked_mul(8).is_some_and(|b| b <= r.len()))
            .ok_or_else(|| Error::Checkpoint(format!("payload of '{name}' ({rows}x{cols}) exceeds file size")))?;
        let data =
            r[..count * 8].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect();
        r = &r[count * 8..];
        records.push((name, DenseMatrix::new(rows, cols, data)?));
    }
    Ok(records)
}

pub fn read_checkpoint(path: &Path) -> Result<Vec<(String, DenseMatrix)>> {
    let bytes = fs::read(path).map_err(|e| match e.kind() {
        io::ErrorKind::NotFound => Error::Checkpoint(format!("{} not found", path.display())),
        _ => Error::Io(e),
    })?;
    decode_checkpoint(&bytes)
}

/// Overwrite parameter values by name. Every stored parameter must be
/// present with a matching shape; extra records are rejected too.
pub fn load_into(store: &mut ParamStore, records: Vec<(String, DenseMatrix)>) -> Result<()> {
    if records.len() != store.len() {
        return Err(Error::Checkpoint(format!(
            "checkpoint has {} parameters, model has {}",
            records.len(),
            store.len()
        )));
    }
    for (name, value) in records {
        let id = store.find(&name).ok_or_else(|| Error::Checkpoint(format!("unknown parameter '{name}'")))?;
        let p = store.get_mut(id);
        if p.value.shape() != value.shape() {
            return Err(Error::Checkpoint(format!(
                "parameter '{name}' has shape {:?}, checkpoint {:?}",
                p.value.shape(),
                value.shape()
            )));
        }
        p.value = value;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Parameter;

    fn store() -> ParamStore {
        let mut s = ParamStore::new();
        s.add(Parameter::new("layer0.w", DenseMatrix::from_rows(&[[1.5, -2.0], [0.25, 1e-300]])));
        s.add(Parameter::new("proto.w", DenseMatrix::from_rows(&[[f64::MAX, -0.0, 3.0]])));
        s
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let s = store();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ck.bin");
        write_checkpoint(&path, &s).unwrap();
        let mut fresh = ParamStore::new();
        fresh.add(Parameter::new("layer0.w", DenseMatrix::zeros(2, 2)));
        fresh.add(Parameter::new("proto.w", DenseMatrix::zeros(1, 3)));
        load_into(&mut fresh, read_checkpoint(&path).unwrap()).unwrap();
        for (a, b) in s.iter().zip(fresh.iter()) {
            let bits = |m: &DenseMatrix| m.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(&a.value), bits(&b.value));
        }
    }

    #[test]
    fn header_layout() {
        let bytes = encode_checkpoint(&store());
        assert_eq!(&bytes[..4], b"NCGC");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 8);
        assert_eq!(&bytes[12..20], b"layer0.w");
        assert_eq!(bytes.len(), 8 + (4 + 8 + 16 + 32) + (4 + 7 + 16 + 24));
    }

    #[test]
    fn corrupt_inputs_rejected() {
        let bytes = encode_checkpoint(&store());
        assert!(decode_checkpoint(&bytes[..bytes.len() - 3]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode_checkpoint(&bad).is_err());
        let mut bad = bytes.clone();
        bad[4] = 9;
        assert!(decode_checkpoint(&bad).is_err());
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut other = ParamStore::new();
        other.add(Parameter::new("layer0.w", DenseMatrix::zeros(3, 2)));
        other.add(Parameter::new("proto.w", DenseMatrix::zeros(1, 3)));
        let records = decode_checkpoint(&encode_checkpoint(&store())).unwrap();
        assert!(matches!(load_into(&mut other, records), Err(Error::Checkpoint(_))));
    }
}
