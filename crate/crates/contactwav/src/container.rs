//! `CWAV` binary tensor container.
//!
//! Layout, all little-endian:
//!
//! | bytes | field |
//! |---|---|
//! | 4 | magic `CWAV` |
//! | 2 | version (u16, currently 1) |
//!
//! followed by zero or more tensor records:
//!
//! | bytes | field |
//! |---|---|
//! | 1 | dtype (u8, `0` = f32) |
//! | 1 | rank (u8) |
//! | 4 x rank | dims (u32 each, outermost first) |
//! | 4 x prod(dims) | payload, row-major f32 |
//!
//! A record's offset is the byte position of its dtype field.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"CWAV";
pub const VERSION: u16 = 1;
pub const DTYPE_F32: u8 = 0;
pub const HEADER_LEN: u64 = 6;

/// Where a tensor lives inside a container.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorLoc {
    pub offset: u64,
    pub dims: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub dims: Vec<usize>,
    pub data: Vec<f32>,
}

impl Tensor {
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Element at a multi-index (row-major).
    pub fn at(&self, index: &[usize]) -> f32 {
        assert_eq!(index.len(), self.dims.len(), "index rank mismatch");
        let flat = index.iter().zip(&self.dims).fold(0, |acc, (&i, &d)| {
            assert!(i < d, "index {i} out of bounds for dim {d}");
            acc * d + i
        });
        self.data[flat]
    }
}

/// Streams tensors into a container, tracking record offsets.
#[derive(Debug)]
pub struct ContainerWriter<W: Write> {
    inner: W,
    offset: u64,
}

impl<W: Write> ContainerWriter<W> {
    pub fn new(mut inner: W) -> io::Result<Self> {
        inner.write_all(&MAGIC)?;
        inner.write_all(&VERSION.to_le_bytes())?;
        Ok(Self { inner, offset: HEADER_LEN })
    }

    /// Appends an f32 tensor; `values` must yield exactly `prod(dims)` items.
    pub fn write_f32<I>(&mut self, dims: &[usize], values: I) -> io::Result<TensorLoc>
    where
        I: IntoIterator<Item = f32>,
    {
        let rank = u8::try_from(dims.len()).map_err(|_| invalid("rank exceeds 255"))?;
        let expected: usize = dims.iter().product();
        let mut buf = Vec::with_capacity(2 + 4 * dims.len() + 4 * expected);
        buf.push(DTYPE_F32);
        buf.push(rank);
        for &d in dims {
            buf.extend_from_slice(&u32::try_from(d).map_err(|_| invalid("dimension exceeds u32"))?.to_le_bytes());
        }
        let mut count = 0;
        for v in values {
            buf.extend_from_slice(&v.to_le_bytes());
            count += 1;
        }
        if count != expected {
            return Err(invalid("payload length does not match dims"));
        }
        self.inner.write_all(&buf)?;
        let loc = TensorLoc { offset: self.offset, dims: dims.to_vec() };
        self.offset += buf.len() as u64;
        Ok(loc)
    }

    pub fn finish(mut self) -> io::Result<W> {
        self.inner.flush()?;
        Ok(self.inner)
    }
}

fn invalid(msg: &str) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidInput, msg)
}

fn take<'a>(bytes: &'a [u8], pos: &mut usize, n: usize) -> Result<&'a [u8]> {
    let end = pos
        .checked_add(n)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| Error::Container(format!("truncated: need {n} bytes at offset {pos}, have {}", bytes.len())))?;
    let out = &bytes[*pos..end];
    *pos = end;
    Ok(out)
}

/// Checks the magic and version.
pub fn check_header(bytes: &[u8]) -> Result<()> {
    let mut pos = 0;
    if take(bytes, &mut pos, 4)? != MAGIC {
        return Err(Error::Container("bad magic".into()));
    }
    let version = u16::from_le_bytes(take(bytes, &mut pos, 2)?.try_into().expect("2 bytes"));
    if version != VERSION {
        return Err(Error::Container(format!("unsupported version {version}")));
    }
    Ok(())
}

/// Decodes the record at `offset`, returning it and the next record's offset.
pub fn read_tensor_at(bytes: &[u8], offset: usize) -> Result<(Tensor, usize)> {
    let mut pos = offset;
    let head = take(bytes, &mut pos, 2)?;
    if head[0] != DTYPE_F32 {
        return Err(Error::Container(format!("unknown dtype {} at offset {offset}", head[0])));
    }
    let dims: Vec<usize> = take(bytes, &mut pos, 4 * head[1] as usize)?
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().expect("4 bytes")) as usize)
        .collect();
    let count = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::Container("tensor size overflows".into()))?;
    let data = take(bytes, &mut pos, count)?
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    Ok((Tensor { dims, data }, pos))
}

/// Decodes every record in a container.
pub fn read_container(bytes: &[u8]) -> Result<Vec<Tensor>> {
    check_header(bytes)?;
    let mut pos = HEADER_LEN as usize;
    let mut out = Vec::new();
    while pos < bytes.len() {
        let (tensor, next) = read_tensor_at(bytes, pos)?;
        out.push(tensor);
        pos = next;
    }
    Ok(out)
}

pub fn read_container_file(path: &Path) -> Result<Vec<Tensor>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    read_container(&bytes).map_err(|e| e.context(path.display().to_string()))
}

/// Writes a container holding the given tensors.
pub fn write_container_file(path: &Path, tensors: &[Tensor]) -> Result<Vec<TensorLoc>> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let io_err = |e| Error::io(path, e);
    let mut writer = ContainerWriter::new(io::BufWriter::new(file)).map_err(io_err)?;
    let locs = tensors
        .iter()
        .map(|t| writer.write_f32(&t.dims, t.data.iter().copied()))
        .collect::<io::Result<Vec<_>>>()
        .map_err(io_err)?;
    writer.finish().map_err(io_err)?;
    Ok(locs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_bytes() {
        let bytes = ContainerWriter::new(Vec::new()).unwrap().finish().unwrap();
        assert_eq!(bytes, b"CWAV\x01\x00");
    }

    #[test]
    fn record_layout() {
        let mut w = ContainerWriter::new(Vec::new()).unwrap();
        let loc = w.write_f32(&[2], [1.0f32, -2.0]).unwrap();
        let bytes = w.finish().unwrap();
        assert_eq!(loc, TensorLoc { offset: 6, dims: vec![2] });
        let mut expected = b"CWAV\x01\x00\x00\x01\x02\x00\x00\x00".to_vec();
        expected.extend_from_slice(&1.0f32.to_le_bytes());
        expected.extend_from_slice(&(-2.0f32).to_le_bytes());
        assert_eq!(bytes, expected);
    }

    #[test]
    fn round_trip_with_offsets() {
        let a = Tensor { dims: vec![2, 3], data: (0..6).map(|v| v as f32 * 0.5).collect() };
        let b = Tensor { dims: vec![], data: vec![7.0] };
        let c = Tensor { dims: vec![1, 0, 4], data: vec![] };
        let mut w = ContainerWriter::new(Vec::new()).unwrap();
        let locs: Vec<_> = [&a, &b, &c].iter().map(|t| w.write_f32(&t.dims, t.data.iter().copied()).unwrap()).collect();
        let bytes = w.finish().unwrap();
        assert_eq!(read_container(&bytes).unwrap(), vec![a.clone(), b.clone(), c]);
        assert_eq!(read_tensor_at(&bytes, locs[1].offset as usize).unwrap().0, b);
        assert_eq!(a.at(&[1, 2]), 2.5);
    }

    #[test]
    fn rejects_corruption() {
        assert!(read_container(b"CWAX\x01\x00").is_err());
        assert!(read_container(b"CWAV\x02\x00").is_err());
        assert!(read_container(b"CWAV\x01\x00\x00\x01\x05\x00\x00\x00\x00").is_err());
        assert!(read_container(b"CWAV\x01\x00\x03\x00").is_err());
        let mut w = ContainerWriter::new(Vec::new()).unwrap();
        assert!(w.write_f32(&[3], [1.0f32]).is_err());
    }
}
