//! Little-endian tensor files.
//!
//! Layout: magic `PFT1`, `u32` rank, `rank × u32` dims, `u8` dtype tag
//! (0 = f32, 1 = f64), then the raw row-major payload.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use super::{DType, DiffTensor, Scalar, Shape, TensorError};

pub const MAGIC: &[u8; 4] = b"PFT1";

#[derive(Debug, Error)]
pub enum SerializeError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("bad magic bytes {0:?}, expected PFT1")]
    BadMagic([u8; 4]),
    #[error("unknown dtype tag {0}")]
    UnknownDType(u8),
    #[error("record name is not valid UTF-8")]
    BadName,
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// Writes `tensor` in its own element type.
pub fn write_tensor<T: Scalar, W: Write>(w: &mut W, tensor: &DiffTensor<T>) -> io::Result<()> {
    w.write_all(&encode(tensor))
}

/// Encodes `tensor` as PFT1 bytes.
pub fn encode<T: Scalar>(tensor: &DiffTensor<T>) -> Vec<u8> {
    let mut buf = Vec::with_capacity(9 + 4 * tensor.dims().len() + tensor.numel() * T::DTYPE.size());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&(tensor.dims().len() as u32).to_le_bytes());
    for &d in tensor.dims() {
        buf.extend_from_slice(&(d as u32).to_le_bytes());
    }
    buf.push(T::DTYPE.tag());
    for &v in tensor.data() {
        v.write_le(&mut buf);
    }
    buf
}

fn read_u32<R: Read>(r: &mut R) -> io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

/// Reads one tensor, converting the stored element type to `T`.
pub fn read_tensor<T: Scalar, R: Read>(r: &mut R) -> Result<DiffTensor<T>, SerializeError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(SerializeError::BadMagic(magic));
    }
    let rank = read_u32(r)? as usize;
    let dims = (0..rank).map(|_| read_u32(r).map(|d| d as usize)).collect::<io::Result<Vec<_>>>()?;
    let shape = Shape::new(dims)?;
    let mut tag = [0u8; 1];
    r.read_exact(&mut tag)?;
    let dtype = DType::from_tag(tag[0]).ok_or(SerializeError::UnknownDType(tag[0]))?;
    let mut payload = vec![0u8; shape.numel() * dtype.size()];
    r.read_exact(&mut payload)?;
    let data: Vec<T> = match dtype {
        DType::F32 => payload.chunks_exact(4).map(|c| T::of(f32::read_le(c) as f64)).collect(),
        DType::F64 => payload.chunks_exact(8).map(|c| T::of(f64::read_le(c))).collect(),
    };
    Ok(DiffTensor::from_shape(data, shape)?)
}

pub fn save<T: Scalar>(path: &Path, tensor: &DiffTensor<T>) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_tensor(&mut w, tensor)?;
    w.flush()
}

pub fn load<T: Scalar>(path: &Path) -> Result<DiffTensor<T>, SerializeError> {
    let mut r = BufReader::new(File::open(path)?);
    read_tensor(&mut r)
}

/// Writes a `u32` name length, the UTF-8 name, then the PFT1 tensor.
pub fn write_named<T: Scalar, W: Write>(w: &mut W, name: &str, tensor: &DiffTensor<T>) -> io::Result<()> {
    w.write_all(&(name.len() as u32).to_le_bytes())?;
    w.write_all(name.as_bytes())?;
    write_tensor(w, tensor)
}

/// Reads a named record; `Ok(None)` at a clean end of stream.
pub fn read_named<T: Scalar, R: Read>(r: &mut R) -> Result<Option<(String, DiffTensor<T>)>, SerializeError> {
    let mut len = [0u8; 4];
    match r.read(&mut len[..1])? {
        0 => return Ok(None),
        _ => r.read_exact(&mut len[1..])?,
    }
    let mut name = vec![0u8; u32::from_le_bytes(len) as usize];
    r.read_exact(&mut name)?;
    let name = String::from_utf8(name).map_err(|_| SerializeError::BadName)?;
    Ok(Some((name, read_tensor(r)?)))
}
