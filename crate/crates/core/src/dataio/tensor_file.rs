//! `.rten` tensor files: `"RTEN"`, version `1`, dtype `0` (f32), ndim, then
//! `ndim` little-endian `u64` dims and the row-major little-endian payload.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensorkernels::Tensor;

const MAGIC: &[u8; 4] = b"RTEN";
const VERSION: u8 = 1;
const DTYPE_F32: u8 = 0;

pub fn write_tensor_to<W: Write>(mut w: W, t: &Tensor<f32>) -> Result<()> {
    if t.ndim() > u8::MAX as usize {
        return Err(Error::Format(format!("{} dims exceed the format limit", t.ndim())));
    }
    w.write_all(MAGIC)?;
    w.write_all(&[VERSION, DTYPE_F32, t.ndim() as u8])?;
    for &d in t.dims() {
        w.write_all(&(d as u64).to_le_bytes())?;
    }
    let mut buf = Vec::with_capacity(t.numel() * 4);
    for v in t.data() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

fn read_exact_or<R: Read>(r: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Format(format!("truncated {what}")),
        _ => Error::Io(e),
    })
}

pub fn read_tensor_from<R: Read>(mut r: R) -> Result<Tensor<f32>> {
    let mut head = [0u8; 7];
    read_exact_or(&mut r, &mut head, "header")?;
    if &head[..4] != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    if head[4] != VERSION {
        return Err(Error::Format(format!("unsupported version {}", head[4])));
    }
    if head[5] != DTYPE_F32 {
        return Err(Error::Format(format!("unsupported dtype {} (only f32)", head[5])));
    }
    let ndim = head[6] as usize;
    let mut dims = Vec::with_capacity(ndim);
    let mut numel: usize = 1;
    for _ in 0..ndim {
        let mut b = [0u8; 8];
        read_exact_or(&mut r, &mut b, "dims")?;
        let d = usize::try_from(u64::from_le_bytes(b))
            .map_err(|_| Error::Format("dims overflow".into()))?;
        numel = numel
            .checked_mul(d)
            .filter(|n| n.checked_mul(4).is_some())
            .ok_or_else(|| Error::Format("dims overflow".into()))?;
        dims.push(d);
    }
    // Read in bounded chunks so a lying header cannot force a huge allocation.
    let mut data = Vec::new();
    let mut remaining = numel * 4;
    let mut chunk = vec![0u8; 1 << 16];
    while remaining > 0 {
        let n = remaining.min(chunk.len());
        read_exact_or(&mut r, &mut chunk[..n], "payload")?;
        data.extend(chunk[..n].chunks_exact(4).map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]])));
        remaining -= n;
    }
    Tensor::new(dims, data)
}

pub fn write_tensor(path: impl AsRef<Path>, t: &Tensor<f32>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_tensor_to(&mut w, t)?;
    w.flush()?;
    Ok(())
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<Tensor<f32>> {
    read_tensor_from(BufReader::new(File::open(path)?))
}
