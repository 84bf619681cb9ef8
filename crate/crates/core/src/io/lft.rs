//! `LFT1` light-field container.
//!
//! ```text
//! "LFT1" | U V C H W dtype : u32 LE | payload : f32 LE in (u, v, c, y, x) order
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::lightfield::{Dims5, LightField};

pub const LFT_MAGIC: [u8; 4] = *b"LFT1";
pub const DTYPE_F32: u32 = 1;
const HEADER_LEN: usize = 4 + 6 * 4;

pub fn write_lft_to<W: Write>(mut w: W, lf: &LightField<f32>) -> Result<()> {
    let d = lf.dims();
    let mut header = Vec::with_capacity(HEADER_LEN);
    header.extend_from_slice(&LFT_MAGIC);
    for v in [d.u, d.v, d.c, d.h, d.w] {
        let v = u32::try_from(v).map_err(|_| Error::InvalidArgument(format!("dimension {v} exceeds u32")))?;
        header.extend_from_slice(&v.to_le_bytes());
    }
    header.extend_from_slice(&DTYPE_F32.to_le_bytes());
    w.write_all(&header)?;
    let mut payload = Vec::with_capacity(lf.data().len() * 4);
    for v in lf.data() {
        payload.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&payload)?;
    w.flush()?;
    Ok(())
}

pub fn read_lft_from<R: Read>(mut r: R) -> Result<LightField<f32>> {
    let mut header = [0u8; HEADER_LEN];
    let got = read_full(&mut r, &mut header)?;
    if got < 4 {
        return Err(Error::Format(format!("file too short for magic ({got} bytes)")));
    }
    let magic = [header[0], header[1], header[2], header[3]];
    if magic != LFT_MAGIC {
        return Err(Error::BadMagic { expected: LFT_MAGIC, found: magic });
    }
    if got < HEADER_LEN {
        return Err(Error::Format(format!("truncated header ({got} of {HEADER_LEN} bytes)")));
    }
    let field = |i: usize| u32::from_le_bytes(header[4 + 4 * i..8 + 4 * i].try_into().expect("4 bytes"));
    let dims = Dims5::new(field(0) as usize, field(1) as usize, field(2) as usize, field(3) as usize, field(4) as usize);
    let dtype = field(5);
    if dtype != DTYPE_F32 {
        return Err(Error::UnsupportedDtype(dtype));
    }
    let expected = (dims.len() as u64) * 4;
    let mut payload = Vec::new();
    r.take(expected + 1).read_to_end(&mut payload)?;
    if (payload.len() as u64) < expected {
        return Err(Error::TruncatedPayload { expected, found: payload.len() as u64 });
    }
    if payload.len() as u64 > expected {
        return Err(Error::Format("trailing bytes after payload".into()));
    }
    let data = payload.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes"))).collect();
    LightField::from_vec(dims, data)
}

fn read_full<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<usize> {
    let mut n = 0;
    while n < buf.len() {
        match r.read(&mut buf[n..])? {
            0 => break,
            k => n += k,
        }
    }
    Ok(n)
}

pub fn write_lft(path: impl AsRef<Path>, lf: &LightField<f32>) -> Result<()> {
    write_lft_to(BufWriter::new(File::create(path)?), lf)
}

pub fn read_lft(path: impl AsRef<Path>) -> Result<LightField<f32>> {
    read_lft_from(BufReader::new(File::open(path)?))
}

/// Payload size in bytes of an f32 container with `dims`.
pub fn payload_bytes(dims: Dims5) -> u64 {
    dims.len() as u64 * 4
}
