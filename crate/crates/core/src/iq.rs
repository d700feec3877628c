//! Raw `.cf32` sample files: interleaved little-endian float32, I then Q, no header.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::ofdm::ComplexSample;

pub fn encode_cf32(samples: &[ComplexSample]) -> Vec<u8> {
    let mut out = Vec::with_capacity(samples.len() * 8);
    for s in samples {
        out.extend_from_slice(&(s.re as f32).to_le_bytes());
        out.extend_from_slice(&(s.im as f32).to_le_bytes());
    }
    out
}

pub fn decode_cf32(bytes: &[u8]) -> Result<Vec<ComplexSample>> {
    if bytes.len() % 8 != 0 {
        return Err(Error::Format(format!(
            "cf32 data is {} bytes, not a multiple of 8",
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| {
            let re = f32::from_le_bytes([c[0], c[1], c[2], c[3]]);
            let im = f32::from_le_bytes([c[4], c[5], c[6], c[7]]);
            ComplexSample::new(re as f64, im as f64)
        })
        .collect())
}

pub fn write_cf32(path: &Path, samples: &[ComplexSample]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&encode_cf32(samples))?;
    w.flush()?;
    Ok(())
}

pub fn read_cf32(path: &Path) -> Result<Vec<ComplexSample>> {
    let mut bytes = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
    decode_cf32(&bytes)
}
