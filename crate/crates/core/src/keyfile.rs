//! Binary key framing: a little-endian `u64` bit count followed by the bits
//! packed MSB-first, the last byte zero-padded.

use std::fs;
use std::path::Path;

use crate::bits::BitString;
use crate::error::{Error, Result};

pub fn encode(bits: &BitString) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + bits.len().div_ceil(8));
    out.extend_from_slice(&(bits.len() as u64).to_le_bytes());
    out.extend_from_slice(&bits.to_bytes_msb());
    out
}

pub fn decode(bytes: &[u8]) -> Result<BitString> {
    let header: [u8; 8] = bytes
        .get(..8)
        .and_then(|h| h.try_into().ok())
        .ok_or_else(|| Error::KeyFormat("missing 8-byte length header".into()))?;
    let len = u64::from_le_bytes(header);
    let body = &bytes[8..];
    let expected = len.div_ceil(8);
    if body.len() as u64 != expected {
        return Err(Error::KeyFormat(format!(
            "header declares {len} bits ({expected} bytes) but {} bytes follow",
            body.len()
        )));
    }
    let len = len as usize;
    let padding = (!len.is_multiple_of(8)).then(|| body[body.len() - 1] & (0xff >> (len % 8)));
    if padding.is_some_and(|p| p != 0) {
        return Err(Error::KeyFormat("non-zero padding bits".into()));
    }
    Ok(BitString::from_bytes_msb(body, len))
}

pub fn write(path: &Path, bits: &BitString) -> Result<()> {
    fs::write(path, encode(bits))?;
    Ok(())
}

pub fn read(path: &Path) -> Result<BitString> {
    decode(&fs::read(path)?)
}
