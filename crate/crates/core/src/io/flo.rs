use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{FlowField, Grid};

/// The float `202021.25`, stored as the first four bytes ("PIEH").
pub const FLO_MAGIC: f32 = 202021.25;

const HEADER_LEN: usize = 12;

/// Little-endian `.flo`: magic, width, height, then interleaved `(u, v)` rows.
pub fn encode_flo(flow: &FlowField) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + flow.data().len() * 4);
    out.extend_from_slice(&FLO_MAGIC.to_le_bytes());
    out.extend_from_slice(&(flow.width() as i32).to_le_bytes());
    out.extend_from_slice(&(flow.height() as i32).to_le_bytes());
    for v in flow.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_flo(bytes: &[u8]) -> Result<FlowField> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::format(
            "flo",
            format!("{} bytes is shorter than the header", bytes.len()),
        ));
    }
    let word = |i: usize| <[u8; 4]>::try_from(&bytes[i * 4..i * 4 + 4]).expect("4 bytes");
    let magic = f32::from_le_bytes(word(0));
    if magic != FLO_MAGIC {
        return Err(Error::format("flo", format!("bad magic {magic}")));
    }
    let width = i32::from_le_bytes(word(1));
    let height = i32::from_le_bytes(word(2));
    if width <= 0 || height <= 0 {
        return Err(Error::format("flo", format!("nonpositive dimensions {width}x{height}")));
    }
    let (w, h) = (width as usize, height as usize);
    let expected = (w as u128 * h as u128 * 8).min(u64::MAX as u128) as u64;
    let payload = &bytes[HEADER_LEN..];
    if (payload.len() as u64) < expected {
        return Err(Error::format(
            "flo",
            format!("truncated payload: {} of {expected} bytes", payload.len()),
        ));
    }
    let data = payload[..expected as usize]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    FlowField::new(Grid::new(h, w, 2, data)?)
}

pub fn read_flo(path: impl AsRef<Path>) -> Result<FlowField> {
    decode_flo(&fs::read(path)?)
}

pub fn write_flo(flow: &FlowField, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_flo(flow))?;
    Ok(())
}
