use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::upsample::{ConvLayer, UpsamplerWeights};

pub const WEIGHTS_MAGIC: &[u8; 4] = b"SPKW";
const VERSION: u32 = 1;
const MAX_LAYERS: u32 = 64;

// Layout, all little-endian:
//   magic "SPKW", u32 version, u32 layer count,
//   per layer: u32 out_channels, u32 in_channels, u32 has_prelu,
//   then per layer: kernel (out*in*9 f32), bias (out f32), slopes (out f32 if has_prelu).

pub fn encode_weights(weights: &UpsamplerWeights) -> Vec<u8> {
    let layers = weights.layers();
    let mut out = Vec::new();
    out.extend_from_slice(WEIGHTS_MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(layers.len() as u32).to_le_bytes());
    for l in layers {
        for v in [l.out_channels as u32, l.in_channels as u32, l.prelu.is_some() as u32] {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    for l in layers {
        for v in l.kernel.iter().chain(&l.bias).chain(l.prelu.iter().flatten()) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::format("weights", format!("truncated at byte {} (need {n} more)", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn floats(&mut self, n: usize) -> Result<Vec<f32>> {
        let len = n
            .checked_mul(4)
            .ok_or_else(|| Error::format("weights", "size overflow"))?;
        Ok(self
            .take(len)?
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")))
            .collect())
    }
}

pub fn decode_weights(bytes: &[u8]) -> Result<UpsamplerWeights> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != WEIGHTS_MAGIC {
        return Err(Error::format("weights", "bad magic"));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::format("weights", format!("unsupported version {version}")));
    }
    let count = r.u32()?;
    if count > MAX_LAYERS {
        return Err(Error::format("weights", format!("implausible layer count {count}")));
    }
    let mut shapes = Vec::with_capacity(count as usize);
    for i in 0..count as usize {
        let (out_ch, in_ch, has_prelu) = (r.u32()? as usize, r.u32()? as usize, r.u32()?);
        if has_prelu > 1 {
            return Err(Error::InvalidWeights {
                layer: i,
                reason: format!("PReLU flag {has_prelu}"),
            });
        }
        shapes.push((out_ch, in_ch, has_prelu == 1));
    }
    let mut layers = Vec::with_capacity(shapes.len());
    for (out_channels, in_channels, has_prelu) in shapes {
        let kernel_len = out_channels
            .checked_mul(in_channels)
            .and_then(|n| n.checked_mul(9))
            .ok_or_else(|| Error::format("weights", "size overflow"))?;
        layers.push(ConvLayer {
            out_channels,
            in_channels,
            kernel: r.floats(kernel_len)?,
            bias: r.floats(out_channels)?,
            prelu: if has_prelu { Some(r.floats(out_channels)?) } else { None },
        });
    }
    if r.pos != bytes.len() {
        return Err(Error::format(
            "weights",
            format!("{} trailing bytes", bytes.len() - r.pos),
        ));
    }
    UpsamplerWeights::new(layers)
}

pub fn load_upsampler_weights(path: impl AsRef<Path>) -> Result<UpsamplerWeights> {
    decode_weights(&fs::read(path)?)
}

pub fn save_upsampler_weights(weights: &UpsamplerWeights, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_weights(weights))?;
    Ok(())
}
