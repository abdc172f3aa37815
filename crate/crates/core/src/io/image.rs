use std::fs;
use std::path::Path;

use image::{DynamicImage, GrayImage, ImageFormat, RgbImage};

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Reads a PNG (8-bit, mapped to `[0, 1]`) or PFM (raw floats) image.
/// Grayscale PNGs load as one channel, everything else as RGB.
pub fn read_image(path: impl AsRef<Path>) -> Result<Grid> {
    let path = path.as_ref();
    match extension(path).as_deref() {
        Some("pfm") => decode_pfm(&fs::read(path)?),
        Some("png") => {
            let img = image::load_from_memory_with_format(&fs::read(path)?, ImageFormat::Png)?;
            Ok(from_dynamic(img))
        }
        _ => Err(Error::UnsupportedFormat(path.to_path_buf())),
    }
}

/// Writes PNG (values clamped to `[0, 1]`, rounded half away from zero) or PFM.
pub fn write_image(g: &Grid, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    match extension(path).as_deref() {
        Some("pfm") => fs::write(path, encode_pfm(g)?)?,
        Some("png") => {
            let (h, w, c) = g.shape();
            let bytes: Vec<u8> = g.data().iter().map(|&v| quantize(v)).collect();
            let img = match c {
                1 => DynamicImage::ImageLuma8(GrayImage::from_raw(w as u32, h as u32, bytes).expect("buffer size")),
                3 => DynamicImage::ImageRgb8(RgbImage::from_raw(w as u32, h as u32, bytes).expect("buffer size")),
                _ => {
                    return Err(Error::ChannelMismatch {
                        context: "write_image png",
                        expected: 3,
                        found: c,
                    })
                }
            };
            img.save_with_format(path, ImageFormat::Png)?;
        }
        _ => return Err(Error::UnsupportedFormat(path.to_path_buf())),
    }
    Ok(())
}

fn extension(path: &Path) -> Option<String> {
    path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase)
}

#[inline]
fn quantize(v: f32) -> u8 {
    // f32::round is half away from zero; NaN saturates to 0
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

fn from_dynamic(img: DynamicImage) -> Grid {
    let (w, h) = (img.width() as usize, img.height() as usize);
    if img.color().has_color() {
        let raw = img.into_rgb8().into_raw();
        Grid::new(h, w, 3, raw.iter().map(|&b| b as f32 / 255.0).collect()).expect("rgb shape")
    } else {
        let raw = img.into_luma8().into_raw();
        Grid::new(h, w, 1, raw.iter().map(|&b| b as f32 / 255.0).collect()).expect("gray shape")
    }
}

/// PFM with a negative scale (little-endian), rows stored bottom to top.
pub fn encode_pfm(g: &Grid) -> Result<Vec<u8>> {
    let (h, w, c) = g.shape();
    let tag = match c {
        1 => "Pf",
        3 => "PF",
        _ => {
            return Err(Error::ChannelMismatch {
                context: "encode_pfm",
                expected: 3,
                found: c,
            })
        }
    };
    let mut out = format!("{tag}\n{w} {h}\n-1.0\n").into_bytes();
    out.reserve(g.data().len() * 4);
    for row in g.data().chunks_exact(w * c).rev() {
        for v in row {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_pfm(bytes: &[u8]) -> Result<Grid> {
    let mut pos = 0;
    let mut token = || -> Result<String> {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::format("pfm", "truncated header"));
        }
        let t = std::str::from_utf8(&bytes[start..pos]).map_err(|_| Error::format("pfm", "non-ascii header"))?;
        Ok(t.to_owned())
    };
    let channels = match token()?.as_str() {
        "PF" => 3,
        "Pf" => 1,
        other => return Err(Error::format("pfm", format!("unknown tag {other:?}"))),
    };
    let dim = |t: String| -> Result<usize> {
        t.parse::<usize>()
            .ok()
            .filter(|&d| d > 0)
            .ok_or_else(|| Error::format("pfm", format!("bad dimension {t:?}")))
    };
    let w = dim(token()?)?;
    let h = dim(token()?)?;
    let scale_tok = token()?;
    let scale: f32 = scale_tok
        .parse()
        .ok()
        .filter(|s: &f32| *s != 0.0 && s.is_finite())
        .ok_or_else(|| Error::format("pfm", format!("bad scale {scale_tok:?}")))?;
    // exactly one whitespace byte separates the header from the raster
    let start = pos + 1;
    let little = scale < 0.0;
    let count = (w as u64) * (h as u64) * channels as u64;
    let body = bytes.get(start..).unwrap_or(&[]);
    if (body.len() as u64) < count * 4 {
        return Err(Error::format(
            "pfm",
            format!("truncated raster: {} of {} bytes", body.len(), count * 4),
        ));
    }
    let mut data = Vec::with_capacity(count as usize);
    for row in body[..count as usize * 4].chunks_exact(w * channels * 4).rev() {
        data.extend(row.chunks_exact(4).map(|b| {
            let b: [u8; 4] = b.try_into().expect("4 bytes");
            if little {
                f32::from_le_bytes(b)
            } else {
                f32::from_be_bytes(b)
            }
        }));
    }
    Grid::new(h, w, channels, data)
}
