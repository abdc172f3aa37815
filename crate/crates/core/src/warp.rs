//! Backward warping: every destination pixel `p` gathers a bilinear sample
//! of the source at `p + flow[p]`. Pixel centers sit on integer coordinates.

use crate::error::Result;
use crate::grid::{FlowField, Grid, Mask};

/// Bilinear gather with clamp-to-edge sampling.
///
/// The mask is 0 wherever the sample position fell outside
/// `[0, w-1] x [0, h-1]` (or was not finite) and had to be clamped.
pub fn backward_warp(src: &Grid, flow: &FlowField) -> Result<(Grid, Mask)> {
    src.ensure_same_hw(flow, "backward_warp")?;
    let (h, w, c) = src.shape();
    let mut out = Grid::zeros(h, w, c);
    let mut inside = vec![true; h * w];
    {
        use rayon::prelude::*;
        out.par_rows_mut()
            .zip(inside.par_chunks_mut(w))
            .enumerate()
            .for_each(|(y, (row, mask_row))| {
                for x in 0..w {
                    let (u, v) = flow.vector(x, y);
                    let (sx, okx) = clamp_coord(x as f32 + u, w);
                    let (sy, oky) = clamp_coord(y as f32 + v, h);
                    mask_row[x] = okx && oky;
                    sample_into(src, sx, sy, &mut row[x * c..(x + 1) * c]);
                }
            });
    }
    let mask = Mask::from_vec(h, w, inside)?;
    Ok((out, mask))
}

#[inline]
fn clamp_coord(s: f32, len: usize) -> (f32, bool) {
    let hi = (len - 1) as f32;
    if !s.is_finite() {
        return (if s == f32::INFINITY { hi } else { 0.0 }, false);
    }
    if s < 0.0 {
        (0.0, false)
    } else if s > hi {
        (hi, false)
    } else {
        (s, true)
    }
}

/// Bilinear sample at an in-range position.
#[inline]
fn sample_into(src: &Grid, sx: f32, sy: f32, out: &mut [f32]) {
    let (w, h) = (src.width(), src.height());
    let x0 = (sx.floor() as usize).min(w - 1);
    let y0 = (sy.floor() as usize).min(h - 1);
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let fx = sx - x0 as f32;
    let fy = sy - y0 as f32;
    let (p00, p10, p01, p11) = (
        src.pixel(x0, y0),
        src.pixel(x1, y0),
        src.pixel(x0, y1),
        src.pixel(x1, y1),
    );
    for (ch, o) in out.iter_mut().enumerate() {
        let top = p00[ch] * (1.0 - fx) + p10[ch] * fx;
        let bottom = p01[ch] * (1.0 - fx) + p11[ch] * fx;
        *o = top * (1.0 - fy) + bottom * fy;
    }
}

/// Plain double-precision per-pixel gather with the same contract as
/// [`backward_warp`]. Slow; used to check the optimized path.
pub fn reference_backward_warp(src: &Grid, flow: &FlowField) -> Result<Grid> {
    src.ensure_same_hw(flow, "reference_backward_warp")?;
    let (h, w, c) = src.shape();
    let mut out = Grid::zeros(h, w, c);
    for y in 0..h {
        for x in 0..w {
            let (u, v) = flow.vector(x, y);
            let sx = clamp_f64(x as f64 + u as f64, w);
            let sy = clamp_f64(y as f64 + v as f64, h);
            let x0 = sx.floor() as usize;
            let y0 = sy.floor() as usize;
            let x1 = (x0 + 1).min(w - 1);
            let y1 = (y0 + 1).min(h - 1);
            let fx = sx - x0 as f64;
            let fy = sy - y0 as f64;
            for ch in 0..c {
                let s = |xx: usize, yy: usize| src.get(xx, yy, ch) as f64;
                let val = s(x0, y0) * (1.0 - fx) * (1.0 - fy)
                    + s(x1, y0) * fx * (1.0 - fy)
                    + s(x0, y1) * (1.0 - fx) * fy
                    + s(x1, y1) * fx * fy;
                out.set(x, y, ch, val as f32);
            }
        }
    }
    Ok(out)
}

fn clamp_f64(s: f64, len: usize) -> f64 {
    let hi = (len - 1) as f64;
    if s.is_nan() {
        0.0
    } else {
        s.clamp(0.0, hi)
    }
}
