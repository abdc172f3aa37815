//! Reliability measures for splatting and merging.
//!
//! Three per-pixel measures are derived from a frame pair and its flows:
//! photometric consistency, forward-backward flow consistency, and local
//! flow variance. Each is mapped through `1 / (1 + alpha * psi)` and the
//! three terms are summed, once with the splat alphas (the soft z-buffer used
//! when splatting) and once with the merge alphas (the weight used when
//! blending the two warped frames).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{FlowField, Grid};
use crate::warp::backward_warp;

/// Alphas for the photo, flow and variance terms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Alphas {
    pub photo: f32,
    pub flow: f32,
    pub varia: f32,
}

impl Default for Alphas {
    fn default() -> Self {
        Alphas {
            photo: 1.0,
            flow: 1.0,
            varia: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricParams {
    pub splat: Alphas,
    pub merge: Alphas,
}

impl MetricParams {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.splat.photo,
            self.splat.flow,
            self.splat.varia,
            self.merge.photo,
            self.merge.flow,
            self.merge.varia,
        ];
        if all.iter().all(|a| a.is_finite()) {
            Ok(())
        } else {
            Err(Error::Params("all six alphas must be finite".into()))
        }
    }
}

/// Separable `(1, 2, 1) / 4` filter per axis, clamp-to-edge, per channel.
pub fn gaussian_blur3(g: &Grid) -> Grid {
    let (h, w, c) = g.shape();
    let mut horiz = Grid::zeros(h, w, c);
    horiz.par_rows_mut().enumerate().for_each(|(y, row)| {
        for x in 0..w {
            let l = g.pixel(x.saturating_sub(1), y);
            let m = g.pixel(x, y);
            let r = g.pixel((x + 1).min(w - 1), y);
            for ch in 0..c {
                row[x * c + ch] = 0.25 * l[ch] + 0.5 * m[ch] + 0.25 * r[ch];
            }
        }
    });
    let mut out = Grid::zeros(h, w, c);
    let stride = w * c;
    let src = horiz.data();
    out.par_rows_mut().enumerate().for_each(|(y, row)| {
        let up = &src[y.saturating_sub(1) * stride..][..stride];
        let mid = &src[y * stride..][..stride];
        let down = &src[(y + 1).min(h - 1) * stride..][..stride];
        for i in 0..stride {
            row[i] = 0.25 * up[i] + 0.5 * mid[i] + 0.25 * down[i];
        }
    });
    out
}

fn channel_norm(g: &Grid) -> Grid {
    let c = g.channels();
    let data = g
        .data()
        .par_chunks(c)
        .map(|px| px.iter().map(|v| v * v).sum::<f32>().sqrt())
        .collect();
    Grid::new(g.height(), g.width(), 1, data).expect("norm shape")
}

/// `|| I0 - warp(I1, F01) ||` per pixel.
pub fn psi_photo(i0: &Grid, i1: &Grid, f01: &FlowField) -> Result<Grid> {
    i0.ensure_same_shape(i1, "psi_photo")?;
    let (warped, _) = backward_warp(i1, f01)?;
    let diff = Grid::new(
        i0.height(),
        i0.width(),
        i0.channels(),
        i0.data().iter().zip(warped.data()).map(|(a, b)| a - b).collect(),
    )?;
    Ok(channel_norm(&diff))
}

/// `|| F01 + warp(F10, F01) ||` per pixel; zero for a perfect forward-backward cycle.
pub fn psi_flow(f01: &FlowField, f10: &FlowField) -> Result<Grid> {
    f01.ensure_same_shape(f10, "psi_flow")?;
    let (warped, _) = backward_warp(f10.as_grid(), f01)?;
    let sum = Grid::new(
        f01.height(),
        f01.width(),
        2,
        f01.data().iter().zip(warped.data()).map(|(a, b)| a + b).collect(),
    )?;
    Ok(channel_norm(&sum))
}

/// `|| sqrt(G(F^2) - G(F)^2) ||` per pixel, negative variances clamped to zero.
pub fn psi_varia(f01: &FlowField) -> Grid {
    let (h, w) = (f01.height(), f01.width());
    let mut moments = Vec::with_capacity(h * w * 4);
    for px in f01.data().chunks_exact(2) {
        moments.extend_from_slice(&[px[0], px[1], px[0] * px[0], px[1] * px[1]]);
    }
    let blurred = gaussian_blur3(&Grid::new(h, w, 4, moments).expect("moment shape"));
    let data = blurred
        .data()
        .par_chunks(4)
        .map(|m| {
            let var_u = (m[2] - m[0] * m[0]).max(0.0);
            let var_v = (m[3] - m[1] * m[1]).max(0.0);
            // || (sqrt(var_u), sqrt(var_v)) ||
            (var_u + var_v).sqrt()
        })
        .collect();
    Grid::new(h, w, 1, data).expect("varia shape")
}

/// `sum_k 1 / (1 + alpha_k * psi_k)` over the three measures.
pub fn combine(psi_p: &Grid, psi_f: &Grid, psi_v: &Grid, alphas: Alphas) -> Result<Grid> {
    psi_p.ensure_channels(1, "combine")?;
    psi_p.ensure_same_shape(psi_f, "combine")?;
    psi_p.ensure_same_shape(psi_v, "combine")?;
    let data = psi_p
        .data()
        .par_iter()
        .zip(psi_f.data().par_iter())
        .zip(psi_v.data().par_iter())
        .map(|((&p, &f), &v)| {
            1.0 / (1.0 + alphas.photo * p) + 1.0 / (1.0 + alphas.flow * f) + 1.0 / (1.0 + alphas.varia * v)
        })
        .collect();
    Grid::new(psi_p.height(), psi_p.width(), 1, data)
}

/// The three raw measures for one direction.
#[derive(Clone, Debug)]
pub struct Measures {
    pub photo: Grid,
    pub flow: Grid,
    pub varia: Grid,
}

impl Measures {
    /// Measures for the direction `src -> dst` described by `forward`, with
    /// `backward` the opposite flow.
    pub fn compute(src: &Grid, dst: &Grid, forward: &FlowField, backward: &FlowField) -> Result<Self> {
        src.ensure_same_hw(forward, "Measures")?;
        Ok(Measures {
            photo: psi_photo(src, dst, forward)?,
            flow: psi_flow(forward, backward)?,
            varia: psi_varia(forward),
        })
    }

    pub fn combine(&self, alphas: Alphas) -> Result<Grid> {
        combine(&self.photo, &self.flow, &self.varia, alphas)
    }
}

/// Splat and merge weights for one direction.
#[derive(Clone, Debug)]
pub struct DirectionMetrics {
    pub splat: Grid,
    pub merge: Grid,
}

impl DirectionMetrics {
    pub fn from_measures(m: &Measures, params: &MetricParams) -> Result<Self> {
        Ok(DirectionMetrics {
            splat: m.combine(params.splat)?,
            merge: m.combine(params.merge)?,
        })
    }
}
