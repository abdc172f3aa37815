//! Coarse-to-fine flow upsampling.
//!
//! The baseline doubles a flow field bilinearly. The guided step refines that
//! baseline with a small four-layer convolution stack that sees the upsampled
//! flow, both high-resolution frames and the three reliability measures, and
//! predicts a residual correction. Zero weights therefore reproduce the
//! bilinear baseline exactly.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{downsample_2x, FlowField, Grid};
use crate::metrics::Measures;

pub const LAYER_COUNT: usize = 4;

/// Extra input channels besides the flow and the two guide images.
const MEASURE_CHANNELS: usize = 3;

#[derive(Clone, Debug, PartialEq)]
pub struct ConvLayer {
    pub out_channels: usize,
    pub in_channels: usize,
    /// `out x in x 3 x 3`, row-major.
    pub kernel: Vec<f32>,
    pub bias: Vec<f32>,
    /// PReLU slopes, one per output channel. Absent on the final layer.
    pub prelu: Option<Vec<f32>>,
}

impl ConvLayer {
    pub fn zeros(in_channels: usize, out_channels: usize, prelu: bool) -> Self {
        ConvLayer {
            out_channels,
            in_channels,
            kernel: vec![0.0; out_channels * in_channels * 9],
            bias: vec![0.0; out_channels],
            prelu: prelu.then(|| vec![0.25; out_channels]),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct UpsamplerWeights {
    layers: Vec<ConvLayer>,
}

impl UpsamplerWeights {
    pub fn new(layers: Vec<ConvLayer>) -> Result<Self> {
        if layers.len() != LAYER_COUNT {
            return Err(Error::InvalidWeights {
                layer: layers.len(),
                reason: format!("expected {LAYER_COUNT} layers, found {}", layers.len()),
            });
        }
        for (i, l) in layers.iter().enumerate() {
            let bad = |reason: String| Err(Error::InvalidWeights { layer: i, reason });
            if l.out_channels == 0 || l.in_channels == 0 {
                return bad("zero channel count".into());
            }
            if l.kernel.len() != l.out_channels * l.in_channels * 9 {
                return bad(format!(
                    "kernel has {} values, expected {}x{}x3x3",
                    l.kernel.len(),
                    l.out_channels,
                    l.in_channels
                ));
            }
            if l.bias.len() != l.out_channels {
                return bad(format!("bias has {} values, expected {}", l.bias.len(), l.out_channels));
            }
            let last = i == LAYER_COUNT - 1;
            match (&l.prelu, last) {
                (Some(_), true) => return bad("final layer must not have a PReLU".into()),
                (None, false) => return bad("hidden layer is missing its PReLU slopes".into()),
                (Some(s), false) if s.len() != l.out_channels => {
                    return bad(format!("{} PReLU slopes for {} channels", s.len(), l.out_channels))
                }
                _ => {}
            }
            if i > 0 && l.in_channels != layers[i - 1].out_channels {
                return bad(format!(
                    "takes {} channels but layer {} produces {}",
                    l.in_channels,
                    i - 1,
                    layers[i - 1].out_channels
                ));
            }
            if last && l.out_channels != 2 {
                return bad(format!("final layer must produce 2 channels, not {}", l.out_channels));
            }
        }
        let first = layers[0].in_channels;
        if first < 2 + MEASURE_CHANNELS || !(first - 2 - MEASURE_CHANNELS).is_multiple_of(2) {
            return Err(Error::InvalidWeights {
                layer: 0,
                reason: format!("{first} input channels is not 2 + 2*image_channels + 3"),
            });
        }
        if layers
            .iter()
            .flat_map(|l| l.kernel.iter().chain(&l.bias).chain(l.prelu.iter().flatten()))
            .any(|v| !v.is_finite())
        {
            return Err(Error::InvalidWeights {
                layer: 0,
                reason: "non-finite weight".into(),
            });
        }
        Ok(UpsamplerWeights { layers })
    }

    /// All-zero weights: the guided step degenerates to bilinear upsampling.
    pub fn zeros(image_channels: usize, hidden: usize) -> Self {
        let input = 2 + 2 * image_channels + MEASURE_CHANNELS;
        Self::new(vec![
            ConvLayer::zeros(input, hidden, true),
            ConvLayer::zeros(hidden, hidden, true),
            ConvLayer::zeros(hidden, hidden, true),
            ConvLayer::zeros(hidden, 2, false),
        ])
        .expect("zero weights are well-formed")
    }

    pub fn layers(&self) -> &[ConvLayer] {
        &self.layers
    }

    pub fn image_channels(&self) -> usize {
        (self.layers[0].in_channels - 2 - MEASURE_CHANNELS) / 2
    }

    /// Runs the conv/PReLU stack on a feature grid.
    pub fn forward(&self, features: &Grid) -> Result<Grid> {
        let mut x = features.clone();
        for l in &self.layers {
            x = conv3x3(&x, &l.kernel, &l.bias)?;
            if let Some(s) = &l.prelu {
                x = prelu(&x, s)?;
            }
        }
        Ok(x)
    }
}

/// Stride-1 3x3 convolution with clamp-to-edge padding. The output has
/// `bias.len()` channels; `kernel` is `out x in x 3 x 3`.
pub fn conv3x3(input: &Grid, kernel: &[f32], bias: &[f32]) -> Result<Grid> {
    let (h, w, cin) = input.shape();
    let cout = bias.len();
    if cout == 0 || kernel.len() != cout * cin * 9 {
        return Err(Error::ChannelMismatch {
            context: "conv3x3",
            expected: cout * cin * 9,
            found: kernel.len(),
        });
    }
    // regroup to [ky][kx][out][in] so each tap reads one contiguous block
    let mut taps = vec![0.0f32; 9 * cout * cin];
    for o in 0..cout {
        for i in 0..cin {
            for k in 0..9 {
                taps[(k * cout + o) * cin + i] = kernel[(o * cin + i) * 9 + k];
            }
        }
    }
    let mut out = Grid::zeros(h, w, cout);
    out.par_rows_mut().enumerate().for_each(|(y, row)| {
        let ys = [y.saturating_sub(1), y, (y + 1).min(h - 1)];
        for x in 0..w {
            let xs = [x.saturating_sub(1), x, (x + 1).min(w - 1)];
            let acc = &mut row[x * cout..(x + 1) * cout];
            acc.copy_from_slice(bias);
            for (ky, &sy) in ys.iter().enumerate() {
                for (kx, &sx) in xs.iter().enumerate() {
                    let src = input.pixel(sx, sy);
                    let block = &taps[(ky * 3 + kx) * cout * cin..][..cout * cin];
                    for (a, wrow) in acc.iter_mut().zip(block.chunks_exact(cin)) {
                        *a += wrow.iter().zip(src).map(|(k, s)| k * s).sum::<f32>();
                    }
                }
            }
        }
    });
    Ok(out)
}

/// `x` if `x >= 0`, else `slope[c] * x`.
pub fn prelu(g: &Grid, slopes: &[f32]) -> Result<Grid> {
    let c = g.channels();
    if slopes.len() != c {
        return Err(Error::ChannelMismatch {
            context: "prelu",
            expected: c,
            found: slopes.len(),
        });
    }
    let mut out = g.clone();
    out.data_mut().par_chunks_mut(c).for_each(|px| {
        for (v, s) in px.iter_mut().zip(slopes) {
            if *v < 0.0 {
                *v *= s;
            }
        }
    });
    Ok(out)
}

/// Doubles width and height with bilinear interpolation. Output pixel `X`
/// samples the input at `(X + 0.5) / 2 - 0.5`, clamped to the grid.
pub fn bilinear_upsample_2x(g: &Grid) -> Grid {
    let (h, w, c) = g.shape();
    let (oh, ow) = (2 * h, 2 * w);
    let coord = |o: usize, len: usize| -> (usize, usize, f32) {
        let s = ((o as f32 + 0.5) * 0.5 - 0.5).clamp(0.0, (len - 1) as f32);
        let i0 = s.floor() as usize;
        (i0, (i0 + 1).min(len - 1), s - i0 as f32)
    };
    let xs: Vec<_> = (0..ow).map(|x| coord(x, w)).collect();
    let mut out = Grid::zeros(oh, ow, c);
    out.par_rows_mut().enumerate().for_each(|(oy, row)| {
        let (y0, y1, fy) = coord(oy, h);
        for (ox, &(x0, x1, fx)) in xs.iter().enumerate() {
            let (a, b, cc, d) = (g.pixel(x0, y0), g.pixel(x1, y0), g.pixel(x0, y1), g.pixel(x1, y1));
            for ch in 0..c {
                let top = a[ch] * (1.0 - fx) + b[ch] * fx;
                let bottom = cc[ch] * (1.0 - fx) + d[ch] * fx;
                row[ox * c + ch] = top * (1.0 - fy) + bottom * fy;
            }
        }
    });
    out
}

/// Bilinear 2x upsampling of a flow; displacements are doubled to stay in
/// pixels of the finer grid.
pub fn bilinear_upsample_flow(flow: &FlowField) -> FlowField {
    let mut g = bilinear_upsample_2x(flow.as_grid());
    g.data_mut().par_iter_mut().for_each(|v| *v *= 2.0);
    FlowField::new(g).expect("two channels preserved")
}

/// One guided 2x refinement of a bidirectional flow pair.
///
/// Both directions are upsampled bilinearly, the reliability measures are
/// recomputed at the fine resolution, and the network residual is added to
/// each direction with the guide images swapped for the backward flow.
pub fn guided_upsample_step(
    f01: &FlowField,
    f10: &FlowField,
    i0_hi: &Grid,
    i1_hi: &Grid,
    weights: &UpsamplerWeights,
) -> Result<(FlowField, FlowField)> {
    f01.ensure_same_shape(f10, "guided_upsample_step")?;
    i0_hi.ensure_same_shape(i1_hi, "guided_upsample_step")?;
    let (h, w) = (f01.height(), f01.width());
    if (i0_hi.height(), i0_hi.width()) != (2 * h, 2 * w) {
        return Err(Error::ShapeMismatch {
            context: "guided_upsample_step guide resolution",
            expected: (2 * h, 2 * w, i0_hi.channels()),
            found: i0_hi.shape(),
        });
    }
    if weights.image_channels() != i0_hi.channels() {
        return Err(Error::InvalidWeights {
            layer: 0,
            reason: format!(
                "weights expect {}-channel guides, got {}",
                weights.image_channels(),
                i0_hi.channels()
            ),
        });
    }
    let up01 = bilinear_upsample_flow(f01);
    let up10 = bilinear_upsample_flow(f10);
    let refine = |fwd: &FlowField, bwd: &FlowField, a: &Grid, b: &Grid| -> Result<FlowField> {
        let m = Measures::compute(a, b, fwd, bwd)?;
        let features = Grid::concat_channels(&[fwd.as_grid(), a, b, &m.photo, &m.flow, &m.varia])?;
        let residual = weights.forward(&features)?;
        let data = fwd.data().iter().zip(residual.data()).map(|(f, r)| f + r).collect();
        FlowField::new(Grid::new(fwd.height(), fwd.width(), 2, data)?)
    };
    let (r01, r10) = rayon::join(
        || refine(&up01, &up10, i0_hi, i1_hi),
        || refine(&up10, &up01, i1_hi, i0_hi),
    );
    Ok((r01?, r10?))
}

/// Guide frames from finest (level 0, the inputs) to coarsest.
pub fn guide_pyramid(i0: &Grid, i1: &Grid, levels: usize) -> Result<Vec<(Grid, Grid)>> {
    let mut out = vec![(i0.clone(), i1.clone())];
    for _ in 1..levels {
        let (a, b) = out.last().expect("non-empty");
        let next = (downsample_2x(a)?, downsample_2x(b)?);
        out.push(next);
    }
    Ok(out)
}

/// Applies [`guided_upsample_step`] `iterations` times, coarsest first.
///
/// `guides` is fine-to-coarse and must hold exactly one level per iteration:
/// the last entry guides the first step, the first entry the final step.
pub fn iterative_upsample(
    f01: &FlowField,
    f10: &FlowField,
    guides: &[(Grid, Grid)],
    iterations: usize,
    weights: &UpsamplerWeights,
) -> Result<(FlowField, FlowField)> {
    if !(1..=2).contains(&iterations) {
        return Err(Error::InvalidArgument(format!(
            "iterations must be 1 or 2, got {iterations}"
        )));
    }
    if guides.len() != iterations {
        return Err(Error::InvalidArgument(format!(
            "{} guide levels for {iterations} iterations",
            guides.len()
        )));
    }
    let mut pair = (f01.clone(), f10.clone());
    for (a, b) in guides.iter().rev() {
        pair = guided_upsample_step(&pair.0, &pair.1, a, b, weights)?;
    }
    Ok(pair)
}
