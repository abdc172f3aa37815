//! Splatting-based frame synthesis.
//!
//! For each direction the inter-frame flow is scaled to time `t`, splatted
//! to `t` together with the merge metric (soft z-buffer = splat metric), and
//! the splatted flow is used to backward-warp the input frame. The two warped
//! frames are then blended with their merge metrics. Pixels that neither
//! direction reaches fall back to a zero-motion blend.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::grid::{FlowField, Grid, Mask};
use crate::metrics::{DirectionMetrics, Measures, MetricParams};
use crate::splat::{SoftmaxMode, SplatKernel, SplatResult, Splatter, DEFAULT_EPS_VALID};
use crate::warp::backward_warp;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum HolePolicy {
    /// `(1 - t) * I0[p] + t * I1[p]`.
    #[default]
    ZeroMotionBlend,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SynthesisConfig {
    pub kernel: SplatKernel,
    pub metric_params: MetricParams,
    pub eps_valid: f32,
    pub hole_policy: HolePolicy,
    pub exec: Exec,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        SynthesisConfig {
            kernel: SplatKernel::GAUSSIAN,
            metric_params: MetricParams::default(),
            eps_valid: DEFAULT_EPS_VALID,
            hole_policy: HolePolicy::default(),
            exec: Exec::default(),
        }
    }
}

impl SynthesisConfig {
    pub fn validate(&self) -> Result<()> {
        if self.eps_valid.is_nan() || self.eps_valid <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "eps_valid must be positive, got {}",
                self.eps_valid
            )));
        }
        if let SplatKernel::Gaussian { sigma } = self.kernel {
            SplatKernel::gaussian(sigma)?;
        }
        self.metric_params.validate()
    }

    pub fn splatter(&self) -> Splatter {
        Splatter {
            kernel: self.kernel,
            exec: self.exec,
            eps_valid: self.eps_valid,
        }
    }
}

fn check_time(t: f32) -> Result<()> {
    if (0.0..=1.0).contains(&t) {
        Ok(())
    } else {
        Err(Error::TimeOutOfRange(t))
    }
}

/// `t * flow` under the linear motion assumption.
pub fn time_scaled_flow(flow: &FlowField, t: f32) -> Result<FlowField> {
    check_time(t)?;
    Ok(flow.scaled(t))
}

/// A flow splatted to time `t`.
#[derive(Clone, Debug)]
pub struct Projection {
    /// Flow from `t` back to the source frame; zero in holes.
    pub flow: FlowField,
    /// Merge metric carried along to `t`; zero in holes.
    pub merge: Grid,
    pub valid: Mask,
}

/// Splats `F0t` to `t` with stable softmax splatting (`z = msplat`), carrying
/// `[-F0t, mmerge]` as payload.
pub fn project_flow(f0t: &FlowField, msplat: &Grid, mmerge: &Grid, splatter: &Splatter) -> Result<Projection> {
    msplat.ensure_channels(1, "project_flow")?;
    mmerge.ensure_channels(1, "project_flow")?;
    f0t.ensure_same_hw(msplat, "project_flow")?;
    f0t.ensure_same_hw(mmerge, "project_flow")?;
    let (h, w) = (f0t.height(), f0t.width());
    let mut payload = Vec::with_capacity(h * w * 3);
    for (f, &m) in f0t.data().chunks_exact(2).zip(mmerge.data()) {
        payload.extend_from_slice(&[-f[0], -f[1], m]);
    }
    let payload = Grid::new(h, w, 3, payload)?;
    let splat = splatter.softmax(&payload, f0t, msplat, SoftmaxMode::Stable)?;
    let norm = splat.normalized();
    let mut flow = Vec::with_capacity(h * w * 2);
    let mut merge = Vec::with_capacity(h * w);
    for px in norm.data().chunks_exact(3) {
        flow.extend_from_slice(&px[..2]);
        merge.push(px[2]);
    }
    Ok(Projection {
        flow: FlowField::new(Grid::new(h, w, 2, flow)?)?,
        merge: Grid::new(h, w, 1, merge)?,
        valid: splat.valid,
    })
}

/// Blends two warped frames by their merge metrics.
///
/// Where only one side is valid that side is taken; where neither is, the
/// output mask is 0 and the value is left at 0.
#[allow(clippy::too_many_arguments)]
pub fn merge_frames(
    i0t: &Grid,
    i1t: &Grid,
    m0t: &Grid,
    m1t: &Grid,
    v0: &Mask,
    v1: &Mask,
    t: f32,
    eps: f32,
) -> Result<(Grid, Mask)> {
    check_time(t)?;
    i0t.ensure_same_shape(i1t, "merge_frames")?;
    m0t.ensure_channels(1, "merge_frames")?;
    i0t.ensure_same_hw(m0t, "merge_frames")?;
    m0t.ensure_same_shape(m1t, "merge_frames")?;
    for v in [v0, v1] {
        if (v.height(), v.width()) != (i0t.height(), i0t.width()) {
            return Err(Error::ShapeMismatch {
                context: "merge_frames",
                expected: (i0t.height(), i0t.width(), 1),
                found: (v.height(), v.width(), 1),
            });
        }
    }
    let (h, w, c) = i0t.shape();
    let mut out = Grid::zeros(h, w, c);
    let mut valid = vec![false; h * w];
    out.data_mut()
        .par_chunks_mut(c)
        .zip(valid.par_iter_mut())
        .enumerate()
        .for_each(|(i, (px, ok))| {
            let a = &i0t.data()[i * c..(i + 1) * c];
            let b = &i1t.data()[i * c..(i + 1) * c];
            match (v0.data()[i], v1.data()[i]) {
                (true, true) => {
                    let w0 = (1.0 - t) * m0t.data()[i];
                    let w1 = t * m1t.data()[i];
                    let den = w0 + w1;
                    let (w0, w1) = if den < eps { (1.0 - t, t) } else { (w0 / den, w1 / den) };
                    for ch in 0..c {
                        px[ch] = w0 * a[ch] + w1 * b[ch];
                    }
                    *ok = true;
                }
                (true, false) => {
                    px.copy_from_slice(a);
                    *ok = true;
                }
                (false, true) => {
                    px.copy_from_slice(b);
                    *ok = true;
                }
                (false, false) => {}
            }
        });
    Ok((out, Mask::from_vec(h, w, valid)?))
}

/// One synthesized frame plus the mask of pixels reached by at least one
/// direction (the rest were hole-filled).
#[derive(Clone, Debug)]
pub struct Synthesis {
    pub image: Grid,
    pub valid: Mask,
}

/// A frame pair with its flows and precomputed metrics, ready to synthesize
/// any number of intermediate frames.
pub struct Interpolator<'a> {
    i0: &'a Grid,
    i1: &'a Grid,
    f01: &'a FlowField,
    f10: &'a FlowField,
    cfg: SynthesisConfig,
    metrics0: DirectionMetrics,
    metrics1: DirectionMetrics,
}

impl<'a> Interpolator<'a> {
    pub fn new(
        i0: &'a Grid,
        i1: &'a Grid,
        f01: &'a FlowField,
        f10: &'a FlowField,
        cfg: SynthesisConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        i0.ensure_same_shape(i1, "synthesize")?;
        i0.ensure_same_hw(f01, "synthesize")?;
        f01.ensure_same_shape(f10, "synthesize")?;
        let params = cfg.metric_params;
        let (m0, m1) = rayon::join(
            || Measures::compute(i0, i1, f01, f10).and_then(|m| DirectionMetrics::from_measures(&m, &params)),
            || Measures::compute(i1, i0, f10, f01).and_then(|m| DirectionMetrics::from_measures(&m, &params)),
        );
        Ok(Interpolator {
            i0,
            i1,
            f01,
            f10,
            cfg,
            metrics0: m0?,
            metrics1: m1?,
        })
    }

    pub fn config(&self) -> &SynthesisConfig {
        &self.cfg
    }

    /// Metrics of the `I0 -> I1` and `I1 -> I0` directions.
    pub fn metrics(&self) -> (&DirectionMetrics, &DirectionMetrics) {
        (&self.metrics0, &self.metrics1)
    }

    pub fn frame(&self, t: f32) -> Result<Grid> {
        Ok(self.frame_with_mask(t)?.image)
    }

    pub fn frame_with_mask(&self, t: f32) -> Result<Synthesis> {
        check_time(t)?;
        let splatter = self.cfg.splatter();
        let side = |img: &Grid, flow: &FlowField, m: &DirectionMetrics, s: f32| -> Result<(Grid, Projection)> {
            let f = time_scaled_flow(flow, s)?;
            let proj = project_flow(&f, &m.splat, &m.merge, &splatter)?;
            let (warped, _) = backward_warp(img, &proj.flow)?;
            Ok((warped, proj))
        };
        let (r0, r1) = rayon::join(
            || side(self.i0, self.f01, &self.metrics0, t),
            || side(self.i1, self.f10, &self.metrics1, 1.0 - t),
        );
        let (i0t, p0) = r0?;
        let (i1t, p1) = r1?;
        let (image, valid) = merge_frames(
            &i0t,
            &i1t,
            &p0.merge,
            &p1.merge,
            &p0.valid,
            &p1.valid,
            t,
            self.cfg.eps_valid,
        )?;
        Ok(Synthesis {
            image: self.fill_holes(image, &valid, t),
            valid,
        })
    }

    /// The same pipeline but splatting colors directly instead of splatting
    /// flows and backward warping. Kept for comparison; it blurs with wide
    /// kernels.
    pub fn frame_color_splat(&self, t: f32) -> Result<Synthesis> {
        check_time(t)?;
        let splatter = self.cfg.splatter();
        let side = |img: &Grid, flow: &FlowField, m: &DirectionMetrics, s: f32| -> Result<(Grid, Grid, Mask)> {
            let f = time_scaled_flow(flow, s)?;
            let payload = Grid::concat_channels(&[img, &m.merge])?;
            let r = splat_colors(&payload, &f, &m.splat, &splatter)?;
            let norm = r.normalized();
            let c = img.channels();
            let color = Grid::new(
                img.height(),
                img.width(),
                c,
                norm.data()
                    .chunks_exact(c + 1)
                    .flat_map(|px| px[..c].to_vec())
                    .collect(),
            )?;
            Ok((color, norm.channel(c), r.valid))
        };
        let (i0t, m0t, v0) = side(self.i0, self.f01, &self.metrics0, t)?;
        let (i1t, m1t, v1) = side(self.i1, self.f10, &self.metrics1, 1.0 - t)?;
        let (image, valid) = merge_frames(&i0t, &i1t, &m0t, &m1t, &v0, &v1, t, self.cfg.eps_valid)?;
        Ok(Synthesis {
            image: self.fill_holes(image, &valid, t),
            valid,
        })
    }

    fn fill_holes(&self, mut image: Grid, valid: &Mask, t: f32) -> Grid {
        match self.cfg.hole_policy {
            HolePolicy::ZeroMotionBlend => {
                let c = image.channels();
                let (a, b) = (self.i0.data(), self.i1.data());
                image
                    .data_mut()
                    .par_chunks_mut(c)
                    .zip(valid.data().par_iter())
                    .enumerate()
                    .filter(|(_, (_, &ok))| !ok)
                    .for_each(|(i, (px, _))| {
                        for ch in 0..c {
                            px[ch] = (1.0 - t) * a[i * c + ch] + t * b[i * c + ch];
                        }
                    });
            }
        }
        image
    }
}

/// Direct softmax splatting of `values` to `t` weighted by `msplat`.
pub fn splat_colors(values: &Grid, f0t: &FlowField, msplat: &Grid, splatter: &Splatter) -> Result<SplatResult> {
    splatter.softmax(values, f0t, msplat, SoftmaxMode::Stable)
}

/// Synthesizes the frame at time `t` between `i0` (t = 0) and `i1` (t = 1).
pub fn synthesize(
    i0: &Grid,
    i1: &Grid,
    f01: &FlowField,
    f10: &FlowField,
    t: f32,
    cfg: &SynthesisConfig,
) -> Result<Grid> {
    check_time(t)?;
    Interpolator::new(i0, i1, f01, f10, *cfg)?.frame(t)
}

/// Synthesizes several frames, computing the metrics only once.
pub fn synthesize_multi(
    i0: &Grid,
    i1: &Grid,
    f01: &FlowField,
    f10: &FlowField,
    times: &[f32],
    cfg: &SynthesisConfig,
) -> Result<Vec<Grid>> {
    for &t in times {
        check_time(t)?;
    }
    if times.is_empty() {
        return Ok(Vec::new());
    }
    let interp = Interpolator::new(i0, i1, f01, f10, *cfg)?;
    times.iter().map(|&t| interp.frame(t)).collect()
}
