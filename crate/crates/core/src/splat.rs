//! Forward warping (splatting).
//!
//! Every source pixel `q` is pushed to the continuous position `q + flow[q]`
//! and deposited onto the integer pixels of the kernel footprint around it.
//! Collisions are resolved by summation, by maximum, or by softmax over a
//! per-pixel importance map `z`. The stable softmax variant first splats the
//! maximum of `z` to every destination and subtracts it inside the
//! exponential, so the weights never overflow regardless of the range of `z`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::exec::{Accum, AtomicBuf, CellBuf, Exec};
use crate::grid::{FlowField, Grid, Mask};

/// Denominator threshold below which a destination counts as a hole.
pub const DEFAULT_EPS_VALID: f32 = 1e-7;

/// Value written by [`splat_max`] where no source lands.
pub const MAX_SENTINEL: f32 = f32::MIN;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SplatKernel {
    /// `max(0, 1-|ux|) * max(0, 1-|uy|)` on the 2x2 pixels around the target.
    Bilinear,
    /// Unnormalized `exp(-|u|^2 / 2 sigma^2)` on the 4x4 pixels from
    /// `floor(target) - 1` to `floor(target) + 2` in each axis.
    Gaussian { sigma: f32 },
}

impl SplatKernel {
    pub const GAUSSIAN: SplatKernel = SplatKernel::Gaussian { sigma: 1.0 };

    pub fn gaussian(sigma: f32) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "gaussian sigma must be positive, got {sigma}"
            )));
        }
        Ok(SplatKernel::Gaussian { sigma })
    }
}

impl Default for SplatKernel {
    fn default() -> Self {
        SplatKernel::GAUSSIAN
    }
}

/// Kernel weight for a destination offset `u = p - (q + flow[q])`.
///
/// Both kernels are separable, `k(u) = k1(ux) * k1(uy)`.
#[inline]
pub fn kernel_weight(u: (f32, f32), kernel: SplatKernel) -> f32 {
    axis_weight(u.0, kernel) * axis_weight(u.1, kernel)
}

#[inline]
fn axis_weight(d: f32, kernel: SplatKernel) -> f32 {
    match kernel {
        SplatKernel::Bilinear => (1.0 - d.abs()).max(0.0),
        SplatKernel::Gaussian { sigma } => {
            if d > -2.0 && d <= 2.0 {
                (-d * d / (2.0 * sigma * sigma)).exp()
            } else {
                0.0
            }
        }
    }
}

/// Calls `f(pixel_index, weight)` for every in-bounds footprint pixel of a
/// target with a strictly positive weight.
#[inline]
fn for_each_tap(tx: f32, ty: f32, kernel: SplatKernel, width: usize, height: usize, mut f: impl FnMut(usize, f32)) {
    if !(tx.is_finite() && ty.is_finite()) {
        return;
    }
    let (lo, hi) = match kernel {
        SplatKernel::Bilinear => (0i64, 1i64),
        SplatKernel::Gaussian { .. } => (-1, 2),
    };
    let x0 = tx.floor() as i64;
    let y0 = ty.floor() as i64;
    let (w, h) = (width as i64, height as i64);
    let (xa, xb) = ((x0 + lo).max(0), (x0 + hi).min(w - 1));
    let (ya, yb) = ((y0 + lo).max(0), (y0 + hi).min(h - 1));
    if xa > xb || ya > yb {
        return;
    }
    // per-axis weights, at most four per axis
    let mut wx = [0.0f32; 4];
    for px in xa..=xb {
        wx[(px - xa) as usize] = axis_weight(px as f32 - tx, kernel);
    }
    for py in ya..=yb {
        let wy = axis_weight(py as f32 - ty, kernel);
        let row = py as usize * width;
        for px in xa..=xb {
            let k = wy * wx[(px - xa) as usize];
            if k > 0.0 {
                f(row + px as usize, k);
            }
        }
    }
}

/// Calls `f(pixel_index)` for exactly the pixels [`for_each_tap`] visits,
/// skipping the weight evaluation where positivity is implied by the window.
#[inline]
fn for_each_covered(tx: f32, ty: f32, kernel: SplatKernel, width: usize, height: usize, mut f: impl FnMut(usize)) {
    match kernel {
        // inside the window each axis weight is at least exp(-2 / sigma^2) and
        // their product at least exp(-4 / sigma^2), far above underflow here
        SplatKernel::Gaussian { sigma } if sigma >= 0.25 => {
            if !(tx.is_finite() && ty.is_finite()) {
                return;
            }
            let x0 = tx.floor() as i64;
            let y0 = ty.floor() as i64;
            let (w, h) = (width as i64, height as i64);
            for py in (y0 - 1).max(0)..=(y0 + 2).min(h - 1) {
                let dy = py as f32 - ty;
                if !(dy > -2.0 && dy <= 2.0) {
                    continue;
                }
                for px in (x0 - 1).max(0)..=(x0 + 2).min(w - 1) {
                    let dx = px as f32 - tx;
                    if dx > -2.0 && dx <= 2.0 {
                        f(py as usize * width + px as usize);
                    }
                }
            }
        }
        _ => for_each_tap(tx, ty, kernel, width, height, |p, _| f(p)),
    }
}

#[inline]
fn target(flow: &FlowField, x: usize, y: usize) -> (f32, f32) {
    let (u, v) = flow.vector(x, y);
    (x as f32 + u, y as f32 + v)
}

/// A scatter pass visited once per source pixel.
trait Pass: Sync {
    fn visit<A: Accum>(&self, x: usize, y: usize, acc: &A);
}

fn run<P: Pass>(pass: &P, exec: Exec, height: usize, width: usize, len: usize, init: f32) -> Vec<f32> {
    match exec {
        // a single worker gains nothing from atomics
        _ if exec == Exec::Sequential || rayon::current_num_threads() == 1 => {
            let acc = CellBuf::new(len, init);
            for y in 0..height {
                for x in 0..width {
                    pass.visit(x, y, &acc);
                }
            }
            acc.into_vec()
        }
        _ => {
            let acc = AtomicBuf::new(len, init);
            (0..height).into_par_iter().for_each(|y| {
                for x in 0..width {
                    pass.visit(x, y, &acc);
                }
            });
            acc.into_vec()
        }
    }
}

struct MaxPass<'a> {
    z: &'a Grid,
    flow: &'a FlowField,
    kernel: SplatKernel,
}

impl Pass for MaxPass<'_> {
    #[inline]
    fn visit<A: Accum>(&self, x: usize, y: usize, acc: &A) {
        let (tx, ty) = target(self.flow, x, y);
        let zq = self.z.get(x, y, 0);
        for_each_covered(tx, ty, self.kernel, self.z.width(), self.z.height(), |p| acc.max(p, zq));
    }
}

enum Weighting<'a> {
    Unit,
    Naive(&'a Grid),
    Stable { z: &'a Grid, zmax: &'a [f32] },
}

/// Accumulates `value` (all channels) and the weight into an interleaved
/// buffer with stride `channels + 1`, the weight last.
struct SumPass<'a> {
    values: &'a Grid,
    flow: &'a FlowField,
    kernel: SplatKernel,
    weighting: Weighting<'a>,
}

impl Pass for SumPass<'_> {
    #[inline]
    fn visit<A: Accum>(&self, x: usize, y: usize, acc: &A) {
        let (tx, ty) = target(self.flow, x, y);
        let v = self.values.pixel(x, y);
        let c = v.len();
        let stride = c + 1;
        let (w, h) = (self.values.width(), self.values.height());
        match self.weighting {
            Weighting::Unit => for_each_tap(tx, ty, self.kernel, w, h, |p, k| deposit(acc, p * stride, v, k)),
            Weighting::Naive(z) => {
                let e = z.get(x, y, 0).exp();
                for_each_tap(tx, ty, self.kernel, w, h, |p, k| deposit(acc, p * stride, v, k * e))
            }
            Weighting::Stable { z, zmax } => {
                let zq = z.get(x, y, 0);
                for_each_tap(tx, ty, self.kernel, w, h, |p, k| {
                    let d = zq - zmax[p];
                    // the source holding the maximum contributes exp(0) = 1
                    let e = if d == 0.0 { 1.0 } else { d.exp() };
                    deposit(acc, p * stride, v, k * e)
                })
            }
        }
    }
}

#[inline]
fn deposit<A: Accum>(acc: &A, base: usize, v: &[f32], w: f32) {
    for (i, &vi) in v.iter().enumerate() {
        acc.add(base + i, w * vi);
    }
    acc.add(base + v.len(), w);
}

/// Numerator, denominator and hole mask of a splat.
#[derive(Clone, Debug)]
pub struct SplatResult {
    pub value: Grid,
    pub weight: Grid,
    pub valid: Mask,
}

impl SplatResult {
    fn from_interleaved(buf: Vec<f32>, height: usize, width: usize, channels: usize, eps: f32) -> Self {
        let stride = channels + 1;
        let n = height * width;
        let mut value = Vec::with_capacity(n * channels);
        let mut weight = Vec::with_capacity(n);
        for px in buf.chunks_exact(stride) {
            value.extend_from_slice(&px[..channels]);
            weight.push(px[channels]);
        }
        let valid = weight.iter().map(|&w| w > eps).collect();
        SplatResult {
            value: Grid::new(height, width, channels, value).expect("splat value shape"),
            weight: Grid::new(height, width, 1, weight).expect("splat weight shape"),
            valid: Mask::from_vec(height, width, valid).expect("splat mask shape"),
        }
    }

    /// `value / weight` where valid, zero in holes.
    pub fn normalized(&self) -> Grid {
        let c = self.value.channels();
        let mut out = self.value.clone();
        out.data_mut()
            .par_chunks_mut(c)
            .zip(self.weight.data().par_iter())
            .zip(self.valid.data().par_iter())
            .for_each(|((px, &w), &ok)| {
                for v in px.iter_mut() {
                    *v = if ok { *v / w } else { 0.0 };
                }
            });
        out
    }

    /// Recomputes the hole mask for a different threshold.
    pub fn revalidate(&mut self, eps: f32) {
        let valid = self.weight.data().iter().map(|&w| w > eps).collect();
        self.valid = Mask::from_vec(self.weight.height(), self.weight.width(), valid).expect("splat mask shape");
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SoftmaxMode {
    /// `exp(z[q])` as is. Overflows f32 once `z` exceeds about 88.
    Naive,
    /// `exp(z[q] - zmax[p])` with `zmax` from a max-splat pre-pass.
    Stable,
}

/// Splatting configuration shared by all scatter operations.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Splatter {
    pub kernel: SplatKernel,
    pub exec: Exec,
    pub eps_valid: f32,
}

impl Default for Splatter {
    fn default() -> Self {
        Splatter {
            kernel: SplatKernel::default(),
            exec: Exec::default(),
            eps_valid: DEFAULT_EPS_VALID,
        }
    }
}

impl Splatter {
    pub fn new(kernel: SplatKernel) -> Self {
        Splatter {
            kernel,
            ..Default::default()
        }
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    pub fn sum(&self, values: &Grid, flow: &FlowField) -> Result<SplatResult> {
        values.ensure_same_hw(flow, "splat_sum")?;
        Ok(self.accumulate(values, flow, Weighting::Unit))
    }

    pub fn max(&self, z: &Grid, flow: &FlowField) -> Result<Grid> {
        z.ensure_channels(1, "splat_max")?;
        z.ensure_same_hw(flow, "splat_max")?;
        let (h, w) = (z.height(), z.width());
        let pass = MaxPass {
            z,
            flow,
            kernel: self.kernel,
        };
        let data = run(&pass, self.exec, h, w, h * w, MAX_SENTINEL);
        Grid::new(h, w, 1, data)
    }

    pub fn softmax(&self, values: &Grid, flow: &FlowField, z: &Grid, mode: SoftmaxMode) -> Result<SplatResult> {
        values.ensure_same_hw(flow, "splat_softmax")?;
        z.ensure_channels(1, "splat_softmax")?;
        values.ensure_same_hw(z, "splat_softmax")?;
        match mode {
            SoftmaxMode::Naive => Ok(self.accumulate(values, flow, Weighting::Naive(z))),
            SoftmaxMode::Stable => {
                let zmax = self.max(z, flow)?;
                Ok(self.accumulate(values, flow, Weighting::Stable { z, zmax: zmax.data() }))
            }
        }
    }

    fn accumulate(&self, values: &Grid, flow: &FlowField, weighting: Weighting<'_>) -> SplatResult {
        let (h, w, c) = values.shape();
        let pass = SumPass {
            values,
            flow,
            kernel: self.kernel,
            weighting,
        };
        let buf = run(&pass, self.exec, h, w, h * w * (c + 1), 0.0);
        SplatResult::from_interleaved(buf, h, w, c, self.eps_valid)
    }
}

/// Summation splatting, sequential.
pub fn splat_sum(values: &Grid, flow: &FlowField, kernel: SplatKernel) -> Result<SplatResult> {
    Splatter::new(kernel).with_exec(Exec::Sequential).sum(values, flow)
}

/// Per-destination maximum of `z` over all sources whose footprint covers it,
/// [`MAX_SENTINEL`] where nothing lands. Sequential.
pub fn splat_max(z: &Grid, flow: &FlowField, kernel: SplatKernel) -> Result<Grid> {
    Splatter::new(kernel).with_exec(Exec::Sequential).max(z, flow)
}

/// Softmax splatting weighted by `exp(z)`, sequential.
pub fn splat_softmax(
    values: &Grid,
    flow: &FlowField,
    z: &Grid,
    kernel: SplatKernel,
    mode: SoftmaxMode,
) -> Result<SplatResult> {
    Splatter::new(kernel)
        .with_exec(Exec::Sequential)
        .softmax(values, flow, z, mode)
}
