//! Dense raster containers shared by every stage of the pipeline.
//!
//! A [`Grid`] stores `height x width x channels` 32-bit floats in row-major,
//! channel-interleaved order. [`FlowField`] and [`Mask`] are thin wrappers
//! that pin the channel count (2 for displacements, 1 for validity).

use std::ops::Deref;

use rayon::prelude::*;

use crate::error::{Error, Result, Shape};

#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f32>,
}

impl Grid {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        check_dims(height, width, channels)?;
        if data.len() != height * width * channels {
            return Err(Error::DataLength {
                len: data.len(),
                height,
                width,
                channels,
            });
        }
        Ok(Grid {
            height,
            width,
            channels,
            data,
        })
    }

    /// # Panics
    /// If any dimension is zero.
    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        Self::filled(height, width, channels, 0.0)
    }

    /// # Panics
    /// If any dimension is zero.
    pub fn filled(height: usize, width: usize, channels: usize, value: f32) -> Self {
        check_dims(height, width, channels).expect("grid dimensions must be nonzero");
        Grid {
            height,
            width,
            channels,
            data: vec![value; height * width * channels],
        }
    }

    /// Builds a grid from `f(x, y, channel)`.
    ///
    /// # Panics
    /// If any dimension is zero.
    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f32,
    ) -> Self {
        let mut g = Self::zeros(height, width, channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    g.data[(y * width + x) * channels + c] = f(x, y, c);
                }
            }
        }
        g
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn shape(&self) -> Shape {
        (self.height, self.width, self.channels)
    }

    #[inline]
    pub fn pixel_count(&self) -> usize {
        self.height * self.width
    }

    #[inline]
    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> &[f32] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }

    #[inline]
    pub fn pixel_mut(&mut self, x: usize, y: usize) -> &mut [f32] {
        let i = (y * self.width + x) * self.channels;
        &mut self.data[i..i + self.channels]
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f32 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, value: f32) {
        self.data[(y * self.width + x) * self.channels + c] = value;
    }

    /// Extracts one channel as a single-channel grid.
    pub fn channel(&self, c: usize) -> Grid {
        assert!(c < self.channels, "channel {c} out of range");
        Grid {
            height: self.height,
            width: self.width,
            channels: 1,
            data: self.data.iter().skip(c).step_by(self.channels).copied().collect(),
        }
    }

    /// Concatenates grids of equal height/width along the channel axis.
    pub fn concat_channels(parts: &[&Grid]) -> Result<Grid> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidArgument("nothing to concatenate".into()))?;
        for p in parts {
            first.ensure_same_hw(p, "concat_channels")?;
        }
        let channels: usize = parts.iter().map(|p| p.channels).sum();
        let mut data = Vec::with_capacity(first.pixel_count() * channels);
        for i in 0..first.pixel_count() {
            for p in parts {
                data.extend_from_slice(&p.data[i * p.channels..(i + 1) * p.channels]);
            }
        }
        Grid::new(first.height, first.width, channels, data)
    }

    pub fn map(&self, f: impl Fn(f32) -> f32 + Sync) -> Grid {
        Grid {
            height: self.height,
            width: self.width,
            channels: self.channels,
            data: self.data.par_iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scaled(&self, factor: f32) -> Grid {
        self.map(|v| v * factor)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub(crate) fn ensure_same_hw(&self, other: &Grid, context: &'static str) -> Result<()> {
        if self.height != other.height || self.width != other.width {
            return Err(Error::ShapeMismatch {
                context,
                expected: (self.height, self.width, other.channels),
                found: other.shape(),
            });
        }
        Ok(())
    }

    pub(crate) fn ensure_same_shape(&self, other: &Grid, context: &'static str) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch {
                context,
                expected: self.shape(),
                found: other.shape(),
            });
        }
        Ok(())
    }

    pub(crate) fn ensure_channels(&self, channels: usize, context: &'static str) -> Result<()> {
        if self.channels != channels {
            return Err(Error::ChannelMismatch {
                context,
                expected: channels,
                found: self.channels,
            });
        }
        Ok(())
    }

    /// Row-major rows, each `width * channels` long.
    pub(crate) fn par_rows_mut(&mut self) -> rayon::slice::ChunksMut<'_, f32> {
        let stride = self.width * self.channels;
        self.data.par_chunks_mut(stride)
    }
}

fn check_dims(height: usize, width: usize, channels: usize) -> Result<()> {
    if height == 0 || width == 0 || channels == 0 {
        return Err(Error::InvalidDimensions {
            height,
            width,
            channels,
        });
    }
    Ok(())
}

/// Per-pixel displacement `(u, v)` in pixels of the field's own resolution.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowField(Grid);

impl FlowField {
    pub fn new(grid: Grid) -> Result<Self> {
        grid.ensure_channels(2, "FlowField")?;
        Ok(FlowField(grid))
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        FlowField(Grid::zeros(height, width, 2))
    }

    pub fn constant(height: usize, width: usize, u: f32, v: f32) -> Self {
        Self::from_fn(height, width, |_, _| (u, v))
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> (f32, f32)) -> Self {
        let mut g = Grid::zeros(height, width, 2);
        for y in 0..height {
            for x in 0..width {
                let (u, v) = f(x, y);
                let px = g.pixel_mut(x, y);
                px[0] = u;
                px[1] = v;
            }
        }
        FlowField(g)
    }

    #[inline]
    pub fn vector(&self, x: usize, y: usize) -> (f32, f32) {
        let p = self.0.pixel(x, y);
        (p[0], p[1])
    }

    pub fn scaled(&self, factor: f32) -> FlowField {
        FlowField(self.0.scaled(factor))
    }

    pub fn as_grid(&self) -> &Grid {
        &self.0
    }

    pub fn into_grid(self) -> Grid {
        self.0
    }
}

impl Deref for FlowField {
    type Target = Grid;

    fn deref(&self) -> &Grid {
        &self.0
    }
}

impl TryFrom<Grid> for FlowField {
    type Error = Error;

    fn try_from(grid: Grid) -> Result<Self> {
        FlowField::new(grid)
    }
}

/// Per-pixel validity flags.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mask {
    height: usize,
    width: usize,
    data: Vec<bool>,
}

impl Mask {
    pub fn filled(height: usize, width: usize, value: bool) -> Self {
        Mask {
            height,
            width,
            data: vec![value; height * width],
        }
    }

    pub fn from_vec(height: usize, width: usize, data: Vec<bool>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::DataLength {
                len: data.len(),
                height,
                width,
                channels: 1,
            });
        }
        Ok(Mask { height, width, data })
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn count_valid(&self) -> usize {
        self.data.iter().filter(|&&v| v).count()
    }

    pub fn all(&self) -> bool {
        self.data.iter().all(|&v| v)
    }

    /// 0.0 / 1.0 single-channel grid.
    pub fn to_grid(&self) -> Grid {
        let data = self.data.iter().map(|&v| if v { 1.0 } else { 0.0 }).collect();
        Grid::new(self.height, self.width, 1, data).expect("mask dimensions are valid")
    }
}

/// Halves both dimensions (rounding up) by averaging 2x2 blocks.
///
/// Blocks that hang over an odd edge average only the pixels that exist.
pub fn downsample_2x(g: &Grid) -> Result<Grid> {
    let (h, w, c) = g.shape();
    if h < 2 || w < 2 {
        return Err(Error::DimensionTooSmall {
            context: "downsample_2x",
            height: h,
            width: w,
        });
    }
    let (oh, ow) = (h.div_ceil(2), w.div_ceil(2));
    let mut out = Grid::zeros(oh, ow, c);
    out.par_rows_mut().enumerate().for_each(|(oy, row)| {
        let ys = 2 * oy..(2 * oy + 2).min(h);
        for ox in 0..ow {
            let xs = 2 * ox..(2 * ox + 2).min(w);
            let n = (ys.len() * xs.len()) as f64;
            for ch in 0..c {
                let mut acc = 0.0f64;
                for y in ys.clone() {
                    for x in xs.clone() {
                        acc += g.get(x, y, ch) as f64;
                    }
                }
                row[ox * c + ch] = (acc / n) as f32;
            }
        }
    });
    Ok(out)
}

/// [`downsample_2x`] for displacement fields: values are halved so they stay
/// in pixels of the coarser grid.
pub fn downsample_flow_2x(flow: &FlowField) -> Result<FlowField> {
    let mut g = downsample_2x(flow.as_grid())?;
    g.data_mut().iter_mut().for_each(|v| *v *= 0.5);
    Ok(FlowField(g))
}

/// Peak signal-to-noise ratio in dB; `f64::INFINITY` for identical inputs.
pub fn psnr(a: &Grid, b: &Grid, peak: f64) -> Result<f64> {
    a.ensure_same_shape(b, "psnr")?;
    if peak.is_nan() || peak <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "psnr peak must be positive, got {peak}"
        )));
    }
    let sse: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum();
    let mse = sse / a.data().len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / mse).log10())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_construction() {
        assert!(Grid::new(0, 2, 1, vec![]).is_err());
        assert!(matches!(
            Grid::new(2, 2, 1, vec![0.0; 3]),
            Err(Error::DataLength { .. })
        ));
        assert!(FlowField::new(Grid::zeros(2, 2, 3)).is_err());
    }

    #[test]
    fn downsample_block_mean() {
        let g = Grid::new(2, 2, 1, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let d = downsample_2x(&g).unwrap();
        assert_eq!(d.shape(), (1, 1, 1));
        assert_eq!(d.data(), &[2.5]);
    }

    #[test]
    fn downsample_ramp() {
        let g = Grid::from_fn(4, 4, 1, |x, _, _| x as f32);
        let d = downsample_2x(&g).unwrap();
        assert_eq!(d.data(), &[0.5, 2.5, 0.5, 2.5]);
    }

    #[test]
    fn downsample_odd_edge_averages_available_pixels() {
        let g = Grid::from_fn(3, 3, 1, |x, y, _| (x + 3 * y) as f32);
        let d = downsample_2x(&g).unwrap();
        assert_eq!(d.shape(), (2, 2, 1));
        // [0 1 2; 3 4 5; 6 7 8]
        assert_eq!(d.data(), &[2.0, 3.5, 6.5, 8.0]);
    }

    #[test]
    fn downsample_flow_halves_values() {
        let f = FlowField::constant(8, 8, 4.0, 6.0);
        let d = downsample_flow_2x(&f).unwrap();
        assert_eq!((d.height(), d.width()), (4, 4));
        assert!(d.data().chunks(2).all(|p| p == [2.0, 3.0]));
    }

    #[test]
    fn downsample_too_small() {
        let g = Grid::zeros(1, 5, 1);
        assert!(matches!(downsample_2x(&g), Err(Error::DimensionTooSmall { .. })));
    }

    #[test]
    fn psnr_cases() {
        let a = Grid::filled(4, 4, 3, 10.0);
        assert_eq!(psnr(&a, &a, 255.0).unwrap(), f64::INFINITY);
        let b = Grid::filled(4, 4, 3, 11.0);
        assert!((psnr(&a, &b, 255.0).unwrap() - 48.1308).abs() < 1e-3);
        assert!(psnr(&a, &Grid::zeros(4, 4, 1), 1.0).is_err());
        assert!(psnr(&a, &b, 0.0).is_err());
    }

    #[test]
    fn concat_and_channel() {
        let a = Grid::filled(2, 3, 1, 1.0);
        let b = Grid::filled(2, 3, 2, 2.0);
        let c = Grid::concat_channels(&[&a, &b]).unwrap();
        assert_eq!(c.channels(), 3);
        assert_eq!(c.pixel(1, 1), &[1.0, 2.0, 2.0]);
        assert_eq!(c.channel(0), a);
    }
}
