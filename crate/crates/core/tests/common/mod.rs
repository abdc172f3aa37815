//! Independent oracles and random generators shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use splatkit::{FlowField, Grid, SplatKernel};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_grid(rng: &mut impl Rng, h: usize, w: usize, c: usize, lo: f32, hi: f32) -> Grid {
    let data = (0..h * w * c).map(|_| rng.random_range(lo..hi)).collect();
    Grid::new(h, w, c, data).unwrap()
}

pub fn random_flow(rng: &mut impl Rng, h: usize, w: usize, mag: f32) -> FlowField {
    FlowField::new(random_grid(rng, h, w, 2, -mag, mag)).unwrap()
}

/// Smooth random flow: a random affine field plus a low-frequency wave.
pub fn smooth_flow(rng: &mut impl Rng, h: usize, w: usize, mag: f32) -> FlowField {
    let c: [f32; 8] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
    let (sx, sy) = (1.0 / w as f32, 1.0 / h as f32);
    FlowField::from_fn(h, w, |x, y| {
        let (fx, fy) = (x as f32 * sx, y as f32 * sy);
        (
            mag * (c[0] + 0.5 * c[1] * fx + 0.5 * c[2] * fy + 0.3 * (3.0 * fy + c[3]).sin()),
            mag * (c[4] + 0.5 * c[5] * fx + 0.5 * c[6] * fy + 0.3 * (3.0 * fx + c[7]).sin()),
        )
    })
}

/// Kernel weight evaluated in double precision from the kernel definitions:
/// a bilinear tent, or an unnormalized Gaussian truncated to the 4x4 window
/// `(-2, 2]` per axis.
pub fn kernel64(dx: f64, dy: f64, kernel: SplatKernel) -> f64 {
    match kernel {
        SplatKernel::Bilinear => (1.0 - dx.abs()).max(0.0) * (1.0 - dy.abs()).max(0.0),
        SplatKernel::Gaussian { sigma } => {
            let inside = |d: f64| d > -2.0 && d <= 2.0;
            if inside(dx) && inside(dy) {
                let s = sigma as f64;
                (-(dx * dx + dy * dy) / (2.0 * s * s)).exp()
            } else {
                0.0
            }
        }
    }
}

/// Brute-force splat evaluated as a gather: every destination visits every
/// source. Returns `(value, weight, zmax)` per destination, where the
/// contribution weight is `k * exp(z)` (or `k` when `z` is `None`) and `zmax`
/// is the largest `z` among sources with `k > 0`.
pub struct Gathered {
    pub value: Vec<f64>,
    pub weight: Vec<f64>,
    pub zmax: Vec<f64>,
}

pub fn gather_oracle(values: &Grid, flow: &FlowField, z: Option<&Grid>, kernel: SplatKernel) -> Gathered {
    let (h, w, c) = values.shape();
    let n = h * w;
    let mut out = Gathered {
        value: vec![0.0; n * c],
        weight: vec![0.0; n],
        zmax: vec![f64::NEG_INFINITY; n],
    };
    // the exponent shift keeps exp finite; it cancels in value / weight
    let shift = z.map_or(0.0, |z| {
        z.data().iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v as f64))
    });
    for py in 0..h {
        for px in 0..w {
            let p = py * w + px;
            for qy in 0..h {
                for qx in 0..w {
                    let (u, v) = flow.vector(qx, qy);
                    let tx = qx as f32 + u;
                    let ty = qy as f32 + v;
                    // offsets are formed in f32 like the target positions themselves
                    let k = kernel64((px as f32 - tx) as f64, (py as f32 - ty) as f64, kernel);
                    if k <= 0.0 {
                        continue;
                    }
                    let (e, zq) = match z {
                        Some(z) => {
                            let zq = z.get(qx, qy, 0) as f64;
                            ((zq - shift).exp(), zq)
                        }
                        None => (1.0, 0.0),
                    };
                    out.weight[p] += k * e;
                    out.zmax[p] = out.zmax[p].max(zq);
                    for ch in 0..c {
                        out.value[p * c + ch] += k * e * values.get(qx, qy, ch) as f64;
                    }
                }
            }
        }
    }
    out
}

/// L1 distance averaged over a centered crop with the given margin.
pub fn mean_abs_error(a: &Grid, b: &Grid, margin: usize) -> f64 {
    let (h, w, c) = a.shape();
    let mut total = 0.0;
    let mut count = 0usize;
    for y in margin..h - margin {
        for x in margin..w - margin {
            for ch in 0..c {
                total += (a.get(x, y, ch) as f64 - b.get(x, y, ch) as f64).abs();
                count += 1;
            }
        }
    }
    total / count as f64
}

/// PSNR (peak 1) over a centered crop.
pub fn crop_psnr(a: &Grid, b: &Grid, margin: usize) -> f64 {
    let (h, w, c) = a.shape();
    let mut se = 0.0;
    let mut count = 0usize;
    for y in margin..h - margin {
        for x in margin..w - margin {
            for ch in 0..c {
                let d = a.get(x, y, ch) as f64 - b.get(x, y, ch) as f64;
                se += d * d;
                count += 1;
            }
        }
    }
    let mse = se / count as f64;
    if mse == 0.0 {
        f64::INFINITY
    } else {
        -10.0 * mse.log10()
    }
}
