use std::f32::consts::TAU;

use rayon::prelude::*;

use crate::grid::{FlowField, Grid};

/// Color-codes a flow field: hue follows the direction, saturation the
/// magnitude relative to `max_mag` (clamped to 1). Zero motion is white.
/// With `max_mag = None` the largest magnitude in the field is used.
pub fn flow_to_color(flow: &FlowField, max_mag: Option<f32>) -> Grid {
    let max_mag = max_mag.unwrap_or_else(|| {
        flow.data()
            .chunks_exact(2)
            .map(|p| p[0].hypot(p[1]))
            .filter(|m| m.is_finite())
            .fold(0.0, f32::max)
    });
    let scale = if max_mag > 0.0 && max_mag.is_finite() {
        1.0 / max_mag
    } else {
        0.0
    };
    let data = flow
        .data()
        .par_chunks_exact(2)
        .flat_map_iter(|p| {
            let (u, v) = (p[0], p[1]);
            let sat = (u.hypot(v) * scale).clamp(0.0, 1.0);
            let sat = if sat.is_nan() { 0.0 } else { sat };
            let hue = (v.atan2(u) / TAU).rem_euclid(1.0);
            hsv_to_rgb(if hue.is_nan() { 0.0 } else { hue }, sat, 1.0)
        })
        .collect();
    Grid::new(flow.height(), flow.width(), 3, data).expect("rgb shape")
}

fn hsv_to_rgb(h: f32, s: f32, v: f32) -> [f32; 3] {
    let f = |n: f32| {
        let k = (n + h * 6.0) % 6.0;
        v - v * s * k.min(4.0 - k).clamp(0.0, 1.0)
    };
    [f(5.0), f(3.0), f(1.0)]
}
