//! Synthetic scenes with closed-form frames at any time and exact flows.

use std::fmt;
use std::str::FromStr;

use crate::error::Error;
use crate::grid::{FlowField, Grid};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SceneKind {
    /// A bright soft-edged square on a flat background; the whole frame
    /// translates, so both flows are constant.
    Translate,
    /// A smooth pattern scaled about the image center, `F01(p) = s (p - c)`.
    Zoom,
    /// A square sliding over a static textured background; the strip it
    /// uncovers is visible in only one frame.
    Occlude,
}

impl SceneKind {
    pub const ALL: [SceneKind; 3] = [SceneKind::Translate, SceneKind::Zoom, SceneKind::Occlude];

    pub fn name(self) -> &'static str {
        match self {
            SceneKind::Translate => "translate",
            SceneKind::Zoom => "zoom",
            SceneKind::Occlude => "occlude",
        }
    }
}

impl fmt::Display for SceneKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SceneKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        SceneKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown scene {s:?}")))
    }
}

const BACKGROUND: [f32; 3] = [0.15, 0.2, 0.35];
const SQUARE: [f32; 3] = [0.9, 0.75, 0.3];

/// Logistic scale of square edges, in pixels.
pub const EDGE_SOFTNESS: f32 = 0.5;

/// Axis-aligned rectangle `[x0, x1] x [y0, y1]` in pixel coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect {
    pub x0: f32,
    pub y0: f32,
    pub x1: f32,
    pub y1: f32,
}

impl Rect {
    fn shifted(self, dx: f32, dy: f32) -> Rect {
        Rect {
            x0: self.x0 + dx,
            y0: self.y0 + dy,
            x1: self.x1 + dx,
            y1: self.y1 + dy,
        }
    }

    /// Fraction of the unit pixel centered on `(x, y)` that lies inside.
    pub fn coverage(&self, x: f32, y: f32) -> f32 {
        let span = |lo: f32, hi: f32, c: f32| ((c + 0.5).min(hi) - (c - 0.5).max(lo)).max(0.0);
        span(self.x0, self.x1, x) * span(self.y0, self.y1, y)
    }

    /// Smooth indicator: a logistic edge of width `EDGE_SOFTNESS` on each side.
    pub fn soft_coverage(&self, x: f32, y: f32) -> f32 {
        let step = |d: f32| 1.0 / (1.0 + (-d / EDGE_SOFTNESS).exp());
        step(x - self.x0) * step(self.x1 - x) * step(y - self.y0) * step(self.y1 - y)
    }
}

#[derive(Clone, Debug)]
pub struct Scene {
    pub kind: SceneKind,
    pub height: usize,
    pub width: usize,
    /// Square position in frame 0 (translate, occlude).
    pub square: Rect,
    /// Displacement between frame 0 and frame 1 (translate, occlude).
    pub shift: (f32, f32),
    /// Zoom factor `s` (zoom).
    pub zoom: f32,
}

impl Scene {
    /// Default scene geometry for the given size.
    pub fn new(kind: SceneKind, height: usize, width: usize) -> Scene {
        let (h, w) = (height as f32, width as f32);
        let side = (w.min(h) * 0.3).round();
        let square = Rect {
            x0: (w * 0.3).round(),
            y0: ((h - side) * 0.5).round(),
            x1: (w * 0.3).round() + side,
            y1: ((h - side) * 0.5).round() + side,
        };
        Scene {
            kind,
            height,
            width,
            square,
            shift: (8.0, 0.0),
            zoom: 0.1,
        }
    }

    pub fn with_shift(mut self, dx: f32, dy: f32) -> Scene {
        self.shift = (dx, dy);
        self
    }

    pub fn with_square(mut self, square: Rect) -> Scene {
        self.square = square;
        self
    }

    pub fn with_zoom(mut self, s: f32) -> Scene {
        self.zoom = s;
        self
    }

    pub fn center(&self) -> (f32, f32) {
        ((self.width as f32 - 1.0) * 0.5, (self.height as f32 - 1.0) * 0.5)
    }

    /// The square at time `t` (translate, occlude).
    pub fn square_at(&self, t: f32) -> Rect {
        self.square.shifted(t * self.shift.0, t * self.shift.1)
    }

    /// Ground-truth frame at time `t`; `t = 0` and `t = 1` are the inputs.
    pub fn frame(&self, t: f32) -> Grid {
        match self.kind {
            SceneKind::Translate => {
                let sq = self.square_at(t);
                Grid::from_fn(self.height, self.width, 3, |x, y, c| {
                    let a = sq.soft_coverage(x as f32, y as f32);
                    BACKGROUND[c] + (SQUARE[c] - BACKGROUND[c]) * a
                })
            }
            SceneKind::Zoom => {
                let (cx, cy) = self.center();
                let k = 1.0 / (1.0 + t * self.zoom);
                Grid::from_fn(self.height, self.width, 3, |x, y, c| {
                    texture(cx + (x as f32 - cx) * k, cy + (y as f32 - cy) * k, c)
                })
            }
            SceneKind::Occlude => {
                let sq = self.square_at(t);
                Grid::from_fn(self.height, self.width, 3, |x, y, c| {
                    let a = sq.coverage(x as f32, y as f32);
                    let bg = texture(x as f32, y as f32, c);
                    bg + (SQUARE[c] - bg) * a
                })
            }
        }
    }

    pub fn flow01(&self) -> FlowField {
        self.flow(false)
    }

    pub fn flow10(&self) -> FlowField {
        self.flow(true)
    }

    fn flow(&self, backward: bool) -> FlowField {
        let (h, w) = (self.height, self.width);
        let (dx, dy) = if backward {
            (-self.shift.0, -self.shift.1)
        } else {
            self.shift
        };
        match self.kind {
            SceneKind::Translate => FlowField::constant(h, w, dx, dy),
            SceneKind::Zoom => {
                let (cx, cy) = self.center();
                // frame 1 is frame 0 scaled by (1 + s); the inverse map scales by 1 / (1 + s)
                let s = if backward {
                    1.0 / (1.0 + self.zoom) - 1.0
                } else {
                    self.zoom
                };
                FlowField::from_fn(h, w, |x, y| (s * (x as f32 - cx), s * (y as f32 - cy)))
            }
            SceneKind::Occlude => {
                let sq = self.square_at(if backward { 1.0 } else { 0.0 });
                FlowField::from_fn(h, w, |x, y| {
                    if sq.coverage(x as f32, y as f32) >= 0.5 {
                        (dx, dy)
                    } else {
                        (0.0, 0.0)
                    }
                })
            }
        }
    }
}

/// Smooth band-limited color pattern defined on the whole plane.
fn texture(x: f32, y: f32, c: usize) -> f32 {
    let phase = c as f32 * 1.7;
    0.5 + 0.2 * (0.11 * x + 0.07 * y + phase).sin() + 0.15 * (0.05 * x - 0.13 * y + 2.0 * phase).cos()
}
