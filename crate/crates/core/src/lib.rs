//! Video frame interpolation from two frames and their bidirectional optical
//! flow, built on numerically stable softmax splatting.
//!
//! The pipeline splats each flow to the target time (resolving collisions
//! with a reliability metric as a soft z-buffer), backward-warps the input
//! frames with the splatted flows and blends the two results. There is no
//! learned synthesis network; flows are an input.

pub mod cli;
pub mod error;
pub mod exec;
pub mod grid;
pub mod io;
pub mod metrics;
pub mod scenes;
pub mod splat;
pub mod synth;
pub mod upsample;
pub mod warp;

pub use error::{Error, Result};
pub use exec::Exec;
pub use grid::{downsample_2x, downsample_flow_2x, psnr, FlowField, Grid, Mask};
pub use metrics::{Alphas, MetricParams};
pub use splat::{SoftmaxMode, SplatKernel, SplatResult, Splatter};
pub use synth::{synthesize, synthesize_multi, Interpolator, SynthesisConfig};
pub use upsample::UpsamplerWeights;
