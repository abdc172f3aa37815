//! C ABI for splatkit.
//!
//! Images and flows cross the boundary as opaque [`SplatkitGrid`] handles
//! holding row-major `height x width x channels` f32 data. Every entry point
//! returns a [`SplatkitStatus`]; on failure a description is available from
//! [`splatkit_last_error_message`] on the same thread. Panics never unwind
//! into the caller.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use splatkit::io::{read_flo, read_image, write_flo, write_image};
use splatkit::metrics::{Alphas, MetricParams};
use splatkit::{Error, Exec, FlowField, Grid, SplatKernel, SynthesisConfig};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SplatkitStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ShapeMismatch = 3,
    Io = 4,
    Format = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SplatkitKernel {
    Bilinear = 0,
    Gaussian = 1,
}

/// Synthesis settings. Obtain defaults from [`splatkit_config_default`].
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplatkitConfig {
    /// A [`SplatkitKernel`] value; anything else is rejected.
    pub kernel: u32,
    /// Gaussian standard deviation in pixels; ignored for bilinear.
    pub sigma: f32,
    /// Splat alphas for the photo, flow and variance terms.
    pub splat_alphas: [f32; 3],
    /// Merge alphas for the photo, flow and variance terms.
    pub merge_alphas: [f32; 3],
    /// Splat weights at or below this are holes.
    pub eps_valid: f32,
    /// Run scatter passes sequentially for reproducible output.
    pub deterministic: bool,
}

/// Opaque image or flow handle.
pub struct SplatkitGrid(Grid);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(SplatkitStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::ShapeMismatch { .. }
            | Error::InvalidDimensions { .. }
            | Error::DataLength { .. }
            | Error::DimensionTooSmall { .. }
            | Error::ChannelMismatch { .. } => SplatkitStatus::ShapeMismatch,
            Error::Io(_) => SplatkitStatus::Io,
            Error::Format { .. } | Error::UnsupportedFormat(_) | Error::Image(_) => SplatkitStatus::Format,
            _ => SplatkitStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SplatkitStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
            SplatkitStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            SplatkitStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(SplatkitStatus::NullPointer, format!("{what} is null"))
}

unsafe fn grid_ref<'a>(g: *const SplatkitGrid, what: &str) -> Result<&'a Grid, Failure> {
    // SAFETY: the caller passes a live handle from this library or null.
    unsafe { g.as_ref() }.map(|g| &g.0).ok_or_else(|| null(what))
}

unsafe fn flow_of(g: *const SplatkitGrid, what: &str) -> Result<FlowField, Failure> {
    Ok(FlowField::try_from(unsafe { grid_ref(g, what)? }.clone())?)
}

unsafe fn path_of(p: *const c_char) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return Err(null("path"));
    }
    // SAFETY: the caller passes a nul-terminated string.
    let s = unsafe { CStr::from_ptr(p) }
        .to_str()
        .map_err(|_| Failure(SplatkitStatus::InvalidArgument, "path is not UTF-8".into()))?;
    Ok(PathBuf::from(s))
}

unsafe fn emit(out: *mut *mut SplatkitGrid, g: Grid) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output handle"));
    }
    // SAFETY: checked non-null; the caller provides writable storage.
    unsafe { *out = Box::into_raw(Box::new(SplatkitGrid(g))) };
    Ok(())
}

impl SplatkitConfig {
    fn to_core(self) -> Result<SynthesisConfig, Failure> {
        let kernel = match self.kernel {
            k if k == SplatkitKernel::Bilinear as u32 => SplatKernel::Bilinear,
            k if k == SplatkitKernel::Gaussian as u32 => SplatKernel::gaussian(self.sigma)?,
            k => return Err(Failure(SplatkitStatus::InvalidArgument, format!("unknown kernel {k}"))),
        };
        let alphas = |a: [f32; 3]| Alphas {
            photo: a[0],
            flow: a[1],
            varia: a[2],
        };
        let cfg = SynthesisConfig {
            kernel,
            metric_params: MetricParams {
                splat: alphas(self.splat_alphas),
                merge: alphas(self.merge_alphas),
            },
            eps_valid: self.eps_valid,
            exec: if self.deterministic {
                Exec::Sequential
            } else {
                Exec::Parallel
            },
            ..Default::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Default settings: Gaussian kernel with sigma 1, all alphas 1.
#[no_mangle]
pub extern "C" fn splatkit_config_default() -> SplatkitConfig {
    let d = SynthesisConfig::default();
    let a = |x: Alphas| [x.photo, x.flow, x.varia];
    SplatkitConfig {
        kernel: SplatkitKernel::Gaussian as u32,
        sigma: 1.0,
        splat_alphas: a(d.metric_params.splat),
        merge_alphas: a(d.metric_params.merge),
        eps_valid: d.eps_valid,
        deterministic: false,
    }
}

/// Message for the last failed call on this thread, or null after a success.
/// The pointer stays valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn splatkit_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn splatkit_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Creates a grid, copying `height * width * channels` floats from `data`,
/// or zero-filled when `data` is null.
///
/// # Safety
/// `data` must be null or point to that many readable floats; `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn splatkit_grid_new(
    height: usize,
    width: usize,
    channels: usize,
    data: *const f32,
    out: *mut *mut SplatkitGrid,
) -> SplatkitStatus {
    guard(|| {
        let len = height
            .checked_mul(width)
            .and_then(|n| n.checked_mul(channels))
            .ok_or_else(|| Failure(SplatkitStatus::InvalidArgument, "grid size overflows".into()))?;
        let values = if data.is_null() {
            vec![0.0; len]
        } else {
            // SAFETY: the caller guarantees `len` readable floats.
            unsafe { std::slice::from_raw_parts(data, len) }.to_vec()
        };
        unsafe { emit(out, Grid::new(height, width, channels, values)?) }
    })
}

/// Releases a grid. Null is ignored.
///
/// # Safety
/// `grid` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn splatkit_grid_free(grid: *mut SplatkitGrid) {
    if !grid.is_null() {
        // SAFETY: ownership returns from the caller.
        drop(unsafe { Box::from_raw(grid) });
    }
}

/// Writes the grid dimensions to any non-null output pointer.
///
/// # Safety
/// `grid` must be a live handle; non-null outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn splatkit_grid_shape(
    grid: *const SplatkitGrid,
    height: *mut usize,
    width: *mut usize,
    channels: *mut usize,
) -> SplatkitStatus {
    guard(|| {
        let g = unsafe { grid_ref(grid, "grid")? };
        for (p, v) in [(height, g.height()), (width, g.width()), (channels, g.channels())] {
            if !p.is_null() {
                // SAFETY: checked non-null, writable per contract.
                unsafe { *p = v };
            }
        }
        Ok(())
    })
}

/// Borrowed pointer to the grid's row-major data, valid until the grid is
/// freed. Null for a null handle.
///
/// # Safety
/// `grid` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn splatkit_grid_data(grid: *const SplatkitGrid) -> *const f32 {
    // SAFETY: per contract.
    unsafe { grid.as_ref() }.map_or(ptr::null(), |g| g.0.data().as_ptr())
}

/// Copies the grid's data into `dst`, which must hold exactly `len` floats.
///
/// # Safety
/// `grid` must be a live handle and `dst` must have room for `len` floats.
#[no_mangle]
pub unsafe extern "C" fn splatkit_grid_copy(grid: *const SplatkitGrid, dst: *mut f32, len: usize) -> SplatkitStatus {
    guard(|| {
        let g = unsafe { grid_ref(grid, "grid")? };
        if dst.is_null() {
            return Err(null("destination"));
        }
        if len != g.data().len() {
            return Err(Failure(
                SplatkitStatus::ShapeMismatch,
                format!("destination holds {len} floats, grid has {}", g.data().len()),
            ));
        }
        // SAFETY: sizes checked, regions belong to different allocations.
        unsafe { ptr::copy_nonoverlapping(g.data().as_ptr(), dst, len) };
        Ok(())
    })
}

/// Reads a PNG (values scaled to [0, 1]) or PFM image.
///
/// # Safety
/// `path` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn splatkit_read_image(path: *const c_char, out: *mut *mut SplatkitGrid) -> SplatkitStatus {
    guard(|| unsafe { emit(out, read_image(path_of(path)?)?) })
}

/// Writes a PNG or PFM image chosen by the file extension.
///
/// # Safety
/// `grid` must be a live handle and `path` a nul-terminated string.
#[no_mangle]
pub unsafe extern "C" fn splatkit_write_image(grid: *const SplatkitGrid, path: *const c_char) -> SplatkitStatus {
    guard(|| {
        Ok(write_image(unsafe { grid_ref(grid, "grid")? }, unsafe {
            path_of(path)?
        })?)
    })
}

/// Reads a Middlebury `.flo` file into a 2-channel grid.
///
/// # Safety
/// `path` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn splatkit_read_flo(path: *const c_char, out: *mut *mut SplatkitGrid) -> SplatkitStatus {
    guard(|| unsafe { emit(out, read_flo(path_of(path)?)?.into_grid()) })
}

/// Writes a 2-channel grid as a Middlebury `.flo` file.
///
/// # Safety
/// `flow` must be a live handle and `path` a nul-terminated string.
#[no_mangle]
pub unsafe extern "C" fn splatkit_write_flo(flow: *const SplatkitGrid, path: *const c_char) -> SplatkitStatus {
    guard(|| {
        let f = unsafe { flow_of(flow, "flow")? };
        Ok(write_flo(&f, unsafe { path_of(path)? })?)
    })
}

/// Synthesizes the frame at time `t` in [0, 1]. A null `config` means defaults.
///
/// # Safety
/// All handles must be live, `config` null or readable, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn splatkit_synthesize(
    i0: *const SplatkitGrid,
    i1: *const SplatkitGrid,
    f01: *const SplatkitGrid,
    f10: *const SplatkitGrid,
    t: f32,
    config: *const SplatkitConfig,
    out: *mut *mut SplatkitGrid,
) -> SplatkitStatus {
    unsafe { splatkit_synthesize_multi(i0, i1, f01, f10, &t, 1, config, out) }
}

/// Synthesizes `count` frames, computing the reliability metrics once.
/// `outs` receives `count` new handles; on failure none are written.
///
/// # Safety
/// All handles must be live, `times` must hold `count` floats, `config` must
/// be null or readable and `outs` must have room for `count` handles.
#[no_mangle]
pub unsafe extern "C" fn splatkit_synthesize_multi(
    i0: *const SplatkitGrid,
    i1: *const SplatkitGrid,
    f01: *const SplatkitGrid,
    f10: *const SplatkitGrid,
    times: *const f32,
    count: usize,
    config: *const SplatkitConfig,
    outs: *mut *mut SplatkitGrid,
) -> SplatkitStatus {
    guard(|| {
        let (a, b) = unsafe { (grid_ref(i0, "i0")?, grid_ref(i1, "i1")?) };
        let (fwd, bwd) = unsafe { (flow_of(f01, "f01")?, flow_of(f10, "f10")?) };
        if count == 0 {
            return Ok(());
        }
        if times.is_null() {
            return Err(null("times"));
        }
        if outs.is_null() {
            return Err(null("output handles"));
        }
        // SAFETY: the caller guarantees `count` readable floats.
        let times = unsafe { std::slice::from_raw_parts(times, count) };
        let cfg = match unsafe { config.as_ref() } {
            Some(c) => c.to_core()?,
            None => splatkit_config_default().to_core()?,
        };
        let frames = splatkit::synthesize_multi(a, b, &fwd, &bwd, times, &cfg)?;
        for (i, g) in frames.into_iter().enumerate() {
            // SAFETY: `outs` has room for `count` handles.
            unsafe { emit(outs.add(i), g)? };
        }
        Ok(())
    })
}

/// PSNR in dB with the given peak value; infinity for identical grids.
///
/// # Safety
/// Both handles must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn splatkit_psnr(
    a: *const SplatkitGrid,
    b: *const SplatkitGrid,
    peak: f64,
    out: *mut f64,
) -> SplatkitStatus {
    guard(|| {
        let v = splatkit::psnr(unsafe { grid_ref(a, "a")? }, unsafe { grid_ref(b, "b")? }, peak)?;
        if out.is_null() {
            return Err(null("output"));
        }
        // SAFETY: checked non-null.
        unsafe { *out = v };
        Ok(())
    })
}
