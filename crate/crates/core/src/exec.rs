use std::cell::Cell;
use std::sync::atomic::{AtomicU32, Ordering};

/// How scatter passes are scheduled.
///
/// Gather operations (warping, filtering, convolution) are bit-exact under
/// any thread count and always run on the rayon pool. Scatter passes are
/// only reproducible run-to-run in `Sequential` mode; `Parallel` uses atomic
/// read-modify-write updates whose summation order depends on scheduling.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    #[default]
    Parallel,
}

/// Destination buffer for scatter passes.
pub(crate) trait Accum {
    fn add(&self, i: usize, x: f32);
    fn max(&self, i: usize, x: f32);
}

pub(crate) struct CellBuf(Vec<Cell<f32>>);

impl CellBuf {
    pub fn new(len: usize, init: f32) -> Self {
        CellBuf((0..len).map(|_| Cell::new(init)).collect())
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.0.into_iter().map(Cell::into_inner).collect()
    }
}

impl Accum for CellBuf {
    #[inline]
    fn add(&self, i: usize, x: f32) {
        let c = &self.0[i];
        c.set(c.get() + x);
    }

    #[inline]
    fn max(&self, i: usize, x: f32) {
        let c = &self.0[i];
        if x > c.get() {
            c.set(x);
        }
    }
}

/// f32 cells stored as bit patterns so they can be updated with CAS.
pub(crate) struct AtomicBuf(Vec<AtomicU32>);

impl AtomicBuf {
    pub fn new(len: usize, init: f32) -> Self {
        AtomicBuf((0..len).map(|_| AtomicU32::new(init.to_bits())).collect())
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.0.into_iter().map(|a| f32::from_bits(a.into_inner())).collect()
    }
}

impl Accum for AtomicBuf {
    #[inline]
    fn add(&self, i: usize, x: f32) {
        let cell = &self.0[i];
        let mut cur = cell.load(Ordering::Relaxed);
        loop {
            let next = (f32::from_bits(cur) + x).to_bits();
            match cell.compare_exchange_weak(cur, next, Ordering::Relaxed, Ordering::Relaxed) {
                Ok(_) => return,
                Err(seen) => cur = seen,
            }
        }
    }

    #[inline]
    fn max(&self, i: usize, x: f32) {
        let cell = &self.0[i];
        let mut cur = cell.load(Ordering::Relaxed);
        while x > f32::from_bits(cur) {
            match cell.compare_exchange_weak(cur, x.to_bits(), Ordering::Relaxed, Ordering::Relaxed) {
                Ok(_) => return,
                Err(seen) => cur = seen,
            }
        }
    }
}
