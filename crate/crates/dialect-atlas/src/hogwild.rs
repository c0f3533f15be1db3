//! Shared parameter storage for lock-free parallel SGD.
//!
//! Workers update embedding matrices concurrently without locks; racing
//! updates are tolerated as in standard hogwild-style training. With a
//! single worker every read and write is sequential, so seeded runs are
//! bitwise reproducible.

use std::sync::atomic::{AtomicU32, Ordering};

/// An `f32` stored as atomic bits. All accesses are `Relaxed`: on the
/// architectures we target these compile to plain loads and stores.
#[derive(Default)]
#[repr(transparent)]
pub struct AtomicF32 {
    bits: AtomicU32,
}

impl AtomicF32 {
    pub fn new(v: f32) -> Self {
        AtomicF32 {
            bits: AtomicU32::new(v.to_bits()),
        }
    }

    #[inline(always)]
    pub fn get(&self) -> f32 {
        f32::from_bits(self.bits.load(Ordering::Relaxed))
    }

    #[inline(always)]
    pub fn set(&self, v: f32) {
        self.bits.store(v.to_bits(), Ordering::Relaxed);
    }

    /// Read-modify-write without atomicity of the sum itself; concurrent
    /// adds may drop each other, which hogwild training tolerates.
    #[inline(always)]
    pub fn add(&self, v: f32) {
        self.set(self.get() + v);
    }
}

/// Row-major matrix of shared `f32` parameters.
pub struct SharedMatrix {
    data: Vec<AtomicF32>,
    rows: usize,
    cols: usize,
}

impl SharedMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        data.resize_with(rows * cols, AtomicF32::default);
        SharedMatrix { data, rows, cols }
    }

    pub fn from_vec(values: Vec<f32>, rows: usize, cols: usize) -> Self {
        assert_eq!(values.len(), rows * cols);
        SharedMatrix {
            data: values.into_iter().map(AtomicF32::new).collect(),
            rows,
            cols,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline(always)]
    pub fn row(&self, r: usize) -> &[AtomicF32] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Copy out a frozen row-major snapshot.
    pub fn to_vec(&self) -> Vec<f32> {
        self.data.iter().map(AtomicF32::get).collect()
    }
}

/// Dot product of a shared parameter row with a plain buffer.
#[inline(always)]
pub fn dot_shared(row: &[AtomicF32], x: &[f32]) -> f32 {
    debug_assert_eq!(row.len(), x.len());
    let mut acc = 0.0f32;
    for (p, v) in row.iter().zip(x) {
        acc += p.get() * v;
    }
    acc
}

/// Numerically stable log of the logistic sigmoid.
#[inline(always)]
pub fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

#[inline(always)]
pub fn sigmoid(x: f32) -> f32 {
    1.0 / (1.0 + (-x).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_roundtrip_preserves_bits() {
        let a = AtomicF32::new(-0.0);
        assert_eq!(a.get().to_bits(), (-0.0f32).to_bits());
        a.add(1.5);
        assert_eq!(a.get(), 1.5);
    }

    #[test]
    fn log_sigmoid_matches_direct_computation_in_safe_range() {
        for &x in &[-5.0, -0.5, 0.0, 0.5, 5.0] {
            let direct = (1.0 / (1.0 + (-x as f64).exp())).ln();
            assert!((log_sigmoid(x) - direct).abs() < 1e-12);
        }
        // The stable form stays finite far outside the range where the
        // direct form underflows.
        assert!(log_sigmoid(-800.0).is_finite());
        assert!((log_sigmoid(-800.0) + 800.0).abs() < 1e-9);
    }
}
