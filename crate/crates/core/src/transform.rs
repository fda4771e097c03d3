//! Forward and inverse DFT of one fixed power-of-two length.
//!
//! Forward is unnormalized, inverse carries the `1/L` factor, so a round
//! trip is the identity.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

#[derive(Clone)]
pub struct Transform {
    len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch_len: usize,
}

impl std::fmt::Debug for Transform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Transform").field("len", &self.len).finish()
    }
}

impl Transform {
    pub fn new(len: usize) -> Result<Self> {
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "transform length {len} is not a power of two >= 2"
            )));
        }
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(len);
        let inverse = planner.plan_fft_inverse(len);
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Ok(Self {
            len,
            forward,
            inverse,
            scratch_len,
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// A scratch buffer large enough for either direction.
    pub fn make_scratch(&self) -> Vec<Complex64> {
        vec![Complex64::default(); self.scratch_len]
    }

    fn check(&self, buf: &[Complex64]) -> Result<()> {
        if buf.len() != self.len {
            return Err(Error::LengthMismatch {
                expected: self.len,
                actual: buf.len(),
            });
        }
        Ok(())
    }

    pub fn forward_in_place(&self, buf: &mut [Complex64], scratch: &mut [Complex64]) -> Result<()> {
        self.check(buf)?;
        self.forward.process_with_scratch(buf, scratch);
        Ok(())
    }

    pub fn inverse_in_place(&self, buf: &mut [Complex64], scratch: &mut [Complex64]) -> Result<()> {
        self.check(buf)?;
        self.inverse.process_with_scratch(buf, scratch);
        let scale = 1.0 / self.len as f64;
        for x in buf.iter_mut() {
            *x *= scale;
        }
        Ok(())
    }

    pub fn forward(&self, input: &[Complex64]) -> Result<Vec<Complex64>> {
        let mut buf = input.to_vec();
        self.forward_in_place(&mut buf, &mut self.make_scratch())?;
        Ok(buf)
    }

    pub fn inverse(&self, input: &[Complex64]) -> Result<Vec<Complex64>> {
        let mut buf = input.to_vec();
        self.inverse_in_place(&mut buf, &mut self.make_scratch())?;
        Ok(buf)
    }
}
