//! One preamble-phase link: QPSK preamble, frequency-selective channel,
//! AWGN, optional carrier offset, and the receiver's matched filter plus
//! inverse transform that exposes the channel taps.
//!
//! The channel acts as a circular convolution over the preamble length
//! (ideal cyclic prefix), so in the frequency domain every subcarrier sees
//! `R_i = H_i S_i + W_i`.

use std::ops::Deref;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::transform::Transform;

/// A block of complex samples: a spectrum, a time signal or a set of taps.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ComplexBlock {
    samples: Vec<Complex64>,
}

impl ComplexBlock {
    pub fn new(samples: Vec<Complex64>) -> Self {
        Self { samples }
    }

    pub fn zeros(len: usize) -> Self {
        Self::new(vec![Complex64::default(); len])
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [Complex64] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }
}

impl Deref for ComplexBlock {
    type Target = [Complex64];

    fn deref(&self) -> &[Complex64] {
        &self.samples
    }
}

impl From<Vec<Complex64>> for ComplexBlock {
    fn from(samples: Vec<Complex64>) -> Self {
        Self::new(samples)
    }
}

/// Post-IFFT taps of one link and the outcome of the detection test.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkObservation {
    pub taps: ComplexBlock,
    /// Largest `|tap|^2` over the first `L_h` taps.
    pub max_signal_region: f64,
    /// Largest `|tap|^2` over the remaining taps.
    pub max_noise_region: f64,
    pub erased: bool,
}

fn gaussian<R: Rng + ?Sized>(rng: &mut R, std_dev: f64) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * std_dev, im * std_dev)
}

/// Frequency-domain preamble of uniformly drawn QPSK symbols with
/// `|S_i|^2 = preamble_energy`.
pub fn generate_preamble<R: Rng + ?Sized>(
    preamble_len: usize,
    preamble_energy: f64,
    rng: &mut R,
) -> Result<ComplexBlock> {
    if preamble_len < 2 || !preamble_len.is_power_of_two() {
        return Err(Error::InvalidArgument(format!(
            "preamble length {preamble_len} is not a power of two >= 2"
        )));
    }
    let mut out = vec![Complex64::default(); preamble_len];
    fill_preamble(&mut out, preamble_energy, rng);
    Ok(out.into())
}

pub(crate) fn fill_preamble<R: Rng + ?Sized>(
    out: &mut [Complex64],
    preamble_energy: f64,
    rng: &mut R,
) {
    let amp = (preamble_energy / 2.0).sqrt();
    let mut bits = 0u64;
    for (i, s) in out.iter_mut().enumerate() {
        if i % 32 == 0 {
            bits = rng.next_u64();
        }
        let re = if bits & 1 == 0 { amp } else { -amp };
        let im = if bits & 2 == 0 { amp } else { -amp };
        bits >>= 2;
        *s = Complex64::new(re, im);
    }
}

/// `channel_len` iid zero-mean complex Gaussian taps with per-dimension
/// variance `channel_var_1d`.
pub fn generate_channel<R: Rng + ?Sized>(
    channel_len: usize,
    channel_var_1d: f64,
    rng: &mut R,
) -> Result<ComplexBlock> {
    if channel_len == 0 || channel_var_1d.is_nan() || channel_var_1d < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "channel needs at least one tap and a nonnegative variance (got {channel_len}, {channel_var_1d})"
        )));
    }
    let mut taps = vec![Complex64::default(); channel_len];
    fill_channel(&mut taps, channel_var_1d, rng);
    Ok(taps.into())
}

pub(crate) fn fill_channel<R: Rng + ?Sized>(
    taps: &mut [Complex64],
    channel_var_1d: f64,
    rng: &mut R,
) {
    let sd = channel_var_1d.sqrt();
    for t in taps {
        *t = gaussian(rng, sd);
    }
}

/// `e^{j omega_0 n}` for `0 <= n < len`.
pub fn offset_phasors(len: usize, omega_0: f64) -> Vec<Complex64> {
    (0..len)
        .map(|n| Complex64::from_polar(1.0, omega_0 * n as f64))
        .collect()
}

/// Working buffers for one transform length.
#[derive(Debug, Clone)]
pub struct LinkBuffers {
    transform: Transform,
    work: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl LinkBuffers {
    pub fn new(transform: Transform) -> Self {
        let work = vec![Complex64::default(); transform.len()];
        let scratch = transform.make_scratch();
        Self {
            transform,
            work,
            scratch,
        }
    }

    pub fn transform(&self) -> &Transform {
        &self.transform
    }

    /// Taps left by the last [`LinkBuffers::receive`].
    pub fn taps(&self) -> &[Complex64] {
        &self.work
    }

    /// Builds the received time-domain block in the work buffer.
    ///
    /// `phasors` is `None` for a zero carrier offset.
    pub fn transmit<R: Rng + ?Sized>(
        &mut self,
        preamble: &[Complex64],
        channel: &[Complex64],
        sigma_w_sq: f64,
        phasors: Option<&[Complex64]>,
        rng: &mut R,
    ) -> Result<()> {
        let len = self.transform.len();
        if preamble.len() != len {
            return Err(Error::LengthMismatch {
                expected: len,
                actual: preamble.len(),
            });
        }
        if channel.len() > len {
            return Err(Error::LengthMismatch {
                expected: len,
                actual: channel.len(),
            });
        }
        self.work.fill(Complex64::default());
        self.work[..channel.len()].copy_from_slice(channel);
        // Circular convolution through the spectrum: s (*) h = IDFT(S H).
        self.transform
            .forward_in_place(&mut self.work, &mut self.scratch)?;
        for (x, s) in self.work.iter_mut().zip(preamble) {
            *x *= s;
        }
        self.transform
            .inverse_in_place(&mut self.work, &mut self.scratch)?;
        if let Some(ph) = phasors {
            for (x, p) in self.work.iter_mut().zip(ph) {
                *x *= p;
            }
        }
        if sigma_w_sq > 0.0 {
            let sd = sigma_w_sq.sqrt();
            for x in self.work.iter_mut() {
                *x += gaussian(rng, sd);
            }
        }
        Ok(())
    }

    /// Runs the matched filter and inverse transform on the work buffer.
    pub fn receive(&mut self, preamble: &[Complex64], preamble_energy: f64) -> Result<()> {
        if preamble.len() != self.work.len() {
            return Err(Error::LengthMismatch {
                expected: self.work.len(),
                actual: preamble.len(),
            });
        }
        self.transform
            .forward_in_place(&mut self.work, &mut self.scratch)?;
        let inv = 1.0 / preamble_energy;
        for (x, s) in self.work.iter_mut().zip(preamble) {
            *x *= s.conj() * inv;
        }
        self.transform
            .inverse_in_place(&mut self.work, &mut self.scratch)
    }

    pub fn load(&mut self, block: &[Complex64]) -> Result<()> {
        if block.len() != self.work.len() {
            return Err(Error::LengthMismatch {
                expected: self.work.len(),
                actual: block.len(),
            });
        }
        self.work.copy_from_slice(block);
        Ok(())
    }
}

/// Received block `r_n = e^{j omega_0 n} (s (*) h)_n + w_n`, where `s` is the
/// inverse transform of the preamble spectrum and `w` is complex AWGN with
/// per-dimension variance `sigma_w_sq`.
pub fn transmit_receive_link<R: Rng + ?Sized>(
    transform: &Transform,
    preamble: &ComplexBlock,
    channel: &ComplexBlock,
    sigma_w_sq: f64,
    omega_0: f64,
    rng: &mut R,
) -> Result<ComplexBlock> {
    let mut buffers = LinkBuffers::new(transform.clone());
    let phasors = (omega_0 != 0.0).then(|| offset_phasors(transform.len(), omega_0));
    buffers.transmit(preamble, channel, sigma_w_sq, phasors.as_deref(), rng)?;
    Ok(buffers.work.into())
}

/// Forward transform, per-bin multiplication by `S_i^* / E_s`, inverse
/// transform. Without noise and offset this returns the channel taps.
pub fn matched_filter_ifft(
    transform: &Transform,
    received: &ComplexBlock,
    preamble: &ComplexBlock,
    preamble_energy: f64,
) -> Result<ComplexBlock> {
    if received.len() != preamble.len() {
        return Err(Error::LengthMismatch {
            expected: preamble.len(),
            actual: received.len(),
        });
    }
    let mut buffers = LinkBuffers::new(transform.clone());
    buffers.load(received)?;
    buffers.receive(preamble, preamble_energy)?;
    Ok(buffers.work.into())
}

/// Largest `|tap|^2` in the signal region and in the noise-only region.
pub fn region_maxima(taps: &[Complex64], channel_len: usize) -> (f64, f64) {
    let (signal, noise) = taps.split_at(channel_len);
    let max = |xs: &[Complex64]| xs.iter().map(|x| x.norm_sqr()).fold(0.0, f64::max);
    (max(signal), max(noise))
}

/// Ties count as erasures.
pub fn is_erased(max_signal_region: f64, max_noise_region: f64) -> bool {
    max_signal_region <= max_noise_region
}

pub fn erasure_test(taps: &ComplexBlock, channel_len: usize) -> Result<LinkObservation> {
    if channel_len == 0 || taps.len() <= channel_len {
        return Err(Error::InvalidArgument(format!(
            "{} taps leave no noise region after {channel_len} channel taps",
            taps.len()
        )));
    }
    let (max_signal_region, max_noise_region) = region_maxima(taps, channel_len);
    Ok(LinkObservation {
        taps: taps.clone(),
        max_signal_region,
        max_noise_region,
        erased: is_erased(max_signal_region, max_noise_region),
    })
}
