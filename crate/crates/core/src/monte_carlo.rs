//! Frame-level Monte Carlo over the baseband link model.
//!
//! Every frame is `N_rt * N^2` independent links that share one preamble.
//! Each `(master_seed, stream_id)` pair owns a random stream: the ChaCha8
//! block keyed by the master seed at the given stream id supplies the
//! 256-bit state of a xoshiro256++ generator that produces the variates.
//! The stream id is a pure function of the trial index and the slot within
//! the trial (slot 0 is the preamble, slot `1 + j` link `j`), so counts do
//! not depend on how trials are spread over worker threads.

use num_complex::Complex64;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_xoshiro::Xoshiro256PlusPlus;
use rayon::prelude::*;

use crate::analytic::{ErasureEstimate, Method, TailPair};
use crate::baseband::{self, LinkBuffers};
use crate::error::{Error, Result};
use crate::model::{derive_variances, SystemConfig, VarianceSet};
use crate::transform::Transform;

/// Two-sided 95% standard normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;

const SLOT_BITS: u32 = 16;

/// A reproducible random stream selected by `(master_seed, stream_id)`.
#[derive(Debug, Clone)]
pub struct RandomStream {
    master_seed: u64,
    stream_id: u64,
    rng: Xoshiro256PlusPlus,
}

impl RandomStream {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        let mut key = ChaCha8Rng::seed_from_u64(master_seed);
        key.set_stream(stream_id);
        let mut state = [0u8; 32];
        key.fill_bytes(&mut state);
        Self {
            master_seed,
            stream_id,
            rng: Xoshiro256PlusPlus::from_seed(state),
        }
    }

    /// Stream for slot `slot` of trial `trial`.
    pub fn for_slot(master_seed: u64, trial: u64, slot: u64) -> Self {
        debug_assert!(slot < 1 << SLOT_BITS);
        Self::new(master_seed, (trial << SLOT_BITS) | slot)
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }
}

impl RngCore for RandomStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// Erasure counts; merging is plain addition.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Tally {
    pub frames: u64,
    pub erased_frames: u64,
    pub links: u64,
    pub erased_links: u64,
}

impl Tally {
    pub fn merge(self, other: Self) -> Self {
        Self {
            frames: self.frames + other.frames,
            erased_frames: self.erased_frames + other.erased_frames,
            links: self.links + other.links,
            erased_links: self.erased_links + other.erased_links,
        }
    }

    pub fn frame_rate(&self) -> f64 {
        self.erased_frames as f64 / self.frames as f64
    }

    pub fn link_rate(&self) -> f64 {
        self.erased_links as f64 / self.links as f64
    }
}

/// Wilson score interval for `successes` out of `n`.
pub fn wilson_interval(successes: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n_f = n as f64;
    let p = successes as f64 / n_f;
    let z2 = z * z;
    let denom = 1.0 + z2 / n_f;
    let centre = (p + z2 / (2.0 * n_f)) / denom;
    let half = z / denom * (p * (1.0 - p) / n_f + z2 / (4.0 * n_f * n_f)).sqrt();
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Simulates whole frames for one configuration, reusing buffers.
#[derive(Debug, Clone)]
pub struct FrameSimulator {
    config: SystemConfig,
    variances: VarianceSet,
    master_seed: u64,
    buffers: LinkBuffers,
    preamble: Vec<Complex64>,
    channel: Vec<Complex64>,
    phasors: Option<Vec<Complex64>>,
}

impl FrameSimulator {
    pub fn new(config: &SystemConfig, variances: &VarianceSet, master_seed: u64) -> Result<Self> {
        config.validate()?;
        if config.links_per_frame() >= (1 << SLOT_BITS) - 1 {
            return Err(Error::InvalidConfig(format!(
                "{} links per frame exceed the stream layout",
                config.links_per_frame()
            )));
        }
        let transform = Transform::new(config.preamble_len)?;
        let omega = config.omega_0();
        Ok(Self {
            config: *config,
            variances: *variances,
            master_seed,
            buffers: LinkBuffers::new(transform),
            preamble: vec![Complex64::default(); config.preamble_len],
            channel: vec![Complex64::default(); config.channel_len],
            phasors: (omega != 0.0).then(|| baseband::offset_phasors(config.preamble_len, omega)),
        })
    }

    /// Runs trial `trial`, calling `visit(max_signal_region, max_noise_region)`
    /// for every link.
    pub fn run_with(&mut self, trial: u64, mut visit: impl FnMut(f64, f64)) -> Result<Tally> {
        let cfg = &self.config;
        let mut preamble_rng = RandomStream::for_slot(self.master_seed, trial, 0);
        baseband::fill_preamble(&mut self.preamble, cfg.preamble_energy, &mut preamble_rng);

        let mut erased_links = 0;
        let links = cfg.links_per_frame() as u64;
        for link in 0..links {
            let mut rng = RandomStream::for_slot(self.master_seed, trial, link + 1);
            // Quasi-static: a fresh channel for every link and re-transmission.
            baseband::fill_channel(&mut self.channel, cfg.channel_var_1d, &mut rng);
            self.buffers.transmit(
                &self.preamble,
                &self.channel,
                self.variances.sigma_w_sq,
                self.phasors.as_deref(),
                &mut rng,
            )?;
            self.buffers.receive(&self.preamble, cfg.preamble_energy)?;
            let (sig, noise) = baseband::region_maxima(self.buffers.taps(), cfg.channel_len);
            visit(sig, noise);
            if baseband::is_erased(sig, noise) {
                erased_links += 1;
            }
        }
        Ok(Tally {
            frames: 1,
            erased_frames: u64::from(erased_links > 0),
            links,
            erased_links,
        })
    }

    pub fn run(&mut self, trial: u64) -> Result<Tally> {
        self.run_with(trial, |_, _| {})
    }
}

/// Simulates frame `trial` under `master_seed`; true when any link is erased.
pub fn run_frame_trial(
    config: &SystemConfig,
    variances: &VarianceSet,
    master_seed: u64,
    trial: u64,
) -> Result<bool> {
    let mut sim = FrameSimulator::new(config, variances, master_seed)?;
    Ok(sim.run(trial)?.erased_frames == 1)
}

/// Counts over trials `0..trials`.
pub fn simulate_frames(config: &SystemConfig, trials: u64, master_seed: u64) -> Result<Tally> {
    simulate_frames_with(config, &derive_variances(config)?, trials, master_seed)
}

/// As [`simulate_frames`] with explicitly given variances.
pub fn simulate_frames_with(
    config: &SystemConfig,
    variances: &VarianceSet,
    trials: u64,
    master_seed: u64,
) -> Result<Tally> {
    let proto = FrameSimulator::new(config, variances, master_seed)?;
    (0..trials)
        .into_par_iter()
        .map_init(|| proto.clone(), |sim, t| sim.run(t))
        .try_reduce(Tally::default, |a, b| Ok(a.merge(b)))
}

/// Erased-frame fraction with a 95% Wilson interval.
///
/// `p_ne_one` of the result is the empirical per-link no-erasure rate.
pub fn estimate_erasure_mc(
    config: &SystemConfig,
    trials: u64,
    master_seed: u64,
) -> Result<ErasureEstimate> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    let tally = simulate_frames(config, trials, master_seed)?;
    Ok(estimate_from_tally(&tally, master_seed))
}

pub fn estimate_from_tally(tally: &Tally, master_seed: u64) -> ErasureEstimate {
    let (ci_low, ci_high) = wilson_interval(tally.erased_frames, tally.frames, Z_95);
    ErasureEstimate {
        p_erasure: tally.frame_rate(),
        p_ne_one: 1.0 - tally.link_rate(),
        method: Method::MonteCarlo,
        ci_low,
        ci_high,
        trials: tally.frames,
        seed: master_seed,
    }
}

/// Fixed-range histogram with out-of-range counters.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub underflow: u64,
    pub overflow: u64,
    /// Density over the in-range samples; filled by [`Histogram::normalize`].
    pub normalized_density: Vec<f64>,
}

impl Histogram {
    pub fn uniform(low: f64, high: f64, bins: usize) -> Result<Self> {
        if bins == 0 || low >= high || !low.is_finite() || !high.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "histogram needs bins > 0 and low < high (got {bins}, [{low}, {high}])"
            )));
        }
        let width = (high - low) / bins as f64;
        let mut bin_edges: Vec<f64> = (0..bins).map(|i| low + i as f64 * width).collect();
        bin_edges.push(high);
        Ok(Self {
            bin_edges,
            counts: vec![0; bins],
            underflow: 0,
            overflow: 0,
            normalized_density: Vec::new(),
        })
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn low(&self) -> f64 {
        self.bin_edges[0]
    }

    pub fn high(&self) -> f64 {
        *self.bin_edges.last().unwrap()
    }

    pub fn add(&mut self, x: f64) {
        if x < self.low() {
            self.underflow += 1;
        } else if x >= self.high() {
            self.overflow += 1;
        } else {
            let width = (self.high() - self.low()) / self.bins() as f64;
            let idx = (((x - self.low()) / width) as usize).min(self.bins() - 1);
            self.counts[idx] += 1;
        }
    }

    pub fn in_range(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn total(&self) -> u64 {
        self.in_range() + self.underflow + self.overflow
    }

    /// Adds the counts of a histogram with identical edges.
    pub fn merge(mut self, other: &Self) -> Self {
        debug_assert_eq!(self.bin_edges, other.bin_edges);
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.underflow += other.underflow;
        self.overflow += other.overflow;
        self
    }

    pub fn normalize(&mut self) {
        let n = self.in_range() as f64;
        self.normalized_density = self
            .bin_edges
            .windows(2)
            .zip(&self.counts)
            .map(|(e, &c)| {
                if n > 0.0 {
                    c as f64 / (n * (e[1] - e[0]))
                } else {
                    0.0
                }
            })
            .collect();
    }
}

/// Empirical distributions of the two region maxima over all links.
#[derive(Debug, Clone, PartialEq)]
pub struct MaxStatistics {
    pub signal: Histogram,
    pub noise: Histogram,
    pub links: u64,
    /// Links whose signal-region maximum exceeded [`SIGNAL_TAIL_THRESHOLD`].
    pub signal_above_threshold: u64,
}

/// Level above which the density of the signal-region maximum is treated
/// as negligible by the default quadrature grid.
pub const SIGNAL_TAIL_THRESHOLD: f64 = 10.0;

/// Histogram range: the analytic quantiles at `RANGE_TAIL` and
/// `1 - RANGE_TAIL`.
const RANGE_TAIL: f64 = 1e-7;

impl MaxStatistics {
    fn empty(tp: &TailPair, bins: usize) -> Result<Self> {
        use crate::analytic::{quantile_max_noise, quantile_max_signal};
        Ok(Self {
            signal: Histogram::uniform(
                quantile_max_signal(RANGE_TAIL, tp),
                quantile_max_signal(1.0 - RANGE_TAIL, tp),
                bins,
            )?,
            noise: Histogram::uniform(
                quantile_max_noise(RANGE_TAIL, tp),
                quantile_max_noise(1.0 - RANGE_TAIL, tp),
                bins,
            )?,
            links: 0,
            signal_above_threshold: 0,
        })
    }

    fn merge(self, other: Self) -> Self {
        Self {
            signal: self.signal.merge(&other.signal),
            noise: self.noise.merge(&other.noise),
            links: self.links + other.links,
            signal_above_threshold: self.signal_above_threshold + other.signal_above_threshold,
        }
    }

    pub fn signal_tail_fraction(&self) -> f64 {
        self.signal_above_threshold as f64 / self.links as f64
    }
}

/// Histograms of the signal-region and noise-region maxima.
///
/// Bin ranges come from the analytic quantiles, so they depend only on the
/// configuration; samples outside land in the under/overflow counters.
pub fn histogram_max_statistics(
    config: &SystemConfig,
    trials: u64,
    master_seed: u64,
    bins: usize,
) -> Result<MaxStatistics> {
    if trials < 1000 {
        return Err(Error::InvalidArgument(format!(
            "histograms need at least 1000 trials, got {trials}"
        )));
    }
    let variances = derive_variances(config)?;
    let tp = TailPair::from_config(config, &variances)?;
    let proto = FrameSimulator::new(config, &variances, master_seed)?;
    let empty = MaxStatistics::empty(&tp, bins)?;

    let mut stats = (0..trials)
        .into_par_iter()
        .fold(
            || Ok((proto.clone(), empty.clone())),
            |acc: Result<(FrameSimulator, MaxStatistics)>, t| {
                let (mut sim, mut st) = acc?;
                let tally = sim.run_with(t, |sig, noise| {
                    st.signal.add(sig);
                    st.noise.add(noise);
                    if sig > SIGNAL_TAIL_THRESHOLD {
                        st.signal_above_threshold += 1;
                    }
                })?;
                st.links += tally.links;
                Ok((sim, st))
            },
        )
        .map(|acc| acc.map(|(_, st)| st))
        .try_reduce(|| empty.clone(), |a, b| Ok(a.merge(b)))?;
    stats.signal.normalize();
    stats.noise.normalize();
    Ok(stats)
}
