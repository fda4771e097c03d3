//! Scenario parameters and the variances derived from them.
//!
//! The operating point is given as an average SNR per bit in dB. It is
//! converted once into the one-dimensional AWGN variance `sigma_w_sq`, from
//! which the per-tap variances of the signal region (`sigma_z_sq`) and the
//! noise-only region (`sigma_y_sq`) of the post-IFFT tap estimate follow.

use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};

/// All parameters of one preamble-phase scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemConfig {
    /// Number of antennas at each side of the `N x N` link.
    pub n_antennas: usize,
    pub n_retransmissions: usize,
    /// Preamble length `L_p`, also the transform size.
    pub preamble_len: usize,
    /// Channel impulse response length `L_h`.
    pub channel_len: usize,
    /// Data length `L_d`; only enters the SNR definition.
    pub data_len: usize,
    pub snr_av_b_p_db: f64,
    /// Carrier frequency offset as a multiple of the subcarrier spacing.
    pub foff_fac: f64,
    /// Per-subcarrier preamble energy `|S_i|^2`.
    pub preamble_energy: f64,
    /// One-dimensional variance of each channel tap.
    pub channel_var_1d: f64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            n_antennas: 4,
            n_retransmissions: 1,
            preamble_len: 512,
            channel_len: 10,
            data_len: 1024,
            snr_av_b_p_db: 0.0,
            foff_fac: 0.0,
            preamble_energy: 2.0,
            channel_var_1d: 0.5,
        }
    }
}

/// Non-fatal findings of [`SystemConfig::validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum ConfigWarning {
    /// `L_h > L_p / 4`: the noise-only region is no longer much longer than
    /// the channel.
    LongChannel {
        channel_len: usize,
        preamble_len: usize,
    },
}

impl fmt::Display for ConfigWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigWarning::LongChannel {
                channel_len,
                preamble_len,
            } => write!(
                f,
                "channel length {channel_len} exceeds a quarter of the preamble length {preamble_len}"
            ),
        }
    }
}

impl SystemConfig {
    /// Checks the invariants, returning warnings for legal but unusual
    /// settings.
    ///
    /// `channel_var_1d` may be zero: that is the no-channel case where the
    /// two regions of the tap estimate are identically distributed.
    pub fn validate(&self) -> Result<Vec<ConfigWarning>> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n_antennas == 0 {
            return bad("n_antennas must be at least 1".into());
        }
        if self.n_retransmissions == 0 {
            return bad("n_retransmissions must be at least 1".into());
        }
        if !self.preamble_len.is_power_of_two() || self.preamble_len < 2 {
            return bad(format!(
                "preamble_len {} is not a power of two >= 2",
                self.preamble_len
            ));
        }
        if self.channel_len == 0 {
            return bad("channel_len must be at least 1".into());
        }
        if self.channel_len >= self.preamble_len {
            return bad(format!(
                "channel_len {} leaves no noise-only taps in a preamble of length {}",
                self.channel_len, self.preamble_len
            ));
        }
        if self.data_len == 0 {
            return bad("data_len must be at least 1".into());
        }
        if !self.snr_av_b_p_db.is_finite() {
            return bad(format!("snr {} dB is not finite", self.snr_av_b_p_db));
        }
        if !(self.foff_fac.is_finite() && self.foff_fac >= 0.0) {
            return bad(format!(
                "foff_fac {} must be finite and >= 0",
                self.foff_fac
            ));
        }
        if !(self.preamble_energy.is_finite() && self.preamble_energy > 0.0) {
            return bad(format!(
                "preamble_energy {} must be positive",
                self.preamble_energy
            ));
        }
        if !(self.channel_var_1d.is_finite() && self.channel_var_1d >= 0.0) {
            return bad(format!(
                "channel_var_1d {} must be finite and >= 0",
                self.channel_var_1d
            ));
        }

        let mut warnings = Vec::new();
        if 4 * self.channel_len > self.preamble_len {
            warnings.push(ConfigWarning::LongChannel {
                channel_len: self.channel_len,
                preamble_len: self.preamble_len,
            });
        }
        Ok(warnings)
    }

    /// Number of independent links per frame, `N_rt * N^2`.
    pub fn links_per_frame(&self) -> usize {
        self.n_retransmissions * self.n_antennas * self.n_antennas
    }

    /// Carrier frequency offset in radians per sample.
    pub fn omega_0(&self) -> f64 {
        self.foff_fac * 2.0 * std::f64::consts::PI / self.preamble_len as f64
    }

    /// Parses a `key = value` file on top of the defaults.
    pub fn from_kv_str(text: &str, origin: &Path) -> Result<Self> {
        let mut config = Self::default();
        ConfigOverrides::parse(text, origin)?.apply(&mut config);
        config.validate()?;
        Ok(config)
    }
}

/// A partial [`SystemConfig`], as read from a `key = value` file.
///
/// Keys may be given either by their field name or by their short flag
/// name (`n`, `n-rt`, `lp`, `lh`, `ld`, `snr-db`, `foff-fac`, `es`,
/// `sigma-f-sq`); hyphens and underscores are interchangeable. Blank lines
/// and lines starting with `#` are ignored.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigOverrides {
    pub n_antennas: Option<usize>,
    pub n_retransmissions: Option<usize>,
    pub preamble_len: Option<usize>,
    pub channel_len: Option<usize>,
    pub data_len: Option<usize>,
    pub snr_av_b_p_db: Option<f64>,
    pub foff_fac: Option<f64>,
    pub preamble_energy: Option<f64>,
    pub channel_var_1d: Option<f64>,
}

impl ConfigOverrides {
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut out = Self::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| Error::Parse {
                path: origin.to_path_buf(),
                line: idx + 1,
                message,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected key=value, got {line:?}")))?;
            let key = key.trim().replace('-', "_");
            let value = value.trim();
            let int = || {
                value
                    .parse::<usize>()
                    .map_err(|e| err(format!("{key}: {e}")))
            };
            let real = || value.parse::<f64>().map_err(|e| err(format!("{key}: {e}")));
            match key.as_str() {
                "n" | "n_antennas" => out.n_antennas = Some(int()?),
                "n_rt" | "n_retransmissions" => out.n_retransmissions = Some(int()?),
                "lp" | "preamble_len" => out.preamble_len = Some(int()?),
                "lh" | "channel_len" => out.channel_len = Some(int()?),
                "ld" | "data_len" => out.data_len = Some(int()?),
                "snr_db" | "snr_av_b_p_db" => out.snr_av_b_p_db = Some(real()?),
                "foff_fac" => out.foff_fac = Some(real()?),
                "es" | "preamble_energy" => out.preamble_energy = Some(real()?),
                "sigma_f_sq" | "channel_var_1d" => out.channel_var_1d = Some(real()?),
                _ => return Err(err(format!("unknown key {key:?}"))),
            }
        }
        Ok(out)
    }

    pub fn apply(&self, config: &mut SystemConfig) {
        macro_rules! set {
            ($($field:ident),*) => {
                $(if let Some(v) = self.$field { config.$field = v; })*
            };
        }
        set!(
            n_antennas,
            n_retransmissions,
            preamble_len,
            channel_len,
            data_len,
            snr_av_b_p_db,
            foff_fac,
            preamble_energy,
            channel_var_1d
        );
    }
}

/// Variances of the post-IFFT tap estimate, all per dimension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceSet {
    /// AWGN variance at the receiver input.
    pub sigma_w_sq: f64,
    /// Signal-region taps: channel plus noise.
    pub sigma_z_sq: f64,
    /// Noise-only taps.
    pub sigma_y_sq: f64,
}

impl VarianceSet {
    pub fn from_parts(sigma_w_sq: f64, preamble_energy: f64, channel_var_1d: f64) -> Self {
        let sigma_y_sq = sigma_w_sq / preamble_energy;
        Self {
            sigma_w_sq,
            sigma_z_sq: channel_var_1d + sigma_y_sq,
            sigma_y_sq,
        }
    }
}

fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// AWGN variance for the configured average SNR per bit:
/// `4 L_h sigma_f^2 N N_rt / (L_d * snr)`.
pub fn sigma_w_sq_from_snr(config: &SystemConfig) -> Result<f64> {
    config.validate()?;
    Ok(signal_energy_per_bit_term(config) / db_to_linear(config.snr_av_b_p_db))
}

/// Inverse of [`sigma_w_sq_from_snr`], in dB.
pub fn snr_db_from_sigma_w_sq(config: &SystemConfig, sigma_w_sq: f64) -> f64 {
    10.0 * (signal_energy_per_bit_term(config) / sigma_w_sq).log10()
}

fn signal_energy_per_bit_term(config: &SystemConfig) -> f64 {
    4.0 * config.channel_len as f64
        * config.channel_var_1d
        * config.n_antennas as f64
        * config.n_retransmissions as f64
        / config.data_len as f64
}

pub fn derive_variances(config: &SystemConfig) -> Result<VarianceSet> {
    let sigma_w_sq = sigma_w_sq_from_snr(config)?;
    Ok(VarianceSet::from_parts(
        sigma_w_sq,
        config.preamble_energy,
        config.channel_var_1d,
    ))
}
