//! Order statistics of the two tap regions and the no-erasure probability.
//!
//! Each `|tap|^2` in the signal region is exponential with mean
//! `2 sigma_z_sq`, each one in the noise-only region exponential with mean
//! `2 sigma_y_sq`. A link is detected when the largest signal-region value
//! exceeds the largest noise-region value. Two evaluations of that
//! probability are provided:
//!
//! * [`p_ne_one_closed_form`] sums the alternating binomial series exactly
//!   in extended precision.
//! * [`p_ne_one_quadrature`] is the double left-Riemann sum over the two
//!   densities of the maxima.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_traits::One;

use crate::error::{Error, Result};
use crate::model::{SystemConfig, VarianceSet};
use crate::precision::{BigFloat, Precision};

/// Default working precision of the closed form.
pub const DEFAULT_PRECISION_BITS: u32 = 4096;

/// The cdf of the signal-region maximum must reach `1 - CDF_TAIL` at the
/// upper quadrature limit.
pub const CDF_TAIL: f64 = 1e-9;

/// Sizes and variances of the two tap populations of one link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailPair {
    /// Signal-region taps, `L_h`.
    pub m_signal: usize,
    /// Noise-only taps, `L_p - L_h`.
    pub m_noise: usize,
    pub sigma_z_sq: f64,
    pub sigma_y_sq: f64,
}

impl TailPair {
    pub fn new(m_signal: usize, m_noise: usize, sigma_z_sq: f64, sigma_y_sq: f64) -> Result<Self> {
        if m_signal == 0 || m_noise == 0 {
            return Err(Error::InvalidArgument(format!(
                "tap counts must be positive (signal {m_signal}, noise {m_noise})"
            )));
        }
        for (name, v) in [("sigma_z_sq", sigma_z_sq), ("sigma_y_sq", sigma_y_sq)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "{name} = {v} must be positive"
                )));
            }
        }
        Ok(Self {
            m_signal,
            m_noise,
            sigma_z_sq,
            sigma_y_sq,
        })
    }

    pub fn from_config(config: &SystemConfig, variances: &VarianceSet) -> Result<Self> {
        Self::new(
            config.channel_len,
            config.preamble_len - config.channel_len,
            variances.sigma_z_sq,
            variances.sigma_y_sq,
        )
    }
}

fn check_support(x: f64) -> Result<()> {
    if x >= 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(x))
    }
}

/// `ln(1 - e^{-x})` for `x > 0`.
fn ln_one_minus_exp_neg(x: f64) -> f64 {
    if x > std::f64::consts::LN_2 {
        (-(-x).exp()).ln_1p()
    } else {
        (-(-x).exp_m1()).ln()
    }
}

/// Density of the maximum of `m` iid exponentials with mean `2 var`.
fn pdf_max(x: f64, m: usize, var: f64) -> f64 {
    let scale = 2.0 * var;
    let u = x / scale;
    let head = m as f64 / scale * (-u).exp();
    if m == 1 {
        head
    } else if x == 0.0 {
        0.0
    } else {
        head * ((m - 1) as f64 * ln_one_minus_exp_neg(u)).exp()
    }
}

fn cdf_max(x: f64, m: usize, var: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    (m as f64 * ln_one_minus_exp_neg(x / (2.0 * var))).exp()
}

/// Inverse of the cdf of the maximum of `m` exponentials.
fn quantile_max(u: f64, m: usize, var: f64) -> f64 {
    // F(x) = (1 - e^{-x/2v})^m  =>  x = -2v ln(1 - u^{1/m})
    let root = (u.ln() / m as f64).exp_m1();
    -2.0 * var * (-root).ln()
}

pub fn pdf_max_signal(z: f64, tp: &TailPair) -> Result<f64> {
    check_support(z)?;
    Ok(pdf_max(z, tp.m_signal, tp.sigma_z_sq))
}

pub fn pdf_max_noise(y: f64, tp: &TailPair) -> Result<f64> {
    check_support(y)?;
    Ok(pdf_max(y, tp.m_noise, tp.sigma_y_sq))
}

pub fn cdf_max_signal(z: f64, tp: &TailPair) -> Result<f64> {
    check_support(z)?;
    Ok(cdf_max(z, tp.m_signal, tp.sigma_z_sq))
}

pub fn cdf_max_noise(y: f64, tp: &TailPair) -> Result<f64> {
    check_support(y)?;
    Ok(cdf_max(y, tp.m_noise, tp.sigma_y_sq))
}

/// Value below which the signal-region maximum falls with probability `u`.
pub fn quantile_max_signal(u: f64, tp: &TailPair) -> f64 {
    quantile_max(u, tp.m_signal, tp.sigma_z_sq)
}

pub fn quantile_max_noise(u: f64, tp: &TailPair) -> f64 {
    quantile_max(u, tp.m_noise, tp.sigma_y_sq)
}

/// Grid of the double Riemann sum; the same step is used on both axes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub delta: f64,
    pub z_max: f64,
    pub n_steps: usize,
}

impl QuadratureSpec {
    pub fn new(delta: f64, z_max: f64) -> Result<Self> {
        if !(delta.is_finite() && delta > 0.0 && z_max.is_finite() && z_max > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "quadrature step {delta} and limit {z_max} must be positive"
            )));
        }
        let n_steps = (z_max / delta).round() as usize;
        if n_steps == 0 || (n_steps as f64 * delta - z_max).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "limit {z_max} is not a whole number of steps of {delta}"
            )));
        }
        Ok(Self {
            delta,
            z_max,
            n_steps,
        })
    }

    /// Step `1e-3` and `10^4` steps, so the upper limit is 10.
    pub fn coarse_default() -> Self {
        Self::new(1e-3, 10.0).expect("default grid is valid")
    }
}

/// Result of [`p_ne_one_quadrature`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureOutcome {
    pub p_ne_one: f64,
    /// Upper limit actually used.
    pub z_max: f64,
    /// Set when the requested limit left more than [`CDF_TAIL`] of the
    /// signal-region maximum uncovered and was raised.
    pub extended: bool,
}

/// Double left-Riemann sum of the no-erasure probability.
///
/// The inner sum over the noise density is accumulated along the outer
/// index, so the cost is linear in the number of steps.
pub fn p_ne_one_quadrature(tp: &TailPair, q: &QuadratureSpec) -> Result<QuadratureOutcome> {
    let needed = quantile_max_signal(1.0 - CDF_TAIL, tp);
    let (n_steps, z_max, extended) =
        if cdf_max(q.z_max, tp.m_signal, tp.sigma_z_sq) < 1.0 - CDF_TAIL {
            let n = (needed / q.delta).ceil() as usize;
            (n, n as f64 * q.delta, true)
        } else {
            (q.n_steps, q.z_max, false)
        };

    let d = q.delta;
    let mut inner = 0.0;
    let mut total = 0.0;
    for i in 0..=n_steps {
        let x = i as f64 * d;
        inner += pdf_max(x, tp.m_noise, tp.sigma_y_sq) * d;
        total += inner * pdf_max(x, tp.m_signal, tp.sigma_z_sq) * d;
    }
    Ok(QuadratureOutcome {
        p_ne_one: total.clamp(0.0, 1.0),
        z_max,
        extended,
    })
}

fn binomial_row(n: usize) -> Vec<BigInt> {
    let mut row = Vec::with_capacity(n + 1);
    let mut c = BigInt::one();
    row.push(c.clone());
    for k in 0..n {
        c = c * (n - k) / (k + 1);
        row.push(c.clone());
    }
    row
}

/// Coefficients of the closed form.
///
/// `a[l] = (m_noise / (l + 1)) (-1)^l C(m_noise - 1, l)`,
/// `a_prime[l] = m_signal / (2 sigma_z_sq) * a[l]`,
/// `b[l] = (l + 1) / (2 sigma_y_sq)` and `c[a] = (a + 1) / (2 sigma_z_sq)`.
/// `signal_binomials[a]` carries the signed `(-1)^a C(m_signal - 1, a)`.
#[derive(Debug, Clone)]
pub struct CoefficientTable {
    pub precision: Precision,
    pub a: Vec<BigFloat>,
    pub a_prime: Vec<BigFloat>,
    pub b: Vec<BigFloat>,
    pub c: Vec<BigFloat>,
    pub signal_binomials: Vec<BigFloat>,
}

pub fn coefficient_table(tp: &TailPair, precision_bits: u32) -> Result<CoefficientTable> {
    if precision_bits < 64 {
        return Err(Error::InvalidArgument(format!(
            "precision_bits {precision_bits} is below the minimum of 64"
        )));
    }
    let p = Precision::new(precision_bits);
    let two_var_z = p.from_f64(2.0 * tp.sigma_z_sq);
    let two_var_y = p.from_f64(2.0 * tp.sigma_y_sq);
    let signal_scale = p.div(&p.from_i64(tp.m_signal as i64), &two_var_z);

    let signed = |k: usize, v: BigInt| if k.is_multiple_of(2) { v } else { -v };

    let noise_row = binomial_row(tp.m_noise - 1);
    let m_noise = BigInt::from(tp.m_noise);
    let mut a = Vec::with_capacity(tp.m_noise);
    let mut a_prime = Vec::with_capacity(tp.m_noise);
    let mut b = Vec::with_capacity(tp.m_noise);
    for (l, binom) in noise_row.into_iter().enumerate() {
        // m C(m-1, l) is divisible by l + 1, so A_l is an exact integer.
        let exact = signed(l, &m_noise * binom / (l + 1));
        let a_l = p.from_int(&exact);
        a_prime.push(p.mul(&signal_scale, &a_l));
        a.push(a_l);
        b.push(p.div(&p.from_i64(l as i64 + 1), &two_var_y));
    }

    let signal_binomials = binomial_row(tp.m_signal - 1)
        .into_iter()
        .enumerate()
        .map(|(k, v)| p.from_int(&signed(k, v)))
        .collect();
    let c = (0..tp.m_signal)
        .map(|k| p.div(&p.from_i64(k as i64 + 1), &two_var_z))
        .collect();

    Ok(CoefficientTable {
        precision: p,
        a,
        a_prime,
        b,
        c,
        signal_binomials,
    })
}

/// No-erasure probability of one link and its complement, both carried to
/// full relative accuracy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkProbability {
    pub p_ne_one: f64,
    pub p_erasure_link: f64,
}

/// Closed form evaluated in `precision_bits`-bit arithmetic.
///
/// Per noise index `l` the term is
/// `A_l - A'_l * sum_a (-1)^a C(m_signal - 1, a) / (B_l + C_a)`:
/// integrating `A_l (1 - e^{-B_l z})` against the density of the signal
/// maximum leaves `A_l` alone on the first part because that density
/// integrates to one.
pub fn link_probability_closed_form(tp: &TailPair, precision_bits: u32) -> Result<LinkProbability> {
    let table = coefficient_table(tp, precision_bits)?;
    let p = table.precision;

    let mut total = BigFloat::zero();
    let mut largest_bits = i64::MIN;
    let mut track = |x: &BigFloat| {
        if let Some(b) = x.magnitude_bits() {
            largest_bits = largest_bits.max(b);
        }
    };
    for l in 0..tp.m_noise {
        let mut inner = BigFloat::zero();
        for (coef, c_a) in table.signal_binomials.iter().zip(&table.c) {
            let term = p.div(coef, &p.add(&table.b[l], c_a));
            track(&term);
            inner = p.add(&inner, &term);
        }
        let correction = p.mul(&table.a_prime[l], &inner);
        track(&table.a[l]);
        track(&correction);
        total = p.add(&total, &p.sub(&table.a[l], &correction));
    }
    let erasure = p.sub(&p.from_i64(1), &total);

    // Every rounding is at most one unit in the last place of a number no
    // larger than the largest intermediate; count a few per term.
    let ops = (tp.m_noise * (3 * tp.m_signal + 4)) as f64;
    let bound_log2 = largest_bits as f64 + p.unit_roundoff_log2() as f64 + ops.log2();
    let bound = 2f64.powf(bound_log2);

    let value = total.to_f64();
    if !(-1e-6..=1.0 + 1e-6).contains(&value) || bound > 1e-9 {
        return Err(Error::InsufficientPrecision {
            bits: precision_bits,
            value,
            bound,
        });
    }
    Ok(LinkProbability {
        p_ne_one: value.clamp(0.0, 1.0),
        p_erasure_link: erasure.to_f64().clamp(0.0, 1.0),
    })
}

pub fn p_ne_one_closed_form(tp: &TailPair, precision_bits: u32) -> Result<f64> {
    link_probability_closed_form(tp, precision_bits).map(|lp| lp.p_ne_one)
}

/// Frame erasure probability `1 - p_ne_one^(n_rt n^2)`.
pub fn p_erasure_all(p_ne_one: f64, n: usize, n_rt: usize) -> f64 {
    let links = (n_rt * n * n) as f64;
    if p_ne_one <= 0.0 {
        return 1.0;
    }
    (-(links * p_ne_one.ln()).exp_m1()).clamp(0.0, 1.0)
}

/// Same as [`p_erasure_all`] but starting from the per-link erasure
/// probability, which keeps relative accuracy when it is tiny.
pub fn p_erasure_all_from_link(p_erasure_link: f64, n: usize, n_rt: usize) -> f64 {
    let links = (n_rt * n * n) as f64;
    if p_erasure_link >= 1.0 {
        return 1.0;
    }
    (-(links * (-p_erasure_link).ln_1p()).exp_m1()).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    ClosedForm,
    Quadrature,
    MonteCarlo,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::ClosedForm, Method::Quadrature, Method::MonteCarlo];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::ClosedForm => "closed_form",
            Method::Quadrature => "quadrature",
            Method::MonteCarlo => "monte_carlo",
        }
    }

    pub fn is_analytic(&self) -> bool {
        !matches!(self, Method::MonteCarlo)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().replace('-', "_").as_str() {
            "closed_form" | "closed" => Ok(Method::ClosedForm),
            "quadrature" | "quad" => Ok(Method::Quadrature),
            "monte_carlo" | "mc" => Ok(Method::MonteCarlo),
            other => Err(Error::InvalidArgument(format!("unknown method {other:?}"))),
        }
    }
}

/// A frame erasure probability together with how it was obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErasureEstimate {
    pub p_erasure: f64,
    /// Per-link no-erasure probability (empirical for Monte Carlo).
    pub p_ne_one: f64,
    pub method: Method,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Simulated frames; zero for analytic methods.
    pub trials: u64,
    pub seed: u64,
}

impl ErasureEstimate {
    pub fn analytic(method: Method, link: LinkProbability, n: usize, n_rt: usize) -> Self {
        let p = p_erasure_all_from_link(link.p_erasure_link, n, n_rt);
        Self {
            p_erasure: p,
            p_ne_one: link.p_ne_one,
            method,
            ci_low: p,
            ci_high: p,
            trials: 0,
            seed: 0,
        }
    }

    pub fn ci_half_width(&self) -> f64 {
        0.5 * (self.ci_high - self.ci_low)
    }
}

/// Analytic frame estimate for a configuration.
pub fn estimate_erasure_analytic(
    config: &SystemConfig,
    variances: &VarianceSet,
    method: Method,
    precision_bits: u32,
    quadrature: &QuadratureSpec,
) -> Result<ErasureEstimate> {
    if config.foff_fac != 0.0 {
        return Err(Error::Unsupported(format!(
            "{method} has no model for a frequency offset (foff_fac = {})",
            config.foff_fac
        )));
    }
    let tp = TailPair::from_config(config, variances)?;
    let link = match method {
        Method::ClosedForm => link_probability_closed_form(&tp, precision_bits)?,
        Method::Quadrature => {
            let p = p_ne_one_quadrature(&tp, quadrature)?.p_ne_one;
            LinkProbability {
                p_ne_one: p,
                p_erasure_link: 1.0 - p,
            }
        }
        Method::MonteCarlo => {
            return Err(Error::InvalidArgument(
                "monte_carlo is not an analytic method".into(),
            ))
        }
    };
    Ok(ErasureEstimate::analytic(
        method,
        link,
        config.n_antennas,
        config.n_retransmissions,
    ))
}
