//! Sweeps over operating points and their CSV output.
//!
//! The built-in recipes cover the four erasure panels (antenna count,
//! preamble length, carrier offset) and the histogram of the two region
//! maxima. Every recipe is a [`SweepSpec`] whose fields callers may
//! override before calling [`run_panel`] or [`run_pdf_panel`].

use std::cmp::Ordering;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;

use crate::analytic::{
    estimate_erasure_analytic, pdf_max_noise, pdf_max_signal, ErasureEstimate, Method,
    QuadratureSpec, TailPair, DEFAULT_PRECISION_BITS,
};
use crate::error::{Error, Result};
use crate::model::{derive_variances, SystemConfig};
use crate::monte_carlo::{estimate_erasure_mc, histogram_max_statistics, Histogram};

pub const DEFAULT_TRIALS: u64 = 100_000;
pub const DEFAULT_BINS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Panel {
    /// `N = 4`, `L_p = 512`, re-transmissions swept.
    A,
    /// As `A` with `N = 8`.
    B,
    /// `N` in {4, 8}, `L_p = 1024`, `L_d = 2048`, two re-transmissions.
    C,
    /// Carrier offset swept, simulation only.
    D,
    /// Histograms of the two region maxima.
    Pdf,
    Custom,
}

impl FromStr for Panel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "a" => Ok(Panel::A),
            "b" => Ok(Panel::B),
            "c" => Ok(Panel::C),
            "d" => Ok(Panel::D),
            "pdf" => Ok(Panel::Pdf),
            "custom" => Ok(Panel::Custom),
            other => Err(Error::InvalidArgument(format!("unknown panel {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub panel: Panel,
    /// Values not swept below (`L_p`, `L_h`, `L_d`, `E_s`, `sigma_f^2`).
    pub base: SystemConfig,
    pub n_list: Vec<usize>,
    pub snr_points_db: Vec<f64>,
    pub n_rt_list: Vec<usize>,
    pub foff_fac_list: Vec<f64>,
    pub methods: Vec<Method>,
    pub trials: u64,
    pub master_seed: u64,
    pub precision_bits: u32,
    pub quadrature: QuadratureSpec,
    pub histogram_bins: usize,
    pub output_path: Option<PathBuf>,
}

impl SweepSpec {
    pub fn recipe(panel: Panel) -> Self {
        let snr: Vec<f64> = (0..=10).map(f64::from).collect();
        let mut spec = Self {
            panel,
            base: SystemConfig::default(),
            n_list: vec![4],
            snr_points_db: snr,
            n_rt_list: vec![1, 2, 3, 4],
            foff_fac_list: vec![0.0],
            methods: vec![Method::Quadrature, Method::MonteCarlo],
            trials: DEFAULT_TRIALS,
            master_seed: 1,
            precision_bits: DEFAULT_PRECISION_BITS,
            quadrature: QuadratureSpec::coarse_default(),
            histogram_bins: DEFAULT_BINS,
            output_path: None,
        };
        match panel {
            Panel::A | Panel::Custom => {}
            Panel::B => spec.n_list = vec![8],
            Panel::C => {
                spec.n_list = vec![4, 8];
                spec.base.preamble_len = 1024;
                spec.base.data_len = 2048;
                spec.n_rt_list = vec![2];
            }
            Panel::D => {
                spec.n_rt_list = vec![1];
                spec.foff_fac_list = vec![0.0, 0.05, 0.1, 0.2];
                spec.methods = vec![Method::MonteCarlo];
            }
            Panel::Pdf => {
                spec.snr_points_db = vec![0.0, 10.0];
                spec.n_rt_list = vec![1, 4];
                spec.methods = vec![Method::MonteCarlo];
            }
        }
        spec
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.into()));
        if self.snr_points_db.is_empty() {
            return bad("at least one SNR point is required");
        }
        if self.methods.is_empty() {
            return bad("at least one method is required");
        }
        if self.n_list.is_empty() || self.n_rt_list.is_empty() || self.foff_fac_list.is_empty() {
            return bad("antenna, re-transmission and offset lists must be non-empty");
        }
        if self.trials == 0 && self.methods.contains(&Method::MonteCarlo) {
            return bad("monte_carlo needs at least one trial");
        }
        let analytic = self.methods.iter().find(|m| m.is_analytic());
        if let (Some(m), Some(f)) = (analytic, self.foff_fac_list.iter().find(|&&f| f != 0.0)) {
            return Err(Error::Unsupported(format!(
                "{m} has no model for a frequency offset (foff_fac = {f})"
            )));
        }
        for c in self.points() {
            c.validate()?;
        }
        Ok(())
    }

    /// Every operating point of the sweep.
    pub fn points(&self) -> Vec<SystemConfig> {
        let mut out = Vec::new();
        for &n in &self.n_list {
            for &n_rt in &self.n_rt_list {
                for &foff in &self.foff_fac_list {
                    for &snr in &self.snr_points_db {
                        out.push(SystemConfig {
                            n_antennas: n,
                            n_retransmissions: n_rt,
                            foff_fac: foff,
                            snr_av_b_p_db: snr,
                            ..self.base
                        });
                    }
                }
            }
        }
        out
    }
}

/// One line of the erasure CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub snr_db: f64,
    pub n: usize,
    pub n_rt: usize,
    pub lp: usize,
    pub lh: usize,
    pub ld: usize,
    pub foff_fac: f64,
    pub method: Method,
    pub p_erasure: f64,
    pub p_ne_one: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub trials: u64,
    pub seed: u64,
}

impl ResultRow {
    pub fn new(config: &SystemConfig, estimate: &ErasureEstimate) -> Self {
        Self {
            snr_db: config.snr_av_b_p_db,
            n: config.n_antennas,
            n_rt: config.n_retransmissions,
            lp: config.preamble_len,
            lh: config.channel_len,
            ld: config.data_len,
            foff_fac: config.foff_fac,
            method: estimate.method,
            p_erasure: estimate.p_erasure,
            p_ne_one: estimate.p_ne_one,
            ci_low: estimate.ci_low,
            ci_high: estimate.ci_high,
            trials: estimate.trials,
            seed: estimate.seed,
        }
    }

    fn sort_key_cmp(&self, other: &Self) -> Ordering {
        (self.n, self.lp, self.ld, self.lh, self.n_rt)
            .cmp(&(other.n, other.lp, other.ld, other.lh, other.n_rt))
            .then(self.foff_fac.total_cmp(&other.foff_fac))
            .then(self.snr_db.total_cmp(&other.snr_db))
            .then(self.method.cmp(&other.method))
    }
}

pub fn sort_rows(rows: &mut [ResultRow]) {
    rows.sort_by(ResultRow::sort_key_cmp);
}

/// Runs every (point, method) pair of an erasure panel.
pub fn run_panel(spec: &SweepSpec) -> Result<Vec<ResultRow>> {
    run_panel_with(spec, |_| {})
}

/// As [`run_panel`], calling `progress` as each row completes.
pub fn run_panel_with(
    spec: &SweepSpec,
    progress: impl Fn(&ResultRow) + Sync,
) -> Result<Vec<ResultRow>> {
    if spec.panel == Panel::Pdf {
        return Err(Error::InvalidArgument(
            "the pdf panel produces histograms; use run_pdf_panel".into(),
        ));
    }
    spec.validate()?;
    let jobs: Vec<(SystemConfig, Method)> = spec
        .points()
        .into_iter()
        .flat_map(|c| spec.methods.iter().map(move |&m| (c, m)))
        .collect();
    let mut rows = jobs
        .par_iter()
        .map(|(config, method)| {
            let estimate = match method {
                Method::MonteCarlo => estimate_erasure_mc(config, spec.trials, spec.master_seed)?,
                analytic => estimate_erasure_analytic(
                    config,
                    &derive_variances(config)?,
                    *analytic,
                    spec.precision_bits,
                    &spec.quadrature,
                )?,
            };
            let row = ResultRow::new(config, &estimate);
            progress(&row);
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    sort_rows(&mut rows);
    Ok(rows)
}

pub const CSV_HEADER: &str =
    "snr_db,n,n_rt,lp,lh,ld,foff_fac,method,p_erasure,p_ne_one,ci_low,ci_high,trials,seed";

/// Twelve significant digits.
fn fmt_prob(x: f64) -> String {
    format!("{x:.11e}")
}

/// CSV text for `rows`, sorted into the canonical order.
pub fn format_csv(rows: &[ResultRow]) -> String {
    let mut rows = rows.to_vec();
    sort_rows(&mut rows);
    let mut out = String::with_capacity(64 + rows.len() * 160);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in &rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.snr_db,
            r.n,
            r.n_rt,
            r.lp,
            r.lh,
            r.ld,
            r.foff_fac,
            r.method,
            fmt_prob(r.p_erasure),
            fmt_prob(r.p_ne_one),
            fmt_prob(r.ci_low),
            fmt_prob(r.ci_high),
            r.trials,
            r.seed
        )
        .expect("writing to a String cannot fail");
    }
    out
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn emit_csv(rows: &[ResultRow], path: &Path) -> Result<()> {
    write_file(path, &format_csv(rows))
}

fn field<T: FromStr>(path: &Path, line: usize, name: &str, raw: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    raw.parse().map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line,
        message: format!("column {name}: {e}"),
    })
}

/// Parses text produced by [`format_csv`]. `origin` only labels errors.
pub fn parse_csv(text: &str, origin: &Path) -> Result<Vec<ResultRow>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == CSV_HEADER => {}
        _ => {
            return Err(Error::Parse {
                path: origin.to_path_buf(),
                line: 1,
                message: "missing or unexpected header".into(),
            })
        }
    }
    let names: Vec<&str> = CSV_HEADER.split(',').collect();
    let mut rows = Vec::new();
    for (idx, line) in lines {
        let ln = idx + 1;
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != names.len() {
            return Err(Error::Parse {
                path: origin.to_path_buf(),
                line: ln,
                message: format!("expected {} columns, got {}", names.len(), cols.len()),
            });
        }
        let method = cols[7].parse::<Method>().map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            line: ln,
            message: e.to_string(),
        })?;
        rows.push(ResultRow {
            snr_db: field(origin, ln, names[0], cols[0])?,
            n: field(origin, ln, names[1], cols[1])?,
            n_rt: field(origin, ln, names[2], cols[2])?,
            lp: field(origin, ln, names[3], cols[3])?,
            lh: field(origin, ln, names[4], cols[4])?,
            ld: field(origin, ln, names[5], cols[5])?,
            foff_fac: field(origin, ln, names[6], cols[6])?,
            method,
            p_erasure: field(origin, ln, names[8], cols[8])?,
            p_ne_one: field(origin, ln, names[9], cols[9])?,
            ci_low: field(origin, ln, names[10], cols[10])?,
            ci_high: field(origin, ln, names[11], cols[11])?,
            trials: field(origin, ln, names[12], cols[12])?,
            seed: field(origin, ln, names[13], cols[13])?,
        });
    }
    Ok(rows)
}

pub fn read_csv(path: &Path) -> Result<Vec<ResultRow>> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_csv(&text, path)
}

/// Which region maximum a histogram row describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum MaxVariable {
    /// Signal region.
    Z,
    /// Noise-only region.
    Y,
}

impl MaxVariable {
    pub fn as_str(&self) -> &'static str {
        match self {
            MaxVariable::Z => "z",
            MaxVariable::Y => "y",
        }
    }
}

/// One bin of the pdf-panel CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct HistogramRow {
    pub snr_db: f64,
    pub n: usize,
    pub n_rt: usize,
    pub lp: usize,
    pub lh: usize,
    pub ld: usize,
    pub variable: MaxVariable,
    pub bin_low: f64,
    pub bin_high: f64,
    pub count: u64,
    pub density: f64,
    /// Analytic density of the maximum at the bin centre.
    pub analytic_pdf: f64,
}

pub const HISTOGRAM_CSV_HEADER: &str =
    "snr_db,n,n_rt,lp,lh,ld,variable,bin_low,bin_high,count,density,analytic_pdf";

fn histogram_rows(
    config: &SystemConfig,
    variable: MaxVariable,
    hist: &Histogram,
    pdf: impl Fn(f64) -> f64,
) -> Vec<HistogramRow> {
    hist.bin_edges
        .windows(2)
        .zip(hist.counts.iter().zip(&hist.normalized_density))
        .map(|(e, (&count, &density))| HistogramRow {
            snr_db: config.snr_av_b_p_db,
            n: config.n_antennas,
            n_rt: config.n_retransmissions,
            lp: config.preamble_len,
            lh: config.channel_len,
            ld: config.data_len,
            variable,
            bin_low: e[0],
            bin_high: e[1],
            count,
            density,
            analytic_pdf: pdf(0.5 * (e[0] + e[1])),
        })
        .collect()
}

/// Histograms of both region maxima at every point of the sweep.
pub fn run_pdf_panel(spec: &SweepSpec) -> Result<Vec<HistogramRow>> {
    let mut spec = spec.clone();
    // Only the simulator produces histograms.
    spec.methods = vec![Method::MonteCarlo];
    spec.validate()?;
    let mut rows = Vec::new();
    for config in spec.points() {
        let stats =
            histogram_max_statistics(&config, spec.trials, spec.master_seed, spec.histogram_bins)?;
        let tp = TailPair::from_config(&config, &derive_variances(&config)?)?;
        rows.extend(histogram_rows(
            &config,
            MaxVariable::Z,
            &stats.signal,
            |z| pdf_max_signal(z, &tp).unwrap_or(0.0),
        ));
        rows.extend(histogram_rows(&config, MaxVariable::Y, &stats.noise, |y| {
            pdf_max_noise(y, &tp).unwrap_or(0.0)
        }));
    }
    Ok(rows)
}

pub fn format_histogram_csv(rows: &[HistogramRow]) -> String {
    let mut out = String::new();
    out.push_str(HISTOGRAM_CSV_HEADER);
    out.push('\n');
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.snr_db,
            r.n,
            r.n_rt,
            r.lp,
            r.lh,
            r.ld,
            r.variable.as_str(),
            fmt_prob(r.bin_low),
            fmt_prob(r.bin_high),
            r.count,
            fmt_prob(r.density),
            fmt_prob(r.analytic_pdf)
        )
        .expect("writing to a String cannot fail");
    }
    out
}

pub fn emit_histogram_csv(rows: &[HistogramRow], path: &Path) -> Result<()> {
    write_file(path, &format_histogram_csv(rows))
}
