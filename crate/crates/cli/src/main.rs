//! `erasure`: sweeps of the preamble erasure probability, written as CSV.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};

use clap::Parser;
use erasure_core::analytic::QuadratureSpec;
use erasure_core::experiments::{self, format_csv, format_histogram_csv, Panel, SweepSpec};
use erasure_core::model::ConfigOverrides;
use erasure_core::{Error, Method};

#[derive(Debug, Parser)]
#[command(
    name = "erasure",
    version,
    about = "Probability of erasure for MIMO-OFDM preamble detection"
)]
struct Args {
    /// Built-in recipe: a, b, c, d, pdf or custom.
    #[arg(long, default_value = "custom")]
    panel: Panel,
    /// Antenna count N (replaces the recipe's list).
    #[arg(long)]
    n: Option<usize>,
    /// Re-transmission counts, comma separated.
    #[arg(long = "n-rt", value_delimiter = ',')]
    n_rt: Option<Vec<usize>>,
    /// Preamble length L_p.
    #[arg(long)]
    lp: Option<usize>,
    /// Channel length L_h.
    #[arg(long)]
    lh: Option<usize>,
    /// Data length L_d.
    #[arg(long)]
    ld: Option<usize>,
    /// Average SNR per bit in dB, comma separated.
    #[arg(long = "snr-db", value_delimiter = ',', allow_hyphen_values = true)]
    snr_db: Option<Vec<f64>>,
    /// Carrier offsets as multiples of the subcarrier spacing.
    #[arg(long = "foff-fac", value_delimiter = ',')]
    foff_fac: Option<Vec<f64>>,
    /// Preamble energy per subcarrier.
    #[arg(long)]
    es: Option<f64>,
    /// One-dimensional channel tap variance.
    #[arg(long = "sigma-f-sq")]
    sigma_f_sq: Option<f64>,
    /// closed-form, quadrature and/or monte-carlo, comma separated.
    #[arg(long, value_delimiter = ',')]
    method: Option<Vec<Method>>,
    /// Simulated frames per point.
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long = "precision-bits")]
    precision_bits: Option<u32>,
    /// Quadrature step.
    #[arg(long)]
    delta: Option<f64>,
    /// Quadrature upper limit.
    #[arg(long)]
    zmax: Option<f64>,
    /// Histogram bins for the pdf panel.
    #[arg(long)]
    bins: Option<usize>,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// key=value file with scenario parameters, applied before the flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Suppress the progress counter.
    #[arg(long)]
    quiet: bool,
}

fn build_spec(args: &Args) -> Result<SweepSpec, Error> {
    let mut spec = SweepSpec::recipe(args.panel);

    if let Some(path) = &args.config {
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.clone(),
            source,
        })?;
        let o = ConfigOverrides::parse(&text, path)?;
        o.apply(&mut spec.base);
        // Swept quantities set in the file replace the recipe's lists.
        if let Some(n) = o.n_antennas {
            spec.n_list = vec![n];
        }
        if let Some(n_rt) = o.n_retransmissions {
            spec.n_rt_list = vec![n_rt];
        }
        if let Some(snr) = o.snr_av_b_p_db {
            spec.snr_points_db = vec![snr];
        }
        if let Some(f) = o.foff_fac {
            spec.foff_fac_list = vec![f];
        }
    }

    if let Some(n) = args.n {
        spec.n_list = vec![n];
    }
    if let Some(v) = &args.n_rt {
        spec.n_rt_list = v.clone();
    }
    if let Some(v) = args.lp {
        spec.base.preamble_len = v;
    }
    if let Some(v) = args.lh {
        spec.base.channel_len = v;
    }
    if let Some(v) = args.ld {
        spec.base.data_len = v;
    }
    if let Some(v) = &args.snr_db {
        spec.snr_points_db = v.clone();
    }
    if let Some(v) = &args.foff_fac {
        spec.foff_fac_list = v.clone();
    }
    if let Some(v) = args.es {
        spec.base.preamble_energy = v;
    }
    if let Some(v) = args.sigma_f_sq {
        spec.base.channel_var_1d = v;
    }
    if let Some(v) = &args.method {
        spec.methods = v.clone();
    }
    if let Some(v) = args.trials {
        spec.trials = v;
    }
    if let Some(v) = args.seed {
        spec.master_seed = v;
    }
    if let Some(v) = args.precision_bits {
        spec.precision_bits = v;
    }
    if args.delta.is_some() || args.zmax.is_some() {
        spec.quadrature = QuadratureSpec::new(
            args.delta.unwrap_or(spec.quadrature.delta),
            args.zmax.unwrap_or(spec.quadrature.z_max),
        )?;
    }
    if let Some(v) = args.bins {
        spec.histogram_bins = v;
    }
    spec.output_path = args.out.clone();
    Ok(spec)
}

fn run(args: &Args) -> Result<(), Error> {
    let spec = build_spec(args)?;
    spec.validate()?;
    if !args.quiet {
        for config in spec.points().iter().take(1) {
            for w in config.validate()? {
                eprintln!("warning: {w}");
            }
        }
    }

    let text = if spec.panel == Panel::Pdf {
        format_histogram_csv(&experiments::run_pdf_panel(&spec)?)
    } else {
        let total = spec.points().len() * spec.methods.len();
        let done = AtomicUsize::new(0);
        let rows = experiments::run_panel_with(&spec, |row| {
            let k = done.fetch_add(1, Ordering::Relaxed) + 1;
            if !args.quiet {
                eprintln!(
                    "[{k}/{total}] n={} n_rt={} snr={} dB foff={} {}: {:.4e}",
                    row.n, row.n_rt, row.snr_db, row.foff_fac, row.method, row.p_erasure
                );
            }
        })?;
        format_csv(&rows)
    };

    match &spec.output_path {
        Some(path) => fs::write(path, text).map_err(|source| Error::Io {
            path: path.clone(),
            source,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
