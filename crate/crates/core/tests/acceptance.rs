//! Acceptance suite: one line per criterion, nonzero exit if any fails.
//!
//! Run with `cargo test -p erasure-core --test acceptance`.

use std::process::ExitCode;
use std::time::Instant;

use erasure_core::analytic::{
    cdf_max_noise, cdf_max_signal, link_probability_closed_form, p_erasure_all,
    p_ne_one_closed_form, p_ne_one_quadrature, QuadratureSpec, TailPair, DEFAULT_PRECISION_BITS,
};
use erasure_core::experiments::{format_csv, run_panel, Panel, SweepSpec};
use erasure_core::model::{derive_variances, SystemConfig};
use erasure_core::monte_carlo::{estimate_erasure_mc, histogram_max_statistics, Histogram};
use erasure_core::Method;
use rand::{Rng, SeedableRng};
use rand_distr::Exp1;
use rand_xoshiro::Xoshiro256PlusPlus;
use rayon::prelude::*;

const FRAMES: u64 = 100_000;
const SNR_GRID: [f64; 4] = [2.0, 4.0, 6.0, 8.0];

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn config(n: usize, n_rt: usize, lp: usize, ld: usize, snr: f64) -> SystemConfig {
    SystemConfig {
        n_antennas: n,
        n_retransmissions: n_rt,
        preamble_len: lp,
        channel_len: 10,
        data_len: ld,
        snr_av_b_p_db: snr,
        ..SystemConfig::default()
    }
}

fn tail_pair(c: &SystemConfig) -> TailPair {
    TailPair::from_config(c, &derive_variances(c).unwrap()).unwrap()
}

fn analytic_erasure(c: &SystemConfig) -> f64 {
    let link = link_probability_closed_form(&tail_pair(c), DEFAULT_PRECISION_BITS).unwrap();
    erasure_core::analytic::p_erasure_all_from_link(
        link.p_erasure_link,
        c.n_antennas,
        c.n_retransmissions,
    )
}

fn method_agreement() -> Outcome {
    let q = QuadratureSpec::coarse_default();
    let mut worst: f64 = 0.0;
    let mut lines = Vec::new();
    for n_rt in [1, 2] {
        for snr in SNR_GRID {
            let c = config(4, n_rt, 512, 1024, snr);
            let quad = p_ne_one_quadrature(&tail_pair(&c), &q).unwrap().p_ne_one;
            let predicted = p_erasure_all(quad, 4, n_rt);
            let mc = estimate_erasure_mc(&c, FRAMES, 2024).unwrap();
            let hw = mc.ci_half_width();
            let score = (mc.p_erasure - predicted).abs() / hw;
            worst = worst.max(score);
            lines.push(format!(
                "n_rt={n_rt} snr={snr}: mc={:.3e} quad={predicted:.3e} ({score:.2} hw)",
                mc.p_erasure
            ));
        }
    }
    Outcome {
        pass: worst <= 3.0,
        detail: format!("worst {worst:.2} half-widths; {}", lines.join("; ")),
    }
}

/// Direct f64 evaluation of the alternating series, for contrast only.
fn naive_f64(tp: &TailPair) -> f64 {
    let mut binom = 1.0f64;
    let m = tp.m_noise as f64;
    let mut total = 0.0;
    for l in 0..tp.m_noise {
        if l > 0 {
            binom *= (m - l as f64) / l as f64;
        }
        let a = m / (l as f64 + 1.0) * if l % 2 == 0 { binom } else { -binom };
        let b = (l as f64 + 1.0) / (2.0 * tp.sigma_y_sq);
        let mut inner = 0.0;
        let mut sb = 1.0f64;
        for k in 0..tp.m_signal {
            if k > 0 {
                sb *= (tp.m_signal - k) as f64 / k as f64;
            }
            let c = (k as f64 + 1.0) / (2.0 * tp.sigma_z_sq);
            inner += if k % 2 == 0 { sb } else { -sb } / (b + c);
        }
        total += a - a * tp.m_signal as f64 / (2.0 * tp.sigma_z_sq) * inner;
    }
    total
}

fn closed_form_stability() -> Outcome {
    let q = QuadratureSpec::coarse_default();
    let mut worst: f64 = 0.0;
    let mut naive_worst: f64 = 0.0;
    let mut count = 0;
    for (lp, ld) in [(512, 1024), (1024, 2048)] {
        for n in [4, 8] {
            for n_rt in [1, 2] {
                for snr in SNR_GRID {
                    let tp = tail_pair(&config(n, n_rt, lp, ld, snr));
                    let exact = p_ne_one_closed_form(&tp, DEFAULT_PRECISION_BITS).unwrap();
                    let quad = p_ne_one_quadrature(&tp, &q).unwrap().p_ne_one;
                    worst = worst.max((exact - quad).abs());
                    let naive = naive_f64(&tp);
                    naive_worst = if naive.is_finite() {
                        naive_worst.max((naive - quad).abs())
                    } else {
                        f64::INFINITY
                    };
                    count += 1;
                }
            }
        }
    }
    Outcome {
        pass: worst <= 1e-4,
        detail: format!(
            "{count} configs, max |closed - quadrature| = {worst:.2e} (plain f64 series: {naive_worst:.2e})"
        ),
    }
}

fn antenna_gap() -> Outcome {
    let mut worst = f64::INFINITY;
    let mut lines = Vec::new();
    for n_rt in [1, 2] {
        for snr in [4.0, 6.0, 8.0] {
            let p4 = analytic_erasure(&config(4, n_rt, 512, 1024, snr));
            let p8 = analytic_erasure(&config(8, n_rt, 512, 1024, snr));
            let ratio = p8 / p4;
            worst = worst.min(ratio);
            lines.push(format!("n_rt={n_rt} snr={snr}: {ratio:.1}"));
        }
    }
    Outcome {
        pass: worst >= 100.0,
        detail: format!("min p(N=8)/p(N=4) = {worst:.1}; {}", lines.join(", ")),
    }
}

fn preamble_gain() -> Outcome {
    let mut min_ratio = f64::INFINITY;
    let mut max_ratio: f64 = 0.0;
    let mut lines = Vec::new();
    for snr in SNR_GRID {
        let short = analytic_erasure(&config(4, 2, 512, 1024, snr));
        let long = analytic_erasure(&config(4, 2, 1024, 2048, snr));
        let ratio = short / long;
        min_ratio = min_ratio.min(ratio);
        max_ratio = max_ratio.max(ratio);
        lines.push(format!("snr={snr}: {ratio:.1}"));
    }
    Outcome {
        pass: min_ratio >= 10.0 && max_ratio >= 100.0,
        detail: format!(
            "N=4 N_rt=2, ratio min {min_ratio:.1} max {max_ratio:.1}; {}",
            lines.join(", ")
        ),
    }
}

fn cfo_monotonicity() -> Outcome {
    let mut prev: Option<(f64, f64)> = None;
    let mut pass = true;
    let mut lines = Vec::new();
    for foff in [0.0, 0.05, 0.1, 0.2] {
        let c = SystemConfig {
            foff_fac: foff,
            ..config(4, 1, 512, 1024, 0.0)
        };
        let est = estimate_erasure_mc(&c, FRAMES, 77).unwrap();
        let se = (est.p_erasure * (1.0 - est.p_erasure) / FRAMES as f64).sqrt();
        if let Some((p, s)) = prev {
            if est.p_erasure + 3.0 * (s * s + se * se).sqrt() < p {
                pass = false;
            }
        }
        prev = Some((est.p_erasure, se));
        lines.push(format!("foff={foff}: {:.4e}", est.p_erasure));
    }
    Outcome {
        pass,
        detail: format!("N=4 N_rt=1 snr=0 dB; {}", lines.join(", ")),
    }
}

/// Fraction of draws in which the largest of `ms` exponentials with mean
/// `2 vz` beats the largest of `mn` with mean `2 vy`.
fn brute_force_no_erasure(ms: usize, mn: usize, vz: f64, vy: f64, draws: u64, seed: u64) -> f64 {
    const CHUNK: u64 = 100_000;
    let wins: u64 = (0..draws.div_ceil(CHUNK))
        .into_par_iter()
        .map(|chunk| {
            let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed ^ chunk.wrapping_mul(0x9e37_79b9));
            let todo = CHUNK.min(draws - chunk * CHUNK);
            let mut wins = 0;
            for _ in 0..todo {
                let z = (0..ms)
                    .map(|_| rng.sample::<f64, _>(Exp1))
                    .fold(0.0, f64::max);
                let y = (0..mn)
                    .map(|_| rng.sample::<f64, _>(Exp1))
                    .fold(0.0, f64::max);
                if 2.0 * vz * z > 2.0 * vy * y {
                    wins += 1;
                }
            }
            wins
        })
        .sum();
    wins as f64 / draws as f64
}

fn small_instance_oracles() -> Outcome {
    let q = QuadratureSpec::coarse_default();
    let mut pass = true;
    let mut lines = Vec::new();

    let two = p_ne_one_closed_form(&TailPair::new(1, 1, 3.0, 1.0).unwrap(), 256).unwrap();
    pass &= (two - 0.75).abs() < 1e-12;
    lines.push(format!("two-exponential {two}"));

    for (ms, mn, expected) in [(1, 1, 0.5), (2, 3, 0.4)] {
        let tp = TailPair::new(ms, mn, 0.5, 0.5).unwrap();
        let cf = p_ne_one_closed_form(&tp, 256).unwrap();
        let qd = p_ne_one_quadrature(&tp, &q).unwrap().p_ne_one;
        pass &= (cf - expected).abs() < 1e-12 && (qd - expected).abs() < 2e-3;
        lines.push(format!(
            "exchangeable ({ms},{mn}) closed {cf:.6} quad {qd:.6}"
        ));
    }

    let draws = 10_000_000;
    for (idx, (ms, mn)) in [(2, 3), (3, 5), (10, 20)].into_iter().enumerate() {
        let (vz, vy) = (1.0, 0.25);
        let tp = TailPair::new(ms, mn, vz, vy).unwrap();
        let oracle = brute_force_no_erasure(ms, mn, vz, vy, draws, 1000 + idx as u64);
        let sigma = (oracle * (1.0 - oracle) / draws as f64).sqrt();
        let cf = p_ne_one_closed_form(&tp, DEFAULT_PRECISION_BITS).unwrap();
        let qd = p_ne_one_quadrature(&tp, &q).unwrap().p_ne_one;
        let ok = (cf - oracle).abs() <= 3.0 * sigma && (qd - oracle).abs() <= 3.0 * sigma;
        pass &= ok;
        lines.push(format!(
            "brute ({ms},{mn}) {oracle:.5} vs closed {cf:.5} quad {qd:.5} (sigma {sigma:.1e})"
        ));
    }
    Outcome {
        pass,
        detail: lines.join("; "),
    }
}

/// Fraction of bins whose count lies within five binomial standard
/// deviations of the analytic bin probability.
fn bins_within_bound(hist: &Histogram, links: u64, cdf: impl Fn(f64) -> f64) -> f64 {
    let n = links as f64;
    let ok = hist
        .bin_edges
        .windows(2)
        .zip(&hist.counts)
        .filter(|(e, &count)| {
            let p = cdf(e[1]) - cdf(e[0]);
            (count as f64 / n - p).abs() <= 5.0 * (p * (1.0 - p) / n).sqrt()
        })
        .count();
    ok as f64 / hist.bins() as f64
}

fn distribution_reproduction() -> Outcome {
    let mut pass = true;
    let mut lines = Vec::new();
    for n in [4, 8] {
        for n_rt in [1, 2] {
            for snr in [8.0, 10.0] {
                let c = config(n, n_rt, 512, 1024, snr);
                let tp = tail_pair(&c);
                let stats = histogram_max_statistics(&c, 5_000, 31, 50).unwrap();
                let tail = stats.signal_tail_fraction();
                let z_ok = bins_within_bound(&stats.signal, stats.links, |z| {
                    cdf_max_signal(z, &tp).unwrap()
                });
                let y_ok = bins_within_bound(&stats.noise, stats.links, |y| {
                    cdf_max_noise(y, &tp).unwrap()
                });
                pass &= tail < 1e-3 && z_ok >= 0.95 && y_ok >= 0.95;
                lines.push(format!(
                    "N={n} N_rt={n_rt} snr={snr}: P(Z>10)={tail:.1e} bins ok z {:.0}% y {:.0}%",
                    100.0 * z_ok,
                    100.0 * y_ok
                ));
            }
        }
    }
    Outcome {
        pass,
        detail: lines.join("; "),
    }
}

fn determinism() -> Outcome {
    let mut spec = SweepSpec::recipe(Panel::A);
    spec.n_rt_list = vec![1, 2];
    spec.snr_points_db = vec![0.0, 2.0];
    spec.methods = vec![Method::ClosedForm, Method::Quadrature, Method::MonteCarlo];
    spec.trials = 2_000;
    spec.master_seed = 5;
    let render = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| format_csv(&run_panel(&spec).unwrap()))
    };
    let dir = tempfile::tempdir().unwrap();
    let paths: Vec<_> = [1, 1, 4]
        .iter()
        .enumerate()
        .map(|(i, &threads)| {
            let path = dir.path().join(format!("run{i}.csv"));
            std::fs::write(&path, render(threads)).unwrap();
            path
        })
        .collect();
    let bytes: Vec<Vec<u8>> = paths.iter().map(|p| std::fs::read(p).unwrap()).collect();
    let same = bytes.windows(2).all(|w| w[0] == w[1]);
    Outcome {
        pass: same && !bytes[0].is_empty(),
        detail: format!(
            "{} bytes, runs with 1, 1 and 4 workers identical: {same}",
            bytes[0].len()
        ),
    }
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("method agreement", method_agreement),
        ("closed-form stability", closed_form_stability),
        ("antenna-count gap", antenna_gap),
        ("preamble-length gain", preamble_gain),
        ("CFO monotonicity", cfo_monotonicity),
        ("small-instance oracles", small_instance_oracles),
        ("distribution reproduction", distribution_reproduction),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (idx, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        if !outcome.pass {
            failed += 1;
        }
        println!(
            "{} [{}] {name} ({:.1}s): {}",
            if outcome.pass { "PASS" } else { "FAIL" },
            idx + 1,
            start.elapsed().as_secs_f64(),
            outcome.detail
        );
    }
    if failed == 0 {
        println!("acceptance: all {} criteria passed", criteria.len());
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} of {} criteria failed", criteria.len());
        ExitCode::FAILURE
    }
}
