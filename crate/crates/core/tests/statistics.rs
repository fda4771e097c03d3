//! Simulator against the analytic model on small configurations.

use erasure_core::analytic::{
    p_erasure_all_from_link, p_ne_one_closed_form, p_ne_one_quadrature, QuadratureSpec, TailPair,
};
use erasure_core::baseband::{
    generate_channel, generate_preamble, matched_filter_ifft, transmit_receive_link,
};
use erasure_core::model::{derive_variances, SystemConfig};
use erasure_core::monte_carlo::{simulate_frames, RandomStream};
use erasure_core::transform::Transform;

fn small(snr: f64) -> SystemConfig {
    SystemConfig {
        n_antennas: 2,
        n_retransmissions: 1,
        preamble_len: 64,
        channel_len: 4,
        data_len: 128,
        snr_av_b_p_db: snr,
        ..SystemConfig::default()
    }
}

fn link_erasure(c: &SystemConfig) -> f64 {
    let tp = TailPair::from_config(c, &derive_variances(c).unwrap()).unwrap();
    1.0 - p_ne_one_quadrature(&tp, &QuadratureSpec::coarse_default())
        .unwrap()
        .p_ne_one
}

#[test]
fn link_erasure_rate_matches_quadrature() {
    for snr in [-4.0, 0.0] {
        let c = small(snr);
        let tally = simulate_frames(&c, 40_000, 11).unwrap();
        let q = link_erasure(&c);
        let sigma = (q * (1.0 - q) / tally.links as f64).sqrt();
        let rate = tally.link_rate();
        assert!(
            (rate - q).abs() <= 3.0 * sigma,
            "snr {snr}: simulated {rate}, analytic {q}, sigma {sigma}"
        );
    }
}

#[test]
fn frame_rate_follows_link_rate() {
    let c = SystemConfig {
        n_antennas: 3,
        ..small(-2.0)
    };
    let tally = simulate_frames(&c, 20_000, 12).unwrap();
    let predicted = p_erasure_all_from_link(tally.link_rate(), 3, 1);
    let sigma = (predicted * (1.0 - predicted) / tally.frames as f64).sqrt();
    assert!(
        (tally.frame_rate() - predicted).abs() <= 3.0 * sigma,
        "frames {} vs {predicted}",
        tally.frame_rate()
    );
}

#[test]
fn noise_region_taps_are_exponential() {
    let c = SystemConfig {
        preamble_len: 512,
        channel_len: 10,
        data_len: 1024,
        ..small(3.0)
    };
    let v = derive_variances(&c).unwrap();
    let t = Transform::new(c.preamble_len).unwrap();
    let mut rng = RandomStream::new(3, 0);
    let mut power = Vec::new();
    while power.len() < 100_000 {
        let s = generate_preamble(c.preamble_len, c.preamble_energy, &mut rng).unwrap();
        let h = generate_channel(c.channel_len, c.channel_var_1d, &mut rng).unwrap();
        let r = transmit_receive_link(&t, &s, &h, v.sigma_w_sq, 0.0, &mut rng).unwrap();
        let taps = matched_filter_ifft(&t, &r, &s, c.preamble_energy).unwrap();
        power.extend(taps[c.channel_len..].iter().map(|x| x.norm_sqr()));
    }
    let n = power.len() as f64;
    let mean = power.iter().sum::<f64>() / n;
    let expected = 2.0 * v.sigma_y_sq;
    assert!(
        (mean / expected - 1.0).abs() < 0.02,
        "mean {mean}, expected {expected}"
    );
    // Exponential shape: the tail beyond the mean holds 1/e of the mass.
    let above = power.iter().filter(|&&p| p > expected).count() as f64 / n;
    assert!((above - (-1.0f64).exp()).abs() < 0.01, "tail {above}");
}

#[test]
fn signal_region_taps_match_channel_plus_noise() {
    let c = SystemConfig {
        preamble_len: 256,
        channel_len: 8,
        data_len: 512,
        ..small(2.0)
    };
    let v = derive_variances(&c).unwrap();
    let t = Transform::new(c.preamble_len).unwrap();
    let mut rng = RandomStream::new(4, 0);
    let (mut acc, mut count) = (0.0, 0usize);
    while count < 100_000 {
        let s = generate_preamble(c.preamble_len, c.preamble_energy, &mut rng).unwrap();
        let h = generate_channel(c.channel_len, c.channel_var_1d, &mut rng).unwrap();
        let r = transmit_receive_link(&t, &s, &h, v.sigma_w_sq, 0.0, &mut rng).unwrap();
        let taps = matched_filter_ifft(&t, &r, &s, c.preamble_energy).unwrap();
        acc += taps[..c.channel_len]
            .iter()
            .map(|x| x.norm_sqr())
            .sum::<f64>();
        count += c.channel_len;
    }
    let mean = acc / count as f64;
    let expected = 2.0 * v.sigma_z_sq;
    assert!(
        (mean / expected - 1.0).abs() < 0.02,
        "mean {mean}, expected {expected}"
    );
}

#[test]
fn noiseless_links_are_never_erased() {
    let c = small(300.0);
    let tally = simulate_frames(&c, 2_000, 5).unwrap();
    assert_eq!(tally.erased_links, 0);
}

#[test]
fn quadrature_converges_to_closed_form() {
    for snr in [-4.0, 0.0, 4.0] {
        let c = small(snr);
        let tp = TailPair::from_config(&c, &derive_variances(&c).unwrap()).unwrap();
        let exact = p_ne_one_closed_form(&tp, 512).unwrap();
        let coarse = p_ne_one_quadrature(&tp, &QuadratureSpec::new(1e-3, 10.0).unwrap()).unwrap();
        let fine = p_ne_one_quadrature(&tp, &QuadratureSpec::new(1e-4, 10.0).unwrap()).unwrap();
        let (e1, e2) = (
            (coarse.p_ne_one - exact).abs(),
            (fine.p_ne_one - exact).abs(),
        );
        assert!(
            e1 < 5e-4 && e2 < 5e-5 && e2 < e1,
            "{snr}: {exact} vs {e1} / {e2}"
        );
    }
}
