use granusense::dsp::{exp_filter, fundamental_frequency, spectral_peak, synth_tone, TimeSeries};
use proptest::prelude::*;

/// Closed form of the recursion: y_n = (1-α)^n x_0 + Σ_{k=1..n} α(1-α)^{n-k} x_k.
fn closed_form(x: &[f64], alpha: f64) -> Vec<f64> {
    (0..x.len())
        .map(|n| {
            let mut y = (1.0 - alpha).powi(n as i32) * x[0];
            for (k, xk) in x.iter().enumerate().take(n + 1).skip(1) {
                y += alpha * (1.0 - alpha).powi((n - k) as i32) * xk;
            }
            y
        })
        .collect()
}

#[test]
fn recovers_measured_tones() {
    for (i, f) in [156.0, 189.0, 213.0, 172.0].into_iter().enumerate() {
        for snr in [f64::INFINITY, 10.0] {
            let x = synth_tone(f, 15.0, 500.0, 5.0, snr, i as u64).unwrap();
            assert!(
                (fundamental_frequency(&x).unwrap() - f).abs() < 0.1,
                "{f} Hz at {snr} dB"
            );
        }
    }
}

#[test]
fn off_bin_tone_is_interpolated() {
    let x = synth_tone(100.13, 2.0, 500.0, 5.0, f64::INFINITY, 3).unwrap();
    let p = spectral_peak(&x).unwrap();
    assert_eq!(p.bin, 501);
    assert!((p.frequency - 100.13).abs() < 0.02);
    assert!((p.amplitude - 2.0).abs() / 2.0 < 0.02, "{}", p.amplitude);
}

#[test]
fn filter_rejects_alpha_outside_unit_interval() {
    let x = TimeSeries::new(10.0, vec![1.0, 2.0]).unwrap();
    assert!(exp_filter(&x, 0.0).is_err());
    assert!(exp_filter(&x, 1.5).is_err());
}

proptest! {
    #[test]
    fn filter_matches_closed_form(x in prop::collection::vec(-100.0..100.0f64, 1..80), alpha in 0.01..=1.0f64) {
        let y = exp_filter(&TimeSeries::new(500.0, x.clone()).unwrap(), alpha).unwrap();
        for (a, b) in y.values.iter().zip(closed_form(&x, alpha)) {
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn filter_stays_within_input_range(x in prop::collection::vec(-5.0..5.0f64, 1..60), alpha in 0.01..=1.0f64) {
        let y = exp_filter(&TimeSeries::new(1.0, x.clone()).unwrap(), alpha).unwrap();
        let lo = x.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(y.values.iter().all(|v| *v >= lo - 1e-12 && *v <= hi + 1e-12));
    }

    #[test]
    fn clean_tone_frequency_within_a_tenth_of_a_bin(f in 20.0..230.0f64, seed in 0u64..1000) {
        let x = synth_tone(f, 1.0, 500.0, 5.0, f64::INFINITY, seed).unwrap();
        prop_assert!((fundamental_frequency(&x).unwrap() - f).abs() < 0.02);
    }
}
