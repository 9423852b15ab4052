use std::f64::consts::PI;

use approx::assert_relative_eq;
use proptest::prelude::*;
use tdh_core::circuit::{simulate_transient, Board, OscillatorCircuit};
use tdh_core::spectral::{
    compute_spectrum, dc_rf_efficiency, extract_harmonics, find_fundamental, spectrum_of_samples, tunable_range,
    Spectrum, SpectrumOptions, Window,
};

const N: usize = 1 << 14;
const DT: f64 = 1.0 / 10.24e9;

fn df() -> f64 {
    1.0 / (N as f64 * DT)
}

fn tones(parts: &[(f64, f64)]) -> Vec<f64> {
    (0..N)
        .map(|i| parts.iter().map(|&(a, f)| a * (2.0 * PI * f * i as f64 * DT).sin()).sum())
        .collect()
}

fn wide(window: Window) -> SpectrumOptions {
    SpectrumOptions { window, load_resistance: 50.0, span: (0.0, f64::INFINITY) }
}

fn index_of(s: &Spectrum, f: f64) -> usize {
    s.frequency_bins.iter().position(|&x| (x - f).abs() < 0.5 * s.bin_spacing()).unwrap()
}

#[test]
fn two_equal_tones_dominate_by_forty_db() {
    let (f1, f2) = (160.0 * df(), 480.0 * df());
    let s = spectrum_of_samples(&tones(&[(0.1, f1), (0.1, f2)]), DT, &wide(Window::Hann)).unwrap();
    let (i1, i2) = (index_of(&s, f1), index_of(&s, f2));
    assert!((s.power_dbm[i1] - s.power_dbm[i2]).abs() < 1e-6);
    for (i, &p) in s.power_dbm.iter().enumerate().skip(1) {
        if i.abs_diff(i1) > 1 && i.abs_diff(i2) > 1 {
            assert!(p <= s.power_dbm[i1] - 40.0, "bin {i}: {p}");
        }
    }
}

#[test]
fn argmax_returns_the_exact_bin() {
    let bins: Vec<f64> = (0..100).map(|i| f64::from(i) * 10e6).collect();
    let mut power = vec![-120.0; 100];
    power[30] = -20.0;
    power[60] = -35.0;
    power[90] = -50.0;
    let s = Spectrum::from_parts(bins, power, 10e6, (0.0, 1e9)).unwrap();
    assert_eq!(find_fundamental(&s, -80.0).unwrap(), (300e6, -20.0));
    let set = extract_harmonics(&s, 300e6, 0.02, -80.0);
    let orders: Vec<u32> = set.harmonics.iter().map(|h| h.order).collect();
    assert_eq!(orders, vec![2, 3]);
    assert_eq!(set.harmonics[1].power_dbm, -50.0);
}

#[test]
fn low_frequency_board_has_many_harmonics_in_span() {
    let c = OscillatorCircuit::preset(Board::Board4).with_bias(0.2);
    let s = compute_spectrum(&simulate_transient(&c, 2e-6, 1).unwrap(), Window::Hann, 50.0).unwrap();
    let (f, _) = find_fundamental(&s, -80.0).unwrap();
    assert!((f / 384.9e6 - 1.0).abs() < 0.15, "{f}");
    assert!(extract_harmonics(&s, f, 0.02, -80.0).harmonics.len() >= 4);
}

#[test]
fn gigahertz_board_keeps_only_second_harmonic() {
    let c = OscillatorCircuit::preset(Board::Board2).with_bias(0.2);
    let s = compute_spectrum(&simulate_transient(&c, 2e-6, 1).unwrap(), Window::Hann, 50.0).unwrap();
    let (f, _) = find_fundamental(&s, -80.0).unwrap();
    assert!(f > 1e9);
    assert!(extract_harmonics(&s, f, 0.02, -80.0).harmonics.iter().all(|h| h.order == 2));
}

#[test]
fn efficiency_examples() {
    assert_relative_eq!(dc_rf_efficiency(199.6e-6, 664.6e-6).unwrap(), 0.3003, max_relative = 2e-4);
    assert_eq!(dc_rf_efficiency(0.0, 1e-3).unwrap(), 0.0);
    assert_eq!(dc_rf_efficiency(5e-4, 5e-4).unwrap(), 1.0);
    assert!(dc_rf_efficiency(1e-3, 0.0).is_err());
}

fn board1_tuning(kc: f64) -> f64 {
    let mut c = OscillatorCircuit::preset(Board::Board1);
    c.diode.capacitance_voltage_coefficient = kc;
    let points: Vec<(f64, f64)> = [0.15, 0.17, 0.19, 0.21, 0.23]
        .iter()
        .map(|&bias| {
            let trace = simulate_transient(&c.with_bias(bias), 2e-6, 1).unwrap();
            let s = compute_spectrum(&trace, Window::Hann, 50.0).unwrap();
            (bias, find_fundamental(&s, -80.0).unwrap().0)
        })
        .collect();
    tunable_range(&points).unwrap()
}

#[test]
fn tuning_range_grows_with_capacitance_coefficient() {
    let ranges: Vec<f64> = [0.0, 1.5, 3.5].into_iter().map(board1_tuning).collect();
    assert!(ranges[2] > 0.0);
    assert!(ranges[0] < ranges[1] && ranges[1] < ranges[2], "{ranges:?}");
    assert_eq!(tunable_range(&[(0.1, 7e8), (0.2, 7.05e8)]).unwrap(), 5e6);
}

#[test]
fn spectrum_csv_round_trips_through_text() {
    let s = spectrum_of_samples(&tones(&[(0.1, 100.0 * df())]), DT, &SpectrumOptions::default()).unwrap();
    let mut buf = Vec::new();
    s.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("frequency_Hz,power_dBm\n"));
    assert_eq!(text.lines().count(), s.len() + 1);
}

proptest! {
    #[test]
    fn on_bin_tone_power_is_exact(bin in 20usize..4000, amp in 1e-4f64..1.0, w in 0usize..3) {
        let window = [Window::Rectangular, Window::Hann, Window::BlackmanHarris][w];
        let f = bin as f64 * df();
        let s = spectrum_of_samples(&tones(&[(amp, f)]), DT, &wide(window)).unwrap();
        let expected = 10.0 * (amp * amp / 100.0 / 1e-3).log10();
        prop_assert!((s.power_dbm[index_of(&s, f)] - expected).abs() < 0.1);
    }

    #[test]
    fn parseval_holds_for_rectangular_window(seed in 0u64..1000) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..N).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let s = spectrum_of_samples(&x, DT, &wide(Window::Rectangular)).unwrap();
        let mean = x.iter().sum::<f64>() / N as f64;
        let direct = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / N as f64 / 50.0;
        prop_assert!((s.total_power_watts() / direct - 1.0).abs() < 0.01);
    }

    #[test]
    fn fundamental_ignores_uniform_offsets(offset in -60.0f64..60.0, seed in 0u64..500) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let bins: Vec<f64> = (0..512).map(|i| f64::from(i) * 5e6).collect();
        let power: Vec<f64> = (0..512).map(|_| rng.gen_range(-70.0..-10.0)).collect();
        let a = Spectrum::from_parts(bins.clone(), power.clone(), 5e6, (0.0, 3e9)).unwrap();
        let b = Spectrum::from_parts(bins, power.iter().map(|p| p + offset).collect(), 5e6, (0.0, 3e9)).unwrap();
        prop_assert_eq!(find_fundamental(&a, -300.0).unwrap().0, find_fundamental(&b, -300.0).unwrap().0);
    }

    #[test]
    fn efficiency_is_jointly_scale_invariant(p in 1e-6f64..1e-2, dc in 1e-5f64..1e-1, alpha in 1e-3f64..1e3) {
        let base = dc_rf_efficiency(p, dc).unwrap();
        let scaled = dc_rf_efficiency(alpha * p, alpha * dc).unwrap();
        prop_assert!((base - scaled).abs() <= 1e-12 * base.max(1e-300));
    }

    #[test]
    fn harmonics_stay_within_tolerance(f0 in 50e6f64..900e6, tol in 0.005f64..0.05, seed in 0u64..200) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let bins: Vec<f64> = (0..3000).map(|i| f64::from(i) * 1e6).collect();
        let power: Vec<f64> = (0..3000).map(|_| rng.gen_range(-90.0..-20.0)).collect();
        let s = Spectrum::from_parts(bins, power, 1e6, (0.0, 3e9)).unwrap();
        let set = extract_harmonics(&s, f0, tol, -80.0);
        let mut last = 1;
        for h in &set.harmonics {
            let k = f64::from(h.order);
            prop_assert!((h.frequency_hz - k * f0).abs() <= tol * k * f0);
            prop_assert!(h.order > last);
            last = h.order;
        }
    }
}
