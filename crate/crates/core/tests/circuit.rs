use std::f64::consts::PI;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tdh_core::circuit::{
    classify_regime, kurokawa_diagnostic, simulate_transient, simulate_transient_with, small_signal_impedances,
    startup_check, Board, OscillatorCircuit, RegimeKind, SimOptions, TransientTrace, MIN_ANALYSIS_SAMPLES,
};
use tdh_core::spectral::{compute_spectrum, find_fundamental, Window};
use tdh_core::Error;

fn board1(bias: f64) -> OscillatorCircuit {
    OscillatorCircuit::preset(Board::Board1).with_bias(bias)
}

fn log_grid(n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| 1e6 * (1e4f64).powf(i as f64 / (n - 1) as f64))
}

#[test]
fn device_resistance_sign_follows_bias() {
    for f in log_grid(200) {
        let (_, z_dev) = small_signal_impedances(&board1(0.050), f);
        assert!(z_dev.re > 0.0, "{f} Hz: {z_dev}");
    }
    let (_, z_dev) = small_signal_impedances(&board1(0.200), 1e6);
    assert!(z_dev.re < 0.0);
}

#[test]
fn passive_network_reactance_vanishes_at_analytic_resonance() {
    // A very large smoothing capacitor shorts node A at RF, leaving the lead inductance in
    // parallel with the DC block and load: Im Y = 0 at w^2 = 1 / (Cb (L - R^2 Cb)).
    let mut c = board1(0.2);
    c.smoothing_capacitance = 1.0;
    c.dc_block_capacitance = 1e-12;
    c.lead_inductance = 8e-9;
    let (l, cb, r) = (c.lead_inductance, c.dc_block_capacitance, c.load_resistance);
    let f = 1.0 / (2.0 * PI * (cb * (l - r * r * cb)).sqrt());
    let (z_res, _) = small_signal_impedances(&c, f);
    assert!(z_res.im.abs() < 1e-6 * z_res.norm(), "{z_res} at {f}");
    let (below, _) = small_signal_impedances(&c, 0.9 * f);
    let (above, _) = small_signal_impedances(&c, 1.1 * f);
    assert!(below.im.signum() != above.im.signum());
}

#[test]
fn startup_examples() {
    let on = startup_check(&board1(0.200));
    assert!(on.oscillating);
    assert!(on.net_resistance_at_resonance.unwrap() < 0.0);
    assert!(!startup_check(&board1(0.050)).oscillating);
    let lossy = OscillatorCircuit { series_resistance: 1e3, ..board1(0.200) };
    assert!(!startup_check(&lossy).oscillating);
}

#[test]
fn below_onset_trace_decays_to_the_floor() {
    let trace = simulate_transient(&board1(0.050), 2e-6, 3).unwrap();
    assert_eq!(classify_regime(&trace).unwrap().kind, RegimeKind::Quiescent);
    let spectrum = compute_spectrum(&trace, Window::Hann, 50.0).unwrap();
    assert!(matches!(find_fundamental(&spectrum, -80.0), Err(Error::NoSignal { .. })));
}

#[test]
fn oscillation_frequency_near_linear_estimate() {
    let c = board1(0.200);
    let trace = simulate_transient(&c, 2e-6, 1).unwrap();
    assert_eq!(classify_regime(&trace).unwrap().kind, RegimeKind::SteadyOscillation);
    let (f, _) = find_fundamental(&compute_spectrum(&trace, Window::Hann, 50.0).unwrap(), -80.0).unwrap();
    // Lead inductance against the bias-dependent junction capacitance.
    let v0 = c.operating_point();
    let lc = 1.0 / (2.0 * PI * (c.lead_inductance * c.diode.capacitance(v0)).sqrt());
    assert!((f / lc - 1.0).abs() < 0.25, "{f} vs {lc}");
    let predicted = startup_check(&c).resonant_frequency.unwrap();
    assert!((f / predicted - 1.0).abs() < 0.10);
}

#[test]
fn same_seed_gives_identical_trace() {
    let a = simulate_transient(&board1(0.2), 1e-6, 9).unwrap();
    let b = simulate_transient(&board1(0.2), 1e-6, 9).unwrap();
    assert_eq!(a, b);
    let c = simulate_transient(&board1(0.2), 1e-6, 10).unwrap();
    assert_ne!(a.load_voltage, c.load_voltage);
}

#[test]
fn halving_the_step_barely_moves_the_amplitude() {
    let c = board1(0.2);
    let rms = |steps: f64| {
        let opts = SimOptions { steps_per_period: steps, ..SimOptions::default() };
        let t = simulate_transient_with(&c, 2e-6, 4, &opts).unwrap();
        let tail = t.steady_state();
        (tail.iter().map(|v| v * v).sum::<f64>() / tail.len() as f64).sqrt()
    };
    let (coarse, fine) = (rms(50.0), rms(100.0));
    assert!((coarse / fine - 1.0).abs() < 0.005, "{coarse} vs {fine}");
}

#[test]
fn short_runs_are_refused_unless_allowed() {
    let c = board1(0.2);
    assert!(matches!(simulate_transient(&c, 50e-9, 1), Err(Error::InvalidInput(_))));
    let opts = SimOptions { allow_short: true, ..SimOptions::default() };
    assert!(simulate_transient_with(&c, 50e-9, 1, &opts).is_ok());
    assert!(simulate_transient(&c, -1.0, 1).is_err());
}

#[test]
fn startup_and_transient_agree_on_other_boards() {
    let options = SimOptions { decimation: 4, ..SimOptions::default() };
    for board in [Board::Board3, Board::Board5] {
        let base = OscillatorCircuit::preset(board);
        let (lo, hi) = tdh_core::diode::ndr_region(&base.diode).unwrap();
        for mv in (0..=300).step_by(6) {
            let bias = f64::from(mv) * 1e-3;
            if (bias - lo).abs() <= 0.010 || (bias - hi).abs() <= 0.010 {
                continue;
            }
            let c = base.with_bias(bias);
            let predicted = startup_check(&c).oscillating;
            let trace = simulate_transient_with(&c, 10e-6, 2, &options).unwrap();
            let observed = classify_regime(&trace).unwrap().kind != RegimeKind::Quiescent;
            assert_eq!(predicted, observed, "{board} at {mv} mV");
        }
    }
}

#[test]
fn kurokawa_diagnostic_reports_a_stable_orbit() {
    let report = kurokawa_diagnostic(&board1(0.2)).unwrap();
    assert!(report.amplitude > 0.0);
    assert!(report.stable);
    assert!(kurokawa_diagnostic(&board1(0.05)).is_none());
}

fn synthetic(samples: Vec<f64>, dt: f64) -> TransientTrace {
    TransientTrace { sample_interval: dt, load_voltage: samples, bias_voltage: 0.0, seed: 0 }
}

#[test]
fn classifier_on_synthetic_shapes() {
    let n = MIN_ANALYSIS_SAMPLES * 4;
    let dt = 1.0 / (700e6 * 16.0);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let sine: Vec<f64> =
        (0..n).map(|i| 0.1 * (2.0 * PI * 700e6 * i as f64 * dt).sin() + 1e-6 * rng.gen_range(-1.0..1.0)).collect();
    assert_eq!(classify_regime(&synthetic(sine, dt)).unwrap().kind, RegimeKind::SteadyOscillation);

    // Gaussian-shaped bursts of the same carrier, one every 2000 samples.
    let period = 2000.0;
    let pulses: Vec<f64> = (0..n)
        .map(|i| {
            let phase = (i as f64 % period) - period / 2.0;
            let envelope = (-(phase / 150.0).powi(2)).exp();
            0.1 * envelope * (2.0 * PI * 700e6 * i as f64 * dt).sin()
        })
        .collect();
    let label = classify_regime(&synthetic(pulses, dt)).unwrap();
    assert_eq!(label.kind, RegimeKind::Bursty);
    assert!(label.burst_cycles >= 3);

    let zeros = synthetic(vec![0.0; n], dt);
    assert_eq!(classify_regime(&zeros).unwrap().kind, RegimeKind::Quiescent);
}

#[test]
fn trace_csv_has_header_and_one_row_per_sample() {
    let trace = simulate_transient(&board1(0.05), 0.2e-6, 1).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trace.csv");
    trace.save_csv(&path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("time_s,voltage_V"));
    assert_eq!(lines.count(), trace.len());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn oscillating_implies_negative_net_resistance(board in 0usize..5, bias in 0.0f64..0.4) {
        let verdict = startup_check(&OscillatorCircuit::preset(Board::ALL[board]).with_bias(bias));
        if verdict.oscillating {
            prop_assert!(verdict.net_resistance_at_resonance.unwrap() < 0.0);
            prop_assert!(verdict.growth_rate.unwrap() > 0.0);
        }
    }

    #[test]
    fn regime_label_is_consistent_with_its_metrics(board in 0usize..5, bias in 0.10f64..0.27, seed in 0u64..1000) {
        let c = OscillatorCircuit::preset(Board::ALL[board]).with_bias(bias);
        let opts = SimOptions { allow_short: true, ..SimOptions::default() };
        let label = classify_regime(&simulate_transient_with(&c, 1.2e-6, seed, &opts).unwrap()).unwrap();
        match label.kind {
            RegimeKind::Quiescent => prop_assert!(label.steady_rms < 1e-6),
            RegimeKind::SteadyOscillation => prop_assert!(label.steady_rms >= 1e-6 && label.burst_cycles < 3),
            RegimeKind::Bursty => prop_assert!(label.steady_rms >= 1e-6 && label.burst_cycles >= 3),
        }
    }
}
