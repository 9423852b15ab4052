//! One-port tunnel-diode oscillator board.
//!
//! Network: bias source -> series resistance -> RF choke -> node A (smoothing capacitor to
//! ground) -> lead inductance -> node B (diode in parallel with its junction capacitance)
//! -> DC-block capacitor -> load resistor to ground. The load voltage is the voltage
//! across the load resistor.

use std::f64::consts::PI;
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::diode::DiodeParams;
use crate::error::{Error, Result};
use crate::spectral;

/// Highest supported bias for sweeps (V).
pub const MAX_BIAS: f64 = 0.4;
/// Any node voltage beyond this magnitude is treated as an integration blow-up (V).
pub const STATE_LIMIT: f64 = 10.0;
/// Minimum trace length accepted by the spectral and regime analyses.
pub const MIN_ANALYSIS_SAMPLES: usize = 1 << 14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OscillatorCircuit {
    pub diode: DiodeParams,
    pub choke_inductance: f64,
    pub smoothing_capacitance: f64,
    pub dc_block_capacitance: f64,
    pub load_resistance: f64,
    pub lead_inductance: f64,
    pub series_resistance: f64,
    pub bias_voltage: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Board {
    Board1,
    Board2,
    Board3,
    Board4,
    Board5,
}

impl Board {
    pub const ALL: [Board; 5] = [Board::Board1, Board::Board2, Board::Board3, Board::Board4, Board::Board5];

    pub fn name(self) -> &'static str {
        match self {
            Board::Board1 => "board1",
            Board::Board2 => "board2",
            Board::Board3 => "board3",
            Board::Board4 => "board4",
            Board::Board5 => "board5",
        }
    }
}

impl fmt::Display for Board {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Board {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Board::ALL
            .into_iter()
            .find(|b| b.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidInput(format!("unknown board preset `{s}` (expected board1..board5)")))
    }
}

impl Default for OscillatorCircuit {
    fn default() -> Self {
        Self::preset(Board::Board1)
    }
}

impl OscillatorCircuit {
    /// Board presets. Parasitics are chosen so each board's fundamental at 200 mV lands
    /// near its measured value; they are fitted stand-ins, not measured component values.
    pub fn preset(board: Board) -> Self {
        // (junction capacitance, block/junction ratio, capacitance coefficient, lead inductance)
        let (cj, block_ratio, kc, lead) = match board {
            Board::Board1 => (2.5e-12, 0.9, 3.5, 7.92e-9),
            Board::Board2 => (1.8e-12, 1.0, 0.3, 4.979e-9),
            Board::Board3 => (3.0e-12, 0.7, 0.0, 12.885e-9),
            Board::Board4 => (4.5e-12, 0.8, 0.5, 21.246e-9),
            Board::Board5 => (6.0e-12, 1.1, 0.8, 45.347e-9),
        };
        let diode = DiodeParams {
            junction_capacitance: cj,
            capacitance_voltage_coefficient: kc,
            ..DiodeParams::default()
        };
        Self {
            diode,
            choke_inductance: 18e-9,
            smoothing_capacitance: 0.1e-6,
            dc_block_capacitance: block_ratio * cj,
            load_resistance: 50.0,
            lead_inductance: lead,
            series_resistance: 1.5e-3,
            bias_voltage: 0.2,
        }
    }

    pub fn with_bias(mut self, bias: f64) -> Self {
        self.bias_voltage = bias;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.diode.validate()?;
        let positive = [
            ("choke_inductance", self.choke_inductance),
            ("smoothing_capacitance", self.smoothing_capacitance),
            ("dc_block_capacitance", self.dc_block_capacitance),
            ("load_resistance", self.load_resistance),
            ("lead_inductance", self.lead_inductance),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidInput(format!("{name} must be finite and positive, got {value}")));
            }
        }
        if !(self.series_resistance.is_finite() && self.series_resistance >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "series_resistance must be finite and non-negative, got {}",
                self.series_resistance
            )));
        }
        if !(self.bias_voltage.is_finite() && (0.0..=MAX_BIAS).contains(&self.bias_voltage)) {
            return Err(Error::InvalidInput(format!(
                "bias_voltage must lie in [0, {MAX_BIAS}] V, got {}",
                self.bias_voltage
            )));
        }
        Ok(())
    }

    /// DC junction voltage: the lowest solution of V + Rs*I(V) = V_bias, which is the
    /// state reached when the supply ramps up from zero.
    pub fn operating_point(&self) -> f64 {
        let target = self.bias_voltage;
        let rs = self.series_resistance;
        let f = |v: f64| v + rs * self.diode.current(v) - target;
        if target <= 0.0 {
            return 0.0;
        }
        let step = 1e-4;
        let mut lo: f64 = 0.0;
        loop {
            let hi = (lo + step).min(target);
            if f(hi) >= 0.0 {
                let (mut a, mut b) = (lo, hi);
                for _ in 0..100 {
                    let mid = 0.5 * (a + b);
                    if f(mid) >= 0.0 {
                        b = mid;
                    } else {
                        a = mid;
                    }
                }
                return 0.5 * (a + b);
            }
            lo = hi;
        }
    }

    /// Unloaded resonance of the lead inductance with the zero-bias junction capacitance;
    /// the highest natural frequency in the network and the basis of the RK4 step.
    pub fn max_natural_frequency(&self) -> f64 {
        1.0 / (2.0 * PI * (self.lead_inductance * self.diode.junction_capacitance).sqrt())
    }

    /// Fixed RK4 step: fifty steps per period of the highest natural frequency.
    pub fn default_time_step(&self) -> f64 {
        1.0 / (50.0 * self.max_natural_frequency())
    }
}

fn parallel(a: Complex64, b: Complex64) -> Complex64 {
    a * b / (a + b)
}

/// Small-signal impedances seen from the diode terminals at `frequency`: the passive
/// network, and the diode linearised at its DC operating point.
pub fn small_signal_impedances(circuit: &OscillatorCircuit, frequency: f64) -> (Complex64, Complex64) {
    impedances_at(circuit, circuit.operating_point(), frequency)
}

fn impedances_at(circuit: &OscillatorCircuit, v0: f64, frequency: f64) -> (Complex64, Complex64) {
    let w = 2.0 * PI * frequency;
    let j = Complex64::new(0.0, 1.0);
    let bias_branch = Complex64::new(circuit.series_resistance, w * circuit.choke_inductance);
    let smoothing = 1.0 / (j * w * circuit.smoothing_capacitance);
    let supply_side = j * w * circuit.lead_inductance + parallel(smoothing, bias_branch);
    let load_side = Complex64::new(circuit.load_resistance, -1.0 / (w * circuit.dc_block_capacitance));
    let resonator = parallel(supply_side, load_side);
    let device_admittance = Complex64::new(circuit.diode.conductance(v0), w * circuit.diode.capacitance(v0));
    (resonator, 1.0 / device_admittance)
}

fn total_admittance(circuit: &OscillatorCircuit, v0: f64, frequency: f64) -> Complex64 {
    let (z_res, z_dev) = impedances_at(circuit, v0, frequency);
    1.0 / z_res + 1.0 / z_dev
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StartupVerdict {
    pub oscillating: bool,
    pub resonant_frequency: Option<f64>,
    /// Parallel-equivalent resistance 1/G of the whole loop at the resonance (ohms).
    pub net_resistance_at_resonance: Option<f64>,
    /// Small-signal growth rate of the selected resonance (1/s); negative when damped.
    pub growth_rate: Option<f64>,
}

#[derive(Debug, Clone, Copy)]
struct Resonance {
    frequency: f64,
    conductance: f64,
    growth_rate: f64,
}

pub const STARTUP_SCAN_START: f64 = 1e6;
pub const STARTUP_SCAN_STOP: f64 = 10e9;

fn resonances(circuit: &OscillatorCircuit) -> Vec<Resonance> {
    let v0 = circuit.operating_point();
    let n = 4000;
    let ratio = (STARTUP_SCAN_STOP / STARTUP_SCAN_START).ln();
    let freq = |i: usize| STARTUP_SCAN_START * (ratio * i as f64 / n as f64).exp();
    let susceptance = |f: f64| total_admittance(circuit, v0, f).im;

    let mut found = Vec::new();
    let mut f_prev = freq(0);
    let mut b_prev = susceptance(f_prev);
    for i in 1..=n {
        let f = freq(i);
        let b = susceptance(f);
        if b_prev.signum() != b.signum() && b_prev.is_finite() && b.is_finite() {
            let (mut lo, mut hi, mut b_lo) = (f_prev, f, b_prev);
            for _ in 0..80 {
                let mid = (lo * hi).sqrt();
                let b_mid = susceptance(mid);
                if b_mid.signum() == b_lo.signum() {
                    lo = mid;
                    b_lo = b_mid;
                } else {
                    hi = mid;
                }
            }
            let f0 = (lo * hi).sqrt();
            let y0 = total_admittance(circuit, v0, f0);
            // A sign change through a pole leaves a large susceptance at the bracket.
            let is_zero = y0.im.abs() <= 1e-6 * (b_prev.abs() + b.abs()).max(1e-12);
            if is_zero {
                let df = f0 * 1e-6;
                let slope = (susceptance(f0 + df) - susceptance(f0 - df)) / (2.0 * 2.0 * PI * df);
                let growth_rate = if slope > 0.0 { -y0.re / slope } else { f64::NEG_INFINITY };
                found.push(Resonance { frequency: f0, conductance: y0.re, growth_rate });
            }
        }
        f_prev = f;
        b_prev = b;
    }
    found
}

/// Small-signal startup test in admittance form: at each frequency where the total
/// susceptance crosses zero between 1 MHz and 10 GHz, the loop grows if the total
/// conductance is negative. The reported resonance is the fastest-growing one, or the
/// least damped one when none grows.
pub fn startup_check(circuit: &OscillatorCircuit) -> StartupVerdict {
    let found = resonances(circuit);
    let pick = found
        .iter()
        .filter(|r| r.growth_rate.is_finite())
        .max_by(|a, b| a.growth_rate.total_cmp(&b.growth_rate))
        .or_else(|| found.iter().min_by(|a, b| a.conductance.total_cmp(&b.conductance)));
    match pick {
        None => StartupVerdict {
            oscillating: false,
            resonant_frequency: None,
            net_resistance_at_resonance: None,
            growth_rate: None,
        },
        Some(r) => StartupVerdict {
            oscillating: r.conductance < 0.0 && r.growth_rate > 0.0,
            resonant_frequency: Some(r.frequency),
            net_resistance_at_resonance: Some(1.0 / r.conductance),
            growth_rate: Some(r.growth_rate).filter(|g| g.is_finite()),
        },
    }
}

/// Fundamental-harmonic conductance of the diode driven by `v0 + amplitude*cos(wt)`.
pub fn describing_conductance(diode: &DiodeParams, v0: f64, amplitude: f64) -> f64 {
    if amplitude <= 0.0 {
        return diode.conductance(v0);
    }
    let n = 256;
    let mut acc = 0.0;
    for k in 0..n {
        let theta = 2.0 * PI * (k as f64 + 0.5) / n as f64;
        acc += diode.current(v0 + amplitude * theta.cos()) * theta.cos();
    }
    2.0 * acc / (n as f64 * amplitude)
}

/// Large-signal stability diagnostic at the small-signal resonance, following the usual
/// textbook form of Kurokawa's condition for a parallel circuit: with the device
/// admittance depending on amplitude only, a steady oscillation is stable when
/// dG_dev/dA * dB_net/dw > 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KurokawaReport {
    pub frequency: f64,
    /// Amplitude at which the describing conductance cancels the network conductance (V).
    pub amplitude: f64,
    pub condition: f64,
    pub stable: bool,
}

pub fn kurokawa_diagnostic(circuit: &OscillatorCircuit) -> Option<KurokawaReport> {
    let verdict = startup_check(circuit);
    if !verdict.oscillating {
        return None;
    }
    let f0 = verdict.resonant_frequency?;
    let v0 = circuit.operating_point();
    let (z_res, _) = impedances_at(circuit, v0, f0);
    let g_net = (1.0 / z_res).re;
    let residual = |a: f64| describing_conductance(&circuit.diode, v0, a) + g_net;

    let mut prev = 1e-6;
    let mut amplitude = None;
    let mut a = 1e-6;
    while a < 1.0 {
        let next = a * 1.05;
        if residual(prev) < 0.0 && residual(next) >= 0.0 {
            let (mut lo, mut hi) = (prev, next);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if residual(mid) < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            amplitude = Some(0.5 * (lo + hi));
            break;
        }
        prev = next;
        a = next;
    }
    let amplitude = amplitude?;
    let da = amplitude * 1e-3;
    let dg_da = (describing_conductance(&circuit.diode, v0, amplitude + da)
        - describing_conductance(&circuit.diode, v0, amplitude - da))
        / (2.0 * da);
    let df = f0 * 1e-6;
    let db_dw = (total_admittance(circuit, v0, f0 + df).im - total_admittance(circuit, v0, f0 - df).im) / (2.0 * 2.0 * PI * df);
    let condition = dg_da * db_dw;
    Some(KurokawaReport { frequency: f0, amplitude, condition, stable: condition > 0.0 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransientTrace {
    pub sample_interval: f64,
    pub load_voltage: Vec<f64>,
    pub bias_voltage: f64,
    pub seed: u64,
}

impl TransientTrace {
    pub fn len(&self) -> usize {
        self.load_voltage.len()
    }

    pub fn is_empty(&self) -> bool {
        self.load_voltage.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.sample_interval * self.load_voltage.len() as f64
    }

    /// Final quarter of the samples, used for every steady-state measurement.
    pub fn steady_state(&self) -> &[f64] {
        let n = self.load_voltage.len();
        &self.load_voltage[n - n / 4..]
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["time_s", "voltage_V"])?;
        for (i, v) in self.load_voltage.iter().enumerate() {
            let t = (i + 1) as f64 * self.sample_interval;
            wtr.write_record([format!("{t:e}"), format!("{v:e}")])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::io::BufWriter::new(std::fs::File::create(path)?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    /// Keep every n-th integration step in the output trace.
    pub decimation: usize,
    /// Integration steps per period of the highest natural frequency.
    pub steps_per_period: f64,
    /// Skip the minimum-duration check (used for deliberately short diagnostic runs).
    pub allow_short: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self { decimation: 1, steps_per_period: 50.0, allow_short: false }
    }
}

type State = [f64; 5];

struct Network {
    diode: DiodeParams,
    bias: f64,
    rs: f64,
    inv_lc: f64,
    inv_cs: f64,
    inv_lead: f64,
    inv_cb: f64,
    inv_rl: f64,
}

impl Network {
    /// State: choke current, node A voltage, lead current, junction voltage, block voltage.
    #[inline]
    fn derivative(&self, x: &State) -> State {
        let [ic, va, il, vb, vk] = *x;
        let load_current = (vb - vk) * self.inv_rl;
        [
            (self.bias - self.rs * ic - va) * self.inv_lc,
            (ic - il) * self.inv_cs,
            (va - vb) * self.inv_lead,
            (il - self.diode.current(vb) - load_current) / self.diode.capacitance(vb),
            load_current * self.inv_cb,
        ]
    }
}

#[inline]
fn axpy(x: &State, h: f64, k: &State) -> State {
    [x[0] + h * k[0], x[1] + h * k[1], x[2] + h * k[2], x[3] + h * k[3], x[4] + h * k[4]]
}

/// Number of periods of the startup resonance a run must cover.
pub const MIN_PERIODS: f64 = 200.0;

pub fn simulate_transient(circuit: &OscillatorCircuit, duration: f64, seed: u64) -> Result<TransientTrace> {
    simulate_transient_with(circuit, duration, seed, &SimOptions::default())
}

/// Fixed-step RK4 integration from the DC operating point, with a seeded picovolt-scale
/// kick on the junction voltage to start growth from the unstable equilibrium.
pub fn simulate_transient_with(
    circuit: &OscillatorCircuit,
    duration: f64,
    seed: u64,
    options: &SimOptions,
) -> Result<TransientTrace> {
    circuit.validate()?;
    if !(duration.is_finite() && duration > 0.0) {
        return Err(Error::InvalidInput(format!("duration must be positive, got {duration}")));
    }
    if options.decimation == 0 || !(options.steps_per_period >= 4.0) {
        return Err(Error::InvalidInput("decimation must be >= 1 and steps_per_period >= 4".into()));
    }
    if !options.allow_short {
        let verdict = startup_check(circuit);
        if let (true, Some(f0)) = (verdict.oscillating, verdict.resonant_frequency) {
            if duration * f0 < MIN_PERIODS {
                return Err(Error::InvalidInput(format!(
                    "duration {duration:e} s covers fewer than {MIN_PERIODS} periods at {f0:e} Hz"
                )));
            }
        }
    }

    let h = 1.0 / (options.steps_per_period * circuit.max_natural_frequency());
    let steps = (duration / h).ceil() as usize;
    let net = Network {
        diode: circuit.diode,
        bias: circuit.bias_voltage,
        rs: circuit.series_resistance,
        inv_lc: 1.0 / circuit.choke_inductance,
        inv_cs: 1.0 / circuit.smoothing_capacitance,
        inv_lead: 1.0 / circuit.lead_inductance,
        inv_cb: 1.0 / circuit.dc_block_capacitance,
        inv_rl: 1.0 / circuit.load_resistance,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let magnitude: f64 = rng.gen_range(0.5e-12..1.5e-12);
    let kick = if rng.gen::<bool>() { magnitude } else { -magnitude };

    let v0 = circuit.operating_point();
    let i0 = circuit.diode.current(v0);
    let mut x: State = [i0, v0, i0, v0 + kick, v0];
    let mut samples = Vec::with_capacity(steps / options.decimation + 1);

    for step in 1..=steps {
        let k1 = net.derivative(&x);
        let k2 = net.derivative(&axpy(&x, 0.5 * h, &k1));
        let k3 = net.derivative(&axpy(&x, 0.5 * h, &k2));
        let k4 = net.derivative(&axpy(&x, h, &k3));
        for i in 0..5 {
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        let worst = x[1].abs().max(x[3].abs()).max(x[4].abs());
        if !(worst <= STATE_LIMIT) || !x[0].is_finite() || !x[2].is_finite() {
            return Err(Error::StepUnstable { time: step as f64 * h, magnitude: worst });
        }
        if step % options.decimation == 0 {
            samples.push(x[3] - x[4]);
        }
    }

    Ok(TransientTrace {
        sample_interval: h * options.decimation as f64,
        load_voltage: samples,
        bias_voltage: circuit.bias_voltage,
        seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegimeKind {
    Quiescent,
    SteadyOscillation,
    Bursty,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeThresholds {
    /// Steady-state RMS below this is quiescent (V).
    pub quiescent_rms: f64,
    /// Required envelope peak-to-trough ratio for a burst cycle.
    pub burst_ratio: f64,
    /// Minimum number of burst cycles.
    pub min_cycles: usize,
    /// Envelope low-pass corner as a fraction of the fundamental (divisor).
    pub envelope_divisor: f64,
}

impl Default for RegimeThresholds {
    fn default() -> Self {
        Self { quiescent_rms: 1e-6, burst_ratio: 10.0, min_cycles: 3, envelope_divisor: 20.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeLabel {
    pub kind: RegimeKind,
    pub steady_rms: f64,
    pub envelope_mean: f64,
    pub envelope_variance: f64,
    /// Burst cycles per second over the steady-state segment.
    pub burst_rate: f64,
    pub burst_cycles: usize,
}

pub fn classify_regime(trace: &TransientTrace) -> Result<RegimeLabel> {
    classify_regime_with(trace, &RegimeThresholds::default())
}

/// Labels the final quarter of a trace. The envelope is the full-wave rectified signal
/// smoothed by a single-pole low-pass at the fundamental divided by `envelope_divisor`.
/// A burst cycle is a rise from below `max/(2*ratio)` to above `max/2`.
pub fn classify_regime_with(trace: &TransientTrace, thresholds: &RegimeThresholds) -> Result<RegimeLabel> {
    let n = trace.len();
    if n < MIN_ANALYSIS_SAMPLES {
        return Err(Error::TraceTooShort { len: n, min: MIN_ANALYSIS_SAMPLES });
    }
    let segment = trace.steady_state();
    let mean = segment.iter().sum::<f64>() / segment.len() as f64;
    let rms = (segment.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / segment.len() as f64).sqrt();

    let quiet = RegimeLabel {
        kind: RegimeKind::Quiescent,
        steady_rms: rms,
        envelope_mean: rms,
        envelope_variance: 0.0,
        burst_rate: 0.0,
        burst_cycles: 0,
    };
    if !(rms >= thresholds.quiescent_rms) {
        return Ok(quiet);
    }
    let Some(fundamental) = spectral::dominant_frequency(segment, trace.sample_interval, spectral::DC_CUTOFF) else {
        return Ok(quiet);
    };

    // Run the filter over the whole trace so the segment starts with a settled envelope.
    let corner = fundamental / thresholds.envelope_divisor;
    let alpha = 1.0 - (-2.0 * PI * corner * trace.sample_interval).exp();
    let start = n - segment.len();
    let mut env = (trace.load_voltage[0] - mean).abs();
    let mut envelope = Vec::with_capacity(segment.len());
    for (i, v) in trace.load_voltage.iter().enumerate() {
        env += alpha * ((v - mean).abs() - env);
        if i >= start {
            envelope.push(env);
        }
    }

    let count = envelope.len() as f64;
    let env_mean = envelope.iter().sum::<f64>() / count;
    let env_var = envelope.iter().map(|e| (e - env_mean).powi(2)).sum::<f64>() / count;
    let env_max = envelope.iter().cloned().fold(0.0, f64::max);
    let high = 0.5 * env_max;
    let low = high / thresholds.burst_ratio;

    let mut cycles = 0;
    let mut armed = false;
    for &e in &envelope {
        if e < low {
            armed = true;
        } else if armed && e > high {
            cycles += 1;
            armed = false;
        }
    }
    let seg_duration = count * trace.sample_interval;
    let kind = if cycles >= thresholds.min_cycles { RegimeKind::Bursty } else { RegimeKind::SteadyOscillation };
    Ok(RegimeLabel {
        kind,
        steady_rms: rms,
        envelope_mean: env_mean,
        envelope_variance: env_var,
        burst_rate: cycles as f64 / seg_duration,
        burst_cycles: cycles,
    })
}
