//! Calibrated power spectra of load-voltage traces and the peak measurements taken on them.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::circuit::{TransientTrace, MIN_ANALYSIS_SAMPLES};
use crate::error::{Error, Result};
use crate::units::{watts_to_dbm, DBM_FLOOR};

/// Bins below this frequency are treated as DC and bias ripple (Hz).
pub const DC_CUTOFF: f64 = 1e6;
/// Default noise floor (dBm).
pub const DEFAULT_NOISE_FLOOR: f64 = -80.0;
/// Default analysis span (Hz).
pub const DEFAULT_SPAN: (f64, f64) = (50e3, 3e9);
/// Default relative tolerance for harmonic positions.
pub const DEFAULT_HARMONIC_TOLERANCE: f64 = 0.02;
/// Default resolution bandwidth for the smoothing pass (Hz).
pub const DEFAULT_RBW: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Window {
    #[serde(alias = "rectangular")]
    Rectangular,
    #[default]
    #[serde(alias = "hann")]
    Hann,
    #[serde(alias = "blackmanharris", alias = "blackman_harris")]
    BlackmanHarris,
}

impl std::str::FromStr for Window {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rectangular" | "rect" => Ok(Window::Rectangular),
            "hann" => Ok(Window::Hann),
            "blackmanharris" | "blackman-harris" | "blackman_harris" => Ok(Window::BlackmanHarris),
            _ => Err(Error::InvalidInput(format!("unknown window `{s}`"))),
        }
    }
}

impl Window {
    /// Periodic window coefficients, so a tone centred on a bin sees the exact coherent gain.
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        let nf = n as f64;
        (0..n)
            .map(|i| {
                let x = 2.0 * PI * i as f64 / nf;
                match self {
                    Window::Rectangular => 1.0,
                    Window::Hann => 0.5 - 0.5 * x.cos(),
                    Window::BlackmanHarris => {
                        0.35875 - 0.48829 * x.cos() + 0.14128 * (2.0 * x).cos() - 0.01168 * (3.0 * x).cos()
                    }
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumOptions {
    pub window: Window,
    pub load_resistance: f64,
    pub span: (f64, f64),
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        Self { window: Window::Hann, load_resistance: 50.0, span: DEFAULT_SPAN }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    /// Uniform bin centres (Hz). Index 0 is the DC bin when `dc_bin` is set.
    pub frequency_bins: Vec<f64>,
    /// Power delivered to the load (dBm).
    pub power_dbm: Vec<f64>,
    /// Equivalent noise bandwidth of one bin (Hz).
    pub resolution_bandwidth: f64,
    pub span: (f64, f64),
    /// True when index 0 holds the DC level rather than a spectral line.
    pub dc_bin: bool,
    /// Window equivalent noise bandwidth in bins.
    pub enbw_bins: f64,
}

impl Spectrum {
    /// Builds a spectrum from externally produced bins (for example a signature-map row).
    pub fn from_parts(frequency_bins: Vec<f64>, power_dbm: Vec<f64>, resolution_bandwidth: f64, span: (f64, f64)) -> Result<Self> {
        if frequency_bins.len() != power_dbm.len() || frequency_bins.is_empty() {
            return Err(Error::InvalidInput("frequency and power vectors must be non-empty and of equal length".into()));
        }
        if frequency_bins.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput("frequency bins must be strictly increasing".into()));
        }
        if power_dbm.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidInput("power values must be finite".into()));
        }
        Ok(Self { frequency_bins, power_dbm, resolution_bandwidth, span, dc_bin: false, enbw_bins: 1.0 })
    }

    pub fn len(&self) -> usize {
        self.frequency_bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequency_bins.is_empty()
    }

    pub fn bin_spacing(&self) -> f64 {
        if self.frequency_bins.len() < 2 {
            return 0.0;
        }
        self.frequency_bins[1] - self.frequency_bins[0]
    }

    /// Total power of the AC bins (W), corrected for the window's noise bandwidth.
    pub fn total_power_watts(&self) -> f64 {
        let skip = usize::from(self.dc_bin);
        let sum: f64 = self.power_dbm[skip..].iter().map(|&p| crate::units::dbm_to_watts(p)).sum();
        sum / self.enbw_bins
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["frequency_Hz", "power_dBm"])?;
        for (f, p) in self.frequency_bins.iter().zip(&self.power_dbm) {
            wtr.write_record([format!("{f:e}"), format!("{p:.6}")])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::io::BufWriter::new(std::fs::File::create(path)?))
    }
}

/// Spectrum of the final quarter of `trace` with the default span.
pub fn compute_spectrum(trace: &TransientTrace, window: Window, load: f64) -> Result<Spectrum> {
    compute_spectrum_with(trace, &SpectrumOptions { window, load_resistance: load, span: DEFAULT_SPAN })
}

pub fn compute_spectrum_with(trace: &TransientTrace, options: &SpectrumOptions) -> Result<Spectrum> {
    if trace.len() < MIN_ANALYSIS_SAMPLES {
        return Err(Error::TraceTooShort { len: trace.len(), min: MIN_ANALYSIS_SAMPLES });
    }
    spectrum_of_samples(trace.steady_state(), trace.sample_interval, options)
}

fn fft_magnitudes(samples: &[f64], window: &[f64]) -> Vec<f64> {
    let n = samples.len();
    let mut buf: Vec<Complex64> = samples.iter().zip(window).map(|(x, w)| Complex64::new(x * w, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    buf[..=n / 2].iter().map(|c| c.norm()).collect()
}

/// One-sided power spectrum of `samples` (mean removed; the mean is reported in the DC bin).
pub fn spectrum_of_samples(samples: &[f64], sample_interval: f64, options: &SpectrumOptions) -> Result<Spectrum> {
    let n = samples.len();
    if n < 4 {
        return Err(Error::TraceTooShort { len: n, min: 4 });
    }
    if !(options.load_resistance > 0.0) || !(sample_interval > 0.0) {
        return Err(Error::InvalidInput("load resistance and sample interval must be positive".into()));
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let centred: Vec<f64> = samples.iter().map(|x| x - mean).collect();
    let window = options.window.coefficients(n);
    let wsum: f64 = window.iter().sum();
    let wsq: f64 = window.iter().map(|w| w * w).sum();
    let enbw_bins = n as f64 * wsq / (wsum * wsum);
    let mags = fft_magnitudes(&centred, &window);

    let df = 1.0 / (n as f64 * sample_interval);
    let load = options.load_resistance;
    let nyquist_index = n / 2;
    let stop_index = ((options.span.1 / df).floor() as usize).min(nyquist_index);

    let mut freqs = Vec::with_capacity(stop_index + 1);
    let mut power = Vec::with_capacity(stop_index + 1);
    freqs.push(0.0);
    power.push(watts_to_dbm(mean * mean / load));
    for (k, &mag) in mags.iter().enumerate().take(stop_index + 1).skip(1) {
        let f = k as f64 * df;
        if f < options.span.0 {
            continue;
        }
        let watts = if k == nyquist_index && n.is_multiple_of(2) {
            (mag / wsum).powi(2) / load
        } else {
            let amplitude = 2.0 * mag / wsum;
            amplitude * amplitude / (2.0 * load)
        };
        freqs.push(f);
        power.push(watts_to_dbm(watts));
    }

    Ok(Spectrum {
        frequency_bins: freqs,
        power_dbm: power,
        resolution_bandwidth: enbw_bins * df,
        span: options.span,
        dc_bin: true,
        enbw_bins,
    })
}

/// Frequency of the strongest Hann-windowed bin at or above `cutoff`, if any energy exists.
pub fn dominant_frequency(samples: &[f64], sample_interval: f64, cutoff: f64) -> Option<f64> {
    let n = samples.len();
    if n < 4 {
        return None;
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let centred: Vec<f64> = samples.iter().map(|x| x - mean).collect();
    let mags = fft_magnitudes(&centred, &Window::Hann.coefficients(n));
    let df = 1.0 / (n as f64 * sample_interval);
    let start = ((cutoff / df).ceil() as usize).max(1);
    let (k, &m) = mags.iter().enumerate().skip(start).max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))?;
    (m > 0.0).then_some(k as f64 * df)
}

/// Moving-RMS smoothing of the AC bins over a window of width `rbw` (Hz).
pub fn rbw_smooth(spectrum: &Spectrum, rbw: f64) -> Spectrum {
    let df = spectrum.bin_spacing();
    let half = if df > 0.0 { ((rbw / df) / 2.0).floor() as usize } else { 0 };
    let skip = usize::from(spectrum.dc_bin);
    let linear: Vec<f64> = spectrum.power_dbm.iter().map(|&p| crate::units::dbm_to_watts(p)).collect();
    let mut out = spectrum.clone();
    let n = linear.len();
    for i in skip..n {
        let lo = i.saturating_sub(half).max(skip);
        let hi = (i + half).min(n - 1);
        let avg = linear[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64;
        out.power_dbm[i] = watts_to_dbm(avg);
    }
    out.resolution_bandwidth = spectrum.resolution_bandwidth.max(rbw);
    out
}

/// Strongest bin at or above the DC cutoff. Ties resolve to the lowest frequency.
pub fn find_fundamental(spectrum: &Spectrum, noise_floor: f64) -> Result<(f64, f64)> {
    let mut best: Option<(f64, f64)> = None;
    for (&f, &p) in spectrum.frequency_bins.iter().zip(&spectrum.power_dbm) {
        if f < DC_CUTOFF {
            continue;
        }
        if best.is_none_or(|(_, bp)| p > bp) {
            best = Some((f, p));
        }
    }
    match best {
        Some((f, p)) if p > noise_floor => Ok((f, p)),
        _ => Err(Error::NoSignal { floor_dbm: noise_floor }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Harmonic {
    pub order: u32,
    pub frequency_hz: f64,
    pub power_dbm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarmonicSet {
    pub fundamental: Harmonic,
    pub harmonics: Vec<Harmonic>,
}

impl HarmonicSet {
    /// Fundamental followed by the harmonics, as flat records.
    pub fn records(&self) -> Vec<Harmonic> {
        std::iter::once(self.fundamental).chain(self.harmonics.iter().copied()).collect()
    }
}

fn strongest_in(spectrum: &Spectrum, lo: f64, hi: f64) -> Option<(f64, f64)> {
    let start = spectrum.frequency_bins.partition_point(|&f| f < lo);
    let end = spectrum.frequency_bins.partition_point(|&f| f <= hi);
    spectrum.frequency_bins[start..end]
        .iter()
        .zip(&spectrum.power_dbm[start..end])
        .fold(None, |best: Option<(f64, f64)>, (&f, &p)| match best {
            Some((_, bp)) if bp >= p => best,
            _ => Some((f, p)),
        })
}

/// Collects the strongest bin inside `[k*f*(1-tol), k*f*(1+tol)]` for every order k >= 2
/// whose nominal frequency lies in the span, keeping only those above the noise floor.
pub fn extract_harmonics(spectrum: &Spectrum, fundamental: f64, rel_tolerance: f64, noise_floor: f64) -> HarmonicSet {
    let top = spectrum.span.1.min(spectrum.frequency_bins.last().copied().unwrap_or(0.0));
    let fund = strongest_in(spectrum, fundamental * (1.0 - rel_tolerance), fundamental * (1.0 + rel_tolerance))
        .unwrap_or((fundamental, DBM_FLOOR));
    let mut harmonics = Vec::new();
    if fundamental > 0.0 {
        let mut k = 2u32;
        while f64::from(k) * fundamental <= top {
            let centre = f64::from(k) * fundamental;
            let width = rel_tolerance * centre;
            if let Some((f, p)) = strongest_in(spectrum, centre - width, centre + width) {
                if p > noise_floor {
                    harmonics.push(Harmonic { order: k, frequency_hz: f, power_dbm: p });
                }
            }
            k += 1;
        }
    }
    HarmonicSet { fundamental: Harmonic { order: 1, frequency_hz: fund.0, power_dbm: fund.1 }, harmonics }
}

/// Peak single-frequency output power over consumed DC power.
pub fn dc_rf_efficiency(peak_output_power: f64, dc_power: f64) -> Result<f64> {
    if !(dc_power > 0.0) || !dc_power.is_finite() {
        return Err(Error::ZeroDcPower);
    }
    if !(peak_output_power >= 0.0) || !peak_output_power.is_finite() {
        return Err(Error::InvalidInput(format!("output power must be non-negative, got {peak_output_power}")));
    }
    Ok(peak_output_power / dc_power)
}

/// Spread of the fundamental frequency over a set of oscillating bias points (Hz).
pub fn tunable_range(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::InsufficientPoints { needed: 2, got: points.len() });
    }
    let max = points.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let min = points.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    Ok(max - min)
}
