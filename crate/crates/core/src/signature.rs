//! Bias sweeps into spectrum-versus-voltage signature maps.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::circuit::{simulate_transient, OscillatorCircuit};
use crate::error::{Error, Result};
use crate::spectral::{
    compute_spectrum_with, extract_harmonics, find_fundamental, tunable_range, Spectrum, SpectrumOptions, Window,
    DEFAULT_HARMONIC_TOLERANCE, DEFAULT_NOISE_FLOOR, DEFAULT_SPAN,
};

pub const SCHEMA_VERSION: &str = "1.1";
/// Upper bound on points per spectrum row.
pub const MAX_POINTS_PER_SPECTRUM: usize = 10001;
/// Onset-bias element of a feature vector when no row oscillates.
pub const ONSET_ABSENT: f64 = -1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub bias_start: f64,
    pub bias_stop: f64,
    pub bias_step: f64,
    pub span: (f64, f64),
    pub points_per_spectrum: usize,
    pub seed: u64,
    /// Simulated time per bias point (s).
    pub duration: f64,
    pub window: Window,
    pub noise_floor: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            bias_start: 0.003,
            bias_stop: 0.300,
            bias_step: 0.001,
            span: DEFAULT_SPAN,
            points_per_spectrum: MAX_POINTS_PER_SPECTRUM,
            seed: 0,
            duration: 2e-6,
            window: Window::Hann,
            noise_floor: DEFAULT_NOISE_FLOOR,
        }
    }
}

fn to_microvolts(v: f64) -> i64 {
    (v * 1e6).round() as i64
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.bias_step > 0.0) || !self.bias_step.is_finite() {
            return Err(Error::InvalidInput(format!("bias_step must be positive, got {}", self.bias_step)));
        }
        if !(self.bias_start.is_finite() && self.bias_stop.is_finite()) || self.bias_stop < self.bias_start {
            return Err(Error::InvalidInput("bias_stop must not be below bias_start".into()));
        }
        if self.bias_start < 0.0 || self.bias_stop > crate::circuit::MAX_BIAS {
            return Err(Error::InvalidInput(format!("bias range must lie in [0, {}] V", crate::circuit::MAX_BIAS)));
        }
        if !(self.span.0 >= 0.0 && self.span.1 > self.span.0) {
            return Err(Error::InvalidInput("span must satisfy 0 <= start < stop".into()));
        }
        if !(2..=MAX_POINTS_PER_SPECTRUM).contains(&self.points_per_spectrum) {
            return Err(Error::InvalidInput(format!(
                "points_per_spectrum must lie in [2, {MAX_POINTS_PER_SPECTRUM}]"
            )));
        }
        if !(self.duration > 0.0) || !self.noise_floor.is_finite() {
            return Err(Error::InvalidInput("duration must be positive and noise_floor finite".into()));
        }
        Ok(())
    }

    /// Bias points quantised to 1 µV, so the same voltage always maps to the same row seed.
    pub fn bias_grid(&self) -> Vec<f64> {
        let count = ((self.bias_stop - self.bias_start) / self.bias_step + 1e-9).floor() as usize + 1;
        (0..count)
            .map(|i| to_microvolts(self.bias_start + i as f64 * self.bias_step) as f64 * 1e-6)
            .collect()
    }

    pub fn frequency_grid(&self) -> Vec<f64> {
        let n = self.points_per_spectrum;
        let (a, b) = self.span;
        (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for the row at `bias`, derived from the master seed and the bias in whole microvolts.
pub fn row_seed(master: u64, bias: f64) -> u64 {
    splitmix64(master ^ splitmix64(to_microvolts(bias) as u64))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
}

fn default_schema_version() -> String {
    "1.0".into()
}

fn default_noise_floor() -> f64 {
    DEFAULT_NOISE_FLOOR
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignatureMap {
    #[serde(default = "default_schema_version")]
    pub schema_version: String,
    pub board_id: String,
    pub bias_grid: Vec<f64>,
    pub frequency_grid: Vec<f64>,
    /// Row-major power matrix, one row per bias point (dBm).
    pub power_matrix: Vec<Vec<f64>>,
    #[serde(default = "default_noise_floor")]
    pub noise_floor: f64,
    /// Rows whose integration failed; they hold the noise floor.
    #[serde(default)]
    pub faulted_rows: Vec<usize>,
    pub provenance: Provenance,
}

/// SHA-256 of the canonical JSON of any serialisable value, hex encoded.
pub fn config_hash<T: Serialize>(value: &T) -> String {
    let canonical = serde_json::to_value(value).and_then(|v| serde_json::to_vec(&v)).unwrap_or_default();
    hex::encode(Sha256::digest(canonical))
}

/// Maps FFT bins onto the output grid: peak-hold over the bins nearest each grid point,
/// interpolating in dB where the grid is finer than the bins. Values are floor-clipped.
fn resample(spectrum: &Spectrum, grid: &[f64], floor: f64) -> Vec<f64> {
    let skip = usize::from(spectrum.dc_bin);
    let freqs = &spectrum.frequency_bins[skip..];
    let power = &spectrum.power_dbm[skip..];
    let half = if grid.len() > 1 { 0.5 * (grid[1] - grid[0]) } else { f64::INFINITY };
    grid.iter()
        .map(|&g| {
            let lo = freqs.partition_point(|&f| f < g - half);
            let hi = freqs.partition_point(|&f| f < g + half);
            let value = if hi > lo {
                power[lo..hi].iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            } else {
                let right = freqs.partition_point(|&f| f < g);
                if right == 0 || right >= freqs.len() {
                    floor
                } else {
                    let (f0, f1) = (freqs[right - 1], freqs[right]);
                    let t = (g - f0) / (f1 - f0);
                    power[right - 1] + t * (power[right] - power[right - 1])
                }
            };
            value.max(floor)
        })
        .collect()
}

/// Simulates one trace per bias point and stacks the floor-clipped spectra into a map.
/// Rows whose integration blows up are recorded as faulted and filled with the floor.
pub fn sweep_bias(circuit: &OscillatorCircuit, config: &SweepConfig) -> Result<SignatureMap> {
    config.validate()?;
    let biases = config.bias_grid();
    let freq_grid = config.frequency_grid();
    let options = SpectrumOptions { window: config.window, load_resistance: circuit.load_resistance, span: config.span };

    let rows: Vec<Result<Option<Vec<f64>>>> = biases
        .par_iter()
        .map(|&bias| {
            let board = circuit.with_bias(bias);
            match simulate_transient(&board, config.duration, row_seed(config.seed, bias)) {
                Ok(trace) => {
                    let spectrum = compute_spectrum_with(&trace, &options)?;
                    Ok(Some(resample(&spectrum, &freq_grid, config.noise_floor)))
                }
                Err(Error::StepUnstable { .. }) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect();

    let mut power_matrix = Vec::with_capacity(rows.len());
    let mut faulted_rows = Vec::new();
    for (i, row) in rows.into_iter().enumerate() {
        match row? {
            Some(r) => power_matrix.push(r),
            None => {
                faulted_rows.push(i);
                power_matrix.push(vec![config.noise_floor; freq_grid.len()]);
            }
        }
    }

    Ok(SignatureMap {
        schema_version: SCHEMA_VERSION.into(),
        board_id: String::new(),
        bias_grid: biases,
        frequency_grid: freq_grid,
        power_matrix,
        noise_floor: config.noise_floor,
        faulted_rows,
        provenance: Provenance { config_hash: config_hash(&(circuit, config)), seed: config.seed },
    })
}

impl SignatureMap {
    pub fn with_board_id(mut self, id: impl Into<String>) -> Self {
        self.board_id = id.into();
        self
    }

    pub fn rows(&self) -> usize {
        self.power_matrix.len()
    }

    pub fn span(&self) -> (f64, f64) {
        (
            self.frequency_grid.first().copied().unwrap_or(0.0),
            self.frequency_grid.last().copied().unwrap_or(0.0),
        )
    }

    /// The row at `index` as a spectrum on the map's frequency grid.
    pub fn row_spectrum(&self, index: usize) -> Result<Spectrum> {
        let spacing = if self.frequency_grid.len() > 1 { self.frequency_grid[1] - self.frequency_grid[0] } else { 0.0 };
        Spectrum::from_parts(self.frequency_grid.clone(), self.power_matrix[index].clone(), spacing, self.span())
    }

    /// Fundamental (frequency, power) per bias row, or `None` where the row is at the floor.
    pub fn fundamental_track(&self, noise_floor: f64) -> Vec<(f64, Option<(f64, f64)>)> {
        (0..self.rows())
            .map(|i| {
                let fundamental = self.row_spectrum(i).ok().and_then(|s| find_fundamental(&s, noise_floor).ok());
                (self.bias_grid[i], fundamental)
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let schema = |path: String, message: String| Error::Schema { path, message };
        if self.power_matrix.len() != self.bias_grid.len() {
            return Err(schema(
                "power_matrix".into(),
                format!("{} rows for {} bias points", self.power_matrix.len(), self.bias_grid.len()),
            ));
        }
        for (i, row) in self.power_matrix.iter().enumerate() {
            if row.len() != self.frequency_grid.len() {
                return Err(schema(
                    format!("power_matrix[{i}]"),
                    format!("{} columns for {} frequency points", row.len(), self.frequency_grid.len()),
                ));
            }
            if let Some(j) = row.iter().position(|p| !p.is_finite()) {
                return Err(schema(format!("power_matrix[{i}][{j}]"), "non-finite value".into()));
            }
        }
        if self.frequency_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(schema("frequency_grid".into(), "must be strictly increasing".into()));
        }
        if self.bias_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(schema("bias_grid".into(), "must be strictly increasing".into()));
        }
        if let Some(&r) = self.faulted_rows.iter().find(|&&r| r >= self.bias_grid.len()) {
            return Err(schema("faulted_rows".into(), format!("row {r} out of range")));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let map: SignatureMap = serde_path_to_error::deserialize(de).map_err(|e| Error::Schema {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
        let major = map.schema_version.split('.').next().unwrap_or("");
        if major != "1" {
            return Err(Error::Schema {
                path: "schema_version".into(),
                message: format!("unsupported version {}", map.schema_version),
            });
        }
        map.validate()?;
        Ok(SignatureMap { schema_version: SCHEMA_VERSION.into(), ..map })
    }

    pub fn write_colormap_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["bias_V", "frequency_Hz", "power_dBm"])?;
        for (bias, row) in self.bias_grid.iter().zip(&self.power_matrix) {
            for (f, p) in self.frequency_grid.iter().zip(row) {
                wtr.write_record([format!("{bias:.6}"), format!("{f:e}"), format!("{p:.6}")])?;
            }
        }
        wtr.flush()?;
        Ok(())
    }
}

pub fn save_map(map: &SignatureMap, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, map.to_json()?)?;
    Ok(())
}

pub fn load_map(path: impl AsRef<Path>) -> Result<SignatureMap> {
    SignatureMap::from_json(&std::fs::read_to_string(path)?)
}

/// Fixed-length descriptor of a map.
///
/// Layout, for R bias rows: R fundamental frequencies (Hz, 0 where the row is at the
/// floor), R fundamental powers (dBm, clipped at the floor), R harmonic counts, then the
/// tunable range over oscillating rows (Hz) and the onset bias (V, `ONSET_ABSENT` if none).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub rows: usize,
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn fundamental_frequencies(&self) -> &[f64] {
        &self.values[..self.rows]
    }

    pub fn fundamental_powers(&self) -> &[f64] {
        &self.values[self.rows..2 * self.rows]
    }

    pub fn harmonic_counts(&self) -> &[f64] {
        &self.values[2 * self.rows..3 * self.rows]
    }

    pub fn tunable_range(&self) -> f64 {
        self.values[3 * self.rows]
    }

    pub fn onset_bias(&self) -> Option<f64> {
        let v = self.values[3 * self.rows + 1];
        (v != ONSET_ABSENT).then_some(v)
    }
}

pub fn feature_vector(map: &SignatureMap, noise_floor: f64) -> FeatureVector {
    let rows = map.rows();
    let mut freqs = vec![0.0; rows];
    let mut powers = vec![noise_floor; rows];
    let mut counts = vec![0.0; rows];
    let mut oscillating = Vec::new();
    for i in 0..rows {
        let Ok(spectrum) = map.row_spectrum(i) else { continue };
        if let Ok((f, p)) = find_fundamental(&spectrum, noise_floor) {
            freqs[i] = f;
            powers[i] = p.max(noise_floor);
            counts[i] = extract_harmonics(&spectrum, f, DEFAULT_HARMONIC_TOLERANCE, noise_floor).harmonics.len() as f64;
            oscillating.push((map.bias_grid[i], f));
        }
    }
    let range = tunable_range(&oscillating).unwrap_or(0.0);
    let onset = oscillating.first().map_or(ONSET_ABSENT, |p| p.0);
    let mut values = freqs;
    values.extend(powers);
    values.extend(counts);
    values.push(range);
    values.push(onset);
    FeatureVector { rows, values }
}
