use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use tdh_core::circuit::{Board, OscillatorCircuit};
use tdh_core::link_budget::{ForwardLinkParams, ReverseLinkParams};
use tdh_core::signature::SweepConfig;
use tdh_core::spectral::{Window, DEFAULT_NOISE_FLOOR, DEFAULT_SPAN};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSection {
    pub bias: f64,
    pub duration: f64,
    pub decimation: usize,
}

impl Default for SimulationSection {
    fn default() -> Self {
        Self { bias: 0.2, duration: 2e-6, decimation: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectralSection {
    pub window: Window,
    pub noise_floor: f64,
    pub span: (f64, f64),
    pub harmonic_tolerance: f64,
}

impl Default for SpectralSection {
    fn default() -> Self {
        Self { window: Window::Hann, noise_floor: DEFAULT_NOISE_FLOOR, span: DEFAULT_SPAN, harmonic_tolerance: 0.02 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkSection {
    pub reverse: ReverseLinkParams,
    pub forward: ForwardLinkParams,
    /// Distances for the exported curves (m).
    pub curve_start: f64,
    pub curve_stop: f64,
    pub curve_points: usize,
}

impl Default for LinkSection {
    fn default() -> Self {
        Self {
            reverse: ReverseLinkParams::default(),
            forward: ForwardLinkParams::default(),
            curve_start: 0.1,
            curve_stop: 1000.0,
            curve_points: 41,
        }
    }
}

/// Everything a run depends on. Its hash is written into every output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub board: Board,
    /// Explicit circuit; replaces the preset when present.
    pub circuit: Option<OscillatorCircuit>,
    pub seed: u64,
    pub out: PathBuf,
    pub simulation: SimulationSection,
    pub sweep: SweepConfig,
    pub spectral: SpectralSection,
    pub link: LinkSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            board: Board::Board1,
            circuit: None,
            seed: 0,
            out: PathBuf::from("out"),
            simulation: SimulationSection::default(),
            sweep: SweepConfig::default(),
            spectral: SpectralSection::default(),
            link: LinkSection::default(),
        }
    }
}

impl RunConfig {
    /// Reads TOML, or JSON when the file extension is `.json`.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        if is_json {
            let de = &mut serde_json::Deserializer::from_str(&text);
            serde_path_to_error_json(de).with_context(|| format!("parsing config {}", path.display()))
        } else {
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
        }
    }

    pub fn circuit(&self) -> OscillatorCircuit {
        self.circuit.unwrap_or_else(|| OscillatorCircuit::preset(self.board))
    }

    pub fn board_id(&self) -> String {
        if self.circuit.is_some() {
            "custom".into()
        } else {
            self.board.name().into()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bias = self.simulation.bias;
        if !(0.0..=tdh_core::circuit::MAX_BIAS).contains(&bias) {
            bail!("simulation.bias: {bias} V is outside the supported range [0, {}] V", tdh_core::circuit::MAX_BIAS);
        }
        self.circuit().with_bias(bias).validate().context("circuit")?;
        self.sweep.validate().context("sweep")?;
        self.link.forward.validate().context("link.forward")?;
        if self.simulation.decimation == 0 {
            bail!("simulation.decimation must be at least 1");
        }
        if !(self.link.curve_start > 0.0 && self.link.curve_stop > self.link.curve_start && self.link.curve_points >= 2) {
            bail!("link curve distances must satisfy 0 < curve_start < curve_stop with at least 2 points");
        }
        Ok(())
    }

    /// Hash of everything except the output directory.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.out = PathBuf::new();
        tdh_core::signature::config_hash(&canonical)
    }
}

fn serde_path_to_error_json<'de, T: Deserialize<'de>>(
    de: &mut serde_json::Deserializer<serde_json::de::StrRead<'de>>,
) -> Result<T> {
    serde_path_to_error::deserialize(de).map_err(|e| anyhow::anyhow!("at `{}`: {}", e.path(), e.inner()))
}
