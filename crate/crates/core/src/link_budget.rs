//! Free-space link budgets for harmonic tags: reverse detection range and forward power-up range.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::{db_to_linear, dbm_to_watts, watts_to_dbm};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Closest distance at which a link is evaluated (m).
pub const MIN_DISTANCE: f64 = 0.1;

fn positive(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::NonPositiveInput(format!("{name} = {value}")))
    }
}

/// Free-space path loss, 20*log10(4*pi*d*f/c), in dB.
pub fn fspl_db(frequency: f64, distance: f64) -> Result<f64> {
    positive("frequency", frequency)?;
    positive("distance", distance)?;
    Ok(20.0 * (4.0 * PI * distance * frequency / SPEED_OF_LIGHT).log10())
}

pub fn received_power_dbm(tx_dbm: f64, gains_dbi: (f64, f64), frequency: f64, distance: f64) -> Result<f64> {
    Ok(tx_dbm + gains_dbi.0 + gains_dbi.1 - fspl_db(frequency, distance)?)
}

/// Distance at which free-space loss equals `budget_db`.
fn distance_for_loss(frequency: f64, budget_db: f64) -> f64 {
    SPEED_OF_LIGHT / (4.0 * PI * frequency) * 10f64.powf(budget_db / 20.0)
}

/// Frequency-dependent antenna gain, interpolated linearly in log-frequency and held flat
/// outside the tabulated range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainMask {
    /// (frequency Hz, gain dBi), sorted by frequency.
    pub points: Vec<(f64, f64)>,
}

impl GainMask {
    /// Rough horn-antenna response: below 0 dBi under about 700 MHz, rising past 7 dBi above 1 GHz.
    pub fn horn() -> Self {
        Self {
            points: vec![(200e6, -8.0), (400e6, -4.0), (700e6, -0.5), (1e9, 7.2), (2e9, 9.5), (3e9, 11.0)],
        }
    }

    pub fn gain_at(&self, frequency: f64) -> f64 {
        let pts = &self.points;
        match pts.len() {
            0 => 0.0,
            _ if frequency <= pts[0].0 => pts[0].1,
            n if frequency >= pts[n - 1].0 => pts[n - 1].1,
            _ => {
                let i = pts.partition_point(|p| p.0 < frequency);
                let (f0, g0) = pts[i - 1];
                let (f1, g1) = pts[i];
                let t = (frequency / f0).ln() / (f1 / f0).ln();
                g0 + t * (g1 - g0)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReverseLinkParams {
    /// (frequency Hz, transmitted power dBm) per spectral peak.
    pub harmonic_powers: Vec<(f64, f64)>,
    pub tag_antenna_gain: f64,
    pub reader_antenna_gain: f64,
    pub reader_sensitivity: f64,
    /// When set, replaces the flat reader antenna gain.
    pub reader_gain_mask: Option<GainMask>,
}

impl Default for ReverseLinkParams {
    fn default() -> Self {
        Self {
            harmonic_powers: vec![(727.2e6, -11.80)],
            tag_antenna_gain: 3.0,
            reader_antenna_gain: 3.0,
            reader_sensitivity: -90.0,
            reader_gain_mask: None,
        }
    }
}

impl ReverseLinkParams {
    pub fn gains_at(&self, frequency: f64) -> (f64, f64) {
        let reader = self.reader_gain_mask.as_ref().map_or(self.reader_antenna_gain, |m| m.gain_at(frequency));
        (self.tag_antenna_gain, reader)
    }
}

/// Per peak, the distance at which the received power falls to the reader sensitivity.
/// Peaks already below sensitivity at `MIN_DISTANCE` report 0.
pub fn reverse_range(params: &ReverseLinkParams) -> Result<Vec<(f64, f64)>> {
    params
        .harmonic_powers
        .iter()
        .map(|&(f, p)| {
            positive("frequency", f)?;
            let (gt, gr) = params.gains_at(f);
            let d = distance_for_loss(f, p + gt + gr - params.reader_sensitivity);
            Ok((f, if d < MIN_DISTANCE { 0.0 } else { d }))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForwardLinkParams {
    pub tx_power: f64,
    pub tx_antenna_gain: f64,
    pub tag_antenna_gain: f64,
    pub rectification_efficiency: f64,
    pub tag_consumption: f64,
    /// Reader carrier (Hz). The default is inferred so that a 524.6 µW tag reaches about
    /// 2.74 m; it is not a measured value.
    pub carrier_frequency: f64,
}

impl Default for ForwardLinkParams {
    fn default() -> Self {
        Self {
            tx_power: 1.0,
            tx_antenna_gain: 3.0,
            tag_antenna_gain: 3.0,
            rectification_efficiency: 0.30,
            tag_consumption: 524.6e-6,
            carrier_frequency: 415e6,
        }
    }
}

impl ForwardLinkParams {
    pub fn validate(&self) -> Result<()> {
        positive("tx_power", self.tx_power)?;
        positive("tag_consumption", self.tag_consumption)?;
        positive("carrier_frequency", self.carrier_frequency)?;
        if !(self.rectification_efficiency > 0.0 && self.rectification_efficiency <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "rectification_efficiency must lie in (0, 1], got {}",
                self.rectification_efficiency
            )));
        }
        if !(self.tx_antenna_gain.is_finite() && self.tag_antenna_gain.is_finite()) {
            return Err(Error::InvalidInput("antenna gains must be finite".into()));
        }
        Ok(())
    }

    fn received_dbm(&self, distance: f64) -> Result<f64> {
        received_power_dbm(
            watts_to_dbm(self.tx_power),
            (self.tx_antenna_gain, self.tag_antenna_gain),
            self.carrier_frequency,
            distance,
        )
    }
}

/// Largest distance at which the rectified power still covers the tag's consumption.
pub fn forward_range(params: &ForwardLinkParams) -> Result<f64> {
    params.validate()?;
    let gain = db_to_linear(params.tx_antenna_gain + params.tag_antenna_gain);
    let wavelength = SPEED_OF_LIGHT / params.carrier_frequency;
    let d = wavelength / (4.0 * PI)
        * (params.rectification_efficiency * params.tx_power * gain / params.tag_consumption).sqrt();
    if d < MIN_DISTANCE {
        return Err(Error::InfeasibleAtContact { distance_m: MIN_DISTANCE });
    }
    Ok(d)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkPoint {
    pub distance_m: f64,
    pub received_dbm: f64,
    pub harvested_w: f64,
}

fn check_distances(distances: &[f64]) -> Result<()> {
    for &d in distances {
        positive("distance", d)?;
    }
    if distances.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidInput("distances must be sorted ascending".into()));
    }
    Ok(())
}

/// Forward-link power at each distance, with the rectified power available to the tag.
pub fn link_curve(params: &ForwardLinkParams, distances: &[f64]) -> Result<Vec<LinkPoint>> {
    params.validate()?;
    check_distances(distances)?;
    distances
        .iter()
        .map(|&d| {
            let received = params.received_dbm(d)?;
            Ok(LinkPoint {
                distance_m: d,
                received_dbm: received,
                harvested_w: params.rectification_efficiency * dbm_to_watts(received),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReversePoint {
    pub frequency_hz: f64,
    pub distance_m: f64,
    pub received_dbm: f64,
}

/// Reader-side power of every peak at each distance.
pub fn reverse_curve(params: &ReverseLinkParams, distances: &[f64]) -> Result<Vec<ReversePoint>> {
    check_distances(distances)?;
    let mut out = Vec::with_capacity(distances.len() * params.harmonic_powers.len());
    for &(f, p) in &params.harmonic_powers {
        for &d in distances {
            out.push(ReversePoint { frequency_hz: f, distance_m: d, received_dbm: received_power_dbm(p, params.gains_at(f), f, d)? });
        }
    }
    Ok(out)
}

/// `count` distances spaced evenly in log scale between `start` and `stop`.
pub fn log_distances(start: f64, stop: f64, count: usize) -> Vec<f64> {
    if count < 2 {
        return vec![start];
    }
    let ratio = (stop / start).ln();
    (0..count).map(|i| start * (ratio * i as f64 / (count - 1) as f64).exp()).collect()
}

pub fn write_forward_csv<W: Write>(points: &[LinkPoint], writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["distance_m", "received_dBm", "harvested_W"])?;
    for p in points {
        wtr.write_record([format!("{:e}", p.distance_m), format!("{:.9}", p.received_dbm), format!("{:e}", p.harvested_w)])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_reverse_csv<W: Write>(points: &[ReversePoint], writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["frequency_Hz", "distance_m", "received_dBm"])?;
    for p in points {
        wtr.write_record([format!("{:e}", p.frequency_hz), format!("{:e}", p.distance_m), format!("{:.9}", p.received_dbm)])?;
    }
    wtr.flush()?;
    Ok(())
}
