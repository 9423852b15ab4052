use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;
use tdh_core::circuit::{classify_regime, simulate_transient_with, startup_check, SimOptions};
use tdh_core::diode::IvCurve;
use tdh_core::fingerprint::{tamper_delta, Decision, FingerprintDb};
use tdh_core::link_budget::{
    forward_range, link_curve, log_distances, reverse_curve, reverse_range, write_forward_csv, write_reverse_csv,
};
use tdh_core::signature::{feature_vector, load_map, save_map, sweep_bias};
use tdh_core::spectral::{compute_spectrum_with, extract_harmonics, find_fundamental, SpectrumOptions};

use crate::config::RunConfig;
use crate::{ExportCommand, FingerprintCommand};

/// JSON output wrapper carrying the run's provenance.
#[derive(Serialize)]
struct Stamped<'a, T: Serialize> {
    config_hash: &'a str,
    seed: u64,
    #[serde(flatten)]
    body: T,
}

struct Outputs {
    dir: PathBuf,
    hash: String,
    seed: u64,
}

impl Outputs {
    fn new(config: &RunConfig) -> Result<Self> {
        std::fs::create_dir_all(&config.out).with_context(|| format!("creating {}", config.out.display()))?;
        Ok(Self { dir: config.out.clone(), hash: config.hash(), seed: config.seed })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// CSV with a leading `#` provenance line ahead of the header row.
    fn csv<F>(&self, name: &str, body: F) -> Result<PathBuf>
    where
        F: FnOnce(&mut BufWriter<File>) -> tdh_core::Result<()>,
    {
        let path = self.path(name);
        let mut w = BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?);
        writeln!(w, "# config_hash={} seed={}", self.hash, self.seed)?;
        body(&mut w)?;
        w.flush()?;
        Ok(path)
    }

    fn json<T: Serialize>(&self, name: &str, body: T) -> Result<PathBuf> {
        let path = self.path(name);
        let stamped = Stamped { config_hash: &self.hash, seed: self.seed, body };
        std::fs::write(&path, serde_json::to_string_pretty(&stamped)? + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

#[derive(Serialize)]
struct HarmonicRecords {
    harmonics: Vec<tdh_core::spectral::Harmonic>,
}

#[derive(Serialize)]
struct SimulationReport {
    board_id: String,
    bias_voltage: f64,
    startup: tdh_core::circuit::StartupVerdict,
    regime: tdh_core::circuit::RegimeLabel,
    fundamental_hz: Option<f64>,
    fundamental_dbm: Option<f64>,
    harmonic_count: usize,
}

pub fn simulate(config: &RunConfig) -> Result<()> {
    config.validate()?;
    let out = Outputs::new(config)?;
    let circuit = config.circuit().with_bias(config.simulation.bias);
    let options = SimOptions { decimation: config.simulation.decimation, ..SimOptions::default() };
    let trace = simulate_transient_with(&circuit, config.simulation.duration, config.seed, &options)?;
    let startup = startup_check(&circuit);
    let regime = classify_regime(&trace)?;
    let spectrum = compute_spectrum_with(
        &trace,
        &SpectrumOptions {
            window: config.spectral.window,
            load_resistance: circuit.load_resistance,
            span: config.spectral.span,
        },
    )?;
    let floor = config.spectral.noise_floor;
    let fundamental = find_fundamental(&spectrum, floor).ok();
    let harmonics = fundamental.map(|(f, _)| extract_harmonics(&spectrum, f, config.spectral.harmonic_tolerance, floor));

    out.csv("trace.csv", |w| trace.write_csv(w))?;
    out.csv("spectrum.csv", |w| spectrum.write_csv(w))?;
    out.json("harmonics.json", HarmonicRecords { harmonics: harmonics.as_ref().map(|h| h.records()).unwrap_or_default() })?;
    let report = SimulationReport {
        board_id: config.board_id(),
        bias_voltage: circuit.bias_voltage,
        startup,
        regime,
        fundamental_hz: fundamental.map(|f| f.0),
        fundamental_dbm: fundamental.map(|f| f.1),
        harmonic_count: harmonics.as_ref().map_or(0, |h| h.harmonics.len()),
    };
    out.json("report.json", &report)?;
    match fundamental {
        Some((f, p)) => println!("{:?}: fundamental {:.4} MHz at {:.2} dBm", regime.kind, f / 1e6, p),
        None => println!("{:?}: no signal above {floor} dBm", regime.kind),
    }
    Ok(())
}

pub fn sweep(config: &RunConfig) -> Result<()> {
    config.validate()?;
    let out = Outputs::new(config)?;
    let circuit = config.circuit();
    let map = sweep_bias(&circuit, &config.sweep)?.with_board_id(config.board_id());
    let map_path = out.path("map.json");
    save_map(&map, &map_path)?;
    out.csv("colormap.csv", |w| map.write_colormap_csv(w))?;
    let track = map.fundamental_track(config.sweep.noise_floor);
    out.csv("fundamental.csv", |w| {
        writeln!(w, "bias_V,frequency_Hz,power_dBm")?;
        for (bias, fundamental) in &track {
            match fundamental {
                Some((f, p)) => writeln!(w, "{bias:.6},{f:e},{p:.6}")?,
                None => writeln!(w, "{bias:.6},,")?,
            }
        }
        Ok(())
    })?;
    println!(
        "{} rows x {} points, {} faulted -> {}",
        map.rows(),
        map.frequency_grid.len(),
        map.faulted_rows.len(),
        map_path.display()
    );
    Ok(())
}

fn load_maps(paths: &[PathBuf]) -> Result<Vec<tdh_core::signature::SignatureMap>> {
    paths.iter().map(|p| load_map(p).with_context(|| format!("loading {}", p.display()))).collect()
}

fn load_db(path: &Path, floor: f64) -> Result<FingerprintDb> {
    if path.exists() {
        FingerprintDb::load(path).with_context(|| format!("loading {}", path.display()))
    } else {
        Ok(FingerprintDb::new(floor))
    }
}

#[derive(Serialize)]
struct TamperReport {
    board_id: String,
    delta: f64,
    /// Largest delta still accepted as the same board.
    allowed_delta: f64,
    flagged: bool,
}

pub fn fingerprint(config: &RunConfig, cmd: FingerprintCommand) -> Result<()> {
    let floor = config.spectral.noise_floor;
    match cmd {
        FingerprintCommand::Enroll { db, id, maps } => {
            let mut database = load_db(&db, floor)?;
            let sweeps = load_maps(&maps)?;
            let fp = database.enroll(&id, &sweeps)?;
            println!(
                "enrolled {id}: mean {:.4}, sd {:.4}, threshold {:.4}",
                fp.enrollment_stats.mean, fp.enrollment_stats.std_dev, fp.threshold
            );
            database.save(&db)?;
        }
        FingerprintCommand::Identify { db, map } => {
            let database = load_db(&db, floor)?;
            let query = load_map(&map).with_context(|| format!("loading {}", map.display()))?;
            let report = database.identify(&query)?;
            let out = Outputs::new(config)?;
            out.json("match_report.json", &report)?;
            match &report.decision {
                Decision::Known(id) => println!("known: {id} (score {:.4})", report.ranked_scores[0].1),
                Decision::Unknown => println!("unknown (best score {:.4})", report.ranked_scores[0].1),
            }
        }
        FingerprintCommand::Tamper { db, id, map } => {
            let database = load_db(&db, floor)?;
            let Some(fp) = database.get(&id) else {
                bail!("board `{id}` is not enrolled in {}", db.display());
            };
            let after = load_map(&map).with_context(|| format!("loading {}", map.display()))?;
            let delta = tamper_delta(fp, &after, database.noise_floor)?;
            let allowed = 1.0 - fp.threshold;
            let report = TamperReport { board_id: id.clone(), delta, allowed_delta: allowed, flagged: delta > allowed };
            Outputs::new(config)?.json("tamper_report.json", &report)?;
            println!("{id}: delta {delta:.4} (allowed {allowed:.4}){}", if report.flagged { " FLAGGED" } else { "" });
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct LinkSummary {
    reverse_ranges: Vec<RangeEntry>,
    reader_sensitivity_dbm: f64,
    forward_range_m: f64,
    tag_consumption_w: f64,
    carrier_frequency_hz: f64,
    carrier_frequency_inferred: bool,
}

#[derive(Serialize)]
struct RangeEntry {
    frequency_hz: f64,
    range_m: f64,
}

pub fn linkbudget(config: &RunConfig) -> Result<()> {
    config.validate()?;
    let out = Outputs::new(config)?;
    let link = &config.link;
    let ranges = reverse_range(&link.reverse)?;
    let forward = forward_range(&link.forward)?;
    let distances = log_distances(link.curve_start, link.curve_stop, link.curve_points);
    let fwd_curve = link_curve(&link.forward, &distances)?;
    let rev_curve = reverse_curve(&link.reverse, &distances)?;
    out.csv("forward_curve.csv", |w| write_forward_csv(&fwd_curve, w))?;
    out.csv("reverse_curve.csv", |w| write_reverse_csv(&rev_curve, w))?;
    let summary = LinkSummary {
        reverse_ranges: ranges.iter().map(|&(f, d)| RangeEntry { frequency_hz: f, range_m: d }).collect(),
        reader_sensitivity_dbm: link.reverse.reader_sensitivity,
        forward_range_m: forward,
        tag_consumption_w: link.forward.tag_consumption,
        carrier_frequency_hz: link.forward.carrier_frequency,
        carrier_frequency_inferred: link.forward.carrier_frequency == tdh_core::link_budget::ForwardLinkParams::default().carrier_frequency,
    };
    out.json("link_summary.json", &summary)?;
    for (f, d) in &ranges {
        println!("reverse {:.1} MHz: {:.2} m", f / 1e6, d);
    }
    println!("forward: {forward:.3} m");
    Ok(())
}

pub fn export(config: &RunConfig, cmd: ExportCommand) -> Result<()> {
    let out = Outputs::new(config)?;
    match cmd {
        ExportCommand::Iv { points } => {
            if points < 2 {
                bail!("--points must be at least 2");
            }
            let diode = config.circuit().diode;
            let volts: Vec<f64> = (0..points).map(|i| 0.4 * i as f64 / (points - 1) as f64).collect();
            let curve = IvCurve::from_model(&diode, &volts)?;
            out.csv("iv.csv", |w| curve.write_csv(w))?;
        }
        ExportCommand::Config => {
            let path = out.path("config.toml");
            let text = format!("# config_hash={} seed={}\n{}", out.hash, out.seed, toml::to_string(config)?);
            std::fs::write(&path, text)?;
        }
        ExportCommand::Colormap { map } => {
            let m = load_map(&map)?;
            out.csv("colormap.csv", |w| m.write_colormap_csv(w))?;
        }
        ExportCommand::Features { map } => {
            let m = load_map(&map)?;
            out.json("features.json", feature_vector(&m, config.spectral.noise_floor))?;
        }
    }
    Ok(())
}
