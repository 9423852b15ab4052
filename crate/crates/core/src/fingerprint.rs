//! Enrollment and identification of boards from their signature maps.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signature::{Provenance, SignatureMap, SCHEMA_VERSION};

pub const DB_SCHEMA_VERSION: &str = "1.0";
pub const MIN_ENROLLMENT_SWEEPS: usize = 3;
/// Lower bound on every per-board acceptance threshold.
pub const THRESHOLD_FLOOR: f64 = 0.6;
/// Number of enrollment standard deviations below the mean at which a match is rejected.
pub const THRESHOLD_SIGMAS: f64 = 3.0;
/// Smallest deviation used when setting a threshold. Three near-identical simulated
/// sweeps give a deviation far below the spread a fresh sweep actually shows.
pub const MIN_SCORE_DEVIATION: f64 = 0.01;

fn same_span(a: (f64, f64), b: (f64, f64)) -> bool {
    let tol = 1e-9 * a.1.abs().max(b.1.abs()).max(1.0);
    (a.0 - b.0).abs() <= tol && (a.1 - b.1).abs() <= tol
}

/// Linear interpolation of `row` (on `from`) onto `to`. Both grids share end points.
fn interpolate_row(row: &[f64], from: &[f64], to: &[f64]) -> Vec<f64> {
    to.iter()
        .map(|&x| {
            let i = from.partition_point(|&f| f < x);
            if i == 0 {
                row[0]
            } else if i >= from.len() {
                row[row.len() - 1]
            } else {
                let t = (x - from[i - 1]) / (from[i] - from[i - 1]);
                row[i - 1] + t * (row[i] - row[i - 1])
            }
        })
        .collect()
}

fn microvolts(v: f64) -> i64 {
    (v * 1e6).round() as i64
}

/// Pairs of rows (on a common frequency grid) for every bias present in both maps.
fn aligned_rows(a: &SignatureMap, b: &SignatureMap) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    if a.frequency_grid.is_empty() || b.frequency_grid.is_empty() || !same_span(a.span(), b.span()) {
        return Err(Error::GridMismatch(format!(
            "spans differ: {:?} vs {:?}",
            a.span(),
            b.span()
        )));
    }
    let identical = a.frequency_grid == b.frequency_grid;
    let grid: &[f64] = if a.frequency_grid.len() >= b.frequency_grid.len() { &a.frequency_grid } else { &b.frequency_grid };
    let prepare = |m: &SignatureMap, row: &Vec<f64>| {
        if identical || m.frequency_grid.as_slice() == grid {
            row.clone()
        } else {
            interpolate_row(row, &m.frequency_grid, grid)
        }
    };

    let mut pairs = Vec::new();
    let mut j = 0;
    for (i, &bias) in a.bias_grid.iter().enumerate() {
        let key = microvolts(bias);
        while j < b.bias_grid.len() && microvolts(b.bias_grid[j]) < key {
            j += 1;
        }
        if j < b.bias_grid.len() && microvolts(b.bias_grid[j]) == key {
            pairs.push((prepare(a, &a.power_matrix[i]), prepare(b, &b.power_matrix[j])));
        }
    }
    if pairs.is_empty() {
        return Err(Error::GridMismatch("maps share no bias points".into()));
    }
    Ok(pairs)
}

/// Linear power relative to the floor, or 0 at and below it.
fn above_floor(dbm: f64, noise_floor: f64) -> f64 {
    if dbm > noise_floor {
        10f64.powf((dbm - noise_floor) / 10.0)
    } else {
        0.0
    }
}

/// Mean row-wise cosine similarity of the floor-clipped rows in linear power, clamped to
/// [0, 1]. Working in linear power makes a uniform dB offset on the unclipped bins a pure
/// scale factor, which the cosine ignores.
///
/// Rows at the floor in both maps carry no information and are skipped; a row at the
/// floor in only one map scores 0. Two maps with no informative rows score 1.
pub fn match_score(a: &SignatureMap, b: &SignatureMap, noise_floor: f64) -> Result<f64> {
    let pairs = aligned_rows(a, b)?;
    let mut total = 0.0;
    let mut counted = 0usize;
    for (ra, rb) in &pairs {
        let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
        for (&x, &y) in ra.iter().zip(rb) {
            let x = above_floor(x, noise_floor);
            let y = above_floor(y, noise_floor);
            dot += x * y;
            na += x * x;
            nb += y * y;
        }
        if na == 0.0 && nb == 0.0 {
            continue;
        }
        counted += 1;
        if na > 0.0 && nb > 0.0 {
            total += (dot / (na * nb).sqrt()).clamp(0.0, 1.0);
        }
    }
    if counted == 0 {
        return Ok(1.0);
    }
    Ok((total / counted as f64).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnrollmentStats {
    pub mean: f64,
    pub std_dev: f64,
    pub sweeps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fingerprint {
    pub board_id: String,
    pub template: SignatureMap,
    pub enrollment_stats: EnrollmentStats,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FingerprintDb {
    pub schema_version: String,
    pub noise_floor: f64,
    pub fingerprints: Vec<Fingerprint>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "board_id")]
pub enum Decision {
    Known(String),
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchReport {
    pub query_id: String,
    /// (board id, score), best first.
    pub ranked_scores: Vec<(String, f64)>,
    pub decision: Decision,
    pub threshold_used: f64,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Element-wise median of maps that share both grids.
pub fn median_template(sweeps: &[SignatureMap]) -> Result<SignatureMap> {
    let first = sweeps.first().ok_or(Error::TooFewSweeps { needed: 1, got: 0 })?;
    for s in &sweeps[1..] {
        if s.frequency_grid != first.frequency_grid || s.bias_grid != first.bias_grid {
            return Err(Error::GridMismatch("enrollment sweeps must share bias and frequency grids".into()));
        }
    }
    let mut scratch = vec![0.0; sweeps.len()];
    let power_matrix = (0..first.rows())
        .map(|i| {
            (0..first.frequency_grid.len())
                .map(|j| {
                    for (k, s) in sweeps.iter().enumerate() {
                        scratch[k] = s.power_matrix[i][j];
                    }
                    median(&mut scratch)
                })
                .collect()
        })
        .collect();
    Ok(SignatureMap {
        schema_version: SCHEMA_VERSION.into(),
        board_id: first.board_id.clone(),
        bias_grid: first.bias_grid.clone(),
        frequency_grid: first.frequency_grid.clone(),
        power_matrix,
        noise_floor: first.noise_floor,
        faulted_rows: Vec::new(),
        provenance: Provenance {
            config_hash: crate::signature::config_hash(&sweeps.iter().map(|s| &s.provenance).collect::<Vec<_>>()),
            seed: first.provenance.seed,
        },
    })
}

impl FingerprintDb {
    pub fn new(noise_floor: f64) -> Self {
        Self { schema_version: DB_SCHEMA_VERSION.into(), noise_floor, fingerprints: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.fingerprints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fingerprints.is_empty()
    }

    pub fn get(&self, board_id: &str) -> Option<&Fingerprint> {
        self.fingerprints.iter().find(|f| f.board_id == board_id)
    }

    /// Adds a board from at least three sweeps. The template is the element-wise median and
    /// the threshold is mean minus three standard deviations of the pairwise sweep scores
    /// (deviation floored at `MIN_SCORE_DEVIATION`), never below `THRESHOLD_FLOOR`.
    pub fn enroll(&mut self, board_id: &str, sweeps: &[SignatureMap]) -> Result<&Fingerprint> {
        if self.get(board_id).is_some() {
            return Err(Error::DuplicateId(board_id.into()));
        }
        if sweeps.len() < MIN_ENROLLMENT_SWEEPS {
            return Err(Error::TooFewSweeps { needed: MIN_ENROLLMENT_SWEEPS, got: sweeps.len() });
        }
        let template = median_template(sweeps)?.with_board_id(board_id);
        let mut scores = Vec::new();
        for i in 0..sweeps.len() {
            for j in i + 1..sweeps.len() {
                scores.push(match_score(&sweeps[i], &sweeps[j], self.noise_floor)?);
            }
        }
        let n = scores.len() as f64;
        let mean = scores.iter().sum::<f64>() / n;
        let std_dev = if scores.len() > 1 {
            (scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        let threshold = (mean - THRESHOLD_SIGMAS * std_dev.max(MIN_SCORE_DEVIATION)).max(THRESHOLD_FLOOR);
        self.fingerprints.push(Fingerprint {
            board_id: board_id.into(),
            template,
            enrollment_stats: EnrollmentStats { mean, std_dev, sweeps: sweeps.len() },
            threshold,
        });
        Ok(self.fingerprints.last().expect("just pushed"))
    }

    pub fn identify(&self, query: &SignatureMap) -> Result<MatchReport> {
        if self.fingerprints.is_empty() {
            return Err(Error::EmptyDatabase);
        }
        let mut ranked = Vec::with_capacity(self.fingerprints.len());
        for fp in &self.fingerprints {
            ranked.push((fp, match_score(&fp.template, query, self.noise_floor)?));
        }
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.board_id.cmp(&b.0.board_id)));
        let (best, best_score) = ranked[0];
        let decision = if best_score >= best.threshold { Decision::Known(best.board_id.clone()) } else { Decision::Unknown };
        Ok(MatchReport {
            query_id: query.board_id.clone(),
            ranked_scores: ranked.iter().map(|(f, s)| (f.board_id.clone(), *s)).collect(),
            decision,
            threshold_used: best.threshold,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let db: FingerprintDb = serde_path_to_error::deserialize(de).map_err(|e| Error::Schema {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
        if db.schema_version.split('.').next() != Some("1") {
            return Err(Error::Schema {
                path: "schema_version".into(),
                message: format!("unsupported version {}", db.schema_version),
            });
        }
        for (i, fp) in db.fingerprints.iter().enumerate() {
            fp.template.validate().map_err(|e| match e {
                Error::Schema { path, message } => Error::Schema { path: format!("fingerprints[{i}].template.{path}"), message },
                other => other,
            })?;
        }
        Ok(db)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// How far a board has drifted from its enrolled template: 1 minus the match score.
pub fn tamper_delta(before: &Fingerprint, after: &SignatureMap, noise_floor: f64) -> Result<f64> {
    Ok(1.0 - match_score(&before.template, after, noise_floor)?)
}
