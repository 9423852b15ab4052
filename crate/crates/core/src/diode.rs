//! Parametric Esaki tunnel-diode model.
//!
//! The current is the sum of a tunnelling term, an excess term and a thermal diode term.
//! The excess term is offset so the model passes through the origin.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiodeParams {
    /// Tunnelling peak current scale (A).
    pub peak_current: f64,
    /// Voltage of the tunnelling peak (V).
    pub peak_voltage: f64,
    /// Excess current scale at the valley voltage (A).
    pub valley_current: f64,
    /// Valley voltage (V).
    pub valley_voltage: f64,
    /// Thermal diode saturation current (A).
    pub saturation_current: f64,
    /// Thermal voltage times ideality (V).
    pub thermal_voltage: f64,
    /// Exponential slope of the excess current (1/V).
    pub excess_coefficient: f64,
    /// Zero-bias junction capacitance (F).
    pub junction_capacitance: f64,
    /// Linear voltage coefficient of the junction capacitance (1/V). Zero keeps it constant.
    #[serde(default)]
    pub capacitance_voltage_coefficient: f64,
}

impl Default for DiodeParams {
    fn default() -> Self {
        Self {
            peak_current: 3.05e-3,
            peak_voltage: 0.105,
            valley_current: 0.90e-3,
            valley_voltage: 0.30,
            saturation_current: 1e-12,
            thermal_voltage: 0.026,
            excess_coefficient: 11.0,
            junction_capacitance: 2.5e-12,
            capacitance_voltage_coefficient: 0.0,
        }
    }
}

impl DiodeParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("peak_current", self.peak_current),
            ("peak_voltage", self.peak_voltage),
            ("valley_current", self.valley_current),
            ("valley_voltage", self.valley_voltage),
            ("saturation_current", self.saturation_current),
            ("thermal_voltage", self.thermal_voltage),
            ("excess_coefficient", self.excess_coefficient),
            ("junction_capacitance", self.junction_capacitance),
        ];
        for (name, value) in fields {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidInput(format!("{name} must be finite and positive, got {value}")));
            }
        }
        if !self.capacitance_voltage_coefficient.is_finite() {
            return Err(Error::InvalidInput("capacitance_voltage_coefficient must be finite".into()));
        }
        if self.peak_voltage >= self.valley_voltage {
            return Err(Error::InvalidInput("peak_voltage must be below valley_voltage".into()));
        }
        Ok(())
    }

    /// Diode current at junction voltage `v`. Defined for any real `v`.
    #[inline]
    pub fn current(&self, v: f64) -> f64 {
        let x = v / self.peak_voltage;
        let tunnel = self.peak_current * x * (1.0 - x).exp();
        let a = self.excess_coefficient;
        let excess = self.valley_current * ((a * (v - self.valley_voltage)).exp() - (-a * self.valley_voltage).exp());
        let thermal = self.saturation_current * (v / self.thermal_voltage).exp_m1();
        tunnel + excess + thermal
    }

    /// Analytic dI/dV at `v`.
    #[inline]
    pub fn conductance(&self, v: f64) -> f64 {
        let x = v / self.peak_voltage;
        let tunnel = self.peak_current / self.peak_voltage * (1.0 - x) * (1.0 - x).exp();
        let a = self.excess_coefficient;
        let excess = self.valley_current * a * (a * (v - self.valley_voltage)).exp();
        let thermal = self.saturation_current / self.thermal_voltage * (v / self.thermal_voltage).exp();
        tunnel + excess + thermal
    }

    /// Junction capacitance at `v`, floored at a tenth of the zero-bias value so that
    /// large negative swings cannot drive it to zero.
    #[inline]
    pub fn capacitance(&self, v: f64) -> f64 {
        let c = self.junction_capacitance * (1.0 + self.capacitance_voltage_coefficient * v);
        c.max(0.1 * self.junction_capacitance)
    }
}

fn check_voltage(v: f64) -> Result<()> {
    if !v.is_finite() {
        return Err(Error::InvalidInput(format!("voltage must be finite, got {v}")));
    }
    if v < 0.0 {
        return Err(Error::InvalidInput(format!("reverse bias is not modelled, got {v} V")));
    }
    Ok(())
}

pub fn iv_current(params: &DiodeParams, v: f64) -> Result<f64> {
    check_voltage(v)?;
    Ok(params.current(v))
}

pub fn differential_conductance(params: &DiodeParams, v: f64) -> Result<f64> {
    check_voltage(v)?;
    Ok(params.conductance(v))
}

pub fn dc_power(params: &DiodeParams, v: f64) -> Result<f64> {
    check_voltage(v)?;
    Ok(v * params.current(v))
}

fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let mut f_lo = f(lo);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return mid;
        }
        if (f_mid > 0.0) == (f_lo > 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Voltage interval where dI/dV is negative. Endpoints are located to well below 1 µV.
pub fn ndr_region(params: &DiodeParams) -> Result<(f64, f64)> {
    params.validate()?;
    let upper = 4.0 * params.valley_voltage;
    let n = 40_000;
    let step = upper / n as f64;
    let g = |v: f64| params.conductance(v);
    let mut low = None;
    let mut prev_v = 0.0;
    let mut prev_g = g(0.0);
    for i in 1..=n {
        let v = i as f64 * step;
        let gv = g(v);
        match low {
            None if prev_g > 0.0 && gv <= 0.0 => low = Some(bisect(g, prev_v, v, 1e-10)),
            Some(lo) if prev_g < 0.0 && gv >= 0.0 => return Ok((lo, bisect(g, prev_v, v, 1e-10))),
            _ => {}
        }
        prev_v = v;
        prev_g = gv;
    }
    Err(Error::NoNdr)
}

#[derive(Debug, Clone, PartialEq)]
pub struct IvCurve {
    points: Vec<(f64, f64)>,
}

impl IvCurve {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        for (i, &(v, c)) in points.iter().enumerate() {
            if !v.is_finite() || !c.is_finite() {
                return Err(Error::InvalidInput(format!("non-finite IV point at row {i}")));
            }
            if i > 0 && v <= points[i - 1].0 {
                return Err(Error::InvalidInput(format!("voltages must be strictly increasing (row {i})")));
            }
        }
        Ok(Self { points })
    }

    /// Samples the model at the given voltages.
    pub fn from_model(params: &DiodeParams, voltages: &[f64]) -> Result<Self> {
        Self::new(voltages.iter().map(|&v| (v, params.current(v))).collect())
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.len() != 2 || &headers[0] != "voltage_V" || &headers[1] != "current_A" {
            return Err(Error::InvalidInput("IV csv header must be `voltage_V,current_A`".into()));
        }
        let mut points = Vec::new();
        for record in rdr.deserialize() {
            let (v, c): (f64, f64) = record?;
            points.push((v, c));
        }
        Self::new(points)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["voltage_V", "current_A"])?;
        for &(v, c) in &self.points {
            wtr.write_record([v.to_string(), c.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub params: DiodeParams,
    pub initial_rms: f64,
    pub rms_residual: f64,
    pub iterations: usize,
}

const MAX_FIT_ITERATIONS: usize = 500;

/// Which parameters the fit moves. The valley voltage stays at its initial value: the
/// offset excess term only depends on it through the product with the valley current.
/// The peak voltage is fitted as a logit of its fraction of the valley voltage, which
/// keeps it inside (0, valley_voltage).
#[derive(Clone, Copy)]
struct FitLayout {
    thermal: bool,
}

impl FitLayout {
    fn pack(&self, p: &DiodeParams) -> Vec<f64> {
        let fraction = p.peak_voltage / p.valley_voltage;
        let logit = (fraction / (1.0 - fraction)).ln();
        let mut theta = vec![p.peak_current.ln(), logit, p.valley_current.ln(), p.excess_coefficient.ln()];
        if self.thermal {
            theta.push(p.saturation_current.ln());
            theta.push(p.thermal_voltage.ln());
        }
        theta
    }

    fn unpack(&self, theta: &[f64], base: &DiodeParams) -> DiodeParams {
        let mut p = *base;
        p.peak_current = theta[0].exp();
        let fraction = (1.0 / (1.0 + (-theta[1]).exp())).clamp(1e-6, 1.0 - 1e-6);
        p.peak_voltage = base.valley_voltage * fraction;
        p.valley_current = theta[2].exp();
        p.excess_coefficient = theta[3].exp();
        if self.thermal {
            p.saturation_current = theta[4].exp();
            p.thermal_voltage = theta[5].exp();
        }
        p
    }
}

fn sse(params: &DiodeParams, points: &[(f64, f64)]) -> f64 {
    points.iter().map(|&(v, i)| (params.current(v) - i).powi(2)).sum()
}

/// Least-squares fit of the model to sampled IV points (Levenberg-Marquardt in log
/// parameter space). The thermal term is only fitted when it carries at least 1% of the
/// peak current somewhere in the sample range.
pub fn calibrate_from_samples(curve: &IvCurve, initial: &DiodeParams) -> Result<FitReport> {
    initial.validate()?;
    let points = curve.points();
    if points.len() < 8 {
        return Err(Error::InsufficientPoints { needed: 8, got: points.len() });
    }
    let below = points.iter().filter(|p| p.0 < initial.peak_voltage).count();
    if below == 0 || below == points.len() {
        return Err(Error::InvalidInput("samples must span both sides of the peak voltage".into()));
    }

    let v_max = points.last().map(|p| p.0).unwrap_or(0.0);
    let thermal_share = initial.saturation_current * (v_max / initial.thermal_voltage).exp_m1();
    let layout = FitLayout { thermal: thermal_share > 0.01 * initial.peak_current };

    let n = points.len();
    let scale = 1.0 / initial.peak_current;
    let residuals = |theta: &[f64]| -> DVector<f64> {
        let p = layout.unpack(theta, initial);
        DVector::from_iterator(n, points.iter().map(|&(v, i)| (p.current(v) - i) * scale))
    };

    let mut theta = layout.pack(initial);
    let m = theta.len();
    let initial_sse = sse(initial, points);
    let mut r = residuals(&theta);
    let mut cost = r.norm_squared();
    let mut lambda = 1e-3;
    let mut iterations = 0;

    while iterations < MAX_FIT_ITERATIONS {
        iterations += 1;
        let mut jac = DMatrix::<f64>::zeros(n, m);
        for j in 0..m {
            let h = 1e-6;
            let mut up = theta.clone();
            let mut down = theta.clone();
            up[j] += h;
            down[j] -= h;
            let col = (residuals(&up) - residuals(&down)) / (2.0 * h);
            jac.set_column(j, &col);
        }
        let jt = jac.transpose();
        let jtj = &jt * &jac;
        let grad = &jt * &r;
        if grad.amax() < 1e-15 {
            break;
        }

        let mut improved = false;
        for _ in 0..30 {
            let mut a = jtj.clone();
            for k in 0..m {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-12);
            }
            let Some(delta) = a.lu().solve(&(-&grad)) else {
                lambda *= 10.0;
                continue;
            };
            let candidate: Vec<f64> = theta.iter().zip(delta.iter()).map(|(t, d)| t + d).collect();
            let r_new = residuals(&candidate);
            let cost_new = r_new.norm_squared();
            if cost_new.is_finite() && cost_new < cost {
                let rel = (cost - cost_new) / cost.max(1e-300);
                theta = candidate;
                r = r_new;
                cost = cost_new;
                lambda = (lambda / 3.0).max(1e-12);
                improved = true;
                if rel < 1e-14 {
                    iterations = MAX_FIT_ITERATIONS;
                }
                break;
            }
            lambda *= 4.0;
        }
        if !improved {
            break;
        }
    }

    let params = layout.unpack(&theta, initial);
    let final_sse = sse(&params, points);
    let rms = (final_sse / n as f64).sqrt();
    if !final_sse.is_finite() || (initial_sse > 0.0 && final_sse > initial_sse) {
        return Err(Error::FitDiverged { iterations, rms });
    }
    Ok(FitReport {
        params,
        initial_rms: (initial_sse / n as f64).sqrt(),
        rms_residual: rms,
        iterations: iterations.min(MAX_FIT_ITERATIONS),
    })
}
