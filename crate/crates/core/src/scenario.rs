//! Scenario files and the commands behind the `qan` binary.
//!
//! A scenario is a JSON object:
//!
//! ```json
//! {
//!   "version": 1,
//!   "scheme": { "kind": "full", "feeder_km": 5, "classical_split": 64,
//!               "olt_attenuation_db": 5 },
//!   "raman": { "beta_feeder": 6.9e-10, "beta_drop": 9.6e-10 },
//!   "protocol": { "mu": 0.4, "nu": 0.1 },
//!   "detector": { "efficiency": 0.15 },
//!   "sweep": [
//!     { "path": "/scheme/feeder_km", "start": 1, "stop": 25, "step": 1 },
//!     { "path": "/scheme/olt_attenuation_db", "values": [3, 6, 9] }
//!   ],
//!   "simulation": { "pulses": 10000000, "seed": 1 },
//!   "postproc": { "winnow": { "block_sizes": [8, 8, 16, 32, 64, 128], "seed": 0 },
//!                 "amplification_seed": 1 }
//! }
//! ```
//!
//! Only `scheme` is required; `catalog` (the full signal/splitter/WDM
//! catalog) and every other section default to the reference deployment.
//! Sweep axes are JSON pointers into the scenario with every default filled
//! in, so `/catalog/olt_launch_dbm` or `/detector/dark_per_gate` work too.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::analysis::{evaluate, Model, PointResult};
use crate::error::{Error, Result};
use crate::keyrate::{
    binary_entropy, decoy_bounds, secure_key_rate, DetectorParams, ProtocolParams,
};
use crate::mc::{self, Deviation, SimConfig, SimOutcome};
use crate::odn::{Catalog, NetworkScheme};
use crate::postproc::{self, Accounting, PipelineConfig};
use crate::raman::{
    calibrate as fit, reference_measurements, total_srs, FitMode, Measurement, RamanParams,
    DEFAULT_BETA_DROP, DEFAULT_BETA_FEEDER,
};

pub const SCENARIO_VERSION: u32 = 1;
pub const SWEEP_CSV_VERSION: &str = "# qan-sweep v1";
pub const PLAN_CSV_VERSION: &str = "# qan-plan v1";
/// Largest |z| accepted by `validate`.
pub const Z_LIMIT: f64 = 3.0;

fn default_version() -> u32 {
    SCENARIO_VERSION
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RamanSection {
    pub beta_feeder: f64,
    pub beta_drop: f64,
}

impl Default for RamanSection {
    fn default() -> Self {
        RamanSection {
            beta_feeder: DEFAULT_BETA_FEEDER,
            beta_drop: DEFAULT_BETA_DROP,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationSection {
    pub pulses: u64,
    pub seed: u64,
}

impl Default for SimulationSection {
    fn default() -> Self {
        SimulationSection {
            pulses: 10_000_000,
            seed: 1,
        }
    }
}

/// One sweep axis: explicit `values`, or `start`/`stop`/`step`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub path: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<Value>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
}

fn number(x: f64) -> Value {
    // whole numbers stay integers so integer fields accept them
    if x.fract() == 0.0 && x.abs() < 9e15 {
        Value::from(x as i64)
    } else {
        Value::from(x)
    }
}

impl Axis {
    pub fn values(path: &str, values: Vec<Value>) -> Self {
        Axis {
            path: path.into(),
            values: Some(values),
            start: None,
            stop: None,
            step: None,
        }
    }

    pub fn range(path: &str, start: f64, stop: f64, step: f64) -> Self {
        Axis {
            path: path.into(),
            values: None,
            start: Some(start),
            stop: Some(stop),
            step: Some(step),
        }
    }

    pub fn points(&self, index: usize) -> Result<Vec<Value>> {
        let here = format!("/sweep/{index}");
        match (&self.values, self.start, self.stop, self.step) {
            (Some(v), None, None, None) => {
                if v.is_empty() {
                    return Err(Error::config(format!("{here}/values"), "must not be empty"));
                }
                Ok(v.clone())
            }
            (None, Some(start), Some(stop), Some(step)) => {
                if !(step > 0.0) || !step.is_finite() {
                    return Err(Error::config(format!("{here}/step"), "must be positive"));
                }
                if !(stop >= start) || !start.is_finite() || !stop.is_finite() {
                    return Err(Error::config(format!("{here}/stop"), "range is empty"));
                }
                let n = ((stop - start) / step + 1e-9).floor() as u64 + 1;
                Ok((0..n)
                    .map(|k| number(((start + k as f64 * step) * 1e9).round() / 1e9))
                    .collect())
            }
            _ => Err(Error::config(
                here,
                "give either `values` or all of `start`, `stop` and `step`",
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default = "default_version")]
    pub version: u32,
    #[serde(default)]
    pub catalog: Catalog,
    pub scheme: NetworkScheme,
    #[serde(default)]
    pub raman: RamanSection,
    #[serde(default)]
    pub protocol: ProtocolParams,
    #[serde(default)]
    pub detector: DetectorParams,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sweep: Vec<Axis>,
    #[serde(default)]
    pub simulation: SimulationSection,
    #[serde(default)]
    pub postproc: PipelineConfig,
}

fn pointer_of(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        match seg {
            Segment::Seq { index } => write!(out, "/{index}").unwrap(),
            Segment::Map { key } => write!(out, "/{key}").unwrap(),
            Segment::Enum { variant } => write!(out, "/{variant}").unwrap(),
            Segment::Unknown => out.push_str("/?"),
        }
    }
    if out.is_empty() {
        out.push('/');
    }
    out
}

fn parse<T: DeserializeOwned>(text: &str, origin: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| Error::Config {
        path: pointer_of(e.path()),
        message: format!("{origin}: {}", e.inner()),
    })
}

fn from_value<T: DeserializeOwned>(v: Value) -> Result<T> {
    serde_path_to_error::deserialize(v).map_err(|e| Error::Config {
        path: pointer_of(e.path()),
        message: e.inner().to_string(),
    })
}

impl Scenario {
    pub fn new(scheme: NetworkScheme) -> Self {
        Scenario {
            version: SCENARIO_VERSION,
            catalog: Catalog::default(),
            scheme,
            raman: RamanSection::default(),
            protocol: ProtocolParams::default(),
            detector: DetectorParams::default(),
            sweep: Vec::new(),
            simulation: SimulationSection::default(),
            postproc: PipelineConfig::default(),
        }
    }

    /// Parses and validates.
    pub fn from_json(text: &str) -> Result<Self> {
        let s: Scenario = parse(text, "scenario")?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// Checks everything except the sweep grid.
    pub fn validate_point(&self) -> Result<()> {
        if self.version != SCENARIO_VERSION {
            return Err(Error::config(
                "/version",
                format!(
                    "unsupported version {}, expected {SCENARIO_VERSION}",
                    self.version
                ),
            ));
        }
        self.catalog.validate()?;
        self.scheme.validate()?;
        self.protocol.validate()?;
        self.detector.validate()?;
        self.raman_params()?;
        self.postproc.winnow.validate()?;
        if self.simulation.pulses == 0 {
            return Err(Error::config("/simulation/pulses", "must be at least 1"));
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_point()?;
        let base = serde_json::to_value(self)?;
        for (i, axis) in self.sweep.iter().enumerate() {
            if axis.path.starts_with("/sweep") || base.pointer(&axis.path).is_none() {
                return Err(Error::config(
                    format!("/sweep/{i}/path"),
                    format!("`{}` does not name a scenario field", axis.path),
                ));
            }
            axis.points(i)?;
        }
        Ok(())
    }

    pub fn raman_params(&self) -> Result<RamanParams> {
        RamanParams::from_catalog(&self.catalog, self.raman.beta_feeder, self.raman.beta_drop)
    }

    pub fn model(&self) -> Result<Model> {
        Ok(Model {
            catalog: self.catalog.clone(),
            raman: self.raman_params()?,
            protocol: self.protocol,
            detector: self.detector,
        })
    }

    /// Copy with `values[i]` written at the `i`-th sweep axis path and the
    /// sweep removed.
    pub fn with_point(&self, values: &[Value]) -> Result<Scenario> {
        let mut v = serde_json::to_value(self)?;
        for (axis, value) in self.sweep.iter().zip(values) {
            let slot = v
                .pointer_mut(&axis.path)
                .ok_or_else(|| Error::config(&axis.path, "does not name a scenario field"))?;
            *slot = value.clone();
        }
        let mut s: Scenario = from_value(v)?;
        s.sweep.clear();
        s.validate_point()?;
        Ok(s)
    }

    /// Copy with `value` written at the JSON pointer `path`.
    pub fn with_value(&self, path: &str, value: Value) -> Result<Scenario> {
        let mut v = serde_json::to_value(self)?;
        let slot = v
            .pointer_mut(path)
            .ok_or_else(|| Error::config(path, "does not name a scenario field"))?;
        *slot = value;
        let s: Scenario = from_value(v)?;
        s.validate()?;
        Ok(s)
    }

    /// Grid points in lexicographic order, first axis outermost.
    pub fn grid(&self) -> Result<Vec<Vec<Value>>> {
        let mut grid = vec![Vec::new()];
        for (i, axis) in self.sweep.iter().enumerate() {
            let pts = axis.points(i)?;
            grid = grid
                .into_iter()
                .flat_map(|prefix| {
                    pts.iter().map(move |p| {
                        let mut row = prefix.clone();
                        row.push(p.clone());
                        row
                    })
                })
                .collect();
        }
        Ok(grid)
    }
}

// ---------------------------------------------------------------- plan

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanReport {
    pub scheme: NetworkScheme,
    pub result: PointResult,
}

pub fn plan(s: &Scenario) -> Result<PlanReport> {
    s.validate_point()?;
    Ok(PlanReport {
        scheme: s.scheme.clone(),
        result: evaluate(&s.scheme, &s.model()?)?,
    })
}

/// Shortest round-trip representation; exponent form outside [1e-4, 1e15).
pub fn fmt_f64(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-4..1e15).contains(&a) || !x.is_finite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

/// Output columns shared by plan and sweep CSV.
pub const RESULT_COLUMNS: [&str; 24] = [
    "kind",
    "feeder_km",
    "drop_km",
    "classical_split",
    "quantum_split",
    "olt_attenuation_db",
    "link_loss_db",
    "olt_feeder_entry_dbm",
    "olt_drop_entry_dbm",
    "raman_receiver_cps",
    "raman_per_gate",
    "eta",
    "q_mu",
    "e_mu",
    "q_nu",
    "e_nu",
    "y_0",
    "y_1_lower",
    "e_1_upper",
    "q_1",
    "r_per_pulse",
    "r_bps",
    "feasible",
    "error",
];

fn kind_name(s: &NetworkScheme) -> String {
    match serde_json::to_value(s.kind) {
        Ok(Value::String(k)) => k,
        _ => String::new(),
    }
}

fn result_fields(
    scheme: Option<&NetworkScheme>,
    r: &std::result::Result<PointResult, String>,
) -> Vec<String> {
    let mut out = match scheme {
        Some(s) => vec![
            kind_name(s),
            fmt_f64(s.feeder_km),
            fmt_f64(s.drop_km),
            s.classical_split.to_string(),
            s.quantum_split().to_string(),
            fmt_f64(s.olt_attenuation_db),
        ],
        None => vec![String::new(); 6],
    };
    match r {
        Ok(p) => {
            out.extend(
                [
                    p.link_loss_db,
                    p.olt_feeder_entry_dbm,
                    p.olt_drop_entry_dbm,
                    p.raman.receiver_rate,
                    p.raman.per_gate_probability,
                    p.eta,
                    p.observables.q_mu,
                    p.observables.e_mu,
                    p.observables.q_nu,
                    p.observables.e_nu,
                    p.observables.y_0,
                    p.key.y_1_lower,
                    p.key.e_1_upper,
                    p.key.q_1,
                    p.key.r_per_pulse,
                    p.key.r_bps,
                ]
                .map(fmt_f64),
            );
            out.push(p.key.feasible.to_string());
            out.push(String::new());
        }
        Err(e) => {
            out.extend(std::iter::repeat_n(String::new(), 16));
            out.push("false".into());
            out.push(e.clone());
        }
    }
    out
}

fn csv_text(version: &str, header: Vec<String>, rows: Vec<Vec<String>>) -> Result<String> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(&header).map_err(csv_err)?;
    for r in rows {
        w.write_record(&r).map_err(csv_err)?;
    }
    let body = w
        .into_inner()
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    Ok(format!(
        "{version}\n{}",
        String::from_utf8(body).expect("csv is utf-8")
    ))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

impl PlanReport {
    pub fn to_csv(&self) -> Result<String> {
        let header = RESULT_COLUMNS.iter().map(|c| c.to_string()).collect();
        csv_text(
            PLAN_CSV_VERSION,
            header,
            vec![result_fields(Some(&self.scheme), &Ok(self.result.clone()))],
        )
    }

    pub fn to_table(&self) -> String {
        let r = &self.result;
        let s = &self.scheme;
        let mut t = String::new();
        let mut line = |k: &str, v: String| writeln!(t, "{k:<28}{v}").unwrap();
        line("scheme", kind_name(s));
        line(
            "feeder / drop (km)",
            format!("{} / {}", s.feeder_km, s.drop_km),
        );
        line(
            "split classical / quantum",
            format!("1:{} / 1:{}", s.classical_split, s.quantum_split()),
        );
        line("OLT attenuation (dB)", format!("{}", s.olt_attenuation_db));
        line("quantum link loss (dB)", format!("{:.3}", r.link_loss_db));
        line(
            "OLT at feeder entry (dBm)",
            format!("{:.3}", r.olt_feeder_entry_dbm),
        );
        line(
            "OLT at drop entry (dBm)",
            format!("{:.3}", r.olt_drop_entry_dbm),
        );
        line(
            "Raman at receiver (cps)",
            format!("{:.1}", r.raman.receiver_rate),
        );
        line(
            "Raman per gate",
            format!("{:.4e}", r.raman.per_gate_probability),
        );
        line("transmittance", format!("{:.4e}", r.eta));
        line(
            "Q_mu / E_mu",
            format!("{:.4e} / {:.4}", r.observables.q_mu, r.observables.e_mu),
        );
        line(
            "Q_nu / E_nu",
            format!("{:.4e} / {:.4}", r.observables.q_nu, r.observables.e_nu),
        );
        line("Y_0", format!("{:.4e}", r.observables.y_0));
        line(
            "Y_1 lower / e_1 upper",
            format!("{:.4e} / {:.4}", r.key.y_1_lower, r.key.e_1_upper),
        );
        line("key rate (bit/s per user)", format!("{:.1}", r.key.r_bps));
        line("feasible", r.key.feasible.to_string());
        t
    }
}

// ---------------------------------------------------------------- sweep

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub point: Vec<Value>,
    pub scheme: Option<NetworkScheme>,
    pub result: std::result::Result<PointResult, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutput {
    pub axes: Vec<String>,
    pub rows: Vec<SweepRow>,
}

/// Evaluates the Cartesian grid of the sweep axes. Points whose scenario
/// or evaluation fails become error rows.
pub fn sweep(s: &Scenario) -> Result<SweepOutput> {
    s.validate()?;
    if s.sweep.is_empty() {
        return Err(Error::config("/sweep", "needs at least one axis"));
    }
    let rows = s
        .grid()?
        .into_par_iter()
        .map(|point| {
            let at = s.with_point(&point);
            let scheme = at.as_ref().ok().map(|a| a.scheme.clone());
            let result = at
                .and_then(|a| evaluate(&a.scheme, &a.model()?))
                .map_err(|e| e.to_string());
            SweepRow {
                point,
                scheme,
                result,
            }
        })
        .collect();
    Ok(SweepOutput {
        axes: s.sweep.iter().map(|a| a.path.clone()).collect(),
        rows,
    })
}

fn value_text(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Number(n) => n.as_f64().map(fmt_f64).unwrap_or_else(|| n.to_string()),
        other => other.to_string(),
    }
}

impl SweepOutput {
    pub fn to_csv(&self) -> Result<String> {
        let mut header: Vec<String> = self.axes.clone();
        header.extend(RESULT_COLUMNS.iter().map(|c| c.to_string()));
        let rows = self
            .rows
            .iter()
            .map(|r| {
                let mut f: Vec<String> = r.point.iter().map(value_text).collect();
                f.extend(result_fields(r.scheme.as_ref(), &r.result));
                f
            })
            .collect();
        csv_text(SWEEP_CSV_VERSION, header, rows)
    }

    pub fn to_json(&self) -> Result<String> {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| {
                let point: serde_json::Map<String, Value> = self
                    .axes
                    .iter()
                    .cloned()
                    .zip(r.point.iter().cloned())
                    .collect();
                match &r.result {
                    Ok(p) => serde_json::json!({ "point": point, "scheme": r.scheme, "result": p }),
                    Err(e) => serde_json::json!({ "point": point, "scheme": r.scheme, "error": e }),
                }
            })
            .collect();
        Ok(serde_json::to_string_pretty(&serde_json::json!({
            "version": SWEEP_CSV_VERSION.trim_start_matches("# "),
            "axes": self.axes,
            "rows": rows,
        }))?)
    }
}

// ---------------------------------------------------------------- calibrate

/// Input of `calibrate`: measurements to fit and optional rows to predict
/// with the fitted coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationInput {
    #[serde(default)]
    pub catalog: Catalog,
    #[serde(default)]
    pub detector: DetectorParams,
    #[serde(default = "default_fit_mode")]
    pub mode: FitMode,
    pub measurements: Vec<Measurement>,
    #[serde(default)]
    pub predict: Vec<Measurement>,
}

fn default_fit_mode() -> FitMode {
    FitMode::Split
}

impl CalibrationInput {
    /// The reference noise table: fit the 5 km rows, predict the 20 km rows.
    pub fn reference() -> Self {
        let rows = reference_measurements();
        CalibrationInput {
            catalog: Catalog::default(),
            detector: DetectorParams::default(),
            mode: FitMode::Split,
            measurements: rows[..2].to_vec(),
            predict: rows[2..].to_vec(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: CalibrationInput = parse(text, "measurements")?;
        c.catalog.validate()?;
        c.detector.validate()?;
        for (i, m) in c.measurements.iter().chain(&c.predict).enumerate() {
            m.scheme.validate().map_err(|e| match e {
                Error::Config { path, message } => Error::Config {
                    path: format!("/measurements/{i}{path}"),
                    message,
                },
                other => other,
            })?;
        }
        Ok(c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowReport {
    pub scheme: NetworkScheme,
    pub observed_cps: f64,
    pub predicted_cps: f64,
    pub relative_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    /// Drop-in `raman` section for a scenario.
    pub raman: RamanSection,
    pub mode: FitMode,
    pub fit: Vec<RowReport>,
    pub predictions: Vec<RowReport>,
}

pub fn calibrate(input: &CalibrationInput) -> Result<CalibrationReport> {
    let base = RamanParams::from_catalog(&input.catalog, DEFAULT_BETA_FEEDER, DEFAULT_BETA_DROP)?;
    let cal = fit(
        &input.measurements,
        &base,
        &input.catalog,
        &input.detector,
        input.mode,
    )?;
    let fit_rows = input
        .measurements
        .iter()
        .zip(cal.predicted_cps.iter().zip(&cal.relative_residuals))
        .map(|(m, (&p, &r))| RowReport {
            scheme: m.scheme.clone(),
            observed_cps: m.observed_cps,
            predicted_cps: p,
            relative_error: r,
        })
        .collect();
    let predictions = input
        .predict
        .iter()
        .map(|m| {
            let p =
                total_srs(&m.scheme, &input.catalog, &cal.params, &input.detector)?.receiver_rate;
            Ok(RowReport {
                scheme: m.scheme.clone(),
                observed_cps: m.observed_cps,
                predicted_cps: p,
                relative_error: (p - m.observed_cps) / m.observed_cps,
            })
        })
        .collect::<Result<_>>()?;
    Ok(CalibrationReport {
        raman: RamanSection {
            beta_feeder: cal.params.beta_feeder,
            beta_drop: cal.params.beta_drop,
        },
        mode: cal.mode,
        fit: fit_rows,
        predictions,
    })
}

// ---------------------------------------------------------------- validate

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub pulses: u64,
    pub seed: u64,
    pub link_loss_db: f64,
    pub raman_per_gate: f64,
    pub deviations: Vec<Deviation>,
    pub max_abs_z: f64,
    pub pass: bool,
}

impl ValidationReport {
    pub fn to_table(&self) -> String {
        let mut t = format!(
            "pulses {}  seed {}  link loss {:.3} dB  Raman/gate {:.4e}\n",
            self.pulses, self.seed, self.link_loss_db, self.raman_per_gate
        );
        writeln!(
            t,
            "{:<6}{:>16}{:>16}{:>14}{:>9}",
            "", "simulated", "analytic", "sigma", "z"
        )
        .unwrap();
        for d in &self.deviations {
            writeln!(
                t,
                "{:<6}{:>16.6e}{:>16.6e}{:>14.3e}{:>9.2}",
                d.observable, d.simulated, d.expected, d.sigma, d.z
            )
            .unwrap();
        }
        writeln!(
            t,
            "{}",
            if self.pass {
                "PASS"
            } else {
                "FAIL: deviation above 3 sigma"
            }
        )
        .unwrap();
        t
    }
}

/// Simulates `cfg` and scores it against the analytic observables of the
/// same configuration.
pub fn validate_config(cfg: &SimConfig) -> Result<(ValidationReport, SimOutcome)> {
    let out = mc::simulate(cfg)?;
    let deviations = mc::compare(&out, &cfg.expected());
    let max_abs_z = deviations.iter().map(|d| d.z.abs()).fold(0.0, f64::max);
    Ok((
        ValidationReport {
            pulses: cfg.pulses,
            seed: cfg.seed,
            link_loss_db: cfg.link_loss_db,
            raman_per_gate: cfg.raman_per_gate,
            deviations,
            max_abs_z,
            pass: max_abs_z <= Z_LIMIT,
        },
        out,
    ))
}

/// Simulation settings for the scenario's single point.
pub fn sim_config(s: &Scenario) -> Result<SimConfig> {
    let p = plan(s)?;
    Ok(SimConfig {
        pulses: s.simulation.pulses,
        seed: s.simulation.seed,
        protocol: s.protocol,
        detector: s.detector,
        link_loss_db: p.result.link_loss_db,
        raman_per_gate: p.result.raman.per_gate_probability,
    })
}

pub fn validate(s: &Scenario) -> Result<ValidationReport> {
    Ok(validate_config(&sim_config(s)?)?.0)
}

// ---------------------------------------------------------------- postproc

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostprocReport {
    pub pulses: u64,
    pub seed: u64,
    pub accounting: Accounting,
    pub observables: mc::EmpiricalObservables,
    /// Secret bits per second realized by this run.
    pub realized_bps: f64,
    /// Analytic rate with the configured error-correction efficiency.
    pub analytic_bps: f64,
    /// Leakage per sifted bit over `H(E_mu)` of the analytic model.
    pub reconciliation_efficiency: f64,
    /// Analytic rate charged with the realized reconciliation efficiency.
    pub analytic_bps_at_realized_efficiency: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PostprocOutput {
    pub report: PostprocReport,
    pub simulation: SimOutcome,
    pub sender_key: crate::bits::BitString,
    pub receiver_key: crate::bits::BitString,
}

/// Monte Carlo, Winnow and Toeplitz end to end for the scenario's point.
pub fn run_postproc(s: &Scenario) -> Result<PostprocOutput> {
    let cfg = sim_config(s)?;
    let sim = mc::simulate(&cfg)?;
    let res = postproc::process_simulation(&sim, &s.protocol, &s.postproc)?;
    let acc = res.accounting;
    let expected = cfg.expected();
    let bounds = decoy_bounds(&expected, &s.protocol);
    let analytic_bps = secure_key_rate(&expected, &bounds, &s.protocol).r_bps;
    let h = binary_entropy(expected.e_mu);
    let efficiency = if acc.sifted_len > 0 && h > 0.0 && acc.leakage > 0 {
        acc.leakage as f64 / (acc.sifted_len as f64 * h)
    } else {
        s.protocol.f_ec
    };
    let at_realized = ProtocolParams {
        f_ec: efficiency.max(1.0),
        ..s.protocol
    };
    let report = PostprocReport {
        pulses: cfg.pulses,
        seed: cfg.seed,
        realized_bps: postproc::realized_rate(acc.final_len, cfg.pulses, &s.protocol),
        analytic_bps,
        reconciliation_efficiency: efficiency,
        analytic_bps_at_realized_efficiency: secure_key_rate(&expected, &bounds, &at_realized)
            .r_bps,
        observables: sim.observables,
        accounting: acc,
    };
    Ok(PostprocOutput {
        report,
        simulation: sim,
        sender_key: res.sender_key,
        receiver_key: res.receiver_key,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> Scenario {
        Scenario::new(NetworkScheme::full(5.0, 64).with_attenuation(5.0))
    }

    #[test]
    fn minimal_scenario_fills_defaults() {
        let s = Scenario::from_json(
            r#"{"scheme": {"kind": "full", "feeder_km": 5, "classical_split": 64}}"#,
        )
        .unwrap();
        assert_eq!(s.scheme.drop_km, 1.0);
        assert_eq!(s.protocol, ProtocolParams::default());
        assert_eq!(s.catalog, Catalog::default());
        assert_eq!(s.raman, RamanSection::default());
    }

    #[test]
    fn json_round_trip() {
        let mut s = base();
        s.sweep
            .push(Axis::range("/scheme/feeder_km", 1.0, 3.0, 1.0));
        let back = Scenario::from_json(&s.to_json()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn errors_carry_paths() {
        let e = Scenario::from_json(
            r#"{"scheme": {"kind": "full", "feeder_km": "far", "classical_split": 4}}"#,
        )
        .unwrap_err();
        assert!(
            matches!(&e, Error::Config { path, .. } if path == "/scheme/feeder_km"),
            "{e}"
        );
        let e = Scenario::from_json(r#"{"scheme": {"kind": "full", "feeder_km": 1, "classical_split": 4}, "protocol": {"mu": 0.1, "nu": 0.2}}"#)
            .unwrap_err();
        assert!(
            matches!(&e, Error::Config { path, .. } if path == "/protocol/nu"),
            "{e}"
        );
        let e = Scenario::from_json(
            r#"{"scheme": {"kind": "full", "feeder_km": 1, "classical_split": 4}, "colour": 1}"#,
        )
        .unwrap_err();
        assert!(matches!(&e, Error::Config { .. }), "{e}");
        let e = Scenario::from_json(
            r#"{"scheme": {"kind": "full", "feeder_km": 1, "classical_split": 6}}"#,
        )
        .unwrap_err();
        assert!(
            matches!(&e, Error::Config { path, .. } if path == "/scheme/classical_split"),
            "{e}"
        );
    }

    #[test]
    fn sweep_axes_must_exist_and_be_non_empty() {
        let mut s = base();
        s.sweep.push(Axis::values("/scheme/colour", vec![1.into()]));
        assert!(matches!(s.validate(), Err(Error::Config { path, .. }) if path == "/sweep/0/path"));
        let mut s = base();
        s.sweep.push(Axis::values("/scheme/feeder_km", vec![]));
        assert!(
            matches!(s.validate(), Err(Error::Config { path, .. }) if path == "/sweep/0/values")
        );
        let mut s = base();
        s.sweep
            .push(Axis::range("/scheme/feeder_km", 5.0, 1.0, 1.0));
        assert!(s.validate().is_err());
    }

    #[test]
    fn range_points_are_clean() {
        let a = Axis::range("/x", 0.1, 0.5, 0.1);
        let pts = a.points(0).unwrap();
        assert_eq!(pts.len(), 5);
        assert_eq!(pts[2], serde_json::json!(0.3));
        let ints = Axis::range("/x", 1.0, 25.0, 1.0).points(0).unwrap();
        assert_eq!(ints.len(), 25);
        assert!(ints[0].is_i64());
    }

    #[test]
    fn set_single_field() {
        let s = base().with_value("/scheme/feeder_km", 20.into()).unwrap();
        assert_eq!(s.scheme.feeder_km, 20.0);
        assert!(base().with_value("/scheme/nope", 1.into()).is_err());
        assert!(base().with_value("/protocol/mu", 0.05.into()).is_err());
    }

    #[test]
    fn grid_is_lexicographic() {
        let mut s = base();
        s.sweep.push(Axis::values(
            "/scheme/classical_split",
            vec![16.into(), 32.into()],
        ));
        s.sweep.push(Axis::values(
            "/scheme/feeder_km",
            vec![1.into(), 2.into(), 3.into()],
        ));
        let g = s.grid().unwrap();
        assert_eq!(g.len(), 6);
        assert_eq!(g[0], vec![Value::from(16), Value::from(1)]);
        assert_eq!(g[2], vec![Value::from(16), Value::from(3)]);
        assert_eq!(g[3], vec![Value::from(32), Value::from(1)]);
    }

    #[test]
    fn bad_points_become_error_rows() {
        let mut s = base();
        s.sweep.push(Axis::values(
            "/scheme/classical_split",
            vec![16.into(), 24.into()],
        ));
        let out = sweep(&s).unwrap();
        assert!(out.rows[0].result.is_ok());
        let err = out.rows[1].result.as_ref().unwrap_err();
        assert!(err.contains("classical_split"), "{err}");
        let csv = out.to_csv().unwrap();
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.lines().nth(3).unwrap().contains(",false,"));
    }

    #[test]
    fn plan_rejects_inverted_decoys() {
        let mut s = base();
        s.protocol.nu = 0.5;
        assert!(matches!(plan(&s), Err(Error::Config { path, .. }) if path == "/protocol/nu"));
    }

    #[test]
    fn empty_scheme_is_lossless_and_best() {
        let mut s = Scenario::new(NetworkScheme::full(0.0, 1).with_drop(0.0));
        s.scheme.quantum_path = Some(vec![]);
        s.scheme.classical_path = Some(vec![]);
        let r = plan(&s).unwrap().result;
        assert_eq!(r.link_loss_db, 0.0);
        assert_eq!(r.raman.receiver_rate, 0.0);
        assert!(r.key.feasible);
        let lossy = plan(&base()).unwrap().result;
        assert!(r.key.r_bps > lossy.key.r_bps);
    }

    #[test]
    fn fmt_is_round_trip() {
        for x in [
            0.0,
            1.5,
            26.5,
            2.2553689651957333e-7,
            1e-4,
            625e6,
            -3.25,
            1e20,
        ] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(fmt_f64(26.5), "26.5");
        assert_eq!(fmt_f64(2e-7), "2e-7");
    }

    #[test]
    fn reference_calibration_report() {
        let r = calibrate(&CalibrationInput::reference()).unwrap();
        assert_eq!(r.raman, RamanSection::default());
        assert_eq!(r.fit.len(), 2);
        assert_eq!(r.predictions.len(), 2);
        for row in &r.fit {
            assert!(row.relative_error.abs() < 1e-12);
        }
    }

    #[test]
    fn blocked_channel_validates_to_zero_gain() {
        let cfg = SimConfig {
            pulses: 100_000,
            seed: 3,
            protocol: ProtocolParams::default(),
            detector: DetectorParams {
                dark_per_gate: 0.0,
                ..Default::default()
            },
            link_loss_db: f64::INFINITY,
            raman_per_gate: 0.0,
        };
        let (rep, _) = validate_config(&cfg).unwrap();
        assert!(rep.pass);
        for d in &rep.deviations {
            if d.observable.starts_with('q') || d.observable == "y_0" {
                assert_eq!(d.simulated, 0.0);
                assert_eq!(d.expected, 0.0);
            }
        }
    }
}
