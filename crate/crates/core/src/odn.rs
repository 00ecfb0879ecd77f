//! Optical distribution network: signal plan, splitters, WDM stages and the
//! three coexistence topologies.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::keyrate::DetectorParams;
use crate::raman::power_to_count_rate;
use crate::units::{db_to_linear, dbm_to_mw, mw_to_dbm};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Downstream,
    Upstream,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignalKind {
    Quantum,
    Sync,
    Classical,
}

/// One wavelength channel of the signal plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalSpec {
    pub name: String,
    pub kind: SignalKind,
    pub wavelength_nm: f64,
    pub wavelength_range_nm: (f64, f64),
    pub direction: Direction,
    /// Line rate; zero for the quantum and sync pulses.
    pub data_rate_gbps: f64,
    pub attenuation_db_per_km: f64,
    /// Launch (or peak) power. Absent for the quantum signal, whose level is
    /// set by the mean photon number.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub launch_power_dbm: Option<f64>,
}

impl SignalSpec {
    pub fn validate(&self, path: &str) -> Result<()> {
        let (lo, hi) = self.wavelength_range_nm;
        if !(lo <= self.wavelength_nm && self.wavelength_nm <= hi) {
            return Err(Error::config(
                format!("{path}/wavelength_nm"),
                format!(
                    "center {} nm outside range {lo}..{hi} nm",
                    self.wavelength_nm
                ),
            ));
        }
        if !(self.attenuation_db_per_km > 0.0) {
            return Err(Error::config(
                format!("{path}/attenuation_db_per_km"),
                "attenuation must be positive",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerSplitter {
    pub ratio: u32,
    pub insertion_loss_db: f64,
}

impl PowerSplitter {
    pub fn ideal_loss_db(&self) -> f64 {
        10.0 * f64::from(self.ratio).log10()
    }

    pub fn excess_loss_db(&self) -> f64 {
        self.insertion_loss_db - self.ideal_loss_db()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum StageKind {
    Mux,
    Demux,
    Filter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Isolation {
    pub interferer: String,
    pub victim: String,
    pub db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WdmStage {
    pub name: String,
    pub kind: StageKind,
    pub insertion_loss_db: BTreeMap<String, f64>,
    #[serde(default)]
    pub isolation: Vec<Isolation>,
}

impl WdmStage {
    pub fn loss_for(&self, signal: &str) -> Option<f64> {
        self.insertion_loss_db.get(signal).copied()
    }

    pub fn isolation_db(&self, interferer: &str, victim: &str) -> f64 {
        self.isolation
            .iter()
            .filter(|iso| iso.interferer == interferer && iso.victim == victim)
            .map(|iso| iso.db)
            .sum()
    }
}

/// Signal plan, splitter measurements and WDM modules of one deployment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Catalog {
    pub signals: Vec<SignalSpec>,
    pub splitters: Vec<PowerSplitter>,
    pub stages: Vec<WdmStage>,
    /// Total power of the OLT transceiver (both downstream lines).
    pub olt_launch_dbm: f64,
    /// Label whose losses and attenuation stand for the OLT pump.
    pub olt_signal: String,
    pub quantum_signal: String,
}

#[allow(clippy::too_many_arguments)]
fn signal(
    name: &str,
    kind: SignalKind,
    center: f64,
    range: (f64, f64),
    direction: Direction,
    rate: f64,
    att: f64,
    power: Option<f64>,
) -> SignalSpec {
    SignalSpec {
        name: name.to_owned(),
        kind,
        wavelength_nm: center,
        wavelength_range_nm: range,
        direction,
        data_rate_gbps: rate,
        attenuation_db_per_km: att,
        launch_power_dbm: power,
    }
}

fn losses(entries: &[(&str, f64)]) -> BTreeMap<String, f64> {
    entries.iter().map(|&(k, v)| (k.to_owned(), v)).collect()
}

fn iso(interferer: &str, victim: &str, db: f64) -> Isolation {
    Isolation {
        interferer: interferer.to_owned(),
        victim: victim.to_owned(),
        db,
    }
}

/// Measured average insertion losses of the 1:N splitters.
pub const SPLITTER_CATALOG: [(u32, f64); 5] =
    [(4, 7.4), (8, 10.5), (16, 13.6), (32, 17.1), (64, 20.2)];

/// Default insertion loss of the WDM filter module for the OLT signal.
pub const DEFAULT_FILTER_OLT_LOSS_DB: f64 = 1.0;

impl Default for Catalog {
    /// The 10G-EPON + QKD plan of the reference deployment.
    fn default() -> Self {
        use Direction::*;
        use SignalKind::*;
        let olt_power = Some(7.2);
        let signals = vec![
            signal(
                "1G-OLT",
                Classical,
                1490.0,
                (1480.0, 1500.0),
                Downstream,
                1.25,
                0.31,
                olt_power,
            ),
            signal(
                "10G-OLT",
                Classical,
                1577.0,
                (1575.0, 1580.0),
                Downstream,
                10.3125,
                0.31,
                olt_power,
            ),
            signal(
                "10G-ONU",
                Classical,
                1270.0,
                (1260.0, 1280.0),
                Upstream,
                10.3125,
                0.57,
                Some(5.7),
            ),
            signal(
                "1G-ONU-2",
                Classical,
                1310.0,
                (1260.0, 1360.0),
                Upstream,
                1.25,
                0.48,
                Some(2.0),
            ),
            signal(
                "1G-ONU-3",
                Classical,
                1310.0,
                (1260.0, 1360.0),
                Upstream,
                1.25,
                0.48,
                Some(3.4),
            ),
            signal(
                "QKD-Sig",
                Quantum,
                1550.12,
                (1550.12, 1550.12),
                Downstream,
                0.0,
                0.35,
                None,
            ),
            signal(
                "QKD-Syn",
                Sync,
                1569.59,
                (1569.59, 1569.59),
                Downstream,
                0.0,
                0.34,
                None,
            ),
        ];
        let splitters = SPLITTER_CATALOG
            .iter()
            .map(|&(ratio, insertion_loss_db)| PowerSplitter {
                ratio,
                insertion_loss_db,
            })
            .collect();
        let onu_demux = 0.5;
        let stages = vec![
            WdmStage {
                name: "MUX".into(),
                kind: StageKind::Mux,
                insertion_loss_db: losses(&[
                    ("1G-OLT", 0.9),
                    ("10G-OLT", 0.9),
                    ("10G-ONU", 1.0),
                    ("1G-ONU-2", 0.7),
                    ("1G-ONU-3", 0.7),
                    ("QKD-Sig", 0.8),
                ]),
                isolation: vec![iso("1G-OLT", "QKD-Sig", 23.0)],
            },
            WdmStage {
                name: "DEMUX".into(),
                kind: StageKind::Demux,
                insertion_loss_db: losses(&[
                    ("1G-OLT", 1.0),
                    ("10G-OLT", 1.0),
                    ("10G-ONU", onu_demux),
                    ("1G-ONU-2", onu_demux),
                    ("1G-ONU-3", onu_demux),
                    ("QKD-Sig", 3.4),
                ]),
                isolation: vec![
                    iso("1G-OLT", "QKD-Sig", 107.0),
                    iso("10G-OLT", "QKD-Sig", 71.0),
                    iso("10G-ONU", "QKD-Sig", 107.0),
                    iso("1G-ONU-2", "QKD-Sig", 107.0),
                    iso("1G-ONU-3", "QKD-Sig", 107.0),
                ],
            },
            WdmStage {
                name: "FILTER".into(),
                kind: StageKind::Filter,
                insertion_loss_db: losses(&[
                    ("1G-OLT", DEFAULT_FILTER_OLT_LOSS_DB),
                    ("10G-OLT", DEFAULT_FILTER_OLT_LOSS_DB),
                ]),
                isolation: Vec::new(),
            },
        ];
        Catalog {
            signals,
            splitters,
            stages,
            olt_launch_dbm: 7.2,
            olt_signal: "10G-OLT".into(),
            quantum_signal: "QKD-Sig".into(),
        }
    }
}

impl Catalog {
    pub fn signal(&self, name: &str) -> Result<&SignalSpec> {
        self.signals
            .iter()
            .find(|s| s.name == name)
            .ok_or_else(|| Error::Unknown {
                kind: "signal",
                name: name.to_owned(),
            })
    }

    pub fn stage(&self, name: &str) -> Result<&WdmStage> {
        self.stages
            .iter()
            .find(|s| s.name == name)
            .ok_or_else(|| Error::Unknown {
                kind: "stage",
                name: name.to_owned(),
            })
    }

    pub fn quantum(&self) -> Result<&SignalSpec> {
        self.signal(&self.quantum_signal)
    }

    pub fn olt(&self) -> Result<&SignalSpec> {
        self.signal(&self.olt_signal)
    }

    /// Insertion loss of a 1:n splitter. Catalog ratios are returned as
    /// measured; other powers of two get the ideal split loss plus an excess
    /// loss interpolated linearly in log2(n) (1:1 has zero excess).
    pub fn splitter_loss(&self, n: u32) -> Result<f64> {
        if n == 0 || !n.is_power_of_two() {
            return Err(Error::SplitterRatio(n));
        }
        if let Some(s) = self.splitters.iter().find(|s| s.ratio == n) {
            return Ok(s.insertion_loss_db);
        }
        let mut knots: Vec<(f64, f64)> = self
            .splitters
            .iter()
            .filter(|s| s.ratio.is_power_of_two())
            .map(|s| (f64::from(s.ratio).log2(), s.excess_loss_db()))
            .collect();
        knots.push((0.0, 0.0));
        knots.sort_by(|a, b| a.0.total_cmp(&b.0));
        knots.dedup_by(|a, b| a.0 == b.0);
        let x = f64::from(n).log2();
        let excess = interpolate(&knots, x).max(0.0);
        Ok(10.0 * f64::from(n).log10() + excess)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, s) in self.signals.iter().enumerate() {
            s.validate(&format!("/catalog/signals/{i}"))?;
        }
        for (i, s) in self.splitters.iter().enumerate() {
            // small tolerance: 10*log10(4) = 6.0206 rounds to measured values
            if s.ratio == 0 || s.insertion_loss_db < s.ideal_loss_db() - 1e-9 {
                return Err(Error::config(
                    format!("/catalog/splitters/{i}"),
                    format!(
                        "1:{} loss {} dB beats the ideal split",
                        s.ratio, s.insertion_loss_db
                    ),
                ));
            }
        }
        for (i, st) in self.stages.iter().enumerate() {
            if let Some(bad) = st.isolation.iter().find(|iso| iso.db < 0.0) {
                return Err(Error::config(
                    format!("/catalog/stages/{i}/isolation"),
                    format!("negative isolation for {}", bad.interferer),
                ));
            }
        }
        self.quantum()?;
        self.olt()?;
        Ok(())
    }
}

/// Piecewise-linear interpolation with linear extrapolation past the ends.
fn interpolate(knots: &[(f64, f64)], x: f64) -> f64 {
    match knots.len() {
        0 => 0.0,
        1 => knots[0].1,
        n => {
            let i = knots.windows(2).position(|w| x <= w[1].0).unwrap_or(n - 2);
            let (x0, y0) = knots[i];
            let (x1, y1) = knots[i + 1];
            y0 + (y1 - y0) * (x - x0) / (x1 - x0)
        }
    }
}

/// Splitter loss using the built-in catalog.
pub fn splitter_loss(n: u32) -> Result<f64> {
    Catalog::default().splitter_loss(n)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    Full,
    DualFeeder,
    DualSplitter,
}

/// One element of a signal path, in propagation order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathElement {
    Stage(String),
    Feeder,
    Drop,
    QuantumSplitter,
    ClassicalSplitter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathPoint {
    FeederEntry,
    SplitterExit,
    DropEntry,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkScheme {
    pub kind: SchemeKind,
    pub feeder_km: f64,
    #[serde(default = "default_drop_km")]
    pub drop_km: f64,
    pub classical_split: u32,
    /// Defaults to `classical_split`; may differ only for dual-splitter.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quantum_split: Option<u32>,
    #[serde(default)]
    pub olt_attenuation_db: f64,
    /// Overrides the default quantum path of `kind`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quantum_path: Option<Vec<PathElement>>,
    /// Overrides the default OLT path of `kind`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classical_path: Option<Vec<PathElement>>,
}

fn default_drop_km() -> f64 {
    1.0
}

impl NetworkScheme {
    pub fn new(kind: SchemeKind, feeder_km: f64, split: u32) -> Self {
        NetworkScheme {
            kind,
            feeder_km,
            drop_km: default_drop_km(),
            classical_split: split,
            quantum_split: None,
            olt_attenuation_db: 0.0,
            quantum_path: None,
            classical_path: None,
        }
    }

    pub fn full(feeder_km: f64, split: u32) -> Self {
        Self::new(SchemeKind::Full, feeder_km, split)
    }

    pub fn dual_feeder(feeder_km: f64, split: u32) -> Self {
        Self::new(SchemeKind::DualFeeder, feeder_km, split)
    }

    pub fn dual_splitter(feeder_km: f64, classical: u32, quantum: u32) -> Self {
        let mut s = Self::new(SchemeKind::DualSplitter, feeder_km, classical);
        s.quantum_split = Some(quantum);
        s
    }

    pub fn with_attenuation(mut self, db: f64) -> Self {
        self.olt_attenuation_db = db;
        self
    }

    pub fn with_drop(mut self, km: f64) -> Self {
        self.drop_km = km;
        self
    }

    pub fn quantum_split(&self) -> u32 {
        match self.kind {
            SchemeKind::DualSplitter => self.quantum_split.unwrap_or(self.classical_split),
            _ => self.classical_split,
        }
    }

    pub fn quantum_path(&self) -> Vec<PathElement> {
        use PathElement::*;
        if let Some(p) = &self.quantum_path {
            return p.clone();
        }
        match self.kind {
            SchemeKind::Full => vec![
                Stage("MUX".into()),
                Feeder,
                QuantumSplitter,
                Drop,
                Stage("DEMUX".into()),
            ],
            SchemeKind::DualFeeder | SchemeKind::DualSplitter => {
                vec![Feeder, QuantumSplitter, Drop, Stage("DEMUX".into())]
            }
        }
    }

    pub fn classical_path(&self) -> Vec<PathElement> {
        use PathElement::*;
        if let Some(p) = &self.classical_path {
            return p.clone();
        }
        match self.kind {
            SchemeKind::Full => vec![Stage("MUX".into()), Feeder, ClassicalSplitter, Drop],
            SchemeKind::DualFeeder | SchemeKind::DualSplitter => vec![
                Stage("MUX".into()),
                Feeder,
                Stage("FILTER".into()),
                ClassicalSplitter,
                Drop,
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let checks = [
            ("feeder_km", self.feeder_km),
            ("drop_km", self.drop_km),
            ("olt_attenuation_db", self.olt_attenuation_db),
        ];
        for (field, v) in checks {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::config(
                    format!("/scheme/{field}"),
                    format!("must be a finite non-negative number, got {v}"),
                ));
            }
        }
        for (field, n) in [
            ("classical_split", Some(self.classical_split)),
            ("quantum_split", self.quantum_split),
        ] {
            if let Some(n) = n {
                if n == 0 || !n.is_power_of_two() {
                    return Err(Error::config(
                        format!("/scheme/{field}"),
                        format!("splitter ratio {n} is not a power of two"),
                    ));
                }
            }
        }
        if self.kind != SchemeKind::DualSplitter
            && self
                .quantum_split
                .is_some_and(|q| q != self.classical_split)
        {
            return Err(Error::config(
                "/scheme/quantum_split",
                "a separate quantum splitter requires kind = dual_splitter",
            ));
        }
        Ok(())
    }

    fn element_loss(&self, el: &PathElement, signal: &SignalSpec, cat: &Catalog) -> Result<f64> {
        Ok(match el {
            PathElement::Stage(name) => {
                let stage = cat.stage(name)?;
                stage
                    .loss_for(&signal.name)
                    .ok_or_else(|| Error::MissingStageLoss {
                        stage: name.clone(),
                        signal: signal.name.clone(),
                    })?
            }
            PathElement::Feeder => signal.attenuation_db_per_km * self.feeder_km,
            PathElement::Drop => signal.attenuation_db_per_km * self.drop_km,
            PathElement::QuantumSplitter => cat.splitter_loss(self.quantum_split())?,
            PathElement::ClassicalSplitter => cat.splitter_loss(self.classical_split)?,
        })
    }

    /// Per-element losses (dB) of `signal` along `path`.
    pub fn segment_losses(
        &self,
        path: &[PathElement],
        signal: &SignalSpec,
        cat: &Catalog,
    ) -> Result<Vec<f64>> {
        path.iter()
            .map(|el| self.element_loss(el, signal, cat))
            .collect()
    }
}

/// Transmitter-to-receiver loss of the quantum signal, in dB.
pub fn quantum_link_loss(scheme: &NetworkScheme, cat: &Catalog) -> Result<f64> {
    let q = cat.quantum()?;
    Ok(scheme
        .segment_losses(&scheme.quantum_path(), q, cat)?
        .iter()
        .sum())
}

/// OLT power in mW at a point of the classical path.
pub fn olt_power_mw_at(scheme: &NetworkScheme, cat: &Catalog, point: PathPoint) -> Result<f64> {
    let olt = cat.olt()?;
    let path = scheme.classical_path();
    let stop = match point {
        PathPoint::FeederEntry => path.iter().position(|e| *e == PathElement::Feeder),
        PathPoint::SplitterExit => path
            .iter()
            .position(|e| {
                matches!(
                    e,
                    PathElement::ClassicalSplitter | PathElement::QuantumSplitter
                )
            })
            .map(|i| i + 1),
        PathPoint::DropEntry => path.iter().position(|e| *e == PathElement::Drop),
    }
    .unwrap_or(path.len());
    let mut mw = dbm_to_mw(cat.olt_launch_dbm - scheme.olt_attenuation_db);
    for el in &path[..stop] {
        mw *= db_to_linear(scheme.element_loss(el, olt, cat)?);
    }
    Ok(mw)
}

/// OLT power in dBm at a point of the classical path.
pub fn olt_power_at(scheme: &NetworkScheme, cat: &Catalog, point: PathPoint) -> Result<f64> {
    olt_power_mw_at(scheme, cat, point).map(mw_to_dbm)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrosstalkEntry {
    pub signal: String,
    pub leaked_dbm: f64,
    pub isolation_db: f64,
    /// Detected crosstalk counts/s summed over the receiver.
    pub detected_cps: f64,
    /// Threshold in counts/s: `fraction` of the receiver dark-count rate.
    pub threshold_cps: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelPlanReport {
    pub fraction: f64,
    pub entries: Vec<CrosstalkEntry>,
}

impl ChannelPlanReport {
    pub fn all_pass(&self) -> bool {
        self.entries.iter().all(|e| e.pass)
    }
}

/// Residual linear crosstalk of every powered classical channel at the
/// quantum receiver. Downstream channels travel the OLT path to the user;
/// upstream channels originate next to the receiver and only see isolation.
/// Stages without a listed loss for a channel are treated as lossless.
pub fn validate_channel_plan(
    scheme: &NetworkScheme,
    cat: &Catalog,
    det: &DetectorParams,
    fraction: f64,
) -> Result<ChannelPlanReport> {
    let quantum = &cat.quantum_signal;
    let mut stage_names: Vec<String> = Vec::new();
    for el in scheme
        .quantum_path()
        .into_iter()
        .chain(scheme.classical_path())
    {
        if let PathElement::Stage(name) = el {
            if !stage_names.contains(&name) {
                stage_names.push(name);
            }
        }
    }
    let dark_cps = det.dark_per_gate * det.gate_rate * f64::from(det.detectors_per_receiver);
    let threshold_cps = fraction * dark_cps;
    let mut entries = Vec::new();
    for sig in cat
        .signals
        .iter()
        .filter(|s| s.kind == SignalKind::Classical)
    {
        let Some(launch) = sig.launch_power_dbm else {
            continue;
        };
        // downstream lines carry the added OLT attenuation and the full
        // classical path; upstream lasers sit next to the receiver
        let path_loss = match sig.direction {
            Direction::Downstream => {
                let mut loss = scheme.olt_attenuation_db;
                for el in scheme.classical_path() {
                    loss += match &el {
                        PathElement::Stage(name) => {
                            cat.stage(name)?.loss_for(&sig.name).unwrap_or(0.0)
                        }
                        other => scheme.element_loss(other, sig, cat)?,
                    };
                }
                loss
            }
            Direction::Upstream => 0.0,
        };
        let mut isolation = 0.0;
        for name in &stage_names {
            isolation += cat.stage(name)?.isolation_db(&sig.name, quantum);
        }
        let leaked_dbm = launch - path_loss - isolation;
        let detected_cps = power_to_count_rate(
            dbm_to_mw(leaked_dbm),
            sig.wavelength_nm,
            det.efficiency * db_to_linear(det.receiver_loss_db),
            det.temporal_acceptance,
        );
        entries.push(CrosstalkEntry {
            signal: sig.name.clone(),
            leaked_dbm,
            isolation_db: isolation,
            detected_cps,
            threshold_cps,
            pass: detected_cps <= threshold_cps,
        });
    }
    Ok(ChannelPlanReport { fraction, entries })
}
