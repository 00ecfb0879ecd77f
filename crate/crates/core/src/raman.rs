//! Spontaneous Raman scattering from the downstream OLT signal into the
//! quantum channel, and its calibration against measured count rates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::keyrate::DetectorParams;
use crate::odn::{olt_power_mw_at, Catalog, NetworkScheme, PathElement, PathPoint, SchemeKind};
use crate::units::{att_to_natural, db_to_linear, LIGHT_SPEED, PLANCK};

/// Below this separation of the two attenuation coefficients the path
/// integral switches to its analytic limit.
pub const ALPHA_LIMIT_EPS: f64 = 1e-9;

/// Effective Raman coefficients (1/km) within the receiver's acceptance band,
/// one for scattering generated in the feeder and one for the drop, plus the
/// natural attenuation coefficients of the pump (`alpha_c`) and the quantum
/// signal (`alpha_q`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RamanParams {
    pub beta_feeder: f64,
    pub beta_drop: f64,
    pub alpha_c: f64,
    pub alpha_q: f64,
}

/// Feeder coefficient from the 5 km rows of the reference measurements with
/// the default detector (see [`reference_measurements`]).
pub const DEFAULT_BETA_FEEDER: f64 = 6.866445079066004e-10;
/// Drop coefficient from the same fit.
pub const DEFAULT_BETA_DROP: f64 = 9.639990542025762e-10;

impl RamanParams {
    pub fn new(beta_feeder: f64, beta_drop: f64, alpha_c: f64, alpha_q: f64) -> Result<Self> {
        let p = RamanParams {
            beta_feeder,
            beta_drop,
            alpha_c,
            alpha_q,
        };
        p.validate()?;
        Ok(p)
    }

    /// Coefficients with attenuations taken from the catalog's OLT and
    /// quantum signals.
    pub fn from_catalog(cat: &Catalog, beta_feeder: f64, beta_drop: f64) -> Result<Self> {
        let alpha_c = att_to_natural(cat.olt()?.attenuation_db_per_km);
        let alpha_q = att_to_natural(cat.quantum()?.attenuation_db_per_km);
        Self::new(beta_feeder, beta_drop, alpha_c, alpha_q)
    }

    pub fn reference(cat: &Catalog) -> Result<Self> {
        Self::from_catalog(cat, DEFAULT_BETA_FEEDER, DEFAULT_BETA_DROP)
    }

    pub fn with_betas(self, beta_feeder: f64, beta_drop: f64) -> Self {
        RamanParams {
            beta_feeder,
            beta_drop,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (field, v) in [
            ("beta_feeder", self.beta_feeder),
            ("beta_drop", self.beta_drop),
            ("alpha_c", self.alpha_c),
            ("alpha_q", self.alpha_q),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::config(
                    format!("/raman/{field}"),
                    format!("must be positive, got {v}"),
                ));
            }
        }
        if self.alpha_c == self.alpha_q {
            return Err(Error::DegenerateAttenuation);
        }
        Ok(())
    }
}

/// `(exp(-ac L) - exp(-aq L)) / (aq - ac)`, the co-propagating scattering
/// integral. Falls back to `L exp(-a L)` at the mean coefficient when the two
/// attenuations are closer than [`ALPHA_LIMIT_EPS`].
pub fn scatter_integral(alpha_c: f64, alpha_q: f64, length: f64) -> f64 {
    let delta = alpha_q - alpha_c;
    if delta.abs() < ALPHA_LIMIT_EPS {
        return scatter_integral_limit(alpha_c, alpha_q, length);
    }
    // exp(-ac L) (1 - exp(-delta L)) / delta, without cancellation
    (-alpha_c * length).exp() * -(-delta * length).exp_m1() / delta
}

/// `L exp(-a L)` at the mean of the two coefficients. Matches the general
/// form to second order in their difference.
pub fn scatter_integral_limit(alpha_c: f64, alpha_q: f64, length: f64) -> f64 {
    let mean = 0.5 * (alpha_c + alpha_q);
    length * (-mean * length).exp()
}

fn check_inputs(p: f64, l_f: f64, l_d: f64, n: f64) {
    debug_assert!(p >= 0.0 && l_f >= 0.0 && l_d >= 0.0 && n >= 1.0);
}

/// Scattered power (mW) generated in the feeder and delivered through a
/// 1:`n` split and the drop fiber.
pub fn srs_feeder(p: f64, l_f: f64, l_d: f64, n: f64, params: &RamanParams) -> Result<f64> {
    check_inputs(p, l_f, l_d, n);
    if params.alpha_c == params.alpha_q {
        return Err(Error::DegenerateAttenuation);
    }
    Ok(
        p * params.beta_feeder * scatter_integral(params.alpha_c, params.alpha_q, l_f) / n
            * (-params.alpha_q * l_d).exp(),
    )
}

/// Scattered power (mW) generated in the drop fiber by the pump that
/// survived the feeder and a 1:`n` split.
pub fn srs_drop(p: f64, l_f: f64, l_d: f64, n: f64, params: &RamanParams) -> Result<f64> {
    check_inputs(p, l_f, l_d, n);
    if params.alpha_c == params.alpha_q {
        return Err(Error::DegenerateAttenuation);
    }
    Ok(p / n
        * (-params.alpha_c * l_f).exp()
        * params.beta_drop
        * scatter_integral(params.alpha_c, params.alpha_q, l_d))
}

/// Photon flux of `p_mw` at `wavelength_nm`, scaled by the detection
/// efficiency and the fraction of time the detector is gated on.
pub fn power_to_count_rate(
    p_mw: f64,
    wavelength_nm: f64,
    det_efficiency: f64,
    temporal_acceptance: f64,
) -> f64 {
    let photon_energy = PLANCK * LIGHT_SPEED / (wavelength_nm * 1e-9);
    p_mw * 1e-3 / photon_energy * det_efficiency * temporal_acceptance
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RamanBudget {
    /// Feeder-generated power arriving at the user's DEMUX input, mW.
    pub s_f: f64,
    /// Drop-generated power arriving at the user's DEMUX input, mW.
    pub s_d: f64,
    /// Counts/s summed over the receiver's detectors.
    pub receiver_rate: f64,
    /// Counts/s at one detector.
    pub count_rate: f64,
    pub per_gate_probability: f64,
}

impl RamanBudget {
    pub const ZERO: RamanBudget = RamanBudget {
        s_f: 0.0,
        s_d: 0.0,
        receiver_rate: 0.0,
        count_rate: 0.0,
        per_gate_probability: 0.0,
    };
}

/// Linear transmittance of the quantum path after the drop fiber (the
/// user-side WDM stages).
fn receiver_side_transmittance(scheme: &NetworkScheme, cat: &Catalog) -> Result<f64> {
    let path = scheme.quantum_path();
    let after_drop = path
        .iter()
        .position(|e| *e == PathElement::Drop)
        .map_or(path.len(), |i| i + 1);
    let q = cat.quantum()?;
    let losses = scheme.segment_losses(&path[after_drop..], q, cat)?;
    Ok(db_to_linear(losses.iter().sum()))
}

/// Raman noise reaching one user's detectors. The feeder term exists only
/// when quantum and OLT signals share the feeder; the drop term is driven by
/// the OLT power entering the drop fiber. Splitters act with their measured
/// transmittance.
pub fn total_srs(
    scheme: &NetworkScheme,
    cat: &Catalog,
    params: &RamanParams,
    det: &DetectorParams,
) -> Result<RamanBudget> {
    let s_f = if scheme.kind == SchemeKind::Full {
        let p = olt_power_mw_at(scheme, cat, PathPoint::FeederEntry)?;
        let split = 1.0 / db_to_linear(cat.splitter_loss(scheme.quantum_split())?);
        srs_feeder(p, scheme.feeder_km, scheme.drop_km, split, params)?
    } else {
        0.0
    };
    let p_drop = olt_power_mw_at(scheme, cat, PathPoint::DropEntry)?;
    let s_d = srs_drop(p_drop, 0.0, scheme.drop_km, 1.0, params)?;
    let at_detector = (s_f + s_d) * receiver_side_transmittance(scheme, cat)?;
    let receiver_rate = power_to_count_rate(
        at_detector,
        cat.quantum()?.wavelength_nm,
        det.efficiency * db_to_linear(det.receiver_loss_db),
        det.temporal_acceptance,
    );
    let count_rate = receiver_rate / f64::from(det.detectors_per_receiver);
    Ok(RamanBudget {
        s_f,
        s_d,
        receiver_rate,
        count_rate,
        per_gate_probability: count_rate / det.gate_rate,
    })
}

/// One measured Raman count rate (counts/s, summed over a receiver).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub scheme: NetworkScheme,
    pub observed_cps: f64,
}

/// Noise count rates measured with the full-power OLT in a 16-user network:
/// feeder 5 km and 20 km, full coexistence and dual-feeder.
pub fn reference_measurements() -> Vec<Measurement> {
    let rows = [
        (SchemeKind::Full, 5.0, 16.3e3),
        (SchemeKind::DualFeeder, 5.0, 2.9e3),
        (SchemeKind::Full, 20.0, 18.1e3),
        (SchemeKind::DualFeeder, 20.0, 1.0e3),
    ];
    rows.iter()
        .map(|&(kind, feeder, cps)| Measurement {
            scheme: NetworkScheme::new(kind, feeder, 16),
            observed_cps: cps,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMode {
    /// One coefficient shared by feeder and drop.
    Shared,
    /// Independent feeder and drop coefficients.
    Split,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub params: RamanParams,
    pub mode: FitMode,
    pub predicted_cps: Vec<f64>,
    /// `(predicted - observed) / observed` per measurement.
    pub relative_residuals: Vec<f64>,
}

/// Least-squares fit of the Raman coefficients, minimizing the relative
/// error of predicted receiver count rates. Attenuations come from `base`.
pub fn calibrate(
    measurements: &[Measurement],
    base: &RamanParams,
    cat: &Catalog,
    det: &DetectorParams,
    mode: FitMode,
) -> Result<Calibration> {
    if measurements.is_empty() {
        return Err(Error::DegenerateFit("no measurements".into()));
    }
    if measurements.iter().all(|m| m.observed_cps == 0.0) {
        return Err(Error::DegenerateFit("all observations are zero".into()));
    }
    if let Some(m) = measurements.iter().find(|m| !(m.observed_cps > 0.0)) {
        return Err(Error::DegenerateFit(format!(
            "observed rate must be positive, got {}",
            m.observed_cps
        )));
    }
    // the model is linear in both coefficients: rate = bf * uf + bd * ud
    let mut rows = Vec::with_capacity(measurements.len());
    for m in measurements {
        let uf = total_srs(&m.scheme, cat, &base.with_betas(1.0, 0.0), det)?.receiver_rate;
        let ud = total_srs(&m.scheme, cat, &base.with_betas(0.0, 1.0), det)?.receiver_rate;
        rows.push((uf / m.observed_cps, ud / m.observed_cps));
    }
    let (beta_feeder, beta_drop) = match mode {
        FitMode::Shared => {
            let (num, den) = rows.iter().fold((0.0, 0.0), |(n, d), &(f, dd)| {
                let a = f + dd;
                (n + a, d + a * a)
            });
            if den == 0.0 {
                return Err(Error::DegenerateFit("model predicts no scattering".into()));
            }
            (num / den, num / den)
        }
        FitMode::Split => {
            let (mut aff, mut afd, mut add, mut bf, mut bd) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for &(f, d) in &rows {
                aff += f * f;
                afd += f * d;
                add += d * d;
                bf += f;
                bd += d;
            }
            let detm = aff * add - afd * afd;
            if detm.abs() <= 1e-12 * (aff * add).max(f64::MIN_POSITIVE) {
                return Err(Error::DegenerateFit(
                    "measurements do not separate feeder and drop scattering".into(),
                ));
            }
            ((bf * add - bd * afd) / detm, (aff * bd - afd * bf) / detm)
        }
    };
    if !(beta_feeder > 0.0 && beta_drop > 0.0) {
        return Err(Error::DegenerateFit(format!(
            "non-physical coefficients {beta_feeder:e}, {beta_drop:e}"
        )));
    }
    let params = base.with_betas(beta_feeder, beta_drop);
    let mut predicted_cps = Vec::with_capacity(measurements.len());
    let mut relative_residuals = Vec::with_capacity(measurements.len());
    for m in measurements {
        let pred = total_srs(&m.scheme, cat, &params, det)?.receiver_rate;
        predicted_cps.push(pred);
        relative_residuals.push((pred - m.observed_cps) / m.observed_cps);
    }
    Ok(Calibration {
        params,
        mode,
        predicted_cps,
        relative_residuals,
    })
}
