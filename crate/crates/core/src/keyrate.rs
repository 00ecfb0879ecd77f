//! Decoy-state BB84 with vacuum + weak decoys: channel observables,
//! single-photon bounds and the asymptotic secure key rate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::db_to_linear;

/// Error probability of a background (random) click.
pub const E0: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProtocolParams {
    pub mu: f64,
    pub nu: f64,
    /// Emission weights of signal, decoy and vacuum pulses.
    pub emission_ratio: [f64; 3],
    pub q_sift: f64,
    pub f_ec: f64,
    pub e_detector: f64,
    pub pulse_rate: f64,
    pub qber_abort: f64,
}

impl Default for ProtocolParams {
    fn default() -> Self {
        ProtocolParams {
            mu: 0.4,
            nu: 0.1,
            emission_ratio: [6.0, 1.0, 1.0],
            q_sift: 0.5,
            f_ec: 1.35,
            e_detector: 0.01,
            pulse_rate: 625e6,
            qber_abort: 0.04,
        }
    }
}

impl ProtocolParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, msg: String| Err(Error::config(format!("/protocol/{field}"), msg));
        if !(self.nu > 0.0 && self.nu < self.mu) {
            return bad(
                "nu",
                format!("need 0 < nu < mu, got nu={} mu={}", self.nu, self.mu),
            );
        }
        if self.emission_ratio.iter().any(|w| !(*w > 0.0)) {
            return bad("emission_ratio", "weights must be positive".into());
        }
        if !(self.q_sift > 0.0 && self.q_sift <= 1.0) {
            return bad("q_sift", format!("must lie in (0, 1], got {}", self.q_sift));
        }
        if !(self.f_ec >= 1.0) {
            return bad("f_ec", format!("must be >= 1, got {}", self.f_ec));
        }
        if !(0.0..=0.5).contains(&self.e_detector) {
            return bad(
                "e_detector",
                format!("must lie in [0, 0.5], got {}", self.e_detector),
            );
        }
        if !(self.pulse_rate > 0.0) {
            return bad("pulse_rate", "must be positive".into());
        }
        if !(self.qber_abort > 0.0 && self.qber_abort <= 0.5) {
            return bad("qber_abort", "must lie in (0, 0.5]".into());
        }
        Ok(())
    }

    /// Fraction of emitted pulses that are signal states.
    pub fn signal_fraction(&self) -> f64 {
        self.emission_ratio[0] / self.emission_ratio.iter().sum::<f64>()
    }

    /// Probabilities of the signal, decoy and vacuum classes.
    pub fn class_probabilities(&self) -> [f64; 3] {
        let total: f64 = self.emission_ratio.iter().sum();
        self.emission_ratio.map(|w| w / total)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorParams {
    pub efficiency: f64,
    pub dark_per_gate: f64,
    pub gate_rate: f64,
    pub detectors_per_receiver: u32,
    /// Fraction of time a detector is sensitive to continuous light
    /// (gate width × pulse rate, 400 ps × 625 MHz).
    pub temporal_acceptance: f64,
    /// Lumped optical loss inside the receiver between the DEMUX output and
    /// the detectors.
    pub receiver_loss_db: f64,
}

impl Default for DetectorParams {
    fn default() -> Self {
        DetectorParams {
            efficiency: 0.15,
            dark_per_gate: 2e-7,
            gate_rate: 1.25e9,
            detectors_per_receiver: 4,
            temporal_acceptance: 400e-12 * 625e6,
            receiver_loss_db: 6.3,
        }
    }
}

impl DetectorParams {
    /// Ideal receiver: no internal loss.
    pub fn lossless() -> Self {
        DetectorParams {
            receiver_loss_db: 0.0,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, msg: &str| Err(Error::config(format!("/detector/{field}"), msg));
        if !(self.efficiency > 0.0 && self.efficiency <= 1.0) {
            return bad("efficiency", "must lie in (0, 1]");
        }
        if !(0.0..1.0).contains(&self.dark_per_gate) {
            return bad("dark_per_gate", "must lie in [0, 1)");
        }
        if !(self.gate_rate > 0.0) {
            return bad("gate_rate", "must be positive");
        }
        if self.detectors_per_receiver == 0 {
            return bad("detectors_per_receiver", "must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.temporal_acceptance) {
            return bad("temporal_acceptance", "must lie in [0, 1]");
        }
        if !(self.receiver_loss_db >= 0.0) {
            return bad("receiver_loss_db", "must be non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelObservables {
    pub q_mu: f64,
    pub e_mu: f64,
    pub q_nu: f64,
    pub e_nu: f64,
    pub y_0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecoyBounds {
    pub y_1_lower: f64,
    pub e_1_upper: f64,
    pub q_1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyRateResult {
    pub y_1_lower: f64,
    pub e_1_upper: f64,
    pub q_1: f64,
    pub q_0: f64,
    pub r_per_pulse: f64,
    pub r_bps: f64,
    pub feasible: bool,
}

/// Overall transmittance from the transmitter to a click: channel loss,
/// receiver-internal loss and detection efficiency.
pub fn transmittance(loss_db: f64, det: &DetectorParams) -> f64 {
    db_to_linear(loss_db + det.receiver_loss_db) * det.efficiency
}

/// Background yield per pulse of one receiver.
pub fn background_yield(raman_per_gate: f64, det: &DetectorParams) -> f64 {
    (f64::from(det.detectors_per_receiver) * (det.dark_per_gate + raman_per_gate)).clamp(0.0, 1.0)
}

fn gain_and_qber(eta: f64, y_0: f64, intensity: f64, e_detector: f64) -> (f64, f64) {
    let signal = -(-eta * intensity).exp_m1();
    let q = (y_0 + signal).min(1.0);
    if q == 0.0 {
        return (0.0, E0);
    }
    let e = (E0 * y_0 + e_detector * signal) / (y_0 + signal);
    (q, e)
}

/// Gains and QBERs of the signal and decoy states for transmittance `eta`.
pub fn gains(eta: f64, y_0: f64, p: &ProtocolParams) -> ChannelObservables {
    let (q_mu, e_mu) = gain_and_qber(eta, y_0, p.mu, p.e_detector);
    let (q_nu, e_nu) = gain_and_qber(eta, y_0, p.nu, p.e_detector);
    ChannelObservables {
        q_mu,
        e_mu,
        q_nu,
        e_nu,
        y_0,
    }
}

/// Lower bound on the single-photon yield and upper bound on its error rate
/// from one weak decoy plus vacuum. A non-positive yield bound is returned as
/// zero yield with `e_1 = 1/2`.
pub fn decoy_bounds(obs: &ChannelObservables, p: &ProtocolParams) -> DecoyBounds {
    let (mu, nu) = (p.mu, p.nu);
    let y_1 = mu / (mu * nu - nu * nu)
        * (obs.q_nu * nu.exp()
            - obs.q_mu * mu.exp() * (nu * nu) / (mu * mu)
            - (mu * mu - nu * nu) / (mu * mu) * obs.y_0);
    if !(y_1 > 0.0) {
        return DecoyBounds {
            y_1_lower: 0.0,
            e_1_upper: E0,
            q_1: 0.0,
        };
    }
    let y_1 = y_1.min(1.0);
    // an error bound above 1/2 carries no information; H2 is symmetric
    let e_1 = ((obs.e_nu * obs.q_nu * nu.exp() - E0 * obs.y_0) / (y_1 * nu)).clamp(0.0, E0);
    DecoyBounds {
        y_1_lower: y_1,
        e_1_upper: e_1,
        q_1: y_1 * mu * (-mu).exp(),
    }
}

pub fn binary_entropy(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return 0.0;
    }
    -x * x.log2() - (1.0 - x) * (1.0 - x).log2()
}

/// Secret bits per pulse, `q (Q1 (1 - H(e1)) - f Qmu H(Emu) + Q0)`.
pub fn key_rate_formula(q: f64, q_1: f64, e_1: f64, f: f64, q_mu: f64, e_mu: f64, q_0: f64) -> f64 {
    q * (q_1 * (1.0 - binary_entropy(e_1)) - f * q_mu * binary_entropy(e_mu) + q_0)
}

pub fn secure_key_rate(
    obs: &ChannelObservables,
    bounds: &DecoyBounds,
    p: &ProtocolParams,
) -> KeyRateResult {
    let q_0 = obs.y_0 * (-p.mu).exp();
    let raw = key_rate_formula(
        p.q_sift,
        bounds.q_1,
        bounds.e_1_upper,
        p.f_ec,
        obs.q_mu,
        obs.e_mu,
        q_0,
    );
    let r_per_pulse = raw.max(0.0);
    let feasible = r_per_pulse > 0.0 && obs.e_mu <= p.qber_abort;
    let r_bps = if feasible {
        r_per_pulse * p.pulse_rate * p.signal_fraction()
    } else {
        0.0
    };
    KeyRateResult {
        y_1_lower: bounds.y_1_lower,
        e_1_upper: bounds.e_1_upper,
        q_1: bounds.q_1,
        q_0,
        r_per_pulse,
        r_bps,
        feasible,
    }
}

/// Observables, bounds and key rate for a link of `loss_db` with Raman
/// noise `raman_per_gate` at each detector.
pub fn evaluate_link(
    loss_db: f64,
    raman_per_gate: f64,
    p: &ProtocolParams,
    det: &DetectorParams,
) -> (ChannelObservables, KeyRateResult) {
    let eta = transmittance(loss_db, det);
    let obs = gains(eta, background_yield(raman_per_gate, det), p);
    let bounds = decoy_bounds(&obs, p);
    (obs, secure_key_rate(&obs, &bounds, p))
}
