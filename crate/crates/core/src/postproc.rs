//! Key post-processing: Winnow reconciliation of a sifted key pair, the
//! realized secret length and Toeplitz privacy amplification.
//!
//! The secret length of an `n`-bit sifted key with leakage `L` is
//!
//! ```text
//! floor(n * (f1 * (1 - H(e1)) + f0) - L)
//! ```
//!
//! where `f1 = Q1 / Qmu` and `f0 = Q0 / Qmu` are the single-photon and
//! vacuum fractions of the signal gain and `e1` the single-photon error
//! bound, clamped at zero. Sessions whose QBER reaches the abort threshold
//! yield nothing.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::keyrate::{binary_entropy, decoy_bounds, ChannelObservables, ProtocolParams};
use crate::mc::SimOutcome;
use crate::toeplitz;
use crate::winnow::{self, IterationTrace, WinnowConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct SiftedKeyPair {
    pub sender: BitString,
    pub receiver: BitString,
    pub qber_estimate: f64,
}

impl SiftedKeyPair {
    pub fn new(sender: BitString, receiver: BitString, qber_estimate: f64) -> Result<Self> {
        if sender.len() != receiver.len() {
            return Err(Error::LengthMismatch(sender.len(), receiver.len()));
        }
        if !(0.0..=0.5).contains(&qber_estimate) {
            return Err(Error::config(
                "/qber",
                format!("must lie in [0, 0.5], got {qber_estimate}"),
            ));
        }
        Ok(SiftedKeyPair {
            sender,
            receiver,
            qber_estimate,
        })
    }

    pub fn len(&self) -> usize {
        self.sender.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sender.is_empty()
    }
}

/// Per-bit secrecy terms of the sifted key.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecrecyTerms {
    pub single_photon_fraction: f64,
    pub e_1: f64,
    pub vacuum_fraction: f64,
}

impl SecrecyTerms {
    /// Every sifted bit from a single photon with no phase error.
    pub const IDEAL: SecrecyTerms = SecrecyTerms {
        single_photon_fraction: 1.0,
        e_1: 0.0,
        vacuum_fraction: 0.0,
    };

    pub fn from_observables(obs: &ChannelObservables, p: &ProtocolParams) -> Self {
        if obs.q_mu <= 0.0 {
            return SecrecyTerms {
                single_photon_fraction: 0.0,
                e_1: 0.5,
                vacuum_fraction: 0.0,
            };
        }
        let b = decoy_bounds(obs, p);
        SecrecyTerms {
            single_photon_fraction: b.q_1 / obs.q_mu,
            e_1: b.e_1_upper,
            vacuum_fraction: obs.y_0 * (-p.mu).exp() / obs.q_mu,
        }
    }

    /// Secret bits per sifted bit before leakage, at most 1.
    pub fn per_bit(&self) -> f64 {
        (self.single_photon_fraction * (1.0 - binary_entropy(self.e_1)) + self.vacuum_fraction)
            .min(1.0)
    }
}

pub fn final_key_length(
    sifted_len: usize,
    qber: f64,
    leakage: usize,
    terms: &SecrecyTerms,
    p: &ProtocolParams,
) -> usize {
    if qber >= p.qber_abort {
        return 0;
    }
    let len = (sifted_len as f64 * terms.per_bit() - leakage as f64).floor();
    if len > 0.0 {
        len as usize
    } else {
        0
    }
}

/// Uniform seed bits for privacy amplification.
pub fn seed_bits(seed: u64, len: usize) -> BitString {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    (0..len).map(|_| rng.random()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub winnow: WinnowConfig,
    pub amplification_seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            winnow: WinnowConfig::default(),
            amplification_seed: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Secret,
    QberAbort,
    ReconciliationFailed,
    TooShort,
    NoSecretBits,
}

/// JSON accounting record of one pipeline run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Accounting {
    pub outcome: Outcome,
    pub sifted_len: usize,
    pub qber: f64,
    pub leakage: usize,
    pub discarded: usize,
    pub reconciled_len: usize,
    pub final_len: usize,
    pub terms: SecrecyTerms,
    pub iterations: Vec<IterationTrace>,
}

impl Accounting {
    /// Disclosed bits per sifted bit over `H(qber)`.
    pub fn reconciliation_efficiency(&self) -> f64 {
        let h = binary_entropy(self.qber);
        if self.sifted_len == 0 || h == 0.0 {
            return f64::NAN;
        }
        self.leakage as f64 / (self.sifted_len as f64 * h)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineResult {
    pub accounting: Accounting,
    pub sender_key: BitString,
    pub receiver_key: BitString,
}

/// Reconciles and compresses `pair`, charging the secrecy `terms`.
pub fn process(
    pair: &SiftedKeyPair,
    terms: &SecrecyTerms,
    p: &ProtocolParams,
    cfg: &PipelineConfig,
) -> Result<PipelineResult> {
    let mut acc = Accounting {
        outcome: Outcome::Secret,
        sifted_len: pair.len(),
        qber: pair.qber_estimate,
        leakage: 0,
        discarded: 0,
        reconciled_len: 0,
        final_len: 0,
        terms: *terms,
        iterations: Vec::new(),
    };
    let empty = |acc: Accounting| PipelineResult {
        accounting: acc,
        sender_key: BitString::new(),
        receiver_key: BitString::new(),
    };
    if pair.qber_estimate >= p.qber_abort {
        acc.outcome = Outcome::QberAbort;
        return Ok(empty(acc));
    }
    if pair.len() < cfg.winnow.block_sizes.first().copied().unwrap_or(1) {
        acc.outcome = Outcome::TooShort;
        return Ok(empty(acc));
    }
    let rec = winnow::reconcile(&pair.sender, &pair.receiver, &cfg.winnow)?;
    acc.leakage = rec.leakage;
    acc.discarded = rec.discarded;
    acc.reconciled_len = rec.sender.len();
    acc.iterations = rec.iterations;
    if !rec.passed {
        acc.outcome = Outcome::ReconciliationFailed;
        return Ok(empty(acc));
    }
    let n = final_key_length(pair.len(), pair.qber_estimate, rec.leakage, terms, p)
        .min(rec.sender.len());
    acc.final_len = n;
    if n == 0 {
        acc.outcome = Outcome::NoSecretBits;
        return Ok(empty(acc));
    }
    let seed = seed_bits(
        cfg.amplification_seed,
        toeplitz::seed_len(rec.sender.len(), n),
    );
    Ok(PipelineResult {
        accounting: acc,
        sender_key: toeplitz::hash(&rec.sender, n, &seed)?,
        receiver_key: toeplitz::hash(&rec.corrected, n, &seed)?,
    })
}

/// Runs [`process`] on the signal-class key of a simulation, with the QBER
/// and secrecy terms taken from the simulated observables.
pub fn process_simulation(
    sim: &SimOutcome,
    p: &ProtocolParams,
    cfg: &PipelineConfig,
) -> Result<PipelineResult> {
    let obs = sim.observables.values();
    let pair = SiftedKeyPair::new(
        sim.key.sender.clone(),
        sim.key.receiver.clone(),
        sim.key.qber(),
    )?;
    process(&pair, &SecrecyTerms::from_observables(&obs, p), p, cfg)
}

/// Secret bits per second realized by a run of `pulses` pulses.
pub fn realized_rate(final_len: usize, pulses: u64, p: &ProtocolParams) -> f64 {
    final_len as f64 * p.pulse_rate / pulses as f64
}
