//! Pulse-level Monte Carlo of the decoy-state link, used to check the
//! analytic observables and to produce sifted keys.
//!
//! Random numbers come from ChaCha20 (`rand_chacha`). The run is split into
//! blocks of [`BLOCK_PULSES`]; block `k` uses the generator seeded with
//! `seed_from_u64(seed)` on stream `k`, so results do not depend on how the
//! blocks are scheduled across threads.
//!
//! Receiver model: an active basis choice per pulse feeding two of four
//! detectors (H/V or D/A). Each surviving pulse lights the detector of the
//! sender's bit when the bases match (flipped with probability
//! `e_detector`) and a random one otherwise. Every detector also fires on
//! background with probability `dark_per_gate + raman_per_gate`. Clicks in
//! both bases pick a random basis, two clicks in the chosen basis a random
//! bit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::keyrate::{
    background_yield, gains, transmittance, ChannelObservables, DetectorParams, ProtocolParams, E0,
};

pub const BLOCK_PULSES: u64 = 1 << 16;

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub pulses: u64,
    pub seed: u64,
    pub protocol: ProtocolParams,
    pub detector: DetectorParams,
    /// Channel loss in dB; `f64::INFINITY` blocks the channel.
    pub link_loss_db: f64,
    pub raman_per_gate: f64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.pulses == 0 {
            return Err(Error::config("/pulses", "must be at least 1"));
        }
        if !(self.link_loss_db >= 0.0) {
            return Err(Error::config("/link_loss_db", "must be non-negative"));
        }
        if !(0.0..1.0).contains(&self.raman_per_gate) {
            return Err(Error::config("/raman_per_gate", "must lie in [0, 1)"));
        }
        self.protocol.validate()?;
        self.detector.validate()
    }

    /// Analytic observables for the same link.
    pub fn expected(&self) -> ChannelObservables {
        let eta = transmittance(self.link_loss_db, &self.detector);
        gains(
            eta,
            background_yield(self.raman_per_gate, &self.detector),
            &self.protocol,
        )
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassTally {
    pub sent: u64,
    pub clicks: u64,
    pub sifted: u64,
    pub errors: u64,
}

impl ClassTally {
    fn add(&mut self, o: &ClassTally) {
        self.sent += o.sent;
        self.clicks += o.clicks;
        self.sifted += o.sifted;
        self.errors += o.errors;
    }

    /// Click fraction with its binomial standard error.
    pub fn gain(&self) -> Estimate {
        Estimate::proportion(self.clicks, self.sent)
    }

    /// Error fraction among sifted clicks. With nothing sifted the estimate
    /// is 1/2 with the largest possible σ.
    pub fn qber(&self) -> Estimate {
        if self.sifted == 0 {
            return Estimate {
                value: E0,
                sigma: 0.5,
            };
        }
        Estimate::proportion(self.errors, self.sifted)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub sigma: f64,
}

impl Estimate {
    fn proportion(k: u64, n: u64) -> Estimate {
        if n == 0 {
            return Estimate {
                value: 0.0,
                sigma: 0.0,
            };
        }
        let p = k as f64 / n as f64;
        Estimate {
            value: p,
            sigma: (p * (1.0 - p) / n as f64).sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalObservables {
    pub q_mu: Estimate,
    pub e_mu: Estimate,
    pub q_nu: Estimate,
    pub e_nu: Estimate,
    /// Gain of the vacuum class.
    pub y_0: Estimate,
}

impl EmpiricalObservables {
    pub fn values(&self) -> ChannelObservables {
        ChannelObservables {
            q_mu: self.q_mu.value,
            e_mu: self.e_mu.value,
            q_nu: self.q_nu.value,
            e_nu: self.e_nu.value,
            y_0: self.y_0.value,
        }
    }
}

/// Sifted bits of the signal class on both sides with their pulse indices.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SiftedKey {
    pub sender: BitString,
    pub receiver: BitString,
    pub positions: Vec<u64>,
}

impl SiftedKey {
    pub fn len(&self) -> usize {
        self.sender.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sender.is_empty()
    }

    pub fn qber(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        self.sender.hamming_distance(&self.receiver) as f64 / self.len() as f64
    }

    fn append(&mut self, other: SiftedKey) {
        for (a, b) in other.sender.iter().zip(other.receiver.iter()) {
            self.sender.push(a);
            self.receiver.push(b);
        }
        self.positions.extend(other.positions);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutcome {
    pub pulses: u64,
    /// Signal, decoy and vacuum.
    pub tallies: [ClassTally; 3],
    pub observables: EmpiricalObservables,
    pub key: SiftedKey,
}

struct Block {
    tallies: [ClassTally; 3],
    key: SiftedKey,
}

fn simulate_block(cfg: &SimConfig, index: u64, eta: f64, background: f64) -> Block {
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index);
    let p = &cfg.protocol;
    let probs = p.class_probabilities();
    let thresholds = [probs[0], probs[0] + probs[1]];
    let poissons = [Poisson::new(p.mu).ok(), Poisson::new(p.nu).ok()];
    let start = index * BLOCK_PULSES;
    let end = (start + BLOCK_PULSES).min(cfg.pulses);
    let mut tallies = [ClassTally::default(); 3];
    let mut key = SiftedKey::default();

    for pulse in start..end {
        let u: f64 = rng.random();
        let class = if u < thresholds[0] {
            0
        } else if u < thresholds[1] {
            1
        } else {
            2
        };
        let bit: bool = rng.random();
        let basis: bool = rng.random();
        let photons = match class {
            0 | 1 => poissons[class].map_or(0, |d| d.sample(&mut rng) as u64),
            _ => 0,
        };
        let survived = (0..photons).any(|_| rng.random::<f64>() < eta);
        let rx_basis: bool = rng.random();

        // detectors indexed by 2 * basis + bit
        let mut clicks = [false; 4];
        if survived {
            let mut b = if rx_basis == basis { bit } else { rng.random() };
            if rng.random::<f64>() < p.e_detector {
                b = !b;
            }
            clicks[2 * usize::from(rx_basis) + usize::from(b)] = true;
        }
        for c in &mut clicks {
            if rng.random::<f64>() < background {
                *c = true;
            }
        }

        let t = &mut tallies[class];
        t.sent += 1;
        let in_basis = [clicks[0] || clicks[1], clicks[2] || clicks[3]];
        if !(in_basis[0] || in_basis[1]) {
            continue;
        }
        t.clicks += 1;
        let measured_basis = match in_basis {
            [true, true] => rng.random(),
            [_, x] => x,
        };
        let pair = &clicks[2 * usize::from(measured_basis)..][..2];
        let measured_bit = match pair {
            [true, true] => rng.random(),
            _ => pair[1],
        };
        if measured_basis != basis {
            continue;
        }
        t.sifted += 1;
        if measured_bit != bit {
            t.errors += 1;
        }
        if class == 0 {
            key.sender.push(bit);
            key.receiver.push(measured_bit);
            key.positions.push(pulse);
        }
    }
    Block { tallies, key }
}

pub fn simulate(cfg: &SimConfig) -> Result<SimOutcome> {
    cfg.validate()?;
    let eta = transmittance(cfg.link_loss_db, &cfg.detector);
    let background = cfg.detector.dark_per_gate + cfg.raman_per_gate;
    let blocks: Vec<Block> = (0..cfg.pulses.div_ceil(BLOCK_PULSES))
        .into_par_iter()
        .map(|k| simulate_block(cfg, k, eta, background))
        .collect();

    let mut tallies = [ClassTally::default(); 3];
    let mut key = SiftedKey::default();
    for b in blocks {
        for (t, bt) in tallies.iter_mut().zip(&b.tallies) {
            t.add(bt);
        }
        key.append(b.key);
    }
    let observables = EmpiricalObservables {
        q_mu: tallies[0].gain(),
        e_mu: tallies[0].qber(),
        q_nu: tallies[1].gain(),
        e_nu: tallies[1].qber(),
        y_0: tallies[2].gain(),
    };
    Ok(SimOutcome {
        pulses: cfg.pulses,
        tallies,
        observables,
        key,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Deviation {
    pub observable: String,
    pub simulated: f64,
    pub expected: f64,
    /// Binomial standard error of the expected value at the simulated
    /// sample size.
    pub sigma: f64,
    /// `(simulated - expected) / sigma`.
    pub z: f64,
}

/// Deviation of each simulated observable from `expected`, in units of its
/// standard error under the expected value.
pub fn compare(outcome: &SimOutcome, expected: &ChannelObservables) -> Vec<Deviation> {
    let t = &outcome.tallies;
    let o = outcome.observables.values();
    let rows = [
        ("q_mu", o.q_mu, expected.q_mu, t[0].sent),
        ("e_mu", o.e_mu, expected.e_mu, t[0].sifted),
        ("q_nu", o.q_nu, expected.q_nu, t[1].sent),
        ("e_nu", o.e_nu, expected.e_nu, t[1].sifted),
        ("y_0", o.y_0, expected.y_0, t[2].sent),
    ];
    rows.iter()
        .map(|&(name, sim, exp, n)| {
            let sigma = if n == 0 {
                0.0
            } else {
                (exp * (1.0 - exp) / n as f64).sqrt()
            };
            let diff = sim - exp;
            let z = if n == 0 || diff == 0.0 {
                0.0
            } else if sigma == 0.0 {
                f64::INFINITY
            } else {
                diff / sigma
            };
            Deviation {
                observable: name.into(),
                simulated: sim,
                expected: exp,
                sigma,
                z,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(pulses: u64, loss: f64) -> SimConfig {
        SimConfig {
            pulses,
            seed: 7,
            protocol: ProtocolParams::default(),
            detector: DetectorParams::default(),
            link_loss_db: loss,
            raman_per_gate: 1e-7,
        }
    }

    #[test]
    fn blocked_channel_without_background_is_dark() {
        let mut c = cfg(200_000, f64::INFINITY);
        c.raman_per_gate = 0.0;
        c.detector.dark_per_gate = 0.0;
        let out = simulate(&c).unwrap();
        assert!(out.tallies.iter().all(|t| t.clicks == 0));
        assert!(out.key.is_empty());
        assert_eq!(out.tallies.iter().map(|t| t.sent).sum::<u64>(), 200_000);
    }

    #[test]
    fn vacuum_sees_only_background() {
        let mut c = cfg(1_000_000, 0.0);
        c.protocol.emission_ratio = [1e-9, 1e-9, 1.0];
        c.raman_per_gate = 0.02;
        let out = simulate(&c).unwrap();
        let y = background_yield(c.raman_per_gate, &c.detector);
        // exact click probability with four independent detectors
        let exact = 1.0 - (1.0 - c.detector.dark_per_gate - c.raman_per_gate).powi(4);
        let est = out.observables.y_0;
        assert!(
            (est.value - exact).abs() < 3.0 * est.sigma,
            "{est:?} vs {exact}"
        );
        assert!((exact - y).abs() / y < 0.04);
        assert!((out.observables.e_mu.value - 0.5).abs() <= 0.5);
    }

    #[test]
    fn reproducible_and_thread_independent() {
        let c = cfg(300_000, 3.0);
        let a = simulate(&c).unwrap();
        let b = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| simulate(&c).unwrap());
        assert_eq!(a, b);
        let mut other = c.clone();
        other.seed = 8;
        assert_ne!(simulate(&other).unwrap().key, a.key);
    }

    #[test]
    fn key_qber_matches_signal_qber() {
        let out = simulate(&cfg(2_000_000, 5.0)).unwrap();
        assert_eq!(out.key.len() as u64, out.tallies[0].sifted);
        assert_eq!(out.key.sender.len(), out.key.receiver.len());
        assert_eq!(out.key.positions.len(), out.key.len());
        assert!(out.key.positions.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(out.key.qber(), out.observables.e_mu.value);
    }

    #[test]
    fn sigma_scales_with_inverse_root_pulses() {
        let small = simulate(&cfg(100_000, 0.0)).unwrap();
        let large = simulate(&cfg(10_000_000, 0.0)).unwrap();
        let ratio = small.observables.q_mu.sigma / large.observables.q_mu.sigma;
        assert!((ratio / 10.0 - 1.0).abs() < 0.1, "{ratio}");
    }

    #[test]
    fn agrees_with_analytic_gains_at_moderate_loss() {
        let c = cfg(4_000_000, 10.0);
        let out = simulate(&c).unwrap();
        for d in compare(&out, &c.expected()) {
            assert!(d.z.abs() < 4.0, "{d:?}");
        }
    }

    #[test]
    fn injected_detector_error_is_flagged() {
        let c = cfg(4_000_000, 5.0);
        let out = simulate(&c).unwrap();
        let mut wrong = c.clone();
        wrong.protocol.e_detector = 0.03;
        let dev = compare(&out, &wrong.expected());
        assert!(dev.iter().any(|d| d.z.abs() > 3.0), "{dev:?}");
    }

    #[test]
    fn rejects_bad_config() {
        assert!(simulate(&cfg(0, 1.0)).is_err());
        assert!(simulate(&cfg(10, -1.0)).is_err());
    }
}
