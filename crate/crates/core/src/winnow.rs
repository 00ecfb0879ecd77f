//! Winnow reconciliation: block parities, Hamming-syndrome correction of
//! blocks whose parities differ, and privacy-maintenance discards.
//!
//! Iteration `i` permutes both keys with a shuffle drawn from ChaCha20
//! (`seed_from_u64(seed)`, stream `i`) and cuts them into blocks of
//! `2^m` bits; a short final block is treated as zero-padded. Per block the
//! parity is disclosed and position 0 discarded. On a parity mismatch the
//! `m`-bit syndrome (XOR of the in-block indices of the set bits) is
//! disclosed, the receiver flips the bit the syndrome difference points at
//! and positions `2^j`, `j < m`, are discarded as well. After every
//! iteration a 64-bit polynomial hash of the two keys is compared; a match
//! ends the protocol.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::error::{Error, Result};

pub const HASH_BITS: usize = 64;
const HASH_STREAM: u64 = 1 << 32;
/// Largest prime below 2^64.
const HASH_PRIME: u64 = 0xffff_ffff_ffff_ffc5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct WinnowConfig {
    /// Block size of each iteration; powers of two.
    pub block_sizes: Vec<usize>,
    pub seed: u64,
}

impl Default for WinnowConfig {
    fn default() -> Self {
        WinnowConfig {
            block_sizes: vec![8, 8, 16, 32, 64, 128],
            seed: 0,
        }
    }
}

impl WinnowConfig {
    pub fn validate(&self) -> Result<()> {
        if self.block_sizes.is_empty() {
            return Err(Error::config(
                "/winnow/block_sizes",
                "need at least one iteration",
            ));
        }
        if let Some(s) = self
            .block_sizes
            .iter()
            .find(|s| !s.is_power_of_two() || **s < 2)
        {
            return Err(Error::config(
                "/winnow/block_sizes",
                format!("block sizes must be powers of two >= 2, got {s}"),
            ));
        }
        Ok(())
    }
}

/// Per-iteration bookkeeping. Error counts use both keys and are only
/// available because reconciliation runs in one process.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub block_size: usize,
    pub bits_in: usize,
    pub bits_out: usize,
    pub parity_bits: usize,
    pub syndrome_bits: usize,
    pub hash_bits: usize,
    pub discarded: usize,
    pub corrections: usize,
    pub errors_in: usize,
    pub errors_out: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconciliationResult {
    pub sender: BitString,
    pub corrected: BitString,
    /// Parity, syndrome and hash bits disclosed.
    pub leakage: usize,
    pub discarded: usize,
    pub passed: bool,
    pub iterations: Vec<IterationTrace>,
}

fn permutation(seed: u64, iteration: u64, n: usize) -> Vec<usize> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(iteration);
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(&mut rng);
    p
}

fn mulmod(a: u64, b: u64) -> u64 {
    ((u128::from(a) * u128::from(b)) % u128::from(HASH_PRIME)) as u64
}

/// Polynomial hash of the key's length and 32-bit chunks, evaluated modulo
/// the largest 64-bit prime at a point drawn from `seed` and `check`.
pub fn key_hash(bits: &[bool], seed: u64, check: u64) -> u64 {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(HASH_STREAM + check);
    let point = rng.random_range(1..HASH_PRIME);
    let mut h = (bits.len() as u64) % HASH_PRIME;
    for chunk in bits.chunks(32) {
        let v = chunk
            .iter()
            .enumerate()
            .fold(0u64, |acc, (i, &b)| acc | (u64::from(b) << i));
        h = (mulmod(h, point) + v) % HASH_PRIME;
    }
    h
}

fn syndrome(block: &[bool]) -> usize {
    block
        .iter()
        .enumerate()
        .filter(|(_, &b)| b)
        .fold(0, |acc, (j, _)| acc ^ j)
}

fn distance(a: &[bool], b: &[bool]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

/// One Winnow pass with blocks of `block_size` over already permuted keys.
/// Returns the surviving bits of both sides.
fn pass(
    a: &[bool],
    b: &mut [bool],
    block_size: usize,
    trace: &mut IterationTrace,
) -> (Vec<bool>, Vec<bool>) {
    let m = block_size.trailing_zeros() as usize;
    let mut discard = vec![false; a.len()];
    for start in (0..a.len()).step_by(block_size) {
        let end = (start + block_size).min(a.len());
        trace.parity_bits += 1;
        discard[start] = true;
        let pa = a[start..end].iter().filter(|x| **x).count() % 2;
        let pb = b[start..end].iter().filter(|x| **x).count() % 2;
        if pa == pb {
            continue;
        }
        trace.syndrome_bits += m;
        let pos = syndrome(&a[start..end]) ^ syndrome(&b[start..end]);
        if start + pos < end {
            b[start + pos] = !b[start + pos];
            trace.corrections += 1;
        }
        for j in 0..m {
            if start + (1 << j) < end {
                discard[start + (1 << j)] = true;
            }
        }
    }
    let keep = |v: &[bool]| -> Vec<bool> {
        v.iter()
            .zip(&discard)
            .filter(|(_, d)| !**d)
            .map(|(x, _)| *x)
            .collect()
    };
    trace.discarded = discard.iter().filter(|d| **d).count();
    (keep(a), keep(b))
}

pub fn reconcile(
    sender: &BitString,
    receiver: &BitString,
    cfg: &WinnowConfig,
) -> Result<ReconciliationResult> {
    cfg.validate()?;
    if sender.len() != receiver.len() {
        return Err(Error::LengthMismatch(sender.len(), receiver.len()));
    }
    let min_len = cfg.block_sizes[0];
    if sender.len() < min_len {
        return Err(Error::KeyTooShort(sender.len()));
    }
    let mut a: Vec<bool> = sender.iter().collect();
    let mut b: Vec<bool> = receiver.iter().collect();
    let mut iterations = Vec::with_capacity(cfg.block_sizes.len());
    let mut passed = false;

    for (i, &size) in cfg.block_sizes.iter().enumerate() {
        if a.is_empty() {
            break;
        }
        let perm = permutation(cfg.seed, i as u64, a.len());
        let pa: Vec<bool> = perm.iter().map(|&k| a[k]).collect();
        let mut pb: Vec<bool> = perm.iter().map(|&k| b[k]).collect();
        let mut trace = IterationTrace {
            block_size: size,
            bits_in: a.len(),
            bits_out: 0,
            parity_bits: 0,
            syndrome_bits: 0,
            hash_bits: HASH_BITS,
            discarded: 0,
            corrections: 0,
            errors_in: distance(&pa, &pb),
            errors_out: 0,
        };
        (a, b) = pass(&pa, &mut pb, size, &mut trace);
        trace.bits_out = a.len();
        trace.errors_out = distance(&a, &b);
        iterations.push(trace);
        if key_hash(&a, cfg.seed, i as u64) == key_hash(&b, cfg.seed, i as u64) {
            passed = true;
            break;
        }
    }

    let leakage = iterations
        .iter()
        .map(|t| t.parity_bits + t.syndrome_bits + t.hash_bits)
        .sum();
    let discarded = iterations.iter().map(|t| t.discarded).sum();
    Ok(ReconciliationResult {
        sender: BitString::from_bools(&a),
        corrected: BitString::from_bools(&b),
        leakage,
        discarded,
        passed,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bits(v: &[u8]) -> BitString {
        v.iter().map(|&x| x == 1).collect()
    }

    #[test]
    fn identical_keys_leak_parities_and_one_hash() {
        let k: BitString = (0..1000).map(|i| (i * 7919) % 13 < 6).collect();
        let r = reconcile(&k, &k, &WinnowConfig::default()).unwrap();
        assert!(r.passed);
        assert_eq!(r.iterations.len(), 1);
        let t = r.iterations[0];
        assert_eq!(t.corrections, 0);
        assert_eq!(t.syndrome_bits, 0);
        assert_eq!(t.parity_bits, 125);
        assert_eq!(r.leakage, 125 + 64);
        assert_eq!(r.discarded, 125);
        assert_eq!(r.sender.len(), 875);
        assert_eq!(r.sender, r.corrected);
    }

    #[test]
    fn single_error_in_one_block() {
        // hand trace: a = 1011 0010, b differs at index 5
        // syndrome(a) = 0^2^3^6 = 7, syndrome(b) = 7^5 = 2, difference 5
        let a = bits(&[1, 0, 1, 1, 0, 0, 1, 0]);
        let mut b = a.clone();
        b.flip(5);
        let mut trace = IterationTrace {
            block_size: 8,
            bits_in: 8,
            bits_out: 0,
            parity_bits: 0,
            syndrome_bits: 0,
            hash_bits: 0,
            discarded: 0,
            corrections: 0,
            errors_in: 1,
            errors_out: 0,
        };
        let av: Vec<bool> = a.iter().collect();
        let mut bv: Vec<bool> = b.iter().collect();
        assert_eq!(syndrome(&av), 7);
        assert_eq!(syndrome(&bv), 2);
        let (ka, kb) = pass(&av, &mut bv, 8, &mut trace);
        assert_eq!(trace.corrections, 1);
        assert_eq!(trace.parity_bits + trace.syndrome_bits, 4);
        assert_eq!(ka, kb);
        // positions 0, 1, 2, 4 discarded
        assert_eq!(ka, vec![true, false, true, false]);

        let r = reconcile(&a, &b, &WinnowConfig::default()).unwrap();
        assert!(r.passed);
        assert_eq!(r.iterations.len(), 1);
        assert_eq!(r.iterations[0].corrections, 1);
        assert_eq!(r.leakage, 1 + 3 + 64);
    }

    #[test]
    fn discards_remove_same_positions_on_both_sides() {
        let a: BitString = (0..64).map(|i| i % 3 == 0).collect();
        let mut b = a.clone();
        for i in [3, 20, 41] {
            b.flip(i);
        }
        let r = reconcile(
            &a,
            &b,
            &WinnowConfig {
                block_sizes: vec![8],
                seed: 3,
            },
        )
        .unwrap();
        let t = r.iterations[0];
        assert_eq!(r.sender.len(), r.corrected.len());
        assert_eq!(r.sender.len(), 64 - t.discarded);
        // every block discards its parity bit; mismatched ones three more
        assert_eq!(t.discarded, 8 + t.syndrome_bits);
        assert_eq!(t.errors_out, r.sender.hamming_distance(&r.corrected));
    }

    #[test]
    fn three_errors_in_an_eight_bit_block_never_add_an_error() {
        for mask in 0u32..256 {
            if mask.count_ones() != 3 {
                continue;
            }
            let a = vec![false; 8];
            let mut b: Vec<bool> = (0..8).map(|j| mask >> j & 1 == 1).collect();
            let mut t = IterationTrace {
                block_size: 8,
                bits_in: 8,
                bits_out: 0,
                parity_bits: 0,
                syndrome_bits: 0,
                hash_bits: 0,
                discarded: 0,
                corrections: 0,
                errors_in: 3,
                errors_out: 0,
            };
            let (ka, kb) = pass(&a, &mut b, 8, &mut t);
            assert!(distance(&ka, &kb) <= 3, "{mask:08b}");
        }
    }

    #[test]
    fn sixteen_bit_block_can_gain_an_error() {
        // errors at 3, 5, 9 point the syndrome at 15; all four survive discards
        let a = vec![false; 16];
        let mut b = vec![false; 16];
        for i in [3, 5, 9] {
            b[i] = true;
        }
        let mut t = IterationTrace {
            block_size: 16,
            bits_in: 16,
            bits_out: 0,
            parity_bits: 0,
            syndrome_bits: 0,
            hash_bits: 0,
            discarded: 0,
            corrections: 0,
            errors_in: 3,
            errors_out: 0,
        };
        let (ka, kb) = pass(&a, &mut b, 16, &mut t);
        assert_eq!(distance(&ka, &kb), 4);
    }

    #[test]
    fn hash_separates_and_is_seeded() {
        let a: Vec<bool> = (0..500).map(|i| i % 5 == 0).collect();
        let mut b = a.clone();
        b[250] = !b[250];
        assert_ne!(key_hash(&a, 1, 0), key_hash(&b, 1, 0));
        assert_ne!(key_hash(&a, 1, 0), key_hash(&a, 2, 0));
        assert_eq!(key_hash(&a, 1, 0), key_hash(&a.clone(), 1, 0));
        // trailing zero differs from nothing thanks to the length prefix
        let mut c = a.clone();
        c.push(false);
        assert_ne!(key_hash(&a, 1, 0), key_hash(&c, 1, 0));
    }

    #[test]
    fn rejects_bad_input() {
        let short = bits(&[1, 0, 1]);
        assert!(matches!(
            reconcile(&short, &short, &WinnowConfig::default()),
            Err(Error::KeyTooShort(3))
        ));
        let a = bits(&[0; 16]);
        let b = bits(&[0; 17]);
        assert!(reconcile(&a, &b, &WinnowConfig::default()).is_err());
        let cfg = WinnowConfig {
            block_sizes: vec![8, 12],
            seed: 0,
        };
        assert!(reconcile(&a, &a, &cfg).is_err());
    }
}
