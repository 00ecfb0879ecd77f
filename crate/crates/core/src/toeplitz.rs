//! Toeplitz-matrix privacy amplification over GF(2).
//!
//! For an `n`-bit key and `m` output bits the `m × n` matrix is
//! `T[i][j] = s[i + n - 1 - j]` with a seed `s` of `m + n - 1` bits: column
//! 0 reads `s[n-1..]` downwards and row 0 reads `s[..n]` right to left.
//! Row `i` against the reversed key is the seed window starting at `i`, so
//! each output bit is the parity of a word-wise AND.

use crate::bits::BitString;
use crate::error::{Error, Result};

pub fn seed_len(key_len: usize, out_len: usize) -> usize {
    (key_len + out_len).saturating_sub(1)
}

pub fn hash(key: &BitString, out_len: usize, seed: &BitString) -> Result<BitString> {
    let n = key.len();
    if out_len > n {
        return Err(Error::OutputTooLong { out_len, in_len: n });
    }
    if seed.len() != seed_len(n, out_len) {
        return Err(Error::SeedLength {
            expected: seed_len(n, out_len),
            got: seed.len(),
        });
    }
    let rev = key.reversed();
    let words = rev.words();
    let mut out = BitString::with_capacity(out_len);
    for i in 0..out_len {
        let acc = words
            .iter()
            .enumerate()
            .fold(0u64, |acc, (w, &k)| acc ^ (seed.word_at(i + 64 * w) & k));
        out.push(acc.count_ones() % 2 == 1);
    }
    Ok(out)
}
