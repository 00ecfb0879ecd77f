//! Packed bit strings. Bit `i` lives in word `i / 64` at position `i % 64`.

use std::fmt;

#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct BitString {
    words: Vec<u64>,
    len: usize,
}

fn words_for(len: usize) -> usize {
    len.div_ceil(64)
}

impl BitString {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(bits: usize) -> Self {
        BitString {
            words: Vec::with_capacity(words_for(bits)),
            len: 0,
        }
    }

    pub fn zeros(len: usize) -> Self {
        BitString {
            words: vec![0; words_for(len)],
            len,
        }
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        let mut s = Self::with_capacity(bits.len());
        for &b in bits {
            s.push(b);
        }
        s
    }

    /// Takes ownership of raw words; bits past `len` are cleared.
    pub fn from_words(mut words: Vec<u64>, len: usize) -> Self {
        assert!(words.len() * 64 >= len, "not enough words for {len} bits");
        words.truncate(words_for(len));
        let mut s = BitString { words, len };
        s.clear_tail();
        s
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    fn clear_tail(&mut self) {
        let r = self.len % 64;
        if r != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << r) - 1;
            }
        }
    }

    pub fn push(&mut self, bit: bool) {
        if self.len.is_multiple_of(64) {
            self.words.push(0);
        }
        if bit {
            self.words[self.len / 64] |= 1 << (self.len % 64);
        }
        self.len += 1;
    }

    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit {i} out of range {}", self.len);
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn set(&mut self, i: usize, bit: bool) {
        assert!(i < self.len, "bit {i} out of range {}", self.len);
        let mask = 1u64 << (i % 64);
        if bit {
            self.words[i / 64] |= mask;
        } else {
            self.words[i / 64] &= !mask;
        }
    }

    pub fn flip(&mut self, i: usize) {
        assert!(i < self.len, "bit {i} out of range {}", self.len);
        self.words[i / 64] ^= 1 << (i % 64);
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(|i| self.get(i))
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn parity(&self) -> bool {
        self.words.iter().fold(0, |acc, w| acc ^ w).count_ones() % 2 == 1
    }

    /// Panics on length mismatch.
    pub fn xor(&self, other: &BitString) -> BitString {
        assert_eq!(self.len, other.len, "length mismatch");
        BitString {
            words: self
                .words
                .iter()
                .zip(&other.words)
                .map(|(a, b)| a ^ b)
                .collect(),
            len: self.len,
        }
    }

    pub fn hamming_distance(&self, other: &BitString) -> usize {
        assert_eq!(self.len, other.len, "length mismatch");
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a ^ b).count_ones() as usize)
            .sum()
    }

    /// 64 bits starting at bit `offset`, zero-padded past the end.
    pub fn word_at(&self, offset: usize) -> u64 {
        let q = offset / 64;
        let r = offset % 64;
        let lo = self.words.get(q).copied().unwrap_or(0);
        if r == 0 {
            return lo;
        }
        let hi = self.words.get(q + 1).copied().unwrap_or(0);
        (lo >> r) | (hi << (64 - r))
    }

    pub fn reversed(&self) -> BitString {
        let mut out = BitString::zeros(self.len);
        for i in 0..self.len {
            if self.get(i) {
                out.set(self.len - 1 - i, true);
            }
        }
        out
    }

    /// Bits at `positions`, in that order.
    pub fn select(&self, positions: &[usize]) -> BitString {
        let mut out = BitString::with_capacity(positions.len());
        for &p in positions {
            out.push(self.get(p));
        }
        out
    }

    /// Copy without the bits flagged in `drop` (same length as `self`).
    pub fn without(&self, drop: &[bool]) -> BitString {
        assert_eq!(drop.len(), self.len, "length mismatch");
        let mut out = BitString::with_capacity(self.len);
        for (i, &d) in drop.iter().enumerate() {
            if !d {
                out.push(self.get(i));
            }
        }
        out
    }

    pub fn truncated(&self, len: usize) -> BitString {
        assert!(len <= self.len);
        BitString::from_words(self.words[..words_for(len)].to_vec(), len)
    }

    /// Bytes with the first bit in the most significant position of byte 0.
    pub fn to_bytes_msb(&self) -> Vec<u8> {
        let mut out = vec![0u8; self.len.div_ceil(8)];
        for i in 0..self.len {
            if self.get(i) {
                out[i / 8] |= 0x80 >> (i % 8);
            }
        }
        out
    }

    pub fn from_bytes_msb(bytes: &[u8], len: usize) -> BitString {
        assert!(bytes.len() * 8 >= len, "not enough bytes for {len} bits");
        let mut out = BitString::with_capacity(len);
        for i in 0..len {
            out.push(bytes[i / 8] & (0x80 >> (i % 8)) != 0);
        }
        out
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitString({}: ", self.len)?;
        for b in self.iter().take(128) {
            f.write_str(if b { "1" } else { "0" })?;
        }
        if self.len > 128 {
            f.write_str("...")?;
        }
        f.write_str(")")
    }
}

impl FromIterator<bool> for BitString {
    fn from_iter<I: IntoIterator<Item = bool>>(iter: I) -> Self {
        let mut s = BitString::new();
        for b in iter {
            s.push(b);
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn push_get_roundtrip_across_words() {
        let bools: Vec<bool> = (0..200).map(|i| i % 3 == 0 || i % 7 == 1).collect();
        let s = BitString::from_bools(&bools);
        assert_eq!(s.len(), 200);
        assert_eq!(s.iter().collect::<Vec<_>>(), bools);
        assert_eq!(s.count_ones(), bools.iter().filter(|b| **b).count());
    }

    #[test]
    fn word_at_unaligned() {
        let s: BitString = (0..130).map(|i| i == 5 || i == 70 || i == 129).collect();
        assert_eq!(s.word_at(0), 1 << 5);
        assert_eq!(s.word_at(5), 1);
        assert_eq!(s.word_at(7), 1 << 63);
        assert_eq!(s.word_at(70), 1 | 1 << 59);
        assert_eq!(s.word_at(129), 1);
        assert_eq!(s.word_at(200), 0);
    }

    #[test]
    fn msb_bytes() {
        let s = BitString::from_bools(&[true, false, true, true, false, false, false, false, true]);
        assert_eq!(s.to_bytes_msb(), vec![0b1011_0000, 0b1000_0000]);
        assert_eq!(BitString::from_bytes_msb(&s.to_bytes_msb(), 9), s);
    }

    #[test]
    fn xor_and_distance() {
        let a = BitString::from_bools(&[true, true, false, false]);
        let b = BitString::from_bools(&[true, false, true, false]);
        assert_eq!(a.hamming_distance(&b), 2);
        assert_eq!(
            a.xor(&b),
            BitString::from_bools(&[false, true, true, false])
        );
        assert!(!a.parity());
        assert!(BitString::from_bools(&[true, false, false]).parity());
    }

    #[test]
    fn select_without_reverse() {
        let s = BitString::from_bools(&[true, false, false, true, true]);
        assert_eq!(
            s.select(&[4, 0, 1]),
            BitString::from_bools(&[true, true, false])
        );
        assert_eq!(
            s.without(&[true, false, true, false, false]),
            BitString::from_bools(&[false, true, true])
        );
        assert_eq!(
            s.reversed(),
            BitString::from_bools(&[true, true, false, false, true])
        );
        assert_eq!(s.truncated(2), BitString::from_bools(&[true, false]));
    }

    #[test]
    fn from_words_clears_tail() {
        let s = BitString::from_words(vec![u64::MAX, u64::MAX], 70);
        assert_eq!(s.count_ones(), 70);
        assert_eq!(s.words().len(), 2);
    }
}
