//! Packed GF(2) vectors.
//!
//! Bits are stored little-endian within 64-bit words: bit `j` lives in word
//! `j / 64` at position `j % 64`. Unused high bits of the last word are always
//! zero so that word-level equality and popcount are exact.

use std::fmt;

/// A fixed-length vector over GF(2), packed 64 bits per word.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct BitBlock {
    words: Vec<u64>,
    len: usize,
}

impl BitBlock {
    pub fn zeros(len: usize) -> Self {
        BitBlock {
            words: vec![0; len.div_ceil(64)],
            len,
        }
    }

    pub fn from_bits<I: IntoIterator<Item = bool>>(bits: I) -> Self {
        let mut words = Vec::new();
        let mut len = 0;
        for b in bits {
            if len % 64 == 0 {
                words.push(0);
            }
            if b {
                words[len / 64] |= 1 << (len % 64);
            }
            len += 1;
        }
        BitBlock { words, len }
    }

    /// Parses a string of `0`/`1` characters. Other characters are ignored,
    /// so `"1010 0110"` is accepted.
    pub fn from_str01(s: &str) -> Self {
        Self::from_bits(s.chars().filter(|c| *c == '0' || *c == '1').map(|c| c == '1'))
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, j: usize) -> bool {
        debug_assert!(j < self.len);
        (self.words[j >> 6] >> (j & 63)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, j: usize, bit: bool) {
        debug_assert!(j < self.len);
        let mask = 1u64 << (j & 63);
        if bit {
            self.words[j >> 6] |= mask;
        } else {
            self.words[j >> 6] &= !mask;
        }
    }

    #[inline]
    pub fn flip(&mut self, j: usize) {
        debug_assert!(j < self.len);
        self.words[j >> 6] ^= 1u64 << (j & 63);
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    /// Hamming weight.
    pub fn weight(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn xor_assign(&mut self, other: &BitBlock) {
        assert_eq!(self.len, other.len, "length mismatch in xor");
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= b;
        }
    }

    pub fn xor(&self, other: &BitBlock) -> BitBlock {
        let mut out = self.clone();
        out.xor_assign(other);
        out
    }

    /// Number of positions where `self` and `other` differ.
    pub fn distance(&self, other: &BitBlock) -> usize {
        assert_eq!(self.len, other.len, "length mismatch in distance");
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a ^ b).count_ones() as usize)
            .sum()
    }

    /// Gathers bits through a permutation: output bit `p` is input bit `perm[p]`.
    ///
    /// With `perm` describing a permutation matrix this is the row-vector
    /// product `v * Pi`.
    pub fn permute(&self, perm: &[u32]) -> BitBlock {
        let mut out = BitBlock::zeros(self.len);
        self.permute_xor_into(perm, &mut out);
        out
    }

    /// `acc ^= self` permuted by `perm`, without allocating.
    pub fn permute_xor_into(&self, perm: &[u32], acc: &mut BitBlock) {
        assert_eq!(perm.len(), self.len, "permutation length mismatch");
        assert_eq!(acc.len, self.len, "accumulator length mismatch");
        for (w, chunk) in acc.words.iter_mut().zip(perm.chunks(64)) {
            let mut word = 0u64;
            for (b, &src) in chunk.iter().enumerate() {
                let src = src as usize;
                word |= ((self.words[src >> 6] >> (src & 63)) & 1) << b;
            }
            *w ^= word;
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |j| self.get(j))
    }

    /// Copies `src` into positions `offset..offset + src.len()`.
    pub fn copy_from(&mut self, offset: usize, src: &BitBlock) {
        assert!(offset + src.len <= self.len);
        for j in 0..src.len {
            self.set(offset + j, src.get(j));
        }
    }

    /// Bits `offset..offset + len` as a new block.
    pub fn slice(&self, offset: usize, len: usize) -> BitBlock {
        assert!(offset + len <= self.len);
        BitBlock::from_bits((offset..offset + len).map(|j| self.get(j)))
    }

    /// Reads up to 64 bits starting at `offset` into the low bits of a word.
    pub fn read_word(&self, offset: usize, width: usize) -> u64 {
        debug_assert!(width <= 64 && offset + width <= self.len);
        let mut out = 0u64;
        for b in 0..width {
            out |= (self.get(offset + b) as u64) << b;
        }
        out
    }

    /// Writes the low `width` bits of `value` starting at `offset`.
    pub fn write_word(&mut self, offset: usize, width: usize, value: u64) {
        debug_assert!(width <= 64 && offset + width <= self.len);
        for b in 0..width {
            self.set(offset + b, (value >> b) & 1 == 1);
        }
    }
}

impl fmt::Debug for BitBlock {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitBlock(")?;
        for b in self.iter() {
            write!(f, "{}", b as u8)?;
        }
        write!(f, ")")
    }
}

impl fmt::Display for BitBlock {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.iter() {
            write!(f, "{}", b as u8)?;
        }
        Ok(())
    }
}
