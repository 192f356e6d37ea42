//! Packed binary strings.
//!
//! Bit order is little-endian by bit index: bit 0 is the first measurement
//! outcome and lives in the least significant bit of the first word. Byte
//! and hex serializations follow the same order (bit `8k + j` is bit `j` of
//! byte `k`).

use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

const WORD: usize = 64;

#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct BitString {
    words: Vec<u64>,
    len: usize,
}

impl BitString {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn zeros(len: usize) -> Self {
        Self {
            words: vec![0; len.div_ceil(WORD)],
            len,
        }
    }

    pub fn with_capacity(bits: usize) -> Self {
        Self {
            words: Vec::with_capacity(bits.div_ceil(WORD)),
            len: 0,
        }
    }

    /// Builds a string from packed words. Bits beyond `len` are cleared.
    pub fn from_words(mut words: Vec<u64>, len: usize) -> Result<Self> {
        let need = len.div_ceil(WORD);
        if words.len() < need {
            return Err(Error::LengthMismatch {
                expected: need * WORD,
                actual: words.len() * WORD,
            });
        }
        words.truncate(need);
        let mut s = Self { words, len };
        s.clear_tail();
        Ok(s)
    }

    pub fn from_bytes_le(bytes: &[u8], len: usize) -> Result<Self> {
        if bytes.len() * 8 < len {
            return Err(Error::LengthMismatch {
                expected: len,
                actual: bytes.len() * 8,
            });
        }
        let mut words = vec![0u64; len.div_ceil(WORD)];
        for (k, &b) in bytes.iter().take(len.div_ceil(8)).enumerate() {
            words[k / 8] |= (b as u64) << ((k % 8) * 8);
        }
        Self::from_words(words, len)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn get(&self, index: usize) -> Result<bool> {
        if index >= self.len {
            return Err(Error::OutOfRange {
                index,
                len: self.len,
            });
        }
        Ok(self.bit(index))
    }

    #[inline]
    pub(crate) fn bit(&self, index: usize) -> bool {
        (self.words[index / WORD] >> (index % WORD)) & 1 == 1
    }

    pub fn set(&mut self, index: usize, value: bool) -> Result<()> {
        if index >= self.len {
            return Err(Error::OutOfRange {
                index,
                len: self.len,
            });
        }
        let mask = 1u64 << (index % WORD);
        if value {
            self.words[index / WORD] |= mask;
        } else {
            self.words[index / WORD] &= !mask;
        }
        Ok(())
    }

    pub fn push(&mut self, value: bool) {
        if self.len.is_multiple_of(WORD) {
            self.words.push(0);
        }
        if value {
            self.words[self.len / WORD] |= 1u64 << (self.len % WORD);
        }
        self.len += 1;
    }

    pub fn extend_from(&mut self, other: &BitString) {
        for i in 0..other.len {
            self.push(other.bit(i));
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.bit(i))
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Copies the bits in `range` into a new string.
    pub fn slice(&self, range: Range<usize>) -> Result<BitString> {
        if range.start > range.end || range.end > self.len {
            return Err(Error::OutOfRange {
                index: range.end,
                len: self.len,
            });
        }
        let len = range.end - range.start;
        let words = (0..len.div_ceil(WORD))
            .map(|k| self.word_at(range.start + k * WORD))
            .collect();
        Self::from_words(words, len)
    }

    /// 64 bits starting at an arbitrary bit offset; bits past the end read as zero.
    #[inline]
    pub(crate) fn word_at(&self, offset: usize) -> u64 {
        let idx = offset / WORD;
        let shift = offset % WORD;
        let lo = self.words.get(idx).copied().unwrap_or(0);
        if shift == 0 {
            lo
        } else {
            let hi = self.words.get(idx + 1).copied().unwrap_or(0);
            (lo >> shift) | (hi << (WORD - shift))
        }
    }

    pub fn xor(&self, other: &BitString) -> Result<BitString> {
        if self.len != other.len {
            return Err(Error::LengthMismatch {
                expected: self.len,
                actual: other.len,
            });
        }
        let words = self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| a ^ b)
            .collect();
        Ok(Self {
            words,
            len: self.len,
        })
    }

    /// Number of positions where the two strings differ.
    pub fn hamming_distance(&self, other: &BitString) -> Result<usize> {
        Ok(self.xor(other)?.count_ones())
    }

    pub fn to_bytes_le(&self) -> Vec<u8> {
        (0..self.len.div_ceil(8))
            .map(|k| (self.words[k / 8] >> ((k % 8) * 8)) as u8)
            .collect()
    }

    pub fn to_hex(&self) -> String {
        self.to_bytes_le()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn from_hex(hex: &str, len: usize) -> Result<Self> {
        if !hex.len().is_multiple_of(2) {
            return Err(Error::Domain(format!("odd-length hex string ({})", hex.len())));
        }
        let bytes = (0..hex.len())
            .step_by(2)
            .map(|i| {
                u8::from_str_radix(&hex[i..i + 2], 16)
                    .map_err(|e| Error::Domain(format!("bad hex at {i}: {e}")))
            })
            .collect::<Result<Vec<u8>>>()?;
        Self::from_bytes_le(&bytes, len)
    }

    fn clear_tail(&mut self) {
        let rem = self.len % WORD;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
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

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.len <= 128 {
            let bits: String = self.iter().map(|b| if b { '1' } else { '0' }).collect();
            write!(f, "BitString({bits})")
        } else {
            write!(f, "BitString(len={}, ones={})", self.len, self.count_ones())
        }
    }
}

#[derive(Serialize, Deserialize)]
struct BitStringRepr {
    len: usize,
    /// Little-endian bit order within each byte.
    hex: String,
}

impl Serialize for BitString {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        BitStringRepr {
            len: self.len,
            hex: self.to_hex(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for BitString {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = BitStringRepr::deserialize(deserializer)?;
        BitString::from_hex(&repr.hex, repr.len).map_err(serde::de::Error::custom)
    }
}
