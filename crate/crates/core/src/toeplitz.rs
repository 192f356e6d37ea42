//! Toeplitz hashing over GF(2).
//!
//! For an `n_out x n_in` Toeplitz matrix generated by a seed of
//! `n_in + n_out - 1` bits, entry `(i, j)` is `seed[i - j + n_in - 1]`.
//! Column `j` is therefore the seed window starting at `n_in - 1 - j`, and
//! the product is the XOR of the windows selected by the set input bits.

use serde::{Deserialize, Serialize};

use crate::bitstring::BitString;
use crate::error::{domain, Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToeplitzSpec {
    n_in: usize,
    n_out: usize,
    seed: BitString,
}

impl ToeplitzSpec {
    pub fn new(n_in: usize, n_out: usize, seed: BitString) -> Result<Self> {
        if n_in == 0 {
            return Err(domain("Toeplitz hash needs at least one input bit"));
        }
        if n_out > n_in {
            return Err(domain(format!("n_out = {n_out} exceeds n_in = {n_in}")));
        }
        let need = Self::seed_len(n_in, n_out);
        if seed.len() != need {
            return Err(Error::LengthMismatch {
                expected: need,
                actual: seed.len(),
            });
        }
        Ok(Self { n_in, n_out, seed })
    }

    pub fn seed_len(n_in: usize, n_out: usize) -> usize {
        (n_in + n_out).saturating_sub(1)
    }

    pub fn n_in(&self) -> usize {
        self.n_in
    }

    pub fn n_out(&self) -> usize {
        self.n_out
    }

    pub fn seed(&self) -> &BitString {
        &self.seed
    }
}

pub fn toeplitz_hash(spec: &ToeplitzSpec, input: &BitString) -> Result<BitString> {
    if input.len() != spec.n_in {
        return Err(Error::LengthMismatch {
            expected: spec.n_in,
            actual: input.len(),
        });
    }
    Ok(toeplitz_product(&spec.seed, spec.n_in, spec.n_out, input, 0))
}

/// `T * input[offset..offset + n_in]` for the Toeplitz matrix of `seed`.
fn toeplitz_product(seed: &BitString, n_in: usize, n_out: usize, input: &BitString, offset: usize) -> BitString {
    let words = n_out.div_ceil(64);
    let mut acc = vec![0u64; words];
    for (wi, &w) in input.words().iter().enumerate() {
        let mut w = w;
        while w != 0 {
            let bit = wi * 64 + w.trailing_zeros() as usize;
            w &= w - 1;
            if bit < offset || bit >= offset + n_in {
                continue;
            }
            let base = n_in - 1 - (bit - offset);
            for (k, a) in acc.iter_mut().enumerate() {
                *a ^= seed.word_at(base + 64 * k);
            }
        }
    }
    BitString::from_words(acc, n_out).expect("accumulator sized for n_out")
}

/// Seed bits used by [`modified_toeplitz_hash`]: `n_in - 1`, or none when the
/// map is the identity or empty.
pub fn modified_seed_len(n_in: usize, n_out: usize) -> usize {
    if n_out == 0 || n_out == n_in {
        0
    } else {
        n_in - 1
    }
}

/// Identity-concatenated Toeplitz hash `[I | T]`: the first `n_out` input bits
/// XOR an `n_out x (n_in - n_out)` Toeplitz product of the remaining bits.
/// Consumes `n_in - 1` seed bits, so a seed as long as the key suffices.
/// Only the first `modified_seed_len` bits of `seed` are read.
pub fn modified_toeplitz_hash(seed: &BitString, n_out: usize, input: &BitString) -> Result<BitString> {
    let n_in = input.len();
    if n_out > n_in {
        return Err(domain(format!("n_out = {n_out} exceeds n_in = {n_in}")));
    }
    let need = modified_seed_len(n_in, n_out);
    if seed.len() < need {
        return Err(Error::LengthMismatch {
            expected: need,
            actual: seed.len(),
        });
    }
    let head = input.slice(0..n_out)?;
    if need == 0 {
        return Ok(head);
    }
    let cols = n_in - n_out;
    let t = toeplitz_product(seed, cols, n_out, input, n_out);
    head.xor(&t)
}
