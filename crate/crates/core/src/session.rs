//! Event-level run of one fully passive session.
//!
//! 1. Windows are sampled from the channel model; single-click coincidences
//!    form the raw key. Matched-basis outcomes become the sifted keys and
//!    Alice's mismatched-basis outcomes are kept as the local pool `W`.
//! 2. The pool's min-entropy is certified from the estimated phase errors and
//!    a uniform string `W*` is extracted with a private, reusable Toeplitz
//!    seed that never appears on the public channel.
//! 3. `W*` is announced.
//! 4. `W*` seeds the privacy-amplification hash applied to the error-corrected
//!    key, shortened by the `epsilon` bits moved into the pool.
//!
//! The simulation RNG only emulates quantum measurement outcomes. The
//! protocol itself draws randomness from `W`, `W*` and the pre-shared
//! extractor seed alone.

use std::fmt::Write as _;

use rand::{RngCore, SeedableRng};
use rand_chacha::{ChaCha20Rng, ChaCha8Rng};
use serde::{Deserialize, Serialize};

use crate::bitstring::BitString;
use crate::channel::{derive_channel, sample_window, Click};
use crate::error::{domain, Result};
use crate::params::ProtocolParams;
use crate::rate::{h2, phase_error_upper_bound, seed_budget, smallest_satisfying};
use crate::toeplitz::{modified_toeplitz_hash, toeplitz_hash, ToeplitzSpec};
use crate::types::{make_error_rates, Basis, ErrorRates, HashFamily, SessionTally};

/// Default pre-shared key material for the extractor seed.
pub const DEFAULT_PRESHARED_KEY: u64 = 0x005e_ed0f_a11c_eb0b;

/// Extractor seed shared by Alice in advance and kept private. The same
/// material is reused across sessions; a session reads only the prefix it
/// needs.
#[derive(Clone, PartialEq, Eq)]
pub struct PrivateSeed {
    key: u64,
    bits: BitString,
}

impl std::fmt::Debug for PrivateSeed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "PrivateSeed(len={})", self.bits.len())
    }
}

impl PrivateSeed {
    /// Expands `key` into `len` bits. Expansions of the same key are
    /// prefixes of one another.
    pub fn expand(key: u64, len: usize) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(key);
        let words = (0..len.div_ceil(64)).map(|_| rng.next_u64()).collect();
        Self {
            key,
            bits: BitString::from_words(words, len).expect("word count matches length"),
        }
    }

    pub fn from_bits(bits: BitString) -> Self {
        Self { key: 0, bits }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &BitString {
        &self.bits
    }

    fn ensure_len(&self, len: usize) -> PrivateSeed {
        if self.bits.len() >= len || self.key == 0 {
            self.clone()
        } else {
            PrivateSeed::expand(self.key, len)
        }
    }
}

/// Output length of the pool extractor: `floor(h_min - 2 log2(1/eps_ext))`.
pub fn extractor_output_len(h_min_bits: f64, eps_ext: f64) -> usize {
    let n = (h_min_bits - 2.0 * (1.0 / eps_ext).log2()).floor();
    if n.is_finite() && n > 0.0 {
        n as usize
    } else {
        0
    }
}

/// Extracts near-uniform bits from the local pool with a Toeplitz hash keyed
/// by the private seed. Returns an empty string when the certified
/// min-entropy does not cover the extraction penalty.
pub fn extract_local_randomness(
    w_pool: &BitString,
    h_min_bits: f64,
    private_seed: &BitString,
    eps_ext: f64,
) -> Result<BitString> {
    if !(eps_ext > 0.0 && eps_ext <= 1.0) {
        return Err(domain(format!("eps_ext = {eps_ext} is not in (0, 1]")));
    }
    if h_min_bits > w_pool.len() as f64 + 1e-9 {
        return Err(domain(format!(
            "min-entropy {h_min_bits} exceeds pool length {}",
            w_pool.len()
        )));
    }
    let n_out = extractor_output_len(h_min_bits, eps_ext).min(w_pool.len());
    if n_out == 0 {
        return Ok(BitString::new());
    }
    let need = ToeplitzSpec::seed_len(w_pool.len(), n_out);
    if private_seed.len() < need {
        return Err(crate::Error::LengthMismatch {
            expected: need,
            actual: private_seed.len(),
        });
    }
    let spec = ToeplitzSpec::new(w_pool.len(), n_out, private_seed.slice(0..need)?)?;
    toeplitz_hash(&spec, w_pool)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    AliceToBob,
    BobToAlice,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageKind {
    BasisAnnouncement,
    /// Error counts per basis; what a disclosed sample would reveal.
    ErrorEstimate,
    /// Error-correction syndrome, accounted by length only.
    EcSyndrome,
    /// Number of key bits moved into the local pool (taken from the tail).
    Reassignment,
    /// The extracted seed `W*` selecting the privacy-amplification hash.
    SeedAnnouncement,
}

impl MessageKind {
    fn as_str(self) -> &'static str {
        match self {
            MessageKind::BasisAnnouncement => "basis_announcement",
            MessageKind::ErrorEstimate => "error_estimate",
            MessageKind::EcSyndrome => "ec_syndrome",
            MessageKind::Reassignment => "reassignment",
            MessageKind::SeedAnnouncement => "seed_announcement",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub direction: Direction,
    pub kind: MessageKind,
    pub payload_bits: u64,
    /// Present when the payload bits themselves are simulated.
    pub payload: Option<BitString>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub messages: Vec<Message>,
}

impl Transcript {
    fn send(&mut self, direction: Direction, kind: MessageKind, payload: BitString) {
        self.messages.push(Message {
            direction,
            kind,
            payload_bits: payload.len() as u64,
            payload: Some(payload),
        });
    }

    fn account(&mut self, direction: Direction, kind: MessageKind, bits: u64) {
        self.messages.push(Message {
            direction,
            kind,
            payload_bits: bits,
            payload: None,
        });
    }

    /// One line per message: direction, type, payload length in bits and
    /// the payload in hex (little-endian bit order) or `-`.
    pub fn to_log(&self) -> String {
        let mut out = String::new();
        for m in &self.messages {
            let dir = match m.direction {
                Direction::AliceToBob => "A->B",
                Direction::BobToAlice => "B->A",
            };
            let hex = m.payload.as_ref().map_or_else(|| "-".to_string(), |p| p.to_hex());
            let _ = writeln!(out, "{dir} {} {} {hex}", m.kind.as_str(), m.payload_bits);
        }
        out
    }

    pub fn count(&self, kind: MessageKind) -> usize {
        self.messages.iter().filter(|m| m.kind == kind).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    Success,
    NoCoincidences,
    /// Error rates leave no secret fraction.
    NoPositiveKey,
    /// The pool cannot seed privacy amplification even after moving every
    /// key bit into it.
    InsufficientRandomness,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionResult {
    pub status: SessionStatus,
    pub family: HashFamily,
    pub tally: SessionTally,
    pub rates: ErrorRates,
    pub epsilon: u64,
    /// Certified min-entropy of the pool after reassignment.
    pub h_min_w: f64,
    /// Seed demanded by the hash family for the shortened key.
    pub seed_demand: f64,
    pub ec_leakage_bits: u64,
    pub w_pool: BitString,
    pub w_star: BitString,
    pub k_sift_a: BitString,
    pub k_sift_b: BitString,
    pub k_final: BitString,
    pub transcript: Transcript,
}

impl SessionResult {
    pub fn summary_line(&self) -> String {
        format!(
            "status={} n_r={} n_s={} m_x={} m_z={} epsilon={} k_final={}",
            serde_json::to_value(self.status)
                .ok()
                .and_then(|v| v.as_str().map(str::to_owned))
                .unwrap_or_default(),
            self.tally.n_r(),
            self.tally.n_s(),
            self.tally.m_x(),
            self.tally.m_z(),
            self.epsilon,
            self.k_final.len()
        )
    }
}

/// Runs a session with the default pre-shared extractor seed.
pub fn run_session(params: &ProtocolParams, n_pulses: u64, rng_seed: u64) -> Result<SessionResult> {
    run_session_with(params, n_pulses, rng_seed, &PrivateSeed::expand(DEFAULT_PRESHARED_KEY, 0))
}

fn bases_to_bits(bases: &[Basis]) -> BitString {
    bases.iter().map(|b| *b == Basis::Z).collect()
}

fn u64_payload(values: &[u64]) -> BitString {
    let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
    BitString::from_bytes_le(&bytes, bytes.len() * 8).expect("exact byte count")
}

pub fn run_session_with(
    params: &ProtocolParams,
    n_pulses: u64,
    rng_seed: u64,
    private_seed: &PrivateSeed,
) -> Result<SessionResult> {
    params.validate()?;
    if n_pulses == 0 {
        return Err(domain("a session needs at least one window"));
    }
    let ch = derive_channel(params)?;
    let e_d = params.misalignment_error;
    let f = params.ec_efficiency;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);

    // Step 1: raw events, reconciliation and pool harvesting.
    let mut alice_bases = Vec::new();
    let mut bob_bases = Vec::new();
    let mut k_sift_a = BitString::new();
    let mut k_sift_b = BitString::new();
    let mut w_pool = BitString::new();
    let (mut n_s_x, mut n_s_z, mut m_x, mut m_z, mut doubles) = (0u64, 0u64, 0u64, 0u64, 0u64);
    let (mut err_x, mut err_z) = (0u64, 0u64);

    for _ in 0..n_pulses {
        let w = sample_window(&ch, e_d, &mut rng);
        let (a, b) = match (w.alice.click, w.bob.click) {
            (Click::None, _) | (_, Click::None) => continue,
            (Click::Single(a), Click::Single(b)) => (a, b),
            _ => {
                doubles += 1;
                continue;
            }
        };
        alice_bases.push(w.alice.basis);
        bob_bases.push(w.bob.basis);
        if w.bases_match() {
            k_sift_a.push(a);
            k_sift_b.push(b);
            let wrong = (a != b) as u64;
            match w.alice.basis {
                Basis::X => {
                    n_s_x += 1;
                    err_x += wrong;
                }
                Basis::Z => {
                    n_s_z += 1;
                    err_z += wrong;
                }
            }
        } else {
            w_pool.push(a);
            match w.alice.basis {
                Basis::X => m_x += 1,
                Basis::Z => m_z += 1,
            }
        }
    }

    let tally = SessionTally::new(n_s_x, n_s_z, m_x, m_z, doubles, n_pulses)?;
    let (n_r, n_s) = (tally.n_r(), tally.n_s());
    let mut transcript = Transcript::default();
    transcript.send(Direction::AliceToBob, MessageKind::BasisAnnouncement, bases_to_bits(&alice_bases));
    transcript.send(Direction::BobToAlice, MessageKind::BasisAnnouncement, bases_to_bits(&bob_bases));

    // Step 2 inputs: empirical error rates over the full sifted strings.
    let rate_of = |err: u64, n: u64| if n == 0 { 0.5 } else { err as f64 / n as f64 };
    let (e_bx, e_bz) = (rate_of(err_x, n_s_x), rate_of(err_z, n_s_z));
    let (e_px_up, e_pz_up) = if n_s_x == 0 || n_s_z == 0 {
        (0.5, 0.5)
    } else {
        let eps = params.phase_est_failure_prob;
        (
            phase_error_upper_bound(e_bz, n_s_z, n_s_x, eps)?,
            phase_error_upper_bound(e_bx, n_s_x, n_s_z, eps)?,
        )
    };
    let rates = make_error_rates(e_bx, e_bz, e_px_up, e_pz_up)?;
    transcript.send(Direction::BobToAlice, MessageKind::ErrorEstimate, u64_payload(&[err_x, err_z]));

    let mut result = SessionResult {
        status: SessionStatus::Success,
        family: params.hash_family,
        tally,
        rates,
        epsilon: 0,
        h_min_w: 0.0,
        seed_demand: 0.0,
        ec_leakage_bits: 0,
        w_pool,
        w_star: BitString::new(),
        k_sift_a,
        k_sift_b,
        k_final: BitString::new(),
        transcript,
    };
    if n_r == 0 {
        result.status = SessionStatus::NoCoincidences;
        return Ok(result);
    }

    // Error correction: Bob ends with Alice's key; only the leakage is tracked.
    let leakage = (f * h2(rates.e_b_tilde()) * n_s as f64).ceil() as u64;
    result.ec_leakage_bits = leakage;
    result
        .transcript
        .account(Direction::AliceToBob, MessageKind::EcSyndrome, leakage);
    let k_ec = result.k_sift_a.clone();

    // Reassignment: the extracted seed must cover the family's demand after
    // the extractor's output penalty.
    let family = params.hash_family;
    let penalty = 2.0 * (1.0 / params.extractor_failure_prob).log2();
    let sufficient = |eps: u64| {
        let b = seed_budget(n_r, n_s, eps, &rates, f, family);
        (b.supply - penalty).floor() >= b.demand.ceil()
    };
    let epsilon = smallest_satisfying(n_s, sufficient);
    let budget = seed_budget(n_r, n_s, epsilon, &rates, f, family);
    let n_f = budget.n_f.floor() as usize;
    result.epsilon = epsilon;
    result.h_min_w = budget.supply;
    result.seed_demand = budget.demand;

    if n_f == 0 {
        result.status = if 1.0 - h2(rates.e_p_tilde()) - f * h2(rates.e_b_tilde()) <= 0.0 {
            SessionStatus::NoPositiveKey
        } else {
            SessionStatus::InsufficientRandomness
        };
        return Ok(result);
    }

    let kept_len = (n_s - epsilon) as usize;
    let kept = k_ec.slice(0..kept_len)?;
    let mut w = result.w_pool.clone();
    w.extend_from(&k_ec.slice(kept_len..n_s as usize)?);
    result
        .transcript
        .send(Direction::AliceToBob, MessageKind::Reassignment, u64_payload(&[epsilon]));

    let n_out = extractor_output_len(budget.supply, params.extractor_failure_prob).min(w.len());
    let seed = private_seed.ensure_len(ToeplitzSpec::seed_len(w.len(), n_out));
    let w_star = extract_local_randomness(&w, budget.supply, seed.bits(), params.extractor_failure_prob)?;

    // Step 3.
    result
        .transcript
        .send(Direction::AliceToBob, MessageKind::SeedAnnouncement, w_star.clone());

    // Step 4.
    result.k_final = match family {
        HashFamily::Toeplitz => modified_toeplitz_hash(&w_star, n_f, &kept)?,
        _ => kept.slice(0..n_f)?,
    };
    result.w_star = w_star;
    Ok(result)
}
