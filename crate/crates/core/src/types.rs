//! Shared domain vocabulary: bases, error-rate records, session tallies and
//! the hash-family enumeration.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{check_prob, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Basis {
    X,
    Z,
}

impl Basis {
    pub fn complement(self) -> Basis {
        match self {
            Basis::X => Basis::Z,
            Basis::Z => Basis::X,
        }
    }
}

/// Measured bit error rates and phase-error upper bounds for both bases.
///
/// Every rate is clamped to `[0, 0.5]`; the aggregates `e_p_tilde` and
/// `e_b_tilde` are the per-basis maxima.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawErrorRates")]
pub struct ErrorRates {
    e_bx: f64,
    e_bz: f64,
    e_px_up: f64,
    e_pz_up: f64,
    e_p_tilde: f64,
    e_b_tilde: f64,
}

#[derive(Deserialize)]
struct RawErrorRates {
    e_bx: f64,
    e_bz: f64,
    e_px_up: f64,
    e_pz_up: f64,
}

impl TryFrom<RawErrorRates> for ErrorRates {
    type Error = Error;

    fn try_from(r: RawErrorRates) -> Result<Self> {
        make_error_rates(r.e_bx, r.e_bz, r.e_px_up, r.e_pz_up)
    }
}

pub fn make_error_rates(e_bx: f64, e_bz: f64, e_px_up: f64, e_pz_up: f64) -> Result<ErrorRates> {
    check_prob("e_bx", e_bx)?;
    check_prob("e_bz", e_bz)?;
    check_prob("e_px_up", e_px_up)?;
    check_prob("e_pz_up", e_pz_up)?;
    let clamp = |x: f64| x.min(0.5);
    let (e_bx, e_bz, e_px_up, e_pz_up) = (clamp(e_bx), clamp(e_bz), clamp(e_px_up), clamp(e_pz_up));
    Ok(ErrorRates {
        e_bx,
        e_bz,
        e_px_up,
        e_pz_up,
        e_p_tilde: e_pz_up.max(e_px_up),
        e_b_tilde: e_bz.max(e_bx),
    })
}

impl ErrorRates {
    /// Same rates in both bases.
    pub fn symmetric(e_b: f64, e_p_up: f64) -> Result<Self> {
        make_error_rates(e_b, e_b, e_p_up, e_p_up)
    }

    pub fn e_bx(&self) -> f64 {
        self.e_bx
    }
    pub fn e_bz(&self) -> f64 {
        self.e_bz
    }
    pub fn e_px_up(&self) -> f64 {
        self.e_px_up
    }
    pub fn e_pz_up(&self) -> f64 {
        self.e_pz_up
    }
    pub fn e_p_tilde(&self) -> f64 {
        self.e_p_tilde
    }
    pub fn e_b_tilde(&self) -> f64 {
        self.e_b_tilde
    }

    pub fn bit_error(&self, basis: Basis) -> f64 {
        match basis {
            Basis::X => self.e_bx,
            Basis::Z => self.e_bz,
        }
    }

    pub fn phase_error_up(&self, basis: Basis) -> f64 {
        match basis {
            Basis::X => self.e_px_up,
            Basis::Z => self.e_pz_up,
        }
    }
}

/// Event counts of one session or one analytic block.
///
/// `m_x` (`m_z`) counts mismatched-basis rounds in which Alice measured X (Z).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawTally")]
pub struct SessionTally {
    n_r: u64,
    n_s: u64,
    n_s_x: u64,
    n_s_z: u64,
    m_x: u64,
    m_z: u64,
    n_double_click: u64,
    n_pulses: u64,
}

#[derive(Deserialize)]
struct RawTally {
    n_r: u64,
    n_s: u64,
    n_s_x: u64,
    n_s_z: u64,
    m_x: u64,
    m_z: u64,
    n_double_click: u64,
    n_pulses: u64,
}

impl TryFrom<RawTally> for SessionTally {
    type Error = Error;

    fn try_from(r: RawTally) -> Result<Self> {
        let t = SessionTally::new(r.n_s_x, r.n_s_z, r.m_x, r.m_z, r.n_double_click, r.n_pulses)?;
        if t.n_r != r.n_r || t.n_s != r.n_s {
            return Err(Error::InconsistentTally(format!(
                "n_r = {} / n_s = {} do not match per-basis counts (expected {} / {})",
                r.n_r, r.n_s, t.n_r, t.n_s
            )));
        }
        Ok(t)
    }
}

impl SessionTally {
    /// Builds a tally from its independent counts; `n_s` and `n_r` are derived.
    pub fn new(
        n_s_x: u64,
        n_s_z: u64,
        m_x: u64,
        m_z: u64,
        n_double_click: u64,
        n_pulses: u64,
    ) -> Result<Self> {
        let n_s = n_s_x + n_s_z;
        let n_r = n_s + m_x + m_z;
        if n_r + n_double_click > n_pulses {
            return Err(Error::InconsistentTally(format!(
                "{n_r} raw events + {n_double_click} double clicks exceed {n_pulses} windows"
            )));
        }
        Ok(Self {
            n_r,
            n_s,
            n_s_x,
            n_s_z,
            m_x,
            m_z,
            n_double_click,
            n_pulses,
        })
    }

    /// Validating constructor for externally supplied totals.
    pub fn from_totals(
        n_r: u64,
        n_s: u64,
        n_s_x: u64,
        n_s_z: u64,
        m_x: u64,
        m_z: u64,
        n_double_click: u64,
        n_pulses: u64,
    ) -> Result<Self> {
        RawTally {
            n_r,
            n_s,
            n_s_x,
            n_s_z,
            m_x,
            m_z,
            n_double_click,
            n_pulses,
        }
        .try_into()
    }

    pub fn n_r(&self) -> u64 {
        self.n_r
    }
    pub fn n_s(&self) -> u64 {
        self.n_s
    }
    pub fn n_s_x(&self) -> u64 {
        self.n_s_x
    }
    pub fn n_s_z(&self) -> u64 {
        self.n_s_z
    }
    pub fn m_x(&self) -> u64 {
        self.m_x
    }
    pub fn m_z(&self) -> u64 {
        self.m_z
    }
    pub fn n_double_click(&self) -> u64 {
        self.n_double_click
    }
    pub fn n_pulses(&self) -> u64 {
        self.n_pulses
    }
}

/// Universal hash families with known seed requirements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HashFamily {
    /// Hayashi's `f_{F1,R}` / `f_{F2,R}`: seed `n_s - n_f`.
    F1rF2r,
    /// Hayashi's `f_{F3,R}` / `f_{F4,R}`: seed `n_f`.
    F3rF4r,
    /// Toeplitz matrices: seed `n_s`.
    Toeplitz,
    /// Trevisan's extractor: seed `ceil(log2(n_s)^3)`.
    Trevisan,
    /// Two-universal construction from the TSSR analysis: seed `2 n_f`.
    Tssr,
    /// Epsilon-almost pairwise independent hashing: seed `4 n_f`.
    EpsAlmostPairwise,
}

impl HashFamily {
    pub const ALL: [HashFamily; 6] = [
        HashFamily::F1rF2r,
        HashFamily::F3rF4r,
        HashFamily::Toeplitz,
        HashFamily::Trevisan,
        HashFamily::Tssr,
        HashFamily::EpsAlmostPairwise,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            HashFamily::F1rF2r => "f1r_f2r",
            HashFamily::F3rF4r => "f3r_f4r",
            HashFamily::Toeplitz => "toeplitz",
            HashFamily::Trevisan => "trevisan",
            HashFamily::Tssr => "tssr",
            HashFamily::EpsAlmostPairwise => "eps_almost_pairwise",
        }
    }
}

impl fmt::Display for HashFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for HashFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        Ok(match norm.as_str() {
            "f1r_f2r" | "f1r" | "f2r" | "f1" | "f2" => HashFamily::F1rF2r,
            "f3r_f4r" | "f3r" | "f4r" | "f3" | "f4" => HashFamily::F3rF4r,
            "toeplitz" => HashFamily::Toeplitz,
            "trevisan" => HashFamily::Trevisan,
            "tssr" => HashFamily::Tssr,
            "eps_almost_pairwise" | "eps_pairwise" | "pairwise" => HashFamily::EpsAlmostPairwise,
            _ => {
                return Err(Error::Domain(format!(
                    "unknown hash family `{s}` (expected one of f1r_f2r, f3r_f4r, toeplitz, trevisan, tssr, eps_almost_pairwise)"
                )))
            }
        })
    }
}
