//! Physical and post-processing parameters.
//!
//! Two on-disk forms are supported, both using the field names below verbatim:
//! JSON, and a flat text format with one `name = value` pair per line (`#`
//! starts a comment).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::HashFamily;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolParams {
    /// Dark-count probability per detector per coincidence window.
    pub dark_count_prob: f64,
    pub detector_efficiency: f64,
    pub misalignment_error: f64,
    /// Error-correction inefficiency `f >= 1`.
    pub ec_efficiency: f64,
    /// Mean number of pairs per coincidence window.
    pub mean_pair_number: f64,
    pub basis_reconciliation_factor: f64,
    pub phase_est_failure_prob: f64,
    /// Post-processing block size in bits.
    pub block_size: u64,
    pub hash_family: HashFamily,
    /// Failure probability of the private-seed extraction of the local pool.
    pub extractor_failure_prob: f64,
    /// Total loss of both arms together, in dB.
    pub channel_loss_db: f64,
}

impl Default for ProtocolParams {
    /// Reference detector and post-processing settings, with `mu = 0.01` as a
    /// placeholder for the optimized value.
    fn default() -> Self {
        Self {
            dark_count_prob: 1e-6,
            detector_efficiency: 0.40,
            misalignment_error: 0.015,
            ec_efficiency: 1.15,
            mean_pair_number: 0.01,
            basis_reconciliation_factor: 0.5,
            phase_est_failure_prob: 1e-7,
            block_size: 1_000_000,
            hash_family: HashFamily::F3rF4r,
            extractor_failure_prob: 1e-10,
            channel_loss_db: 0.0,
        }
    }
}

pub const FIELD_NAMES: [&str; 11] = [
    "dark_count_prob",
    "detector_efficiency",
    "misalignment_error",
    "ec_efficiency",
    "mean_pair_number",
    "basis_reconciliation_factor",
    "phase_est_failure_prob",
    "block_size",
    "hash_family",
    "extractor_failure_prob",
    "channel_loss_db",
];

fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParam {
        name,
        reason: reason.into(),
    }
}

impl ProtocolParams {
    pub fn validate(&self) -> Result<()> {
        let probs: [(&'static str, f64); 6] = [
            ("dark_count_prob", self.dark_count_prob),
            ("detector_efficiency", self.detector_efficiency),
            ("misalignment_error", self.misalignment_error),
            ("basis_reconciliation_factor", self.basis_reconciliation_factor),
            ("phase_est_failure_prob", self.phase_est_failure_prob),
            ("extractor_failure_prob", self.extractor_failure_prob),
        ];
        for (name, v) in probs {
            if !(0.0..=1.0).contains(&v) {
                return Err(invalid(name, format!("{v} is not in [0, 1]")));
            }
        }
        if !(self.ec_efficiency >= 1.0) || !self.ec_efficiency.is_finite() {
            return Err(invalid("ec_efficiency", format!("{} < 1", self.ec_efficiency)));
        }
        if !(self.mean_pair_number > 0.0) || !self.mean_pair_number.is_finite() {
            return Err(invalid(
                "mean_pair_number",
                format!("{} is not positive", self.mean_pair_number),
            ));
        }
        if self.block_size < 1 {
            return Err(invalid("block_size", "must be at least 1"));
        }
        if !(self.channel_loss_db >= 0.0) || !self.channel_loss_db.is_finite() {
            return Err(invalid(
                "channel_loss_db",
                format!("{} is not a finite non-negative loss", self.channel_loss_db),
            ));
        }
        Ok(())
    }

    pub fn with_mu(&self, mu: f64) -> Self {
        Self {
            mean_pair_number: mu,
            ..self.clone()
        }
    }

    pub fn with_loss(&self, loss_db: f64) -> Self {
        Self {
            channel_loss_db: loss_db,
            ..self.clone()
        }
    }

    /// Sets one field from its textual value. Used by the config reader and
    /// by command-line overrides.
    pub fn set_field(&mut self, name: &str, value: &str) -> Result<()> {
        let v = value.trim();
        let real = |field: &'static str| -> Result<f64> {
            v.parse::<f64>()
                .map_err(|e| invalid(field, format!("`{v}`: {e}")))
        };
        match name.trim() {
            "dark_count_prob" => self.dark_count_prob = real("dark_count_prob")?,
            "detector_efficiency" => self.detector_efficiency = real("detector_efficiency")?,
            "misalignment_error" => self.misalignment_error = real("misalignment_error")?,
            "ec_efficiency" => self.ec_efficiency = real("ec_efficiency")?,
            "mean_pair_number" => self.mean_pair_number = real("mean_pair_number")?,
            "basis_reconciliation_factor" => {
                self.basis_reconciliation_factor = real("basis_reconciliation_factor")?
            }
            "phase_est_failure_prob" => self.phase_est_failure_prob = real("phase_est_failure_prob")?,
            "block_size" => {
                // accept `1e6` as well as `1000000`
                let x = real("block_size")?;
                if x.fract() != 0.0 || x < 0.0 || x > u64::MAX as f64 {
                    return Err(invalid("block_size", format!("`{v}` is not a count")));
                }
                self.block_size = x as u64;
            }
            "hash_family" => self.hash_family = v.parse()?,
            "extractor_failure_prob" => self.extractor_failure_prob = real("extractor_failure_prob")?,
            "channel_loss_db" => self.channel_loss_db = real("channel_loss_db")?,
            other => {
                return Err(Error::Domain(format!("unknown parameter `{other}`")));
            }
        }
        Ok(())
    }

    /// Applies `name = value` lines on top of `self`.
    pub fn apply_config(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (name, value) = line.split_once('=').ok_or_else(|| Error::Config {
                line: i + 1,
                reason: format!("expected `name = value`, got `{line}`"),
            })?;
            self.set_field(name, value).map_err(|e| Error::Config {
                line: i + 1,
                reason: e.to_string(),
            })?;
        }
        Ok(())
    }

    /// Parses a flat config; fields not mentioned keep their defaults.
    pub fn from_config_str(text: &str) -> Result<Self> {
        let mut p = Self::default();
        p.apply_config(text)?;
        p.validate()?;
        Ok(p)
    }

    pub fn to_config_string(&self) -> String {
        format!(
            "dark_count_prob = {}\n\
             detector_efficiency = {}\n\
             misalignment_error = {}\n\
             ec_efficiency = {}\n\
             mean_pair_number = {}\n\
             basis_reconciliation_factor = {}\n\
             phase_est_failure_prob = {}\n\
             block_size = {}\n\
             hash_family = {}\n\
             extractor_failure_prob = {}\n\
             channel_loss_db = {}\n",
            self.dark_count_prob,
            self.detector_efficiency,
            self.misalignment_error,
            self.ec_efficiency,
            self.mean_pair_number,
            self.basis_reconciliation_factor,
            self.phase_est_failure_prob,
            self.block_size,
            self.hash_family,
            self.extractor_failure_prob,
            self.channel_loss_db,
        )
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let p: Self = serde_json::from_str(text).map_err(|e| Error::Config {
            line: e.line(),
            reason: e.to_string(),
        })?;
        p.validate()?;
        Ok(p)
    }
}
