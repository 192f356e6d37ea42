//! Key-rate engine and event-level simulator for fully passive
//! entanglement-based QKD, where the privacy-amplification seed is distilled
//! from Alice's outcomes in mismatched-basis rounds instead of an auxiliary
//! random number generator.

pub mod bitstring;
pub mod channel;
pub mod error;
pub mod optimizer;
pub mod params;
pub mod rate;
pub mod report;
pub mod session;
pub mod toeplitz;
pub mod types;

pub use bitstring::BitString;
pub use error::{Error, Result};
pub use params::ProtocolParams;
pub use rate::{rate_point, RateBreakdown};
pub use types::{make_error_rates, Basis, ErrorRates, HashFamily, SessionTally};
