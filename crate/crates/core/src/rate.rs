//! Closed-form post-processing mathematics: per-basis and aggregate key
//! lengths, min-entropy of the mismatched-basis pool, seed requirements of
//! the hash families, the key-bit reassignment count and the end-to-end
//! analytic rate for one parameter point.

use serde::{Deserialize, Serialize};

use crate::channel::{coincidence_gain_qber, derive_channel};
use crate::error::{check_prob, domain, Result};
use crate::params::ProtocolParams;
use crate::types::{make_error_rates, ErrorRates, HashFamily};

/// Binary Shannon entropy in bits.
pub fn binary_entropy(x: f64) -> Result<f64> {
    check_prob("x", x)?;
    Ok(h2(x))
}

#[inline]
pub(crate) fn h2(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        0.0
    } else {
        -x * x.log2() - (1.0 - x) * (1.0 - x).log2()
    }
}

/// Finite-size estimation of a phase-error rate from the bit errors seen in
/// the complementary basis. Implementations must be monotone in `e_obs`.
pub trait PhaseErrorBound: Send + Sync {
    /// Stable identifier recorded alongside results.
    fn id(&self) -> &'static str;

    /// Deviation added to the observed rate.
    fn deviation(&self, n_obs: u64, n_target: u64, eps_ph: f64) -> f64;

    fn upper_bound(&self, e_obs: f64, n_obs: u64, n_target: u64, eps_ph: f64) -> Result<f64> {
        check_prob("e_obs", e_obs)?;
        if n_obs == 0 || n_target == 0 {
            return Err(domain(format!(
                "phase-error estimation needs non-empty samples (n_obs = {n_obs}, n_target = {n_target})"
            )));
        }
        if !(eps_ph > 0.0 && eps_ph < 1.0) {
            return Err(domain(format!("eps_ph = {eps_ph} is not in (0, 1)")));
        }
        Ok((e_obs + self.deviation(n_obs, n_target, eps_ph)).min(0.5))
    }
}

/// Two-sample Hoeffding deviation
/// `θ = sqrt((n + k) ln(1/ε) / (2 n k))`.
#[derive(Debug, Clone, Copy, Default)]
pub struct HoeffdingTwoSample;

impl PhaseErrorBound for HoeffdingTwoSample {
    fn id(&self) -> &'static str {
        "hoeffding-two-sample"
    }

    fn deviation(&self, n_obs: u64, n_target: u64, eps_ph: f64) -> f64 {
        let (n, k) = (n_obs as f64, n_target as f64);
        ((n + k) * (1.0 / eps_ph).ln() / (2.0 * n * k)).sqrt()
    }
}

/// Upper bound on the phase error with the default [`HoeffdingTwoSample`] strategy.
pub fn phase_error_upper_bound(e_obs: f64, n_obs: u64, n_target: u64, eps_ph: f64) -> Result<f64> {
    HoeffdingTwoSample.upper_bound(e_obs, n_obs, n_target, eps_ph)
}

/// Fraction of a sifted bit that survives as secret key.
#[inline]
fn key_fraction(e_p_up: f64, e_b: f64, f: f64) -> f64 {
    1.0 - h2(e_p_up) - f * h2(e_b)
}

/// Secret bits extractable from one basis, floored at zero.
pub fn key_length_basis(n_s_basis: u64, e_p_up: f64, e_b: f64, f: f64) -> f64 {
    (n_s_basis as f64 * key_fraction(e_p_up, e_b, f)).max(0.0)
}

pub fn key_length_total(n_f_x: f64, n_f_z: f64) -> f64 {
    n_f_x + n_f_z
}

/// Per-basis min-entropy of the mismatched pool. The basis pairing is the
/// published one: `m_x` goes with the Z phase error and `m_z` with X.
/// Swap the rate arguments to evaluate the other pairing.
pub fn min_entropy_mismatched_per_basis(m_x: u64, m_z: u64, e_pz_up: f64, e_px_up: f64) -> f64 {
    m_x as f64 * (1.0 - h2(e_pz_up)) + m_z as f64 * (1.0 - h2(e_px_up))
}

/// Min-entropy of the mismatched pool using the aggregate phase error.
pub fn min_entropy_mismatched_aggregate(n_r: u64, n_s: u64, e_p_tilde: f64) -> f64 {
    debug_assert!(n_r >= n_s);
    n_r.saturating_sub(n_s) as f64 * (1.0 - h2(e_p_tilde))
}

/// Min-entropy of the error-corrected key, net of error-correction leakage.
pub fn min_entropy_error_corrected(n_s: u64, e_p_tilde: f64, e_b_tilde: f64, f: f64) -> f64 {
    key_length_basis(n_s, e_p_tilde, e_b_tilde, f)
}

/// Uniform seed bits needed to hash an `n_s`-bit key down to `n_f` bits.
pub fn seed_requirement(family: HashFamily, n_s: u64, n_f: f64) -> Result<f64> {
    if !(n_f >= 0.0) || n_f > n_s as f64 {
        return Err(domain(format!("seed requirement needs 0 <= n_f <= n_s (n_f = {n_f}, n_s = {n_s})")));
    }
    Ok(seed_cost(family, n_s, n_f))
}

pub(crate) fn seed_cost(family: HashFamily, n_s: u64, n_f: f64) -> f64 {
    let n = n_s as f64;
    match family {
        HashFamily::F1rF2r => n - n_f,
        HashFamily::F3rF4r => n_f,
        HashFamily::Toeplitz => n,
        HashFamily::Trevisan => {
            if n_s < 2 {
                0.0
            } else {
                n.log2().powi(3).ceil()
            }
        }
        HashFamily::Tssr => 2.0 * n_f,
        HashFamily::EpsAlmostPairwise => 4.0 * n_f,
    }
}

/// Local randomness available against randomness required, after `epsilon`
/// key bits have been moved into the local pool.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeedBudget {
    pub epsilon: u64,
    /// Min-entropy of the enlarged pool.
    pub supply: f64,
    /// Seed length demanded by the hash family for the shortened key.
    pub demand: f64,
    /// Real-valued final key length for the shortened key.
    pub n_f: f64,
}

impl SeedBudget {
    pub fn balanced(&self) -> bool {
        self.supply >= self.demand
    }
}

pub fn seed_budget(
    n_r: u64,
    n_s: u64,
    epsilon: u64,
    rates: &ErrorRates,
    f: f64,
    family: HashFamily,
) -> SeedBudget {
    let kept = n_s - epsilon;
    let n_f = (kept as f64 * key_fraction(rates.e_p_tilde(), rates.e_b_tilde(), f)).max(0.0);
    SeedBudget {
        epsilon,
        supply: (n_r - n_s + epsilon) as f64 * (1.0 - h2(rates.e_p_tilde())),
        demand: seed_cost(family, kept, n_f),
        n_f,
    }
}

/// Smallest `x` in `[0, upper]` with `pred(x)`, for a predicate that is
/// monotone (false then true). Returns `upper` if even `pred(upper)` fails.
pub fn smallest_satisfying(upper: u64, pred: impl Fn(u64) -> bool) -> u64 {
    if pred(0) {
        return 0;
    }
    if !pred(upper) {
        return upper;
    }
    let (mut lo, mut hi) = (0, upper);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if pred(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Smallest number of error-corrected key bits to move into the local pool
/// so that the pool's min-entropy covers the hash family's seed demand.
///
/// Supply grows and demand shrinks with `epsilon` for every family, so the
/// condition is monotone and bisection applies.
pub fn solve_epsilon(n_r: u64, n_s: u64, rates: &ErrorRates, f: f64, family: HashFamily) -> Result<u64> {
    if n_r < n_s {
        return Err(domain(format!("n_r = {n_r} < n_s = {n_s}")));
    }
    Ok(smallest_satisfying(n_s, |eps| {
        seed_budget(n_r, n_s, eps, rates, f, family).balanced()
    }))
}

/// Final key length of the passive scheme after reassigning `epsilon` bits.
pub fn passive_final_key_length(n_s: u64, epsilon: u64, rates: &ErrorRates, f: f64) -> f64 {
    debug_assert!(epsilon <= n_s);
    key_length_basis(n_s - epsilon.min(n_s), rates.e_p_tilde(), rates.e_b_tilde(), f)
}

/// Every intermediate of the analytic pipeline at one parameter point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateBreakdown {
    pub family: HashFamily,
    pub mean_pair_number: f64,
    pub channel_loss_db: f64,
    pub bound_strategy: String,
    pub q_gain: f64,
    pub e_qber: f64,
    pub n_r: u64,
    pub n_s: u64,
    pub rates: ErrorRates,
    pub e_b_tilde: f64,
    pub e_p_tilde: f64,
    /// Min-entropy of the mismatched pool before reassignment.
    pub h_min_w: f64,
    /// Min-entropy of the error-corrected key before reassignment.
    pub h_min_kec: f64,
    pub epsilon: u64,
    pub seed_demand: f64,
    pub seed_supply: f64,
    pub n_f_passive: u64,
    pub n_f_bbm92: u64,
    pub rate_per_pulse_passive: f64,
    pub rate_per_pulse_bbm92: f64,
    /// Set when the channel produces no coincidences at all.
    pub zero_gain: bool,
}

pub fn rate_point(params: &ProtocolParams) -> Result<RateBreakdown> {
    rate_point_with(params, &HoeffdingTwoSample)
}

/// Analytic pipeline for one parameter point over one post-processing block.
///
/// The block holds `n_r = block_size` raw coincidences, split deterministically
/// into `n_s = floor(q n_r)` sifted bits (half per basis) and `n_r - n_s`
/// mismatched outcomes. Rates are bits per coincidence window,
/// `n_f * Q / n_r`.
pub fn rate_point_with(params: &ProtocolParams, bound: &dyn PhaseErrorBound) -> Result<RateBreakdown> {
    let ch = derive_channel(params)?;
    let gq = coincidence_gain_qber(&ch, params.misalignment_error)?;
    let f = params.ec_efficiency;

    let n_r = params.block_size;
    let n_s = (params.basis_reconciliation_factor * n_r as f64).floor() as u64;
    let n_s_x = n_s / 2;
    let n_s_z = n_s - n_s_x;
    let e = gq.e_qber;

    let (e_px_up, e_pz_up) = if n_s_x == 0 || n_s_z == 0 {
        (0.5, 0.5)
    } else {
        let eps = params.phase_est_failure_prob;
        (
            bound.upper_bound(e, n_s_z, n_s_x, eps)?,
            bound.upper_bound(e, n_s_x, n_s_z, eps)?,
        )
    };
    let rates = make_error_rates(e, e, e_px_up, e_pz_up)?;

    let n_f_bbm92 = key_length_total(
        key_length_basis(n_s_x, e_px_up, rates.e_bx(), f),
        key_length_basis(n_s_z, e_pz_up, rates.e_bz(), f),
    )
    .floor() as u64;

    let epsilon = solve_epsilon(n_r, n_s, &rates, f, params.hash_family)?;
    let budget = seed_budget(n_r, n_s, epsilon, &rates, f, params.hash_family);
    let n_f_passive = passive_final_key_length(n_s, epsilon, &rates, f).floor() as u64;

    let zero_gain = gq.q_gain <= 0.0;
    let per_pulse = |n_f: u64| {
        if zero_gain {
            0.0
        } else {
            n_f as f64 * gq.q_gain / n_r as f64
        }
    };

    Ok(RateBreakdown {
        family: params.hash_family,
        mean_pair_number: params.mean_pair_number,
        channel_loss_db: params.channel_loss_db,
        bound_strategy: bound.id().to_string(),
        q_gain: gq.q_gain,
        e_qber: gq.e_qber,
        n_r,
        n_s,
        rates,
        e_b_tilde: rates.e_b_tilde(),
        e_p_tilde: rates.e_p_tilde(),
        h_min_w: min_entropy_mismatched_aggregate(n_r, n_s, rates.e_p_tilde()),
        h_min_kec: min_entropy_error_corrected(n_s, rates.e_p_tilde(), rates.e_b_tilde(), f),
        epsilon,
        seed_demand: budget.demand,
        seed_supply: budget.supply,
        n_f_passive,
        n_f_bbm92,
        rate_per_pulse_passive: per_pulse(n_f_passive),
        rate_per_pulse_bbm92: per_pulse(n_f_bbm92),
        zero_gain,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // Independent entropy oracle: natural logs, converted once.
    fn h2_ln(x: f64) -> f64 {
        if x == 0.0 || x == 1.0 {
            0.0
        } else {
            -(x * x.ln() + (1.0 - x) * (1.0 - x).ln()) / std::f64::consts::LN_2
        }
    }

    #[test]
    fn binary_entropy_examples() {
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(0.5).unwrap(), 1.0);
        // oracle value for 0.015: 0.112364...
        let v = binary_entropy(0.015).unwrap();
        assert!((v - h2_ln(0.015)).abs() < 1e-14);
        assert!((v - 0.11236).abs() < 1e-5, "{v}");
        assert!(binary_entropy(-1e-9).is_err());
        assert!(binary_entropy(1.5).is_err());
    }

    #[test]
    fn phase_bound_examples() {
        let theta = HoeffdingTwoSample.deviation(1_000_000, 1_000_000, 1e-7);
        // sqrt(ln(10^7) / 10^6), ln(10^7) = 16.11809565
        assert!((theta - (16.118_095_650_958_32f64 / 1e6).sqrt()).abs() < 1e-12);
        assert!((theta - 4.015e-3).abs() < 1e-6, "{theta}");

        let b = phase_error_upper_bound(0.02, 1000, 1000, 1.0 - 1e-15).unwrap();
        assert!((b - 0.02).abs() < 1e-7);

        assert_eq!(phase_error_upper_bound(0.49, 100, 100, 1e-7).unwrap(), 0.5);
        assert!(phase_error_upper_bound(0.1, 0, 10, 1e-7).is_err());
        assert!(phase_error_upper_bound(0.1, 10, 0, 1e-7).is_err());
        assert!(phase_error_upper_bound(0.1, 10, 10, 0.0).is_err());
        assert!(phase_error_upper_bound(0.1, 10, 10, 1.0).is_err());
    }

    #[test]
    fn key_length_examples() {
        assert_eq!(key_length_basis(1000, 0.0, 0.0, 1.15), 1000.0);
        assert_eq!(key_length_basis(1000, 0.5, 0.3, 1.15), 0.0);
        let v = key_length_basis(1_000_000, 0.05, 0.015, 1.15);
        let oracle = 1e6 * (1.0 - h2_ln(0.05) - 1.15 * h2_ln(0.015));
        assert!((v - oracle).abs() < 1e-6, "{v} vs {oracle}");

        assert_eq!(key_length_total(0.0, 0.0), 0.0);
        assert_eq!(key_length_total(100.0, 200.0), 300.0);
        let x = key_length_basis(500_000, 0.05, 0.015, 1.15);
        assert_eq!(key_length_total(x, x), 2.0 * x);
    }

    #[test]
    fn mismatched_entropy_examples() {
        assert_eq!(min_entropy_mismatched_per_basis(300, 200, 0.5, 0.5), 0.0);
        assert_eq!(min_entropy_mismatched_per_basis(300, 200, 0.0, 0.0), 500.0);
        let v = min_entropy_mismatched_per_basis(300, 200, 0.05, 0.02);
        let oracle = 300.0 * (1.0 - h2_ln(0.05)) + 200.0 * (1.0 - h2_ln(0.02));
        assert!((v - oracle).abs() < 1e-9);

        assert_eq!(min_entropy_mismatched_aggregate(1000, 1000, 0.1), 0.0);
        assert_eq!(min_entropy_mismatched_aggregate(2000, 1000, 0.0), 1000.0);
        let v = min_entropy_mismatched_aggregate(2_000_000, 1_000_000, 0.05);
        assert!((v - 1e6 * (1.0 - h2_ln(0.05))).abs() < 1e-6);
    }

    #[test]
    fn error_corrected_entropy_examples() {
        assert_eq!(min_entropy_error_corrected(1000, 0.0, 0.0, 1.15), 1000.0);
        assert_eq!(min_entropy_error_corrected(1000, 0.5, 0.0, 1.15), 0.0);
        let v = min_entropy_error_corrected(1_000_000, 0.02, 0.015, 1.15);
        let oracle = 1e6 * (1.0 - h2_ln(0.02) - 1.15 * h2_ln(0.015));
        assert!((v - oracle).abs() < 1e-6);
    }

    #[test]
    fn seed_requirement_table() {
        let (n_s, n_f) = (1_000_000u64, 500_000.0);
        let cost = |fam| seed_requirement(fam, n_s, n_f).unwrap();
        assert_eq!(cost(HashFamily::F1rF2r), 500_000.0);
        assert_eq!(cost(HashFamily::F3rF4r), 500_000.0);
        assert_eq!(cost(HashFamily::Toeplitz), 1_000_000.0);
        assert_eq!(cost(HashFamily::Tssr), 1_000_000.0);
        assert_eq!(cost(HashFamily::EpsAlmostPairwise), 2_000_000.0);
        assert_eq!(seed_requirement(HashFamily::Trevisan, 1 << 20, 7.0).unwrap(), 8000.0);
        assert_eq!(seed_requirement(HashFamily::Trevisan, 1, 0.0).unwrap(), 0.0);
        assert_eq!(seed_requirement(HashFamily::Trevisan, 0, 0.0).unwrap(), 0.0);
        // log2(3)^3 = 3.98... -> 4
        assert_eq!(seed_requirement(HashFamily::Trevisan, 3, 1.0).unwrap(), 4.0);
        assert!(seed_requirement(HashFamily::F3rF4r, 10, 11.0).is_err());
        assert!(seed_requirement(HashFamily::F3rF4r, 10, -1.0).is_err());
    }

    #[test]
    fn solve_epsilon_examples() {
        let clean = ErrorRates::symmetric(0.0, 0.0).unwrap();
        assert_eq!(solve_epsilon(2000, 1000, &clean, 1.15, HashFamily::Toeplitz).unwrap(), 0);
        assert_eq!(solve_epsilon(2000, 1000, &clean, 1.15, HashFamily::F3rF4r).unwrap(), 0);

        let noisy = make_error_rates(0.0, 0.0, 0.11, 0.11).unwrap();
        let eps = solve_epsilon(2000, 1000, &noisy, 1.15, HashFamily::Toeplitz).unwrap();
        // linear-scan oracle over the inequality written out by hand
        let e = 1.0 - h2_ln(0.11);
        let scan = (0..=1000u64)
            .find(|&k| (1000.0 + k as f64) * e >= 1000.0 - k as f64)
            .unwrap();
        assert_eq!(eps, scan);
        assert_eq!(eps, 334);

        assert!(solve_epsilon(999, 1000, &clean, 1.15, HashFamily::Toeplitz).is_err());
    }

    #[test]
    fn solve_epsilon_collapses_without_pool() {
        let r = ErrorRates::symmetric(0.01, 0.02).unwrap();
        // empty pool: eps (1 - H2(0.02)) >= 1000 - eps  =>  eps >= 1000 / (2 - H2(0.02)) = 538.03
        let bound = 1000.0 / (2.0 - h2_ln(0.02));
        assert_eq!(bound.ceil(), 539.0);
        assert_eq!(solve_epsilon(1000, 1000, &r, 1.15, HashFamily::Toeplitz).unwrap(), 539);
        // full-noise pool never balances before the key is gone
        let dead = ErrorRates::symmetric(0.0, 0.5).unwrap();
        assert_eq!(solve_epsilon(2000, 1000, &dead, 1.15, HashFamily::Toeplitz).unwrap(), 1000);
    }

    #[test]
    fn passive_length_examples() {
        let r = make_error_rates(0.015, 0.015, 0.05, 0.05).unwrap();
        assert_eq!(passive_final_key_length(1000, 1000, &r, 1.15), 0.0);
        assert_eq!(
            passive_final_key_length(1_000_000, 0, &r, 1.15),
            min_entropy_error_corrected(1_000_000, 0.05, 0.015, 1.15)
        );
        let v = passive_final_key_length(1_000_000, 334, &r, 1.15);
        let oracle = (1e6 - 334.0) * (1.0 - h2_ln(0.05) - 1.15 * h2_ln(0.015));
        assert!((v - oracle).abs() < 1e-6);
    }

    #[test]
    fn eq_four_and_five_agree_for_equal_rates() {
        for (m_x, m_z, n_s, e) in [(300, 200, 1000, 0.03), (0, 7, 0, 0.2), (12345, 54321, 99, 0.11)] {
            let a = min_entropy_mismatched_per_basis(m_x, m_z, e, e);
            let b = min_entropy_mismatched_aggregate(m_x + m_z + n_s, n_s, e);
            assert!((a - b).abs() <= 1e-9 * b.max(1.0));
        }
    }

    #[test]
    fn f1r_and_tssr_can_need_reassignment_at_half_sifting() {
        // With q = 1/2 the pool equals the sifted length, so a low-noise key
        // makes both 2 n_f and n_s - n_f exceed the pool for some rates.
        let clean = ErrorRates::symmetric(0.0, 0.0).unwrap();
        assert!(solve_epsilon(2000, 1000, &clean, 1.15, HashFamily::Tssr).unwrap() > 0);
        let noisy = ErrorRates::symmetric(0.08, 0.1).unwrap();
        assert!(solve_epsilon(2000, 1000, &noisy, 1.15, HashFamily::F1rF2r).unwrap() > 0);
    }

    #[test]
    fn noiseless_limit_rate_is_sifted_gain() {
        let p = ProtocolParams {
            dark_count_prob: 0.0,
            misalignment_error: 0.0,
            detector_efficiency: 1.0,
            channel_loss_db: 0.0,
            mean_pair_number: 1e-6,
            ..ProtocolParams::default()
        };
        let r = rate_point(&p).unwrap();
        assert!(r.e_qber < 1e-6);
        let theta = HoeffdingTwoSample.deviation(250_000, 250_000, 1e-7);
        let q = 0.5;
        let expect = q * r.q_gain * (1.0 - h2_ln(theta));
        let rel = (r.rate_per_pulse_bbm92 - expect).abs() / expect;
        assert!(rel < 1e-4, "{} vs {expect}", r.rate_per_pulse_bbm92);
        assert!(r.rate_per_pulse_bbm92 <= q * r.q_gain);
    }

    #[test]
    fn f3r_equals_bbm92_at_table2() {
        let p = ProtocolParams {
            hash_family: HashFamily::F3rF4r,
            ..ProtocolParams::default()
        };
        let r = rate_point(&p).unwrap();
        assert_eq!(r.epsilon, 0);
        assert!(r.n_f_bbm92 > 0);
        assert_eq!(r.n_f_passive, r.n_f_bbm92);
        assert_eq!(r.rate_per_pulse_passive, r.rate_per_pulse_bbm92);
    }

    /// Straight-line re-derivation of the passive pipeline from the gain and
    /// QBER, independent of the library's helpers.
    fn straight_line(q_gain: f64, e: f64, n_r: u64, f: f64, eps_ph: f64) -> (u64, u64, u64) {
        let n_s = n_r / 2;
        let half = (n_s / 2) as f64;
        let theta = ((2.0 * half) * (1.0 / eps_ph).ln() / (2.0 * half * half)).sqrt();
        let ep = (e + theta).min(0.5);
        let g = 1.0 - h2_ln(ep) - f * h2_ln(e);
        let bbm92 = (2.0 * (half * g).max(0.0)).floor() as u64;
        let mut eps = 0u64;
        loop {
            let kept = (n_s - eps) as f64;
            let supply = ((n_r - n_s + eps) as f64) * (1.0 - h2_ln(ep));
            if supply >= kept || eps == n_s {
                break;
            }
            eps += 1;
        }
        let _ = q_gain;
        (eps, ((n_s - eps) as f64 * g).max(0.0).floor() as u64, bbm92)
    }

    #[test]
    fn toeplitz_at_ten_db_matches_straight_line() {
        let p = ProtocolParams {
            hash_family: HashFamily::Toeplitz,
            channel_loss_db: 10.0,
            ..ProtocolParams::default()
        };
        let r = rate_point(&p).unwrap();
        let (eps, n_f, bbm92) = straight_line(r.q_gain, r.e_qber, p.block_size, 1.15, 1e-7);
        assert_eq!(r.epsilon, eps);
        assert!((r.n_f_passive as i64 - n_f as i64).abs() <= 1);
        assert!((r.n_f_bbm92 as i64 - bbm92 as i64).abs() <= 1);
        assert!(r.n_f_passive < r.n_f_bbm92);
        assert!(r.seed_supply >= r.seed_demand);
        assert_eq!(r.bound_strategy, "hoeffding-two-sample");
    }

    #[test]
    fn zero_gain_is_flagged() {
        let p = ProtocolParams {
            dark_count_prob: 0.0,
            detector_efficiency: 0.0,
            ..ProtocolParams::default()
        };
        let r = rate_point(&p).unwrap();
        assert!(r.zero_gain);
        assert_eq!(r.rate_per_pulse_passive, 0.0);
        assert_eq!(r.rate_per_pulse_bbm92, 0.0);
    }

    #[test]
    fn breakdown_json_has_every_field() {
        let r = rate_point(&ProtocolParams::default()).unwrap();
        let v = serde_json::to_value(&r).unwrap();
        for key in [
            "h_min_w", "h_min_kec", "epsilon", "seed_demand", "seed_supply", "n_f_passive",
            "n_f_bbm92", "rate_per_pulse_passive", "rate_per_pulse_bbm92",
        ] {
            assert!(v.get(key).is_some(), "{key}");
        }
        let back: RateBreakdown = serde_json::from_value(v).unwrap();
        assert_eq!(back, r);
    }

    /// Supply-side monotonicity holds for every family. Noise monotonicity
    /// depends on the family: demands that do not shrink with the key
    /// (Toeplitz, Trevisan, n_s - n_f) need more reassignment as noise grows,
    /// while demands proportional to n_f need less.
    #[test]
    fn epsilon_monotone_on_grid() {
        let eps_of = |n_r: u64, ep: f64, fam| {
            let r = make_error_rates(0.02, 0.02, ep, ep).unwrap();
            solve_epsilon(n_r, 10_000, &r, 1.15, fam).unwrap()
        };
        for fam in HashFamily::ALL {
            let eps_grid: Vec<f64> = (0..=25).map(|i| 0.02 * i as f64).collect();
            for n_r in [10_000, 12_000, 20_000, 40_000] {
                let col: Vec<u64> = eps_grid.iter().map(|&e| eps_of(n_r, e.min(0.5), fam)).collect();
                let grows = matches!(fam, HashFamily::Toeplitz | HashFamily::Trevisan | HashFamily::F1rF2r);
                if grows {
                    assert!(col.windows(2).all(|w| w[1] >= w[0]), "{fam} n_r={n_r} {col:?}");
                } else {
                    assert!(col.windows(2).all(|w| w[1] <= w[0]), "{fam} n_r={n_r} {col:?}");
                }
            }
            for &e in &eps_grid {
                let row: Vec<u64> = [10_000, 12_000, 20_000, 40_000]
                    .iter()
                    .map(|&n_r| eps_of(n_r, e.min(0.5), fam))
                    .collect();
                assert!(row.windows(2).all(|w| w[1] <= w[0]), "{fam} e={e} {row:?}");
            }
        }
    }

    proptest! {
        #[test]
        fn entropy_symmetric(x in 0.0f64..=1.0) {
            let a = binary_entropy(x).unwrap();
            let b = binary_entropy(1.0 - x).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }

        #[test]
        fn f3r_needs_no_reassignment_at_half_sifting(
            n_s in 1u64..2_000_000, e_b in 0.0f64..0.5, e_p in 0.0f64..0.5, f in 1.0f64..1.5
        ) {
            let n_r = 2 * n_s;
            let r = ErrorRates::symmetric(e_b, e_p).unwrap();
            prop_assert_eq!(solve_epsilon(n_r, n_s, &r, f, HashFamily::F3rF4r).unwrap(), 0);
        }

        #[test]
        fn trevisan_needs_no_reassignment_at_half_sifting(
            n_s in 50_000u64..2_000_000, e_b in 0.0f64..0.2, e_p in 0.0f64..0.2, f in 1.0f64..1.5
        ) {
            let n_r = 2 * n_s;
            let r = ErrorRates::symmetric(e_b, e_p).unwrap();
            let bbm92 = passive_final_key_length(n_s, 0, &r, f);
            prop_assume!(bbm92 >= 1.0);
            prop_assert_eq!(solve_epsilon(n_r, n_s, &r, f, HashFamily::Trevisan).unwrap(), 0);
        }

        #[test]
        fn balanced_budget_when_key_survives(
            n_s in 1u64..100_000, extra in 0u64..100_000, e in 0.0f64..0.2, fam in 0usize..6
        ) {
            let family = HashFamily::ALL[fam];
            let r = ErrorRates::symmetric(e, (e + 0.01).min(0.5)).unwrap();
            let eps = solve_epsilon(n_s + extra, n_s, &r, 1.15, family).unwrap();
            prop_assert!(eps <= n_s);
            if passive_final_key_length(n_s, eps, &r, 1.15) > 0.0 {
                prop_assert!(seed_budget(n_s + extra, n_s, eps, &r, 1.15, family).balanced());
            }
        }
    }
}
