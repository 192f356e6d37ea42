//! Mean-pair-number optimization and loss sweeps.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::params::ProtocolParams;
use crate::rate::{rate_point, RateBreakdown};

pub const DEFAULT_MU_RANGE: (f64, f64) = (1e-4, 1.0);
pub const GRID_POINTS: usize = 64;
/// Relative width (in mu) at which golden-section refinement stops.
pub const REL_TOL: f64 = 1e-4;

const INV_PHI: f64 = 0.618_033_988_749_894_9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MuOptimum {
    pub mu_opt: f64,
    pub rate_opt: f64,
    /// No grid point produced a positive passive rate.
    pub no_key: bool,
}

/// `n` log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| {
            if i == 0 {
                lo
            } else if i == n - 1 {
                hi
            } else {
                (a + (b - a) * i as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}

fn passive_rate(params: &ProtocolParams, mu: f64) -> Result<f64> {
    Ok(rate_point(&params.with_mu(mu))?.rate_per_pulse_passive)
}

/// Maximizes the passive rate per pulse over `mu_range`: a 64-point log grid
/// locates the basin, then golden-section search (in log mu) refines between
/// the neighbours of the best grid point. Ties go to the smaller mu.
pub fn optimize_mu(params: &ProtocolParams, mu_range: (f64, f64)) -> Result<MuOptimum> {
    let (lo, hi) = mu_range;
    if !(lo > 0.0 && lo <= hi && hi <= 2.0) {
        return Err(domain(format!("mu range [{lo}, {hi}] is not a non-empty subset of (0, 2]")));
    }
    params.validate()?;
    if lo == hi {
        let rate = passive_rate(params, lo)?;
        return Ok(MuOptimum {
            mu_opt: lo,
            rate_opt: rate,
            no_key: rate <= 0.0,
        });
    }

    let grid = log_grid(lo, hi, GRID_POINTS);
    let rates = grid
        .iter()
        .map(|&mu| passive_rate(params, mu))
        .collect::<Result<Vec<f64>>>()?;
    let mut best = 0;
    for (i, &r) in rates.iter().enumerate() {
        if r > rates[best] {
            best = i;
        }
    }
    if rates[best] <= 0.0 {
        return Ok(MuOptimum {
            mu_opt: hi,
            rate_opt: 0.0,
            no_key: true,
        });
    }

    let a = grid[best.saturating_sub(1)].ln();
    let b = grid[(best + 1).min(grid.len() - 1)].ln();
    let (mu_gs, rate_gs) = golden_section_max(|x| passive_rate(params, x.exp()), a, b, REL_TOL)?;
    let mu_gs = mu_gs.exp();

    let (grid_mu, grid_rate) = (grid[best], rates[best]);
    let pick_golden = rate_gs > grid_rate || (rate_gs == grid_rate && mu_gs < grid_mu);
    let (mu_opt, rate_opt) = if pick_golden {
        (mu_gs, rate_gs)
    } else {
        (grid_mu, grid_rate)
    };
    Ok(MuOptimum {
        mu_opt,
        rate_opt,
        no_key: false,
    })
}

/// Golden-section maximization of `f` on `[a, b]` until `b - a <= tol`.
/// Returns the best evaluated point; ties go to the smaller abscissa.
pub fn golden_section_max(
    mut f: impl FnMut(f64) -> Result<f64>,
    mut a: f64,
    mut b: f64,
    tol: f64,
) -> Result<(f64, f64)> {
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    let mut best = if f2 > f1 { (x2, f2) } else { (x1, f1) };

    while b - a > tol {
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1)?;
            if f1 > best.1 || (f1 == best.1 && x1 < best.0) {
                best = (x1, f1);
            }
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2)?;
            if f2 > best.1 || (f2 == best.1 && x2 < best.0) {
                best = (x2, f2);
            }
        }
    }
    Ok(best)
}

/// One row of a loss sweep: the analytic breakdown at the optimal mu.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub loss_db: f64,
    pub mu_opt: f64,
    pub no_key: bool,
    pub breakdown: RateBreakdown,
}

pub fn sweep_point(params: &ProtocolParams, loss_db: f64, mu_range: (f64, f64)) -> Result<SweepPoint> {
    let at_loss = params.with_loss(loss_db);
    let opt = optimize_mu(&at_loss, mu_range)?;
    let breakdown = rate_point(&at_loss.with_mu(opt.mu_opt))?;
    Ok(SweepPoint {
        loss_db,
        mu_opt: opt.mu_opt,
        no_key: opt.no_key,
        breakdown,
    })
}

/// Optimizes mu independently at every loss point. Points are evaluated in
/// parallel; the output follows the input order.
pub fn sweep_loss(params: &ProtocolParams, loss_points: &[f64]) -> Result<Vec<SweepPoint>> {
    sweep_loss_in(params, loss_points, DEFAULT_MU_RANGE)
}

pub fn sweep_loss_in(params: &ProtocolParams, loss_points: &[f64], mu_range: (f64, f64)) -> Result<Vec<SweepPoint>> {
    params.validate()?;
    if let Some(bad) = loss_points.iter().find(|l| !(**l >= 0.0) || !l.is_finite()) {
        return Err(domain(format!("loss {bad} dB is not a finite non-negative value")));
    }
    if loss_points.windows(2).any(|w| w[1] <= w[0]) {
        return Err(domain("loss points must be strictly increasing"));
    }
    loss_points
        .par_iter()
        .map(|&l| sweep_point(params, l, mu_range))
        .collect()
}
