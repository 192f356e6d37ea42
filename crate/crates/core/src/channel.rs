//! Entangled-pair source, symmetric lossy arms and threshold detectors.
//!
//! Pair-number statistics follow the two-mode down-conversion law
//! `P(n) = (n+1) λ^n / (1+λ)^(n+2)` with `λ = μ/2`. Each party selects a
//! basis uniformly (a 50/50 beam splitter) and owns one detector pair per
//! basis. Only single-pair windows in which both photons are detected and
//! no background click occurs carry correlated outcomes (flipped with the
//! misalignment probability); every other coincidence is uniformly random.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_prob, domain, Result};
use crate::params::ProtocolParams;
use crate::types::Basis;

/// Error probability of a coincidence caused by background or multi-pair events.
pub const E0: f64 = 0.5;

/// Series truncation: the neglected pair-number tail stays below this mass.
pub const TAIL_MASS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelDerived {
    eta_a: f64,
    eta_b: f64,
    y0: f64,
    lambda: f64,
}

impl ChannelDerived {
    pub fn new(eta_a: f64, eta_b: f64, y0: f64, lambda: f64) -> Result<Self> {
        check_prob("eta_a", eta_a)?;
        check_prob("eta_b", eta_b)?;
        check_prob("y0", y0)?;
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(domain(format!("lambda = {lambda} must be positive")));
        }
        Ok(Self {
            eta_a,
            eta_b,
            y0,
            lambda,
        })
    }

    pub fn eta_a(&self) -> f64 {
        self.eta_a
    }
    pub fn eta_b(&self) -> f64 {
        self.eta_b
    }
    pub fn y0(&self) -> f64 {
        self.y0
    }
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    fn eta(&self, side: Side) -> f64 {
        match side {
            Side::Alice => self.eta_a,
            Side::Bob => self.eta_b,
        }
    }
}

/// Splits the total loss equally between the two arms (source in between).
pub fn derive_channel(params: &ProtocolParams) -> Result<ChannelDerived> {
    params.validate()?;
    let t = 10f64.powf(-(params.channel_loss_db / 2.0) / 10.0);
    let eta = t * params.detector_efficiency;
    ChannelDerived::new(eta, eta, params.dark_count_prob, params.mean_pair_number / 2.0)
}

#[inline]
fn ratio(lambda: f64) -> f64 {
    lambda / (1.0 + lambda)
}

pub fn pair_number_pmf(lambda: f64, n: u32) -> f64 {
    let p = ratio(lambda);
    (n as f64 + 1.0) * p.powi(n as i32) * (1.0 - p) * (1.0 - p)
}

/// `P(N > n)` in closed form.
pub fn pair_number_tail(lambda: f64, n: u32) -> f64 {
    let p = ratio(lambda);
    let k = n as f64 + 1.0;
    p.powi(n as i32 + 1) * (1.0 + k * (1.0 - p))
}

/// Smallest `N_max` with `P(N > N_max) < TAIL_MASS`.
pub fn truncation_point(lambda: f64) -> u32 {
    let mut n = 0;
    while pair_number_tail(lambda, n) >= TAIL_MASS {
        n += 1;
    }
    n
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainQber {
    /// Probability per window that both parties register a click.
    pub q_gain: f64,
    /// Error probability given a matched-basis coincidence.
    pub e_qber: f64,
}

impl GainQber {
    fn from_products(q: f64, eq: f64) -> Self {
        if q <= 0.0 {
            return Self {
                q_gain: 0.0,
                e_qber: E0,
            };
        }
        Self {
            q_gain: q.min(1.0),
            e_qber: (eq / q).clamp(0.0, 0.5),
        }
    }
}

fn check_misalignment(e_d: f64) -> Result<()> {
    check_prob("misalignment_error", e_d)
}

/// Gain and QBER by explicit summation over the pair number. This is the
/// reference definition; [`coincidence_gain_qber_closed_form`] must agree.
pub fn coincidence_gain_qber(ch: &ChannelDerived, e_d: f64) -> Result<GainQber> {
    check_misalignment(e_d)?;
    let n_max = truncation_point(ch.lambda);
    let (a, b) = (1.0 - ch.eta_a, 1.0 - ch.eta_b);
    let keep = 1.0 - ch.y0;
    let p = ratio(ch.lambda);

    let mut pn = (1.0 - p) * (1.0 - p);
    let (mut a_n, mut b_n) = (1.0, 1.0);
    let (mut q, mut eq) = (0.0, 0.0);
    for n in 0..=n_max {
        let da = 1.0 - keep * a_n;
        let db = 1.0 - keep * b_n;
        q += pn * da * db;
        eq += pn * (E0 * da * db - (E0 - e_d) * correlated_weight(ch, n));
        pn *= p * (n as f64 + 2.0) / (n as f64 + 1.0);
        a_n *= a;
        b_n *= b;
    }
    Ok(GainQber::from_products(q, eq))
}

/// Probability that an `n`-pair window yields a misalignment-correlated
/// coincidence. Only the single-pair term contributes.
fn correlated_weight(ch: &ChannelDerived, n: u32) -> f64 {
    if n == 1 {
        (1.0 - ch.y0).powi(2) * ch.eta_a * ch.eta_b
    } else {
        0.0
    }
}

/// Closed form via the generating function `Σ P(n) x^n = 1/(1 + λ - λx)^2`.
pub fn coincidence_gain_qber_closed_form(ch: &ChannelDerived, e_d: f64) -> Result<GainQber> {
    check_misalignment(e_d)?;
    let l = ch.lambda;
    let gen = |x: f64| 1.0 / (1.0 + l - l * x).powi(2);
    let (a, b) = (1.0 - ch.eta_a, 1.0 - ch.eta_b);
    let keep = 1.0 - ch.y0;
    let q = 1.0 - keep * gen(a) - keep * gen(b) + keep * keep * gen(a * b);
    let p1 = 2.0 * l / (1.0 + l).powi(3);
    let eq = E0 * q - (E0 - e_d) * p1 * correlated_weight(ch, 1);
    Ok(GainQber::from_products(q, eq))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    Alice,
    Bob,
}

/// Detector-pair status of one party in one window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Click {
    None,
    /// Exactly one detector fired; the payload is the bit it encodes.
    Single(bool),
    /// Both detectors of the selected basis fired.
    Double,
}

impl Click {
    pub fn clicked(self) -> bool {
        !matches!(self, Click::None)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PartyOutcome {
    pub basis: Basis,
    pub click: Click,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowOutcome {
    pub pairs: u32,
    pub alice: PartyOutcome,
    pub bob: PartyOutcome,
}

impl WindowOutcome {
    pub fn coincidence(&self) -> bool {
        self.alice.click.clicked() && self.bob.click.clicked()
    }

    pub fn bases_match(&self) -> bool {
        self.alice.basis == self.bob.basis
    }
}

fn sample_pairs<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> u32 {
    let p = ratio(lambda);
    let u: f64 = rng.gen();
    let mut pn = (1.0 - p) * (1.0 - p);
    let mut cdf = pn;
    let mut n = 0u32;
    while u >= cdf && pn > 0.0 {
        pn *= p * (n as f64 + 2.0) / (n as f64 + 1.0);
        cdf += pn;
        n += 1;
    }
    n
}

fn sample_basis<R: Rng + ?Sized>(rng: &mut R) -> Basis {
    if rng.gen::<bool>() {
        Basis::X
    } else {
        Basis::Z
    }
}

fn detected<R: Rng + ?Sized>(n: u32, eta: f64, rng: &mut R) -> u32 {
    (0..n).filter(|_| rng.gen_bool(eta)).count() as u32
}

/// Each uncorrelated click source fires one of the two detectors at random.
fn random_click<R: Rng + ?Sized>(sources: u32, rng: &mut R) -> Click {
    let (mut zero, mut one) = (false, false);
    for _ in 0..sources {
        if rng.gen::<bool>() {
            one = true;
        } else {
            zero = true;
        }
    }
    match (zero, one) {
        (false, false) => Click::None,
        (true, false) => Click::Single(false),
        (false, true) => Click::Single(true),
        (true, true) => Click::Double,
    }
}

/// Samples one coincidence window. `rng` is a simulation instrument that
/// stands in for quantum measurement outcomes.
pub fn sample_window<R: Rng + ?Sized>(ch: &ChannelDerived, e_d: f64, rng: &mut R) -> WindowOutcome {
    let pairs = sample_pairs(ch.lambda, rng);
    let alice_basis = sample_basis(rng);
    let bob_basis = sample_basis(rng);
    let alice_dark = rng.gen_bool(ch.y0);
    let bob_dark = rng.gen_bool(ch.y0);
    let alice_det = detected(pairs, ch.eta(Side::Alice), rng);
    let bob_det = detected(pairs, ch.eta(Side::Bob), rng);

    let (alice_click, bob_click) =
        if pairs == 1 && alice_det == 1 && bob_det == 1 && !alice_dark && !bob_dark {
            let a: bool = rng.gen();
            let b = if alice_basis == bob_basis {
                a ^ rng.gen_bool(e_d)
            } else {
                rng.gen()
            };
            (Click::Single(a), Click::Single(b))
        } else {
            (
                random_click(alice_det + alice_dark as u32, rng),
                random_click(bob_det + bob_dark as u32, rng),
            )
        };

    WindowOutcome {
        pairs,
        alice: PartyOutcome {
            basis: alice_basis,
            click: alice_click,
        },
        bob: PartyOutcome {
            basis: bob_basis,
            click: bob_click,
        },
    }
}

/// Window-level counts used to compare the sampler against the analytic model.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservableCounts {
    pub windows: u64,
    pub coincidences: u64,
    pub matched: u64,
    /// Errors among matched coincidences, with double clicks resolved to a
    /// uniformly random bit.
    pub matched_errors: u64,
    pub double_clicks: u64,
    /// Single-click mismatched coincidences, and those with Alice in X.
    pub mismatched: u64,
    pub mismatched_alice_x: u64,
}

impl ObservableCounts {
    pub fn gain(&self) -> f64 {
        self.coincidences as f64 / self.windows.max(1) as f64
    }

    pub fn qber(&self) -> f64 {
        self.matched_errors as f64 / self.matched.max(1) as f64
    }

    pub fn match_fraction(&self) -> f64 {
        self.matched as f64 / self.coincidences.max(1) as f64
    }

    pub fn alice_x_fraction(&self) -> f64 {
        self.mismatched_alice_x as f64 / self.mismatched.max(1) as f64
    }
}

pub fn tally_observables<R: Rng + ?Sized>(
    ch: &ChannelDerived,
    e_d: f64,
    windows: u64,
    rng: &mut R,
) -> ObservableCounts {
    let mut c = ObservableCounts {
        windows,
        ..Default::default()
    };
    for _ in 0..windows {
        let w = sample_window(ch, e_d, rng);
        if !w.coincidence() {
            continue;
        }
        c.coincidences += 1;
        let double = w.alice.click == Click::Double || w.bob.click == Click::Double;
        if double {
            c.double_clicks += 1;
        }
        if w.bases_match() {
            c.matched += 1;
            let mut resolve = |click: Click| match click {
                Click::Single(b) => b,
                _ => rng.gen(),
            };
            let (a, b) = (resolve(w.alice.click), resolve(w.bob.click));
            c.matched_errors += (a != b) as u64;
        } else if !double {
            c.mismatched += 1;
            c.mismatched_alice_x += (w.alice.basis == Basis::X) as u64;
        }
    }
    c
}
