//! Closed-form functions of the minimal market model.
//!
//! The discounted numeraire portfolio `nbar` follows
//! `d nbar = alpha_t dt + sqrt(alpha_t nbar) dW` with `alpha_t = alpha0 exp(eta t)`,
//! which makes it a time-changed squared Bessel process of dimension four with
//! time change `rho_t = alpha0 / (4 eta) (exp(eta t) - 1)`.
//!
//! Every function takes the current discounted index value explicitly, so the
//! same code serves pricing, hedging and simulation.

use std::cmp::Ordering;
use std::fmt;

use crate::error::{Error, Result};
use crate::pricing::PriceTriple;

/// Model triple `(alpha0, eta, n0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MmmParams {
    alpha0: f64,
    eta: f64,
    n0: f64,
}

impl MmmParams {
    pub fn new(alpha0: f64, eta: f64, n0: f64) -> Result<Self> {
        positive("alpha0", alpha0)?;
        positive("eta", eta)?;
        positive("n0", n0)?;
        Ok(Self { alpha0, eta, n0 })
    }

    /// Initial scaling parameter `alpha0`.
    pub fn alpha0(&self) -> f64 {
        self.alpha0
    }

    /// Net growth rate per year.
    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// Initial discounted numeraire portfolio value.
    pub fn n0(&self) -> f64 {
        self.n0
    }

    pub fn with_n0(&self, n0: f64) -> Result<Self> {
        Self::new(self.alpha0, self.eta, n0)
    }
}

impl fmt::Display for MmmParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "alpha0={} eta={} n0={}", self.alpha0, self.eta, self.n0)
    }
}

fn positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            reason: "must be finite and positive",
        })
    }
}

/// Time in years since the reference epoch of a series.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct YearTime(f64);

impl YearTime {
    pub const ZERO: YearTime = YearTime(0.0);

    pub fn new(t: f64) -> Result<Self> {
        if t.is_finite() && t >= 0.0 {
            Ok(Self(t))
        } else {
            Err(Error::InvalidParameter {
                name: "t",
                value: t,
                reason: "time must be finite and non-negative",
            })
        }
    }

    pub fn years(self) -> f64 {
        self.0
    }

    pub fn total_cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl fmt::Display for YearTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// `alpha_t = alpha0 exp(eta t)`.
pub fn alpha(params: &MmmParams, t: YearTime) -> f64 {
    params.alpha0 * (params.eta * t.0).exp()
}

/// Time change `rho_t`; equals the quadratic variation of `sqrt(nbar)` up to `t`.
pub fn rho(params: &MmmParams, t: YearTime) -> f64 {
    params.alpha0 / (4.0 * params.eta) * (params.eta * t.0).exp_m1()
}

/// `rho_T - rho_t`, evaluated without cancellation for short horizons.
pub fn rho_increment(params: &MmmParams, t: YearTime, maturity: YearTime) -> f64 {
    let span = maturity.0 - t.0;
    params.alpha0 / (4.0 * params.eta) * (params.eta * t.0).exp() * (params.eta * span).exp_m1()
}

fn check_order(t: YearTime, maturity: YearTime) -> Result<()> {
    if t.0 > maturity.0 {
        Err(Error::TimeAfterMaturity {
            t: t.0,
            maturity: maturity.0,
        })
    } else {
        Ok(())
    }
}

fn check_strict_order(t: YearTime, maturity: YearTime) -> Result<()> {
    if t.0 >= maturity.0 {
        Err(Error::AtOrAfterMaturity {
            t: t.0,
            maturity: maturity.0,
        })
    } else {
        Ok(())
    }
}

/// The exponent `u = nbar_t / (2 (rho_T - rho_t))`; infinite at maturity.
pub(crate) fn bond_exponent(params: &MmmParams, nbar_t: f64, t: YearTime, maturity: YearTime) -> f64 {
    let spread = 2.0 * rho_increment(params, t, maturity);
    if spread > 0.0 {
        nbar_t / spread
    } else {
        f64::INFINITY
    }
}

/// `exp(-u)`: the gap `1 - Vbar` between the discounted risk-neutral and
/// minimal bond prices. Zero at maturity. Caller guarantees `t <= T`.
pub(crate) fn bond_gap(params: &MmmParams, nbar_t: f64, t: YearTime, maturity: YearTime) -> f64 {
    (-bond_exponent(params, nbar_t, t, maturity)).exp()
}

/// Minimal bond price, hedge ratio and NP fraction at `t <= T`, with the
/// maturity conventions `delta = pi = 0` at `t = T`.
pub(crate) fn bond_state(params: &MmmParams, nbar_t: f64, t: YearTime, maturity: YearTime) -> (f64, f64, f64) {
    let spread = 2.0 * rho_increment(params, t, maturity);
    if spread <= 0.0 {
        return (1.0, 0.0, 0.0);
    }
    let u = nbar_t / spread;
    let vbar = -(-u).exp_m1();
    let delta = (-u).exp() / spread;
    let pi = fraction_from_exponent(u);
    (vbar, delta, pi)
}

fn fraction_from_exponent(u: f64) -> f64 {
    if u == 0.0 {
        1.0
    } else if u.is_infinite() {
        0.0
    } else {
        u / u.exp_m1()
    }
}

/// Discounted minimal price of a bond paying one savings-account unit at `T`:
/// `1 - exp(-nbar_t / (2 (rho_T - rho_t)))`, equal to 1 at `t = T`.
pub fn discounted_minimal_zcb(params: &MmmParams, nbar_t: f64, t: YearTime, maturity: YearTime) -> Result<f64> {
    positive("nbar_t", nbar_t)?;
    check_order(t, maturity)?;
    Ok(-(-bond_exponent(params, nbar_t, t, maturity)).exp_m1())
}

/// Minimal, risk-neutral and loading prices of the savings-account bond in
/// currency units.
pub fn zcb_price_triple(
    params: &MmmParams,
    nbar_t: f64,
    savings_t: f64,
    t: YearTime,
    maturity: YearTime,
    loading: f64,
) -> Result<PriceTriple> {
    positive("savings_t", savings_t)?;
    let vbar = discounted_minimal_zcb(params, nbar_t, t, maturity)?;
    PriceTriple::from_minimal_and_risk_neutral(savings_t * vbar, savings_t, loading)
}

/// Ratio of the formally obtained risk-neutral price to the minimal price,
/// the same for every claim whose discounted payoff is independent of the
/// benchmarked savings account.
pub fn price_ratio(params: &MmmParams, nbar_t: f64, t: YearTime, maturity: YearTime) -> Result<f64> {
    check_strict_order(t, maturity)?;
    Ok(1.0 / discounted_minimal_zcb(params, nbar_t, t, maturity)?)
}

/// Units of discounted NP held by the replicating portfolio of the minimal
/// bond: `d Vbar / d nbar`. Zero at maturity.
pub fn hedge_ratio(params: &MmmParams, nbar_t: f64, t: YearTime, maturity: YearTime) -> Result<f64> {
    positive("nbar_t", nbar_t)?;
    check_order(t, maturity)?;
    Ok(bond_state(params, nbar_t, t, maturity).1)
}

/// Fraction of the minimal bond's hedge portfolio held in the NP,
/// `u / (exp(u) - 1)`.
pub fn hedge_fraction(params: &MmmParams, nbar_t: f64, t: YearTime, maturity: YearTime) -> Result<f64> {
    positive("nbar_t", nbar_t)?;
    check_strict_order(t, maturity)?;
    Ok(fraction_from_exponent(bond_exponent(params, nbar_t, t, maturity)))
}
