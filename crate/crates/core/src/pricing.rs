//! Minimal, risk-neutral and loading prices of savings-account bonds and
//! stylized CAT bonds, loading-degree extraction, and benchmarking.

use std::io::Write;

use crate::error::{Error, Result};
use crate::model::{bond_gap, discounted_minimal_zcb, MmmParams, YearTime};
use crate::simulation::{claim_probability, CatastropheModel};

/// `(minimal, risk-neutral, loading)` prices and the loading degree tying them
/// together via `loading = L * risk_neutral + (1 - L) * minimal`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriceTriple {
    pub minimal: f64,
    pub risk_neutral: f64,
    pub loading: f64,
    pub loading_degree: f64,
}

impl PriceTriple {
    pub fn from_minimal_and_risk_neutral(minimal: f64, risk_neutral: f64, loading_degree: f64) -> Result<Self> {
        check_loading(loading_degree)?;
        Ok(Self {
            minimal,
            risk_neutral,
            loading: loading_price(minimal, risk_neutral, loading_degree),
            loading_degree,
        })
    }

    /// The risk-neutral to minimal price ratio.
    pub fn ratio(&self) -> f64 {
        self.risk_neutral / self.minimal
    }
}

fn check_loading(loading_degree: f64) -> Result<()> {
    if loading_degree >= 0.0 && loading_degree.is_finite() {
        Ok(())
    } else {
        Err(Error::NegativeLoading(loading_degree))
    }
}

/// `L * risk_neutral + (1 - L) * minimal`, evaluated as
/// `minimal + L * (risk_neutral - minimal)` so that rounding never takes it
/// below the minimal price; for `L <= 1` it is also capped at `risk_neutral`.
pub fn loading_price(minimal: f64, risk_neutral: f64, loading_degree: f64) -> f64 {
    let b = minimal + loading_degree * (risk_neutral - minimal);
    if loading_degree <= 1.0 {
        b.min(risk_neutral)
    } else {
        b
    }
}

/// Which catastrophe outcome pays.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PayoffConvention {
    /// Pays one savings-account unit at `T` if the catastrophe occurred by `T`.
    #[default]
    Occurrence,
    /// Pays if no catastrophe occurred by `T`.
    PrincipalProtected,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClaimKind {
    ZeroCoupon,
    CatBond {
        model: CatastropheModel,
        convention: PayoffConvention,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClaimSpec {
    pub kind: ClaimKind,
    maturity: YearTime,
}

impl ClaimSpec {
    pub fn new(kind: ClaimKind, maturity: YearTime) -> Result<Self> {
        if !(maturity.years() > 0.0) {
            return Err(Error::InvalidParameter {
                name: "maturity",
                value: maturity.years(),
                reason: "must be positive",
            });
        }
        Ok(Self { kind, maturity })
    }

    pub fn zero_coupon(maturity: YearTime) -> Result<Self> {
        Self::new(ClaimKind::ZeroCoupon, maturity)
    }

    pub fn cat_bond(model: CatastropheModel, convention: PayoffConvention, maturity: YearTime) -> Result<Self> {
        Self::new(ClaimKind::CatBond { model, convention }, maturity)
    }

    pub fn maturity(&self) -> YearTime {
        self.maturity
    }

    /// Conditional probability weight of the discounted payoff at `t`.
    pub fn payoff_weight(&self, t: YearTime, catastrophe: CatastropheStatus) -> f64 {
        match self.kind {
            ClaimKind::ZeroCoupon => 1.0,
            ClaimKind::CatBond { model, convention } => {
                let h = claim_probability(&model, t, self.maturity, catastrophe.time());
                match convention {
                    PayoffConvention::Occurrence => h,
                    PayoffConvention::PrincipalProtected => 1.0 - h,
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum CatastropheStatus {
    #[default]
    NotYet,
    OccurredAt(f64),
}

impl CatastropheStatus {
    /// Catastrophe time, `+inf` when it has not occurred.
    pub fn time(&self) -> f64 {
        match *self {
            Self::NotYet => f64::INFINITY,
            Self::OccurredAt(xi) => xi,
        }
    }
}

/// Everything the closed forms need at a valuation time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketState {
    pub t: YearTime,
    pub nbar: f64,
    pub savings: f64,
    pub catastrophe: CatastropheStatus,
}

impl MarketState {
    pub fn new(t: YearTime, nbar: f64, savings: f64, catastrophe: CatastropheStatus) -> Result<Self> {
        for (name, v) in [("nbar", nbar), ("savings", savings)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter {
                    name,
                    value: v,
                    reason: "must be finite and positive",
                });
            }
        }
        Ok(Self {
            t,
            nbar,
            savings,
            catastrophe,
        })
    }
}

/// Price triple of `claim` at `state` for loading degree `loading_degree`.
pub fn price(params: &MmmParams, state: &MarketState, claim: &ClaimSpec, loading_degree: f64) -> Result<PriceTriple> {
    check_loading(loading_degree)?;
    let t = state.t;
    let maturity = claim.maturity;
    if t > maturity {
        return Err(Error::TimeAfterMaturity {
            t: t.years(),
            maturity: maturity.years(),
        });
    }
    let vbar = discounted_minimal_zcb(params, state.nbar, t, maturity)?;
    let weight = claim.payoff_weight(t, state.catastrophe);
    let risk_neutral = weight * state.savings;
    PriceTriple::from_minimal_and_risk_neutral(risk_neutral * vbar, risk_neutral, loading_degree)
}

/// Loading price written directly as
/// `weight * S * (1 - (1 - L) exp(-nbar / (2 (rho_T - rho_t))))`, an
/// independent route to the value produced by [`price`].
pub fn loading_price_direct(
    params: &MmmParams,
    state: &MarketState,
    claim: &ClaimSpec,
    loading_degree: f64,
) -> Result<f64> {
    check_loading(loading_degree)?;
    if state.t > claim.maturity {
        return Err(Error::TimeAfterMaturity {
            t: state.t.years(),
            maturity: claim.maturity.years(),
        });
    }
    let gap = bond_gap(params, state.nbar, state.t, claim.maturity);
    let weight = claim.payoff_weight(state.t, state.catastrophe);
    Ok(weight * state.savings * (1.0 - (1.0 - loading_degree) * gap))
}

/// Loading degree implied by an observed price: `(B - V) / (R - V)`, or 1 when
/// the minimal and risk-neutral prices coincide.
pub fn extract_loading(observed: f64, minimal: f64, risk_neutral: f64) -> Result<f64> {
    if minimal > risk_neutral {
        return Err(Error::MinimalAboveRiskNeutral { minimal, risk_neutral });
    }
    if observed < minimal {
        return Err(Error::BelowMinimalPrice { observed, minimal });
    }
    if risk_neutral == minimal {
        return Ok(1.0);
    }
    Ok((observed - minimal) / (risk_neutral - minimal))
}

/// Price expressed in units of the NP.
pub fn benchmark(price: f64, np_value: f64) -> f64 {
    price / np_value
}

pub fn unbenchmark(benchmarked: f64, np_value: f64) -> f64 {
    benchmarked * np_value
}

/// One `t,V,R,B,L` quote row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quote {
    pub t: YearTime,
    pub triple: PriceTriple,
}

pub fn write_quotes_csv(quotes: &[Quote], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "V", "R", "B", "L"])?;
    for q in quotes {
        w.write_record([
            q.t.to_string(),
            q.triple.minimal.to_string(),
            q.triple.risk_neutral.to_string(),
            q.triple.loading.to_string(),
            q.triple.loading_degree.to_string(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::price_ratio;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn fitted() -> MmmParams {
        MmmParams::new(0.18, 0.052, 10.0).unwrap()
    }

    fn yt(t: f64) -> YearTime {
        YearTime::new(t).unwrap()
    }

    fn start() -> MarketState {
        MarketState::new(YearTime::ZERO, 10.0, 1.0, CatastropheStatus::NotYet).unwrap()
    }

    fn cat(lambda: f64, maturity: f64) -> ClaimSpec {
        ClaimSpec::cat_bond(
            CatastropheModel::new(lambda).unwrap(),
            PayoffConvention::Occurrence,
            yt(maturity),
        )
        .unwrap()
    }

    #[test]
    fn cat_bond_long_maturity() {
        let tr = price(&fitted(), &start(), &cat(0.05, 89.0), 0.0).unwrap();
        // mpmath reference values
        assert_relative_eq!(tr.risk_neutral, 0.988_321_433_029_604_6, max_relative = 1e-14);
        assert_relative_eq!(tr.minimal, 0.054_787_905_152_496_17, max_relative = 1e-12);
        assert_eq!(tr.loading, tr.minimal);
    }

    #[test]
    fn cat_bond_ten_years() {
        let tr = price(&fitted(), &start(), &cat(0.05, 10.0), 0.3).unwrap();
        assert_relative_eq!(tr.risk_neutral, 0.393_469_340_287_366_6, max_relative = 1e-14);
        assert_relative_eq!(tr.minimal, 0.393_386_964_878_519_9, max_relative = 1e-12);
        assert_relative_eq!(tr.loading, 0.393_411_677_501_173_9, max_relative = 1e-12);
    }

    #[test]
    fn occurred_catastrophe_gives_bond_triple() {
        let state = MarketState::new(yt(5.0), 12.0, 1.3, CatastropheStatus::OccurredAt(4.0)).unwrap();
        let zcb = ClaimSpec::zero_coupon(yt(30.0)).unwrap();
        let a = price(&fitted(), &state, &cat(0.05, 30.0), 0.3).unwrap();
        let b = price(&fitted(), &state, &zcb, 0.3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn conventions_sum_to_bond() {
        let model = CatastropheModel::new(0.07).unwrap();
        let occ = ClaimSpec::cat_bond(model, PayoffConvention::Occurrence, yt(20.0)).unwrap();
        let pp = ClaimSpec::cat_bond(model, PayoffConvention::PrincipalProtected, yt(20.0)).unwrap();
        let zcb = ClaimSpec::zero_coupon(yt(20.0)).unwrap();
        let a = price(&fitted(), &start(), &occ, 0.4).unwrap();
        let b = price(&fitted(), &start(), &pp, 0.4).unwrap();
        let z = price(&fitted(), &start(), &zcb, 0.4).unwrap();
        assert_relative_eq!(a.minimal + b.minimal, z.minimal, max_relative = 1e-14);
        assert_relative_eq!(a.loading + b.loading, z.loading, max_relative = 1e-14);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(
            price(&fitted(), &start(), &cat(0.05, 10.0), -0.01),
            Err(Error::NegativeLoading(_))
        ));
        let late = MarketState::new(yt(11.0), 10.0, 1.0, CatastropheStatus::NotYet).unwrap();
        assert!(matches!(
            price(&fitted(), &late, &cat(0.05, 10.0), 0.1),
            Err(Error::TimeAfterMaturity { .. })
        ));
        assert!(ClaimSpec::zero_coupon(YearTime::ZERO).is_err());
        assert!(MarketState::new(YearTime::ZERO, 0.0, 1.0, CatastropheStatus::NotYet).is_err());
        // loading above one is allowed
        assert!(price(&fitted(), &start(), &cat(0.05, 10.0), 1.5).is_ok());
    }

    #[test]
    fn extract_loading_cases() {
        assert_eq!(extract_loading(0.4, 0.4, 1.0).unwrap(), 0.0);
        assert_eq!(extract_loading(1.0, 0.4, 1.0).unwrap(), 1.0);
        assert_eq!(extract_loading(0.7, 0.7, 0.7).unwrap(), 1.0);
        assert!(matches!(
            extract_loading(0.3, 0.4, 1.0),
            Err(Error::BelowMinimalPrice { .. })
        ));
        assert!(extract_loading(0.5, 0.6, 0.5).is_err());
    }

    #[test]
    fn benchmark_round_trip() {
        assert_eq!(benchmark(0.0, 3.0), 0.0);
        assert_eq!(benchmark(5.0, 1.0 * 10.0), 0.5);
        let x = 0.123_456_789;
        assert!((unbenchmark(benchmark(x, 17.3), 17.3) - x).abs() <= 1e-15);
    }

    #[test]
    fn quotes_csv() {
        let tr = price(&fitted(), &start(), &cat(0.05, 10.0), 0.3).unwrap();
        let mut buf = Vec::new();
        write_quotes_csv(
            &[Quote {
                t: YearTime::ZERO,
                triple: tr,
            }],
            &mut buf,
        )
        .unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,V,R,B,L\n0,"));
        assert!(text.trim_end().ends_with(",0.3"));
    }

    proptest! {
        #[test]
        fn triple_invariants(
            a in 0.02f64..0.6, e in 0.005f64..0.15, nbar in 0.5f64..300.0, s in 0.2f64..5.0,
            t in 0.0f64..40.0, span in 0.1f64..80.0, lambda in 0.0f64..0.5, l in 0.0f64..=1.0,
            occurred in proptest::bool::ANY,
        ) {
            let p = MmmParams::new(a, e, 10.0).unwrap();
            let status = if occurred { CatastropheStatus::OccurredAt(t * 0.5) } else { CatastropheStatus::NotYet };
            let state = MarketState::new(yt(t), nbar, s, status).unwrap();
            let claim = cat(lambda, t + span);
            let tr = price(&p, &state, &claim, l).unwrap();
            prop_assert!(tr.minimal <= tr.loading * (1.0 + 1e-15) + 1e-300);
            prop_assert!(tr.loading <= tr.risk_neutral * (1.0 + 1e-15) + 1e-300);
            let direct = loading_price_direct(&p, &state, &claim, l).unwrap();
            prop_assert!((direct - tr.loading).abs() <= 1e-12 * tr.risk_neutral.max(1e-300));
            if tr.risk_neutral > tr.minimal {
                let back = extract_loading(tr.loading, tr.minimal, tr.risk_neutral).unwrap();
                prop_assert!((back - l).abs() <= 1e-12 * (tr.risk_neutral / (tr.risk_neutral - tr.minimal)).max(1.0));
            }
            if tr.minimal > 0.0 {
                let ratio = price_ratio(&p, nbar, yt(t), yt(t + span)).unwrap();
                prop_assert!((tr.ratio() / ratio - 1.0).abs() <= 1e-12);
            }
        }
    }
}
