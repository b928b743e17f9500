//! Hedge ledgers: the self-financing replication of the minimal bond,
//! benchmarked risk minimization of stylized CAT bonds, risk minimization
//! under loading, and the diversified-book experiment.
//!
//! Integrands are evaluated at the left end of each rebalancing interval. The
//! catastrophe indicator is observed on grid times only, so a catastrophe at
//! `xi` shows up at the first grid time `>= xi`.

use std::io::Write;

use crate::error::{Error, Result};
use crate::mc::{map_indexed, Execution};
use crate::model::{bond_state, MmmParams, YearTime};
use crate::rng::{substream, Purpose};
use crate::simulation::{
    claim_probability, sample_catastrophe, simulate_path_indexed, CatastropheModel, PathGrid, SampledPath,
};

/// Unit of account of a ledger's prices and values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LedgerUnits {
    /// Savings-account units: NP price `nbar`, savings account 1.
    Discounted,
    /// NP units: NP price 1, savings account `1 / nbar`.
    Benchmarked,
}

/// Holdings, wealth and benchmarked profit-and-loss of a hedge on a grid.
///
/// `holdings_*[i]` are chosen at `t_i` and held over `(t_i, t_{i+1}]`.
#[derive(Debug, Clone, PartialEq)]
pub struct HedgeLedger {
    pub grid: PathGrid,
    pub units: LedgerUnits,
    pub holdings_np: Vec<f64>,
    pub holdings_savings: Vec<f64>,
    /// Self-financing hedge wealth.
    pub value: Vec<f64>,
    /// Benchmarked P&L: benchmarked target price minus benchmarked hedge gains
    /// minus the initial benchmarked minimal price.
    pub benchmarked_pnl: Vec<f64>,
    pub np_price: Vec<f64>,
    pub savings_price: Vec<f64>,
    /// Price process the hedge tracks, in ledger units.
    pub target: Vec<f64>,
    /// NP units needed on top of the self-financing hedge of the minimal price
    /// to hold the target.
    pub additional_np: Vec<f64>,
}

impl HedgeLedger {
    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    /// Portfolio `i` marked at prices `j`.
    pub fn mark(&self, i: usize, j: usize) -> f64 {
        self.holdings_np[i] * self.np_price[j] + self.holdings_savings[i] * self.savings_price[j]
    }

    /// Index of the first step where the wealth carried into `t_{i+1}` differs
    /// from the holdings chosen at `t_i` marked at `t_{i+1}` prices.
    pub fn verify_bookkeeping(&self) -> std::result::Result<(), usize> {
        match (0..self.len().saturating_sub(1)).find(|&i| self.value[i + 1] != self.mark(i, i + 1)) {
            Some(i) => Err(i),
            None => Ok(()),
        }
    }

    /// Largest relative gap between wealth and the rebalanced holdings marked
    /// at the same time: pure rounding of the split between the two accounts.
    pub fn max_rebalance_residual(&self) -> f64 {
        (0..self.len())
            .map(|i| (self.value[i] - self.mark(i, i)).abs() / self.value[i].abs().max(1e-300))
            .fold(0.0, f64::max)
    }

    pub fn terminal_value(&self) -> f64 {
        *self.value.last().expect("ledger is never empty")
    }

    pub fn terminal_pnl(&self) -> f64 {
        *self.benchmarked_pnl.last().expect("ledger is never empty")
    }

    /// `|value - target|` at the last grid time.
    pub fn terminal_error(&self) -> f64 {
        (self.terminal_value() - self.target.last().unwrap()).abs()
    }

    /// `t,delta_np,delta_savings,value,benchmarked_pnl,np_price,savings_price`.
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "t",
            "delta_np",
            "delta_savings",
            "value",
            "benchmarked_pnl",
            "np_price",
            "savings_price",
        ])?;
        for i in 0..self.len() {
            w.write_record([
                self.grid.times()[i].to_string(),
                self.holdings_np[i].to_string(),
                self.holdings_savings[i].to_string(),
                self.value[i].to_string(),
                self.benchmarked_pnl[i].to_string(),
                self.np_price[i].to_string(),
                self.savings_price[i].to_string(),
            ])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

fn check_horizon(grid: &PathGrid, maturity: YearTime) -> Result<()> {
    let end = grid.last();
    if end > maturity {
        Err(Error::GridPastMaturity {
            end: end.years(),
            maturity: maturity.years(),
        })
    } else {
        Ok(())
    }
}

/// Minimal bond price, hedge ratio and NP fraction along a path.
struct BondPath {
    vbar: Vec<f64>,
    delta: Vec<f64>,
    pi: Vec<f64>,
}

impl BondPath {
    fn new(params: &MmmParams, path: &SampledPath, maturity: YearTime) -> Self {
        let n = path.nbar.len();
        let (mut vbar, mut delta, mut pi) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
        for (&t, &x) in path.grid.times().iter().zip(&path.nbar) {
            let (v, d, p) = bond_state(params, x, t, maturity);
            vbar.push(v);
            delta.push(d);
            pi.push(p);
        }
        Self { vbar, delta, pi }
    }
}

/// Self-financing replication of the discounted minimal bond paying one
/// savings-account unit at `maturity`, rebalanced at every grid time.
/// Discounted units; the target at `maturity` is the payoff 1.
pub fn backtest_minimal_zcb(params: &MmmParams, path: &SampledPath, maturity: YearTime) -> Result<HedgeLedger> {
    check_horizon(&path.grid, maturity)?;
    let bond = BondPath::new(params, path, maturity);
    let n = path.nbar.len();
    let mut holdings_np = Vec::with_capacity(n);
    let mut holdings_savings = Vec::with_capacity(n);
    let mut value = Vec::with_capacity(n);
    value.push(bond.vbar[0]);
    for i in 0..n {
        let units = bond.delta[i];
        let cash = value[i] - units * path.nbar[i];
        holdings_np.push(units);
        holdings_savings.push(cash);
        if i + 1 < n {
            value.push(units * path.nbar[i + 1] + cash * 1.0);
        }
    }
    let benchmarked_pnl: Vec<f64> = (0..n).map(|i| (bond.vbar[i] - value[i]) / path.nbar[i]).collect();
    Ok(HedgeLedger {
        grid: path.grid.clone(),
        units: LedgerUnits::Discounted,
        holdings_np,
        holdings_savings,
        value,
        additional_np: benchmarked_pnl.clone(),
        benchmarked_pnl,
        np_price: path.nbar.clone(),
        savings_price: vec![1.0; n],
        target: bond.vbar,
    })
}

/// Benchmarked risk minimization of the occurrence CAT bond paying one
/// savings-account unit at `maturity` if the catastrophe time `xi <= maturity`.
pub fn risk_minimize_cat(
    params: &MmmParams,
    path: &SampledPath,
    model: &CatastropheModel,
    xi: f64,
    maturity: YearTime,
) -> Result<HedgeLedger> {
    risk_minimize_loading(params, path, model, xi, maturity, &vec![0.0; path.nbar.len()])
}

/// Risk minimization under loading with loading degrees `loading[i]` at the
/// grid times. Savings-account units held:
/// `H_t ((1 - L_t) Vbar_t (1 - pi_t) + L_t)`; initial wealth is the
/// benchmarked loading price and the excess over the minimal price is the
/// initial P&L.
pub fn risk_minimize_loading(
    params: &MmmParams,
    path: &SampledPath,
    model: &CatastropheModel,
    xi: f64,
    maturity: YearTime,
    loading: &[f64],
) -> Result<HedgeLedger> {
    check_horizon(&path.grid, maturity)?;
    let n = path.nbar.len();
    if loading.len() != n {
        return Err(Error::LengthMismatch {
            what: "loading",
            got: loading.len(),
            expected: n,
        });
    }
    if let Some(&l) = loading.iter().find(|l| !(**l >= 0.0)) {
        return Err(Error::NegativeLoading(l));
    }
    let bond = BondPath::new(params, path, maturity);
    let times = path.grid.times();
    let s_hat: Vec<f64> = path.nbar.iter().map(|x| 1.0 / x).collect();
    let h: Vec<f64> = times
        .iter()
        .map(|&t| claim_probability(model, t, maturity, xi))
        .collect();

    let mut target = Vec::with_capacity(n);
    let mut holdings_savings = Vec::with_capacity(n);
    for i in 0..n {
        let minimal = h[i] * bond.vbar[i] * s_hat[i];
        let risk_neutral = h[i] * s_hat[i];
        target.push(loading[i] * risk_neutral + (1.0 - loading[i]) * minimal);
        holdings_savings.push(h[i] * ((1.0 - loading[i]) * bond.vbar[i] * (1.0 - bond.pi[i]) + loading[i]));
    }
    let initial_minimal = h[0] * bond.vbar[0] * s_hat[0];
    let initial_pnl = target[0] - initial_minimal;

    let mut value = Vec::with_capacity(n);
    let mut holdings_np = Vec::with_capacity(n);
    let mut benchmarked_pnl = Vec::with_capacity(n);
    let mut gains = 0.0;
    value.push(target[0]);
    for i in 0..n {
        let np = value[i] - holdings_savings[i] * s_hat[i];
        holdings_np.push(np);
        benchmarked_pnl.push(target[i] - gains - initial_minimal);
        if i + 1 < n {
            value.push(np * 1.0 + holdings_savings[i] * s_hat[i + 1]);
            gains += holdings_savings[i] * (s_hat[i + 1] - s_hat[i]);
        }
    }
    let additional_np = (0..n).map(|i| target[i] - value[i] + initial_pnl).collect();
    Ok(HedgeLedger {
        grid: path.grid.clone(),
        units: LedgerUnits::Benchmarked,
        holdings_np,
        holdings_savings,
        value,
        benchmarked_pnl,
        np_price: vec![1.0; n],
        savings_price: s_hat,
        target,
        additional_np,
    })
}

/// Benchmarked P&L written as integrals against the claim probability and
/// the loading degree:
/// `C_0 + sum (L S + (1 - L) V^S) dH + sum (R - V) dL`, left-endpoint
/// integrands. Differs from the ledger P&L only by the discretization error
/// of the minimal-bond hedge.
pub fn representation_pnl(
    params: &MmmParams,
    path: &SampledPath,
    model: &CatastropheModel,
    xi: f64,
    maturity: YearTime,
    loading: &[f64],
) -> Result<Vec<f64>> {
    check_horizon(&path.grid, maturity)?;
    let bond = BondPath::new(params, path, maturity);
    let times = path.grid.times();
    let n = path.nbar.len();
    let h: Vec<f64> = times
        .iter()
        .map(|&t| claim_probability(model, t, maturity, xi))
        .collect();
    let s_hat: Vec<f64> = path.nbar.iter().map(|x| 1.0 / x).collect();
    let bond_hat: Vec<f64> = (0..n).map(|i| bond.vbar[i] * s_hat[i]).collect();
    let mut out = Vec::with_capacity(n);
    let mut c = loading[0] * h[0] * (s_hat[0] - bond_hat[0]);
    out.push(c);
    for i in 0..n - 1 {
        let weight = loading[i] * s_hat[i] + (1.0 - loading[i]) * bond_hat[i];
        c += weight * (h[i + 1] - h[i]) + h[i] * (s_hat[i] - bond_hat[i]) * (loading[i + 1] - loading[i]);
        out.push(c);
    }
    Ok(out)
}

/// Outcome of the diversified-book experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct BookResult {
    pub n_contracts: usize,
    /// Mean over replications of the book-average terminal benchmarked P&L.
    pub avg_benchmarked_pnl_terminal: f64,
    /// Root mean square over replications of the book-average terminal P&L.
    pub rms_across_seeds: f64,
    /// Book-average terminal P&L of each replication.
    pub replication_averages: Vec<f64>,
}

/// Per-path quantities from which the terminal P&L of any contract on the
/// path follows in `O(log n)`.
struct BookPath {
    times: Vec<f64>,
    /// Claim probability before the catastrophe is observed.
    prob: Vec<f64>,
    bond_hat: Vec<f64>,
    /// Prefix sums of `prob_j * a_j`, `a_j` the savings-account hedge gain per
    /// unit claim probability over step `j`.
    prefix_prob_gain: Vec<f64>,
    /// Suffix sums of `a_j`.
    suffix_gain: Vec<f64>,
}

impl BookPath {
    fn new(params: &MmmParams, path: &SampledPath, model: &CatastropheModel, maturity: YearTime) -> Self {
        let bond = BondPath::new(params, path, maturity);
        let n = path.nbar.len();
        let s_hat: Vec<f64> = path.nbar.iter().map(|x| 1.0 / x).collect();
        let times: Vec<f64> = path.grid.times().iter().map(|t| t.years()).collect();
        let prob: Vec<f64> = path
            .grid
            .times()
            .iter()
            .map(|&t| claim_probability(model, t, maturity, f64::INFINITY))
            .collect();
        let gain: Vec<f64> = (0..n - 1)
            .map(|j| bond.vbar[j] * (1.0 - bond.pi[j]) * (s_hat[j + 1] - s_hat[j]))
            .collect();
        let mut prefix_prob_gain = vec![0.0; n];
        for j in 0..n - 1 {
            prefix_prob_gain[j + 1] = prefix_prob_gain[j] + prob[j] * gain[j];
        }
        let mut suffix_gain = vec![0.0; n];
        for j in (0..n - 1).rev() {
            suffix_gain[j] = suffix_gain[j + 1] + gain[j];
        }
        let bond_hat = (0..n).map(|i| bond.vbar[i] * s_hat[i]).collect();
        Self {
            times,
            prob,
            bond_hat,
            prefix_prob_gain,
            suffix_gain,
        }
    }

    /// Terminal benchmarked P&L of the risk-minimizing hedge for catastrophe time `xi`.
    fn terminal_pnl(&self, xi: f64) -> f64 {
        let last = self.times.len() - 1;
        // first grid index at which the catastrophe is observed
        let hit = self.times.partition_point(|&t| t < xi);
        let h_at = |i: usize| if i >= hit { 1.0 } else { self.prob[i] };
        let hedge_gains = self.prefix_prob_gain[hit.min(last)] + if hit < last { self.suffix_gain[hit] } else { 0.0 };
        h_at(last) * self.bond_hat[last] - hedge_gains - h_at(0) * self.bond_hat[0]
    }
}

/// `n` occurrence CAT bonds with independent catastrophe times written on one
/// shared market path per replication. Replication `r` uses market path 0 of
/// seed `seeds[r]` and the first `n` draws of that seed's catastrophe stream.
pub fn diversify_book(
    params: &MmmParams,
    model: &CatastropheModel,
    n: usize,
    grid: &PathGrid,
    maturity: YearTime,
    seeds: &[u64],
    exec: Execution,
) -> Result<BookResult> {
    if n == 0 {
        return Err(Error::InvalidParameter {
            name: "n_contracts",
            value: 0.0,
            reason: "book needs at least one contract",
        });
    }
    if seeds.is_empty() {
        return Err(Error::InsufficientData("no replication seeds".into()));
    }
    check_horizon(grid, maturity)?;
    let replication_averages = map_indexed(exec, seeds.len(), |r| {
        let path = simulate_path_indexed(params, grid, seeds[r], 0);
        let book = BookPath::new(params, &path, model, maturity);
        let mut rng = substream(seeds[r], Purpose::Catastrophe, 0);
        let total: f64 = (0..n)
            .map(|_| book.terminal_pnl(sample_catastrophe(model, &mut rng)))
            .sum();
        total / n as f64
    });
    let k = replication_averages.len() as f64;
    let avg = replication_averages.iter().sum::<f64>() / k;
    let rms = (replication_averages.iter().map(|a| a * a).sum::<f64>() / k).sqrt();
    Ok(BookResult {
        n_contracts: n,
        avg_benchmarked_pnl_terminal: avg,
        rms_across_seeds: rms,
        replication_averages,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulation::{sample_catastrophe_indexed, simulate_path};

    fn fitted() -> MmmParams {
        MmmParams::new(0.18, 0.052, 10.0).unwrap()
    }

    fn yt(t: f64) -> YearTime {
        YearTime::new(t).unwrap()
    }

    fn fixed_path(times: Vec<f64>, nbar: Vec<f64>) -> SampledPath {
        SampledPath {
            grid: PathGrid::new(times).unwrap(),
            nbar,
            seed: 0,
            path_index: 0,
        }
    }

    #[test]
    fn constant_path_single_rebalance() {
        let p = fitted();
        let path = fixed_path(vec![0.0, 10.0], vec![10.0, 10.0]);
        let ledger = backtest_minimal_zcb(&p, &path, yt(10.0)).unwrap();
        let v0 = ledger.value[0];
        let d0 = ledger.holdings_np[0];
        // flat NP: holdings neither gain nor lose
        assert_eq!(ledger.value[1], d0 * 10.0 + (v0 - d0 * 10.0));
        assert!(ledger.verify_bookkeeping().is_ok());
        assert_eq!(ledger.target[1], 1.0);
        assert_eq!(ledger.holdings_np[1], 0.0);
    }

    #[test]
    fn rejects_grid_past_maturity() {
        let path = fixed_path(vec![0.0, 1.0, 2.0], vec![10.0, 11.0, 12.0]);
        assert!(matches!(
            backtest_minimal_zcb(&fitted(), &path, yt(1.5)),
            Err(Error::GridPastMaturity { .. })
        ));
        let m = CatastropheModel::new(0.1).unwrap();
        assert!(risk_minimize_loading(&fitted(), &path, &m, 1.0, yt(3.0), &[0.0; 2]).is_err());
        assert!(risk_minimize_loading(&fitted(), &path, &m, 1.0, yt(3.0), &[0.0, -1.0, 0.0]).is_err());
    }

    #[test]
    fn zero_hazard_ledger_is_empty() {
        let p = fitted();
        let g = PathGrid::uniform(0.25, 10.0).unwrap();
        let path = simulate_path(&p, &g, 3);
        let m = CatastropheModel::new(0.0).unwrap();
        let l = risk_minimize_cat(&p, &path, &m, f64::INFINITY, yt(10.0)).unwrap();
        assert!(l.holdings_savings.iter().all(|&d| d == 0.0));
        assert!(l.holdings_np.iter().all(|&d| d == 0.0));
        assert!(l.benchmarked_pnl.iter().all(|&c| c == 0.0));
    }

    #[test]
    fn three_step_no_catastrophe() {
        // mpmath reference for grid (0, 1, 2, 3), T = 3, lambda = 0.2, nbar
        // (10, 11, 9.5, 12), xi beyond T
        let p = fitted();
        let path = fixed_path(vec![0.0, 1.0, 2.0, 3.0], vec![10.0, 11.0, 9.5, 12.0]);
        let m = CatastropheModel::new(0.2).unwrap();
        let l = risk_minimize_cat(&p, &path, &m, f64::INFINITY, yt(3.0)).unwrap();
        let expected = [0.0, EXPECTED_C1, EXPECTED_C2, EXPECTED_C3];
        for (c, e) in l.benchmarked_pnl.iter().zip(expected) {
            assert!((c - e).abs() < 1e-14, "{c} vs {e}");
        }
        // no payoff delivered: target ends at zero
        assert_eq!(*l.target.last().unwrap(), 0.0);
        for (a, c) in l.additional_np.iter().zip(&l.benchmarked_pnl) {
            assert!((a - c).abs() < 1e-15);
        }
    }

    const EXPECTED_C1: f64 = -0.011_046_219_085_601_306;
    const EXPECTED_C2: f64 = -0.026_668_398_774_268_944;
    const EXPECTED_C3: f64 = -0.041_774_169_351_103_79;

    #[test]
    fn loading_limits() {
        let p = fitted();
        let g = PathGrid::uniform(1.0 / 12.0, 15.0).unwrap();
        let path = simulate_path(&p, &g, 8);
        let m = CatastropheModel::new(0.08).unwrap();
        let xi = 6.3;
        let cat = risk_minimize_cat(&p, &path, &m, xi, yt(15.0)).unwrap();
        let zero = risk_minimize_loading(&p, &path, &m, xi, yt(15.0), &vec![0.0; g.len()]).unwrap();
        assert_eq!(cat, zero);

        let one = risk_minimize_loading(&p, &path, &m, xi, yt(15.0), &vec![1.0; g.len()]).unwrap();
        for (i, &t) in g.times().iter().enumerate() {
            assert_eq!(one.holdings_savings[i], claim_probability(&m, t, yt(15.0), xi));
        }
        let l3 = risk_minimize_loading(&p, &path, &m, xi, yt(15.0), &vec![0.3; g.len()]).unwrap();
        assert!(l3.benchmarked_pnl[0] > 0.0);
        assert!(l3.verify_bookkeeping().is_ok());
        let rep = representation_pnl(&p, &path, &m, xi, yt(15.0), &vec![0.3; g.len()]).unwrap();
        assert!((rep[0] - l3.benchmarked_pnl[0]).abs() < 1e-15);
    }

    #[test]
    fn book_single_contract_matches_ledger() {
        let p = fitted();
        let g = PathGrid::uniform(1.0 / 12.0, 10.0).unwrap();
        let m = CatastropheModel::new(0.1).unwrap();
        let seeds: Vec<u64> = (100..120).collect();
        let book = diversify_book(&p, &m, 1, &g, yt(10.0), &seeds, Execution::Sequential).unwrap();
        for (r, &s) in seeds.iter().enumerate() {
            let path = simulate_path_indexed(&p, &g, s, 0);
            let xi = sample_catastrophe_indexed(&m, s, 0);
            let ledger = risk_minimize_cat(&p, &path, &m, xi, yt(10.0)).unwrap();
            let a = book.replication_averages[r];
            assert!(
                (a - ledger.terminal_pnl()).abs() < 1e-13,
                "{a} vs {}",
                ledger.terminal_pnl()
            );
        }
        let par = diversify_book(&p, &m, 1, &g, yt(10.0), &seeds, Execution::Parallel).unwrap();
        assert_eq!(book, par);
    }

    #[test]
    fn zero_hazard_book_is_riskless() {
        let p = fitted();
        let g = PathGrid::uniform(0.5, 10.0).unwrap();
        let m = CatastropheModel::new(0.0).unwrap();
        for n in [1, 10, 100] {
            let book = diversify_book(&p, &m, n, &g, yt(10.0), &[1, 2, 3], Execution::default()).unwrap();
            assert_eq!(book.rms_across_seeds, 0.0);
        }
        assert!(diversify_book(&p, &m, 0, &g, yt(10.0), &[1], Execution::default()).is_err());
    }

    #[test]
    fn ledger_csv_round_trips_bookkeeping() {
        let p = fitted();
        let g = PathGrid::uniform(1.0 / 12.0, 5.0).unwrap();
        let ledger = backtest_minimal_zcb(&p, &simulate_path(&p, &g, 4), yt(5.0)).unwrap();
        let mut buf = Vec::new();
        ledger.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "t,delta_np,delta_savings,value,benchmarked_pnl,np_price,savings_price"
        );
        let rows: Vec<Vec<f64>> = lines
            .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
            .collect();
        for w in rows.windows(2) {
            assert_eq!(w[1][3], w[0][1] * w[1][5] + w[0][2] * w[1][6]);
        }
    }
}
