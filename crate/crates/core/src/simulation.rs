//! Exact and Euler simulation of the discounted NP, catastrophe times and
//! loading-degree paths.
//!
//! All sampling is keyed by `(master seed, path index)` through
//! [`crate::rng::substream`]; the NP, catastrophe and loading draws of one
//! scenario come from disjoint substreams.

use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};

use crate::error::{Error, Result};
use crate::model::{rho_increment, MmmParams, YearTime};
use crate::rng::{substream, Purpose};

/// Euler floor for negative excursions.
pub const EULER_FLOOR: f64 = 1e-12;

/// Strictly increasing simulation times starting at 0.
#[derive(Debug, Clone, PartialEq)]
pub struct PathGrid {
    times: Vec<YearTime>,
}

impl PathGrid {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        match times.first() {
            Some(&0.0) => {}
            Some(&t0) => return Err(Error::InvalidGrid(format!("grid starts at {t0}, not 0"))),
            None => return Err(Error::InvalidGrid("grid is empty".into())),
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidGrid("times must be strictly increasing".into()));
        }
        let times = times.into_iter().map(YearTime::new).collect::<Result<_>>()?;
        Ok(Self { times })
    }

    /// `0, step, 2 step, ...` up to `horizon`, with a final shorter step so the
    /// grid ends exactly at `horizon`.
    pub fn uniform(step: f64, horizon: f64) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) || !(horizon >= 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidGrid(format!("step {step}, horizon {horizon}")));
        }
        let n = (horizon / step - 1e-9).ceil().max(0.0) as usize;
        let mut times: Vec<f64> = (0..n).map(|i| i as f64 * step).collect();
        times.push(horizon);
        Self::new(times)
    }

    pub fn times(&self) -> &[YearTime] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> YearTime {
        *self.times.last().expect("grid is never empty")
    }

    /// Every `stride`-th point, always keeping the last one.
    pub fn coarsen(&self, stride: usize) -> (Self, Vec<usize>) {
        let stride = stride.max(1);
        let mut idx: Vec<usize> = (0..self.len()).step_by(stride).collect();
        if *idx.last().unwrap() != self.len() - 1 {
            idx.push(self.len() - 1);
        }
        let times = idx.iter().map(|&i| self.times[i]).collect();
        (Self { times }, idx)
    }
}

/// One simulated discounted-NP path.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledPath {
    pub grid: PathGrid,
    pub nbar: Vec<f64>,
    pub seed: u64,
    pub path_index: u64,
}

impl SampledPath {
    /// Path restricted to `grid.coarsen(stride)`.
    pub fn coarsen(&self, stride: usize) -> Self {
        let (grid, idx) = self.grid.coarsen(stride);
        Self {
            grid,
            nbar: idx.iter().map(|&i| self.nbar[i]).collect(),
            seed: self.seed,
            path_index: self.path_index,
        }
    }

    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "nbar"])?;
        for (t, n) in self.grid.times().iter().zip(&self.nbar) {
            w.write_record([t.to_string(), n.to_string()])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

/// Exact draw of `nbar_T` given `nbar_t`: `(rho_T - rho_t)` times a noncentral
/// chi-squared variate with 4 degrees of freedom and noncentrality
/// `nbar_t / (rho_T - rho_t)`.
pub fn besq4_transition<R: Rng + ?Sized>(
    params: &MmmParams,
    nbar_t: f64,
    t: YearTime,
    maturity: YearTime,
    rng: &mut R,
) -> f64 {
    debug_assert!(t <= maturity);
    let scale = rho_increment(params, t, maturity);
    if !(scale > 0.0) {
        return nbar_t;
    }
    let shift = (nbar_t / scale).sqrt();
    let z: [f64; 4] = std::array::from_fn(|_| StandardNormal.sample(rng));
    scale * ((z[0] + shift).powi(2) + z[1] * z[1] + z[2] * z[2] + z[3] * z[3])
}

/// Exact path from `params.n0()` using path index 0 of `seed`.
pub fn simulate_path(params: &MmmParams, grid: &PathGrid, seed: u64) -> SampledPath {
    simulate_path_indexed(params, grid, seed, 0)
}

/// Exact path for scenario `path_index` of `master_seed`.
pub fn simulate_path_indexed(params: &MmmParams, grid: &PathGrid, master_seed: u64, path_index: u64) -> SampledPath {
    let mut rng = substream(master_seed, Purpose::Market, path_index);
    let times = grid.times();
    let mut nbar = Vec::with_capacity(times.len());
    nbar.push(params.n0());
    for w in times.windows(2) {
        let prev = *nbar.last().unwrap();
        nbar.push(besq4_transition(params, prev, w[0], w[1], &mut rng));
    }
    SampledPath {
        grid: grid.clone(),
        nbar,
        seed: master_seed,
        path_index,
    }
}

/// Euler-Maruyama path of `d nbar = alpha dt + sqrt(alpha nbar) dW`.
pub fn simulate_path_euler(params: &MmmParams, grid: &PathGrid, seed: u64) -> SampledPath {
    let p = *params;
    simulate_path_euler_with(|t| crate::model::alpha(&p, t), params.n0(), grid, seed, 0)
}

/// Euler scheme for an arbitrary non-negative `alpha_t`.
pub fn simulate_path_euler_with(
    alpha: impl Fn(YearTime) -> f64,
    n0: f64,
    grid: &PathGrid,
    master_seed: u64,
    path_index: u64,
) -> SampledPath {
    let mut rng = substream(master_seed, Purpose::Market, path_index);
    let times = grid.times();
    let increments: Vec<f64> = times
        .windows(2)
        .map(|w| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z * (w[1].years() - w[0].years()).sqrt()
        })
        .collect();
    let nbar = euler_from_increments(alpha, n0, times, &increments);
    SampledPath {
        grid: grid.clone(),
        nbar,
        seed: master_seed,
        path_index,
    }
}

/// Euler scheme driven by given Brownian increments (`increments[i]` spans
/// `times[i]..times[i + 1]`). Negative values are reflected and floored at
/// [`EULER_FLOOR`].
pub fn euler_from_increments(
    alpha: impl Fn(YearTime) -> f64,
    n0: f64,
    times: &[YearTime],
    increments: &[f64],
) -> Vec<f64> {
    assert_eq!(increments.len() + 1, times.len());
    let mut nbar = Vec::with_capacity(times.len());
    let mut x = n0;
    nbar.push(x);
    for (w, dw) in times.windows(2).zip(increments) {
        let a = alpha(w[0]);
        let dt = w[1].years() - w[0].years();
        x += a * dt + (a * x).sqrt() * dw;
        if x < EULER_FLOOR {
            x = (-x).max(EULER_FLOOR);
        }
        nbar.push(x);
    }
    nbar
}

/// Constant hazard for the first catastrophe time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CatastropheModel {
    lambda: f64,
}

impl CatastropheModel {
    pub fn new(lambda: f64) -> Result<Self> {
        if lambda.is_finite() && lambda >= 0.0 {
            Ok(Self { lambda })
        } else {
            Err(Error::InvalidParameter {
                name: "lambda",
                value: lambda,
                reason: "hazard rate must be finite and non-negative",
            })
        }
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

/// Exponential catastrophe time; `+inf` when the hazard is zero.
pub fn sample_catastrophe<R: Rng + ?Sized>(model: &CatastropheModel, rng: &mut R) -> f64 {
    if model.lambda == 0.0 {
        return f64::INFINITY;
    }
    Exp::new(model.lambda).expect("validated rate").sample(rng)
}

/// Catastrophe time for scenario `index` of `master_seed`.
pub fn sample_catastrophe_indexed(model: &CatastropheModel, master_seed: u64, index: u64) -> f64 {
    sample_catastrophe(model, &mut substream(master_seed, Purpose::Catastrophe, index))
}

/// `P(xi <= T | F_t)`: 1 once the catastrophe is observed, else
/// `1 - exp(-lambda (T - t))`.
pub fn claim_probability(model: &CatastropheModel, t: YearTime, maturity: YearTime, xi: f64) -> f64 {
    if xi <= t.years() {
        1.0
    } else {
        -(-model.lambda * (maturity.years() - t.years())).exp_m1()
    }
}

/// Loading-degree process specification.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LoadingSpec {
    Constant(f64),
    /// Driftless exponential martingale started at `initial` with volatility `vol`.
    Martingale {
        initial: f64,
        vol: f64,
    },
}

impl LoadingSpec {
    pub fn constant(level: f64) -> Result<Self> {
        if level.is_finite() && level >= 0.0 {
            Ok(Self::Constant(level))
        } else {
            Err(Error::NegativeLoading(level))
        }
    }

    pub fn martingale(initial: f64, vol: f64) -> Result<Self> {
        if !(initial.is_finite() && initial > 0.0) {
            return Err(Error::InvalidParameter {
                name: "loading",
                value: initial,
                reason: "martingale loading must start positive",
            });
        }
        if !(vol.is_finite() && vol >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "loading_vol",
                value: vol,
                reason: "must be finite and non-negative",
            });
        }
        Ok(Self::Martingale { initial, vol })
    }

    pub fn initial(&self) -> f64 {
        match *self {
            Self::Constant(l) => l,
            Self::Martingale { initial, .. } => initial,
        }
    }
}

pub fn simulate_loading(spec: &LoadingSpec, grid: &PathGrid, seed: u64) -> Vec<f64> {
    simulate_loading_indexed(spec, grid, seed, 0)
}

/// Loading path for scenario `path_index`, drawn from the loading substream.
pub fn simulate_loading_indexed(spec: &LoadingSpec, grid: &PathGrid, master_seed: u64, path_index: u64) -> Vec<f64> {
    match *spec {
        LoadingSpec::Constant(l) => vec![l; grid.len()],
        LoadingSpec::Martingale { initial, vol: 0.0 } => vec![initial; grid.len()],
        LoadingSpec::Martingale { initial, vol } => {
            let mut rng = substream(master_seed, Purpose::Loading, path_index);
            let mut out = Vec::with_capacity(grid.len());
            out.push(initial);
            for w in grid.times().windows(2) {
                let dt = w[1].years() - w[0].years();
                let z: f64 = StandardNormal.sample(&mut rng);
                let prev = *out.last().unwrap();
                out.push(prev * (vol * dt.sqrt() * z - 0.5 * vol * vol * dt).exp());
            }
            out
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::discounted_minimal_zcb;

    fn fitted() -> MmmParams {
        MmmParams::new(0.18, 0.052, 10.0).unwrap()
    }

    fn yt(t: f64) -> YearTime {
        YearTime::new(t).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(PathGrid::new(vec![]).is_err());
        assert!(PathGrid::new(vec![0.5, 1.0]).is_err());
        assert!(PathGrid::new(vec![0.0, 1.0, 1.0]).is_err());
        let g = PathGrid::uniform(0.25, 1.0).unwrap();
        assert_eq!(g.len(), 5);
        assert_eq!(g.last().years(), 1.0);
        let g = PathGrid::uniform(0.3, 1.0).unwrap();
        assert_eq!(
            g.times().iter().map(|t| t.years()).collect::<Vec<_>>().last(),
            Some(&1.0)
        );
        assert_eq!(g.len(), 5);
        assert_eq!(PathGrid::uniform(1.0 / 12.0, 89.0).unwrap().len(), 89 * 12 + 1);
        assert_eq!(PathGrid::uniform(1.0, 0.0).unwrap().len(), 1);
        let (c, idx) = PathGrid::uniform(1.0, 10.0).unwrap().coarsen(4);
        assert_eq!(idx, vec![0, 4, 8, 10]);
        assert_eq!(c.last().years(), 10.0);
    }

    #[test]
    fn zero_time_change_returns_input() {
        let mut rng = substream(1, Purpose::Market, 0);
        assert_eq!(besq4_transition(&fitted(), 7.5, yt(3.0), yt(3.0), &mut rng), 7.5);
    }

    #[test]
    fn single_point_path_and_determinism() {
        let p = fitted();
        let single = simulate_path(&p, &PathGrid::new(vec![0.0]).unwrap(), 5);
        assert_eq!(single.nbar, vec![10.0]);

        let g = PathGrid::uniform(1.0 / 12.0, 20.0).unwrap();
        let a = simulate_path(&p, &g, 42);
        let b = simulate_path(&p, &g, 42);
        assert_eq!(a, b);
        assert!(a.nbar.iter().all(|&v| v > 0.0));
        assert_ne!(a.nbar, simulate_path(&p, &g, 43).nbar);
    }

    #[test]
    fn transition_moments() {
        let p = fitted();
        let (t, m) = (yt(0.0), yt(30.0));
        let n = 200_000;
        let mut rng = substream(9, Purpose::Auxiliary, 0);
        let draws: Vec<f64> = (0..n).map(|_| besq4_transition(&p, 10.0, t, m, &mut rng)).collect();
        let mean = crate::mc::SampleStats::from_slice(&draws);
        let dr = rho_increment(&p, t, m);
        assert!(mean.z_score(10.0 + 4.0 * dr).abs() < 4.0, "{mean:?}");
        let inv: Vec<f64> = draws.iter().map(|x| 10.0 / x).collect();
        let s = crate::mc::SampleStats::from_slice(&inv);
        let expected = discounted_minimal_zcb(&p, 10.0, t, m).unwrap();
        assert!(s.z_score(expected).abs() < 4.0, "{s:?} vs {expected}");
    }

    #[test]
    fn zero_alpha_euler_is_constant() {
        let g = PathGrid::uniform(0.01, 1.0).unwrap();
        let path = simulate_path_euler_with(|_| 0.0, 3.0, &g, 1, 0);
        assert!(path.nbar.iter().all(|&v| v == 3.0));
    }

    #[test]
    fn euler_reflects_negative_values() {
        let times: Vec<YearTime> = [0.0, 1.0, 2.0].map(yt).to_vec();
        let path = euler_from_increments(|_| 1.0, 1.0, &times, &[-5.0, 0.0]);
        // 1 + 1 - 5 = -3 reflected to 3
        assert_eq!(path[1], 3.0);
        let path = euler_from_increments(|_| 1e-20, 0.0, &times, &[0.0, -1.0]);
        assert!(path.iter().skip(1).all(|&v| v >= EULER_FLOOR));
    }

    #[test]
    fn catastrophe_sampling() {
        let none = CatastropheModel::new(0.0).unwrap();
        assert_eq!(sample_catastrophe_indexed(&none, 1, 0), f64::INFINITY);
        assert!(CatastropheModel::new(-0.1).is_err());

        let m = CatastropheModel::new(0.05).unwrap();
        let mut draws: Vec<f64> = (0..100_000).map(|i| sample_catastrophe_indexed(&m, 3, i)).collect();
        draws.sort_by(f64::total_cmp);
        let median = draws[draws.len() / 2];
        assert!(
            (median / (std::f64::consts::LN_2 / 0.05) - 1.0).abs() < 0.02,
            "{median}"
        );
    }

    #[test]
    fn claim_probability_values() {
        let m = CatastropheModel::new(0.05).unwrap();
        assert_eq!(claim_probability(&m, yt(5.0), yt(10.0), 4.0), 1.0);
        assert_eq!(claim_probability(&m, yt(5.0), yt(10.0), 5.0), 1.0);
        let p = claim_probability(&m, yt(0.0), yt(10.0), f64::INFINITY);
        assert!((p - 0.393_469_340_287_366_6).abs() < 1e-15);
        let none = CatastropheModel::new(0.0).unwrap();
        assert_eq!(claim_probability(&none, yt(0.0), yt(10.0), f64::INFINITY), 0.0);
        assert_eq!(claim_probability(&m, yt(10.0), yt(10.0), f64::INFINITY), 0.0);
    }

    #[test]
    fn loading_paths() {
        let g = PathGrid::uniform(1.0 / 12.0, 5.0).unwrap();
        let c = simulate_loading(&LoadingSpec::constant(0.3).unwrap(), &g, 1);
        assert!(c.iter().all(|&l| l == 0.3));
        let flat = simulate_loading(&LoadingSpec::martingale(0.3, 0.0).unwrap(), &g, 1);
        assert!(flat.iter().all(|&l| l == 0.3));
        let m = simulate_loading(&LoadingSpec::martingale(0.3, 0.5).unwrap(), &g, 1);
        assert!(m.iter().all(|&l| l > 0.0));
        assert_ne!(m[1], 0.3);
        assert!(LoadingSpec::constant(-0.1).is_err());
        assert!(LoadingSpec::martingale(0.0, 0.1).is_err());
    }

    #[test]
    fn substreams_are_disjoint() {
        // the market stream of a scenario is unaffected by drawing its
        // catastrophe and loading streams
        let g = PathGrid::uniform(0.5, 5.0).unwrap();
        let spec = LoadingSpec::martingale(0.3, 0.4).unwrap();
        let before = simulate_path_indexed(&fitted(), &g, 11, 2);
        let l = simulate_loading_indexed(&spec, &g, 11, 2);
        let xi = sample_catastrophe_indexed(&CatastropheModel::new(0.1).unwrap(), 11, 2);
        let after = simulate_path_indexed(&fitted(), &g, 11, 2);
        assert_eq!(before, after);
        assert!(xi > 0.0 && l.len() == g.len());
    }
}
