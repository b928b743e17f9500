//! Least-squares fit of `rho_t = alpha0 (exp(eta t) - 1) / (4 eta)` to a
//! realized quadratic variation curve.
//!
//! For fixed `eta` the model is linear in `alpha0`, so `alpha0` is profiled out
//! in closed form and only `eta` is searched: golden-section over the bounds,
//! then parabolic refinement around the bracketed minimum.

use std::fmt;

use crate::error::{Error, Result};
use crate::market_data::QuadraticVariationCurve;
use crate::model::MmmParams;

pub const DEFAULT_ETA_BOUNDS: (f64, f64) = (1e-4, 0.5);
const GOLDEN_MAX_ITER: usize = 200;
const GOLDEN_TOL: f64 = 1e-7;
const REFINE_MAX_ITER: usize = 50;

/// Residual weighting.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Weighting {
    #[default]
    Equal,
    /// All points weight 1 except the terminal point, which gets this weight.
    Terminal(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub eta_bounds: (f64, f64),
    pub weighting: Weighting,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            eta_bounds: DEFAULT_ETA_BOUNDS,
            weighting: Weighting::Equal,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationResult {
    pub params: MmmParams,
    /// Weighted sum of squared residuals at the optimum.
    pub sse: f64,
    pub evaluations: usize,
    /// False when the optimum sits on an `eta` bound.
    pub converged: bool,
    pub diagnostics: Option<String>,
}

impl CalibrationResult {
    /// `key=value` lines.
    pub fn to_key_values(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("alpha0={}\n", self.params.alpha0()));
        s.push_str(&format!("eta={}\n", self.params.eta()));
        s.push_str(&format!("n0={}\n", self.params.n0()));
        s.push_str(&format!("sse={}\n", self.sse));
        s.push_str(&format!("evaluations={}\n", self.evaluations));
        s.push_str(&format!("converged={}\n", self.converged));
        if let Some(d) = &self.diagnostics {
            s.push_str(&format!("diagnostics={d}\n"));
        }
        s
    }
}

impl fmt::Display for CalibrationResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_key_values())
    }
}

/// `(exp(eta t) - 1) / (4 eta)`, the shape of `rho` per unit `alpha0`.
fn shape(eta: f64, t: f64) -> f64 {
    (eta * t).exp_m1() / (4.0 * eta)
}

struct Objective<'a> {
    t: Vec<f64>,
    qv: &'a [f64],
    weights: Vec<f64>,
    evaluations: std::cell::Cell<usize>,
}

impl Objective<'_> {
    /// Optimal `alpha0` for this `eta` and the resulting weighted SSE.
    fn profile(&self, eta: f64) -> (f64, f64) {
        self.evaluations.set(self.evaluations.get() + 1);
        let (mut num, mut den) = (0.0, 0.0);
        for ((&t, &q), &w) in self.t.iter().zip(self.qv).zip(&self.weights) {
            let g = shape(eta, t);
            num += w * q * g;
            den += w * g * g;
        }
        let alpha0 = num / den;
        (alpha0, self.sse(alpha0, eta))
    }

    fn sse(&self, alpha0: f64, eta: f64) -> f64 {
        self.t
            .iter()
            .zip(self.qv)
            .zip(&self.weights)
            .map(|((&t, &q), &w)| w * (q - alpha0 * shape(eta, t)).powi(2))
            .sum()
    }
}

/// Fits `(alpha0, eta)`; `n0` is set from `initial_value` (the first point of
/// the discounted series the curve came from).
pub fn fit_rho(curve: &QuadraticVariationCurve, initial_value: f64, options: &FitOptions) -> Result<CalibrationResult> {
    let (lo, hi) = options.eta_bounds;
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "eta_bounds",
            value: lo,
            reason: "need 0 < lower < upper",
        });
    }
    if curve.len() < 3 || curve.qv.len() != curve.len() {
        return Err(Error::InsufficientData(format!(
            "calibration needs at least 3 points, got {}",
            curve.len()
        )));
    }
    let t: Vec<f64> = curve.t.iter().map(|t| t.years()).collect();
    let span = t[t.len() - 1] - t[0];
    if !(span > 1.0) {
        return Err(Error::InsufficientData(format!(
            "calibration curve must span more than one year, spans {span}"
        )));
    }
    if curve.qv.iter().all(|&q| q == 0.0) {
        return Err(Error::DegenerateCurve);
    }
    let mut weights = vec![1.0; t.len()];
    if let Weighting::Terminal(w) = options.weighting {
        if !(w > 0.0 && w.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "terminal_weight",
                value: w,
                reason: "must be finite and positive",
            });
        }
        *weights.last_mut().unwrap() = w;
    }
    let obj = Objective {
        t,
        qv: &curve.qv,
        weights,
        evaluations: std::cell::Cell::new(0),
    };

    let (a, b) = golden_section(|eta| obj.profile(eta).1, lo, hi);
    let eta = parabolic_refine(|eta| obj.profile(eta).1, a, b);
    let (alpha0, sse) = obj.profile(eta);

    let edge = 10.0 * GOLDEN_TOL;
    let on_bound = eta - lo < edge || hi - eta < edge;
    let diagnostics = on_bound
        .then(|| format!("eta={eta} sits on the search bound [{lo}, {hi}]; widen eta_bounds or check the data"));
    if !(alpha0 > 0.0) {
        return Err(Error::InvalidParameter {
            name: "alpha0",
            value: alpha0,
            reason: "least-squares alpha0 is not positive",
        });
    }
    Ok(CalibrationResult {
        params: MmmParams::new(alpha0, eta, initial_value)?,
        sse,
        evaluations: obj.evaluations.get(),
        converged: !on_bound,
        diagnostics,
    })
}

/// Returns a bracket `[a, b]` around the minimum of `f` on `[lo, hi]`.
fn golden_section(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..GOLDEN_MAX_ITER {
        if b - a < GOLDEN_TOL {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    (a, b)
}

/// Successive parabolic interpolation inside `[a, b]`, keeping only steps
/// that lower the objective.
fn parabolic_refine(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let mut xs = [a, 0.5 * (a + b), b];
    let mut fs = xs.map(&f);
    let mut best = (0..3).min_by(|&i, &j| fs[i].total_cmp(&fs[j])).unwrap();
    for _ in 0..REFINE_MAX_ITER {
        let [x0, x1, x2] = xs;
        let [f0, f1, f2] = fs;
        let num = (x1 - x0).powi(2) * (f1 - f2) - (x1 - x2).powi(2) * (f1 - f0);
        let den = (x1 - x0) * (f1 - f2) - (x1 - x2) * (f1 - f0);
        if den == 0.0 || !num.is_finite() {
            break;
        }
        let x = x1 - 0.5 * num / den;
        if !(x > a && x < b) || xs.contains(&x) {
            break;
        }
        let fx = f(x);
        if fx >= fs[best] {
            break;
        }
        // drop the worst point
        let worst = (0..3).max_by(|&i, &j| fs[i].total_cmp(&fs[j])).unwrap();
        xs[worst] = x;
        fs[worst] = fx;
        let mut order = [0usize, 1, 2];
        order.sort_by(|&i, &j| xs[i].total_cmp(&xs[j]));
        xs = order.map(|i| xs[i]);
        fs = order.map(|i| fs[i]);
        best = (0..3).min_by(|&i, &j| fs[i].total_cmp(&fs[j])).unwrap();
        if (xs[2] - xs[0]).abs() < 1e-14 {
            break;
        }
    }
    xs[best]
}

/// Fitted `rho` evaluated on the curve's time stamps.
pub fn fitted_rho(params: &MmmParams, curve: &QuadraticVariationCurve) -> Vec<f64> {
    curve.t.iter().map(|&t| crate::model::rho(params, t)).collect()
}

/// `t,qv,rho_fit` rows.
pub fn write_fit_csv(params: &MmmParams, curve: &QuadraticVariationCurve, out: impl std::io::Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "qv", "rho_fit"])?;
    for ((t, q), r) in curve.t.iter().zip(&curve.qv).zip(fitted_rho(params, curve)) {
        w.write_record([t.to_string(), q.to_string(), r.to_string()])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
