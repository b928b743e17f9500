use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use mmm_core::calibration::{fit_rho, write_fit_csv, CalibrationResult, FitOptions, Weighting};
use mmm_core::hedging::{backtest_minimal_zcb, diversify_book, risk_minimize_loading};
use mmm_core::market_data::{build_discounted, load_raw, quadratic_variation_of, DiscountedSeries, RawSeries};
use mmm_core::mc::{map_indexed, SampleStats};
use mmm_core::model::{discounted_minimal_zcb, hedge_fraction, price_ratio};
use mmm_core::pricing::{self, CatastropheStatus, ClaimSpec, MarketState, PayoffConvention, Quote};
use mmm_core::rng::derive_seed;
use mmm_core::simulation::{
    sample_catastrophe_indexed, simulate_loading_indexed, simulate_path_indexed, PathGrid, SampledPath,
};
use mmm_core::{Execution, MmmParams, YearTime};

use crate::config::{loading_spec, Convention, RunConfig};
use crate::CliError;

const DEFAULT_FIGURE_HORIZON: f64 = 89.0;
const DEFAULT_FIGURE_LOADING: f64 = 0.3;
const DEFAULT_BOOK_MATURITY: f64 = 10.0;

pub fn init_threads(threads: Option<usize>) -> Result<(), CliError> {
    match threads {
        Some(0) => Err(CliError::Usage("threads must be at least 1".into())),
        #[cfg(feature = "parallel")]
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot start thread pool: {e}"))),
        _ => Ok(()),
    }
}

fn execution(config: &RunConfig) -> Execution {
    if config.threads == Some(1) {
        Execution::Sequential
    } else {
        Execution::default()
    }
}

fn write_file(
    dir: &Path,
    name: &str,
    body: impl FnOnce(&mut BufWriter<File>) -> Result<(), CliError>,
) -> Result<(), CliError> {
    let path = dir.join(name);
    let file = File::create(&path).map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))?;
    let mut w = BufWriter::new(file);
    body(&mut w)?;
    w.flush()
        .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))?;
    println!("{}", path.display());
    Ok(())
}

fn io_err(e: std::io::Error) -> CliError {
    CliError::Usage(format!("write failed: {e}"))
}

fn year(t: f64) -> Result<YearTime, CliError> {
    YearTime::new(t).map_err(CliError::from)
}

fn load_checked(path: &Path) -> Result<RawSeries, CliError> {
    let raw = load_raw(path)?;
    if raw.rates_defaulted {
        eprintln!("warning: {} has missing short rates; treated as 0", path.display());
    }
    Ok(raw)
}

fn load_series(config: &RunConfig) -> Result<Option<DiscountedSeries>, CliError> {
    match &config.data {
        Some(path) => {
            let raw = load_checked(path)?;
            Ok(Some(build_discounted(&raw, config.normalize)?))
        }
        None => Ok(None),
    }
}

fn fit(config: &RunConfig, series: &DiscountedSeries) -> Result<CalibrationResult, CliError> {
    let curve = quadratic_variation_of(&series.t, &series.nbar);
    let options = FitOptions {
        eta_bounds: config.eta_bounds,
        weighting: config.terminal_weight.map_or(Weighting::Equal, Weighting::Terminal),
    };
    Ok(fit_rho(&curve, series.nbar[0], &options)?)
}

fn non_convergence(result: &CalibrationResult) -> CliError {
    CliError::Numerical(format!(
        "calibration did not converge: eta={} at a search bound {:?}",
        result.params.eta(),
        result.diagnostics.as_deref().unwrap_or("")
    ))
}

/// `--params` if given, else a fit to `--data`.
fn resolve_params(config: &RunConfig, series: Option<&DiscountedSeries>) -> Result<MmmParams, CliError> {
    if let Some(p) = config.params {
        return Ok(p);
    }
    let series = series.ok_or_else(|| CliError::Usage("need --params or --data".into()))?;
    let result = fit(config, series)?;
    if !result.converged {
        return Err(non_convergence(&result));
    }
    Ok(result.params)
}

fn simulated_series(params: &MmmParams, config: &RunConfig, horizon: f64) -> Result<DiscountedSeries, CliError> {
    let grid = PathGrid::uniform(config.step, horizon)?;
    let path = simulate_path_indexed(params, &grid, config.seed, 0);
    let n = path.nbar.len();
    Ok(DiscountedSeries::new(grid.times().to_vec(), path.nbar, vec![1.0; n])?)
}

fn as_path(series: &DiscountedSeries) -> Result<SampledPath, CliError> {
    let grid = PathGrid::new(series.t.iter().map(|t| t.years()).collect())?;
    Ok(SampledPath {
        grid,
        nbar: series.nbar.clone(),
        seed: 0,
        path_index: 0,
    })
}

pub fn calibrate(config: &RunConfig) -> Result<(), CliError> {
    let path = config
        .data
        .as_ref()
        .ok_or_else(|| CliError::Usage("calibrate needs --data".into()))?;
    let raw = load_checked(path)?;
    let series = build_discounted(&raw, config.normalize)?;
    let curve = quadratic_variation_of(&series.t, &series.nbar);
    let result = fit(config, &series)?;

    let out = &config.out;
    write_file(out, "discounted.csv", |w| Ok(series.write_csv(w)?))?;
    write_file(out, "qv_fit.csv", |w| Ok(write_fit_csv(&result.params, &curve, w)?))?;
    write_file(out, "calibration.txt", |w| {
        w.write_all(result.to_key_values().as_bytes()).map_err(io_err)?;
        if raw.rates_defaulted {
            w.write_all(b"rates_defaulted=true\n").map_err(io_err)?;
        }
        Ok(())
    })?;
    if !result.converged {
        return Err(non_convergence(&result));
    }
    Ok(())
}

fn claim(config: &RunConfig, maturity: YearTime) -> Result<ClaimSpec, CliError> {
    let spec = match config.catastrophe {
        None => ClaimSpec::zero_coupon(maturity),
        Some(model) => {
            let convention = match config.convention {
                Convention::Occurrence => PayoffConvention::Occurrence,
                Convention::PrincipalProtected => PayoffConvention::PrincipalProtected,
            };
            ClaimSpec::cat_bond(model, convention, maturity)
        }
    };
    Ok(spec?)
}

pub fn price(config: &RunConfig) -> Result<(), CliError> {
    let maturity = config
        .maturity
        .ok_or_else(|| CliError::Usage("price needs --maturity".into()))?;
    let data = load_series(config)?;
    let params = resolve_params(config, data.as_ref())?;
    let claim = claim(config, year(maturity)?)?;
    let loading = config.loading.unwrap_or(0.0);

    // valuation dates: the data series, a simulated path, or just t = 0
    let (t, nbar, savings) = match (data, config.horizon) {
        (Some(s), _) => (s.t, s.nbar, s.savings),
        (None, Some(h)) => {
            let s = simulated_series(&params, config, h)?;
            (s.t, s.nbar, s.savings)
        }
        (None, None) => (vec![YearTime::ZERO], vec![params.n0()], vec![1.0]),
    };
    let mut quotes = Vec::new();
    for i in 0..t.len() {
        let t = t[i];
        if t.years() > maturity {
            break;
        }
        let status = match config.xi {
            Some(xi) if xi <= t.years() => CatastropheStatus::OccurredAt(xi),
            _ => CatastropheStatus::NotYet,
        };
        let state = MarketState::new(t, nbar[i], savings[i], status)?;
        let triple = pricing::price(&params, &state, &claim, loading)?;
        quotes.push(Quote { t, triple });
    }
    write_file(&config.out, "quotes.csv", |w| {
        Ok(pricing::write_quotes_csv(&quotes, w)?)
    })
}

fn csv_writer<W: Write>(w: W, header: &[&str]) -> Result<csv::Writer<W>, CliError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(header).map_err(csv_err)?;
    Ok(out)
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Usage(format!("write failed: {e}"))
}

fn row<W: Write>(w: &mut csv::Writer<W>, values: &[f64]) -> Result<(), CliError> {
    w.write_record(values.iter().map(|v| v.to_string())).map_err(csv_err)
}

pub fn figures(config: &RunConfig) -> Result<(), CliError> {
    let data = load_series(config)?;
    let params = resolve_params(config, data.as_ref())?;
    let series = match data {
        Some(s) => s,
        None => simulated_series(&params, config, config.horizon.unwrap_or(DEFAULT_FIGURE_HORIZON))?,
    };
    let end = series.t.last().unwrap().years();
    let maturity = year(config.maturity.unwrap_or(end))?;
    let out = &config.out;
    let n = series.len();

    write_file(out, "fig1_log_discounted.csv", |w| {
        let mut w = csv_writer(w, &["t", "log_nbar"])?;
        for i in 0..n {
            row(&mut w, &[series.t[i].years(), series.nbar[i].ln()])?;
        }
        w.flush().map_err(io_err)
    })?;

    let curve = quadratic_variation_of(&series.t, &series.nbar);
    write_file(out, "fig2_qv.csv", |w| Ok(write_fit_csv(&params, &curve, w)?))?;

    let before: Vec<usize> = (0..n).filter(|&i| series.t[i] < maturity).collect();
    write_file(out, "fig3_ratio.csv", |w| {
        let mut w = csv_writer(w, &["t", "time_to_maturity", "ratio"])?;
        for &i in &before {
            let t = series.t[i];
            let ratio = price_ratio(&params, series.nbar[i], t, maturity)?;
            row(&mut w, &[t.years(), maturity.years() - t.years(), ratio])?;
        }
        w.flush().map_err(io_err)
    })?;

    write_file(out, "fig4_fraction.csv", |w| {
        let mut w = csv_writer(w, &["t", "fraction"])?;
        for &i in &before {
            let t = series.t[i];
            row(
                &mut w,
                &[t.years(), hedge_fraction(&params, series.nbar[i], t, maturity)?],
            )?;
        }
        w.flush().map_err(io_err)
    })?;

    let path = as_path(&series)?;
    let within: Vec<usize> = (0..n).filter(|&i| series.t[i] <= maturity).collect();
    let ledger = backtest_minimal_zcb(&params, &prefix(&path, within.len()), maturity)?;
    let loading = config.loading.unwrap_or(DEFAULT_FIGURE_LOADING);
    write_file(out, "fig5_hedge.csv", |w| {
        let mut w = csv_writer(
            w,
            &[
                "t",
                "log_hedge_value",
                "log_minimal_price",
                "log_loading_price",
                "log_risk_neutral_price",
            ],
        )?;
        for (k, &i) in within.iter().enumerate() {
            let t = series.t[i];
            let s = series.savings[i];
            let vbar = discounted_minimal_zcb(&params, series.nbar[i], t, maturity)?;
            let triple = pricing::PriceTriple::from_minimal_and_risk_neutral(s * vbar, s, loading)?;
            row(
                &mut w,
                &[
                    t.years(),
                    (s * ledger.value[k]).ln(),
                    triple.minimal.ln(),
                    triple.loading.ln(),
                    triple.risk_neutral.ln(),
                ],
            )?;
        }
        w.flush().map_err(io_err)
    })
}

/// First `len` points of a path.
fn prefix(path: &SampledPath, len: usize) -> SampledPath {
    let times = path.grid.times()[..len].iter().map(|t| t.years()).collect();
    SampledPath {
        grid: PathGrid::new(times).expect("prefix of a valid grid"),
        nbar: path.nbar[..len].to_vec(),
        seed: path.seed,
        path_index: path.path_index,
    }
}

fn params_required(config: &RunConfig) -> Result<MmmParams, CliError> {
    let data = load_series(config)?;
    resolve_params(config, data.as_ref())
}

pub fn simulate(config: &RunConfig) -> Result<(), CliError> {
    let params = params_required(config)?;
    let horizon = config.horizon.or(config.maturity).unwrap_or(DEFAULT_FIGURE_HORIZON);
    let grid = PathGrid::uniform(config.step, horizon)?;
    let paths = map_indexed(execution(config), config.paths, |i| {
        simulate_path_indexed(&params, &grid, config.seed, i as u64)
    });
    for (i, path) in paths.iter().enumerate() {
        write_file(&config.out, &format!("path_{i:04}.csv"), |w| Ok(path.write_csv(w)?))?;
    }
    Ok(())
}

pub fn hedge(config: &RunConfig) -> Result<(), CliError> {
    let params = params_required(config)?;
    let maturity = config
        .maturity
        .or(config.horizon)
        .ok_or_else(|| CliError::Usage("hedge needs --maturity or --horizon".into()))?;
    let horizon = config.horizon.unwrap_or(maturity);
    let maturity = year(maturity)?;
    let grid = PathGrid::uniform(config.step, horizon)?;
    let exec = execution(config);

    let runs = map_indexed(exec, config.paths, |i| {
        let path = simulate_path_indexed(&params, &grid, config.seed, i as u64);
        backtest_minimal_zcb(&params, &path, maturity).map(|ledger| (path, ledger))
    });
    let runs = runs.into_iter().collect::<Result<Vec<_>, _>>()?;
    let errors: Vec<f64> = runs.iter().map(|(_, l)| l.terminal_error()).collect();
    let error_stats = SampleStats::from_slice(&errors);
    let (path, minimal) = &runs[0];
    let bookkeeping_ok = runs.iter().all(|(_, l)| l.verify_bookkeeping().is_ok());

    let mut summary = String::new();
    summary.push_str(&format!(
        "seed={}\npaths={}\nmaturity={}\nstep={}\n",
        config.seed, config.paths, maturity, config.step
    ));
    summary.push_str(&format!("mean_abs_terminal_error={}\n", error_stats.mean));
    summary.push_str(&format!("std_error_terminal_error={}\n", error_stats.std_error));
    summary.push_str(&format!("path0_terminal_value={}\n", minimal.terminal_value()));
    summary.push_str(&format!("bookkeeping_exact={bookkeeping_ok}\n"));

    write_file(&config.out, "ledger_minimal.csv", |w| Ok(minimal.write_csv(w)?))?;
    if let Some(model) = config.catastrophe {
        let xi = config
            .xi
            .unwrap_or_else(|| sample_catastrophe_indexed(&model, config.seed, 0));
        let spec = loading_spec(config, 0.0)?;
        let loading = simulate_loading_indexed(&spec, &grid, config.seed, 0);
        let cat = risk_minimize_loading(&params, path, &model, xi, maturity, &loading)?;
        summary.push_str(&format!("lambda={}\nxi={}\n", model.lambda(), xi));
        summary.push_str(&format!("cat_terminal_benchmarked_pnl={}\n", cat.terminal_pnl()));
        summary.push_str(&format!("cat_bookkeeping_exact={}\n", cat.verify_bookkeeping().is_ok()));
        write_file(&config.out, "ledger_cat.csv", |w| Ok(cat.write_csv(w)?))?;
    }
    write_file(&config.out, "hedge_summary.txt", |w| {
        w.write_all(summary.as_bytes()).map_err(io_err)
    })
}

pub fn book(config: &RunConfig) -> Result<(), CliError> {
    let params = params_required(config)?;
    let model = config
        .catastrophe
        .ok_or_else(|| CliError::Usage("book needs --lambda".into()))?;
    let maturity = config.maturity.unwrap_or(DEFAULT_BOOK_MATURITY);
    let grid = PathGrid::uniform(config.step, config.horizon.unwrap_or(maturity))?;
    let seeds: Vec<u64> = (0..config.replications as u64)
        .map(|r| derive_seed(config.seed, r))
        .collect();
    let exec = execution(config);
    let results = config
        .contracts
        .iter()
        .map(|&n| diversify_book(&params, &model, n, &grid, year(maturity)?, &seeds, exec).map_err(CliError::from))
        .collect::<Result<Vec<_>, _>>()?;

    write_file(&config.out, "book.csv", |w| {
        let mut w = csv_writer(w, &["n_contracts", "replication", "seed", "book_avg_pnl"])?;
        for res in &results {
            for (r, avg) in res.replication_averages.iter().enumerate() {
                w.write_record([
                    res.n_contracts.to_string(),
                    r.to_string(),
                    seeds[r].to_string(),
                    avg.to_string(),
                ])
                .map_err(csv_err)?;
            }
        }
        w.flush().map_err(io_err)
    })?;
    write_file(&config.out, "book.txt", |w| {
        let mut s = format!(
            "seed={}\nlambda={}\nmaturity={maturity}\nreplications={}\n",
            config.seed,
            model.lambda(),
            seeds.len()
        );
        for res in &results {
            s.push_str(&format!(
                "mean_{}={}\n",
                res.n_contracts, res.avg_benchmarked_pnl_terminal
            ));
            s.push_str(&format!("rms_{}={}\n", res.n_contracts, res.rms_across_seeds));
        }
        if let (Some(first), Some(last)) = (results.first(), results.last()) {
            if results.len() > 1 {
                s.push_str(&format!(
                    "rms_ratio={}\n",
                    first.rms_across_seeds / last.rms_across_seeds
                ));
            }
        }
        w.write_all(s.as_bytes()).map_err(io_err)
    })
}
