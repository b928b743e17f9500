//! Run configuration: a `key=value` file, overridden by command-line flags,
//! with `MMM_SEED` as the default seed.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::Args;
use mmm_core::simulation::{CatastropheModel, LoadingSpec};
use mmm_core::MmmParams;

use crate::CliError;

pub const SEED_ENV: &str = "MMM_SEED";

/// Flags shared by every command. Values may also come from `--config`.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// key=value configuration file; flags take precedence over its entries
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// CSV with header `date,index[,rate]`
    #[arg(long, global = true)]
    pub data: Option<PathBuf>,
    /// Value the discounted index is rescaled to start at
    #[arg(long, global = true)]
    pub normalize: Option<String>,
    /// Model parameters as `alpha0,eta,n0`
    #[arg(long, global = true)]
    pub params: Option<String>,
    /// Calibration search interval for eta as `lo,hi`
    #[arg(long = "eta-bounds", global = true)]
    pub eta_bounds: Option<String>,
    /// Terminal-point weight for the calibration objective
    #[arg(long = "terminal-weight", global = true)]
    pub terminal_weight: Option<String>,
    /// Master seed (default from MMM_SEED, else 0)
    #[arg(long, global = true)]
    pub seed: Option<String>,
    /// Simulation / rebalancing step in years
    #[arg(long, global = true)]
    pub step: Option<String>,
    /// Simulation horizon in years
    #[arg(long, global = true)]
    pub horizon: Option<String>,
    /// Claim maturity in years
    #[arg(long, global = true)]
    pub maturity: Option<String>,
    /// Catastrophe hazard rate; selects the CAT bond
    #[arg(long, global = true)]
    pub lambda: Option<String>,
    /// CAT bond payoff convention: occurrence or principal-protected
    #[arg(long, global = true)]
    pub convention: Option<String>,
    /// Observed catastrophe time in years
    #[arg(long, global = true)]
    pub xi: Option<String>,
    /// Loading degree (initial value for a fluctuating loading)
    #[arg(long, global = true)]
    pub loading: Option<String>,
    /// Volatility of the martingale loading degree
    #[arg(long = "loading-vol", global = true)]
    pub loading_vol: Option<String>,
    /// Number of simulated paths
    #[arg(long, global = true)]
    pub paths: Option<String>,
    /// Book sizes, comma-separated
    #[arg(long, global = true)]
    pub contracts: Option<String>,
    /// Seed replications of the book experiment
    #[arg(long, global = true)]
    pub replications: Option<String>,
    /// Worker threads
    #[arg(long, global = true)]
    pub threads: Option<String>,
    /// Output directory
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Convention {
    Occurrence,
    PrincipalProtected,
}

/// Fully resolved settings of one run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    pub normalize: Option<f64>,
    pub params: Option<MmmParams>,
    pub eta_bounds: (f64, f64),
    pub terminal_weight: Option<f64>,
    pub seed: u64,
    pub step: f64,
    pub horizon: Option<f64>,
    pub maturity: Option<f64>,
    pub catastrophe: Option<CatastropheModel>,
    pub convention: Convention,
    pub xi: Option<f64>,
    pub loading: Option<f64>,
    pub loading_vol: f64,
    pub paths: usize,
    pub contracts: Vec<usize>,
    pub replications: usize,
    pub threads: Option<usize>,
    pub out: PathBuf,
}

impl RunConfig {
    pub fn resolve(flags: &Flags) -> Result<Self, CliError> {
        let file = match &flags.config {
            Some(path) => read_config(path)?,
            None => BTreeMap::new(),
        };
        let get =
            |flag: &Option<String>, key: &str| -> Option<String> { flag.clone().or_else(|| file.get(key).cloned()) };
        let path_of = |flag: &Option<PathBuf>, key: &str| -> Option<PathBuf> {
            flag.clone().or_else(|| file.get(key).map(PathBuf::from))
        };

        let seed = match get(&flags.seed, "seed") {
            Some(s) => parse_num::<u64>("seed", &s)?,
            None => match std::env::var(SEED_ENV) {
                Ok(s) => parse_num::<u64>(SEED_ENV, &s)?,
                Err(_) => 0,
            },
        };
        let params = get(&flags.params, "params")
            .map(|s| {
                let v = parse_list("params", &s, 3)?;
                MmmParams::new(v[0], v[1], v[2]).map_err(CliError::from)
            })
            .transpose()?;
        let eta_bounds = match get(&flags.eta_bounds, "eta-bounds") {
            Some(s) => {
                let v = parse_list("eta-bounds", &s, 2)?;
                (v[0], v[1])
            }
            None => mmm_core::calibration::DEFAULT_ETA_BOUNDS,
        };
        let catastrophe = get(&flags.lambda, "lambda")
            .map(|s| CatastropheModel::new(parse_num("lambda", &s)?).map_err(CliError::from))
            .transpose()?;
        let convention = match get(&flags.convention, "convention").as_deref() {
            None | Some("occurrence") => Convention::Occurrence,
            Some("principal-protected") | Some("principal_protected") => Convention::PrincipalProtected,
            Some(other) => {
                return Err(CliError::Usage(format!(
                    "unknown convention {other:?} (expected occurrence or principal-protected)"
                )))
            }
        };
        let opt_f64 = |flag: &Option<String>, key: &str| -> Result<Option<f64>, CliError> {
            get(flag, key).map(|s| parse_num::<f64>(key, &s)).transpose()
        };
        let positive = |name: &str, v: Option<f64>| -> Result<Option<f64>, CliError> {
            match v {
                Some(x) if !(x > 0.0 && x.is_finite()) => {
                    Err(CliError::Usage(format!("{name} must be positive, got {x}")))
                }
                other => Ok(other),
            }
        };
        let loading = opt_f64(&flags.loading, "loading")?;
        if let Some(l) = loading {
            if !(l >= 0.0) {
                return Err(CliError::Usage(format!("loading must be non-negative, got {l}")));
            }
        }
        let loading_vol = opt_f64(&flags.loading_vol, "loading-vol")?.unwrap_or(0.0);
        if !(loading_vol >= 0.0) {
            return Err(CliError::Usage(format!(
                "loading-vol must be non-negative, got {loading_vol}"
            )));
        }
        let count = |flag: &Option<String>, key: &str, default: usize| -> Result<usize, CliError> {
            let n = get(flag, key)
                .map(|s| parse_num::<usize>(key, &s))
                .transpose()?
                .unwrap_or(default);
            if n == 0 {
                Err(CliError::Usage(format!("{key} must be at least 1")))
            } else {
                Ok(n)
            }
        };
        let threads = get(&flags.threads, "threads")
            .map(|s| parse_num::<usize>("threads", &s))
            .transpose()?;

        Ok(Self {
            data: path_of(&flags.data, "data"),
            normalize: positive("normalize", opt_f64(&flags.normalize, "normalize")?)?.or(Some(10.0)),
            params,
            eta_bounds,
            terminal_weight: positive("terminal-weight", opt_f64(&flags.terminal_weight, "terminal-weight")?)?,
            seed,
            step: positive("step", opt_f64(&flags.step, "step")?)?.unwrap_or(1.0 / 12.0),
            horizon: positive("horizon", opt_f64(&flags.horizon, "horizon")?)?,
            maturity: positive("maturity", opt_f64(&flags.maturity, "maturity")?)?,
            catastrophe,
            convention,
            xi: positive("xi", opt_f64(&flags.xi, "xi")?)?,
            loading,
            loading_vol,
            paths: count(&flags.paths, "paths", 1)?,
            contracts: match get(&flags.contracts, "contracts") {
                Some(s) => {
                    let v = s
                        .split(',')
                        .map(|x| parse_num::<usize>("contracts", x))
                        .collect::<Result<Vec<_>, _>>()?;
                    if v.contains(&0) {
                        return Err(CliError::Usage("contracts must be at least 1".into()));
                    }
                    v
                }
                None => vec![100, 10_000],
            },
            replications: count(&flags.replications, "replications", 50)?,
            threads,
            out: path_of(&flags.out, "out").unwrap_or_else(|| PathBuf::from(".")),
        })
    }
}

/// Parses `key=value` lines; `#` starts a comment. Keys accept `-` or `_`.
pub fn read_config(path: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut map = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("config line {}: expected key=value", i + 1)))?;
        map.insert(k.trim().replace('_', "-"), v.trim().to_string());
    }
    Ok(map)
}

fn parse_num<T: std::str::FromStr>(name: &str, s: &str) -> Result<T, CliError> {
    s.trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("cannot parse {name} value {s:?}")))
}

fn parse_list(name: &str, s: &str, len: usize) -> Result<Vec<f64>, CliError> {
    let v = s
        .split(',')
        .map(|x| parse_num::<f64>(name, x))
        .collect::<Result<Vec<_>, _>>()?;
    if v.len() != len {
        return Err(CliError::Usage(format!(
            "{name} expects {len} comma-separated numbers, got {s:?}"
        )));
    }
    Ok(v)
}

pub fn loading_spec(config: &RunConfig, default: f64) -> Result<LoadingSpec, CliError> {
    let level = config.loading.unwrap_or(default);
    let spec = if config.loading_vol > 0.0 {
        LoadingSpec::martingale(level, config.loading_vol)
    } else {
        LoadingSpec::constant(level)
    };
    spec.map_err(CliError::from)
}
