#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::process::{Command, Output};

use chrono::{Months, NaiveDate};
use mmm_core::model::rho;
use mmm_core::simulation::{simulate_path_indexed, PathGrid};
use mmm_core::{MmmParams, YearTime};

pub const DAYS_PER_YEAR: f64 = 365.25;

pub fn mmm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mmm"))
        .args(args)
        .env_remove("MMM_SEED")
        .output()
        .expect("failed to spawn mmm")
}

pub fn mmm_ok(args: &[&str]) -> Output {
    let out = mmm(args);
    assert!(
        out.status.success(),
        "mmm {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

/// Every file under `dir`, keyed by file name.
pub fn dir_contents(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect()
}

pub fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(|v| v.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

pub fn read_key_values(path: &Path) -> BTreeMap<String, String> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

fn monthly_dates(months: u32) -> Vec<NaiveDate> {
    let start = NaiveDate::from_ymd_opt(1926, 1, 1).unwrap();
    (0..=months).map(|m| start + Months::new(m)).collect()
}

fn times_of(dates: &[NaiveDate]) -> Vec<f64> {
    dates
        .iter()
        .map(|d| (*d - dates[0]).num_days() as f64 / DAYS_PER_YEAR)
        .collect()
}

fn write_rows(path: &Path, dates: &[NaiveDate], index: &[f64], rate: f64) {
    let mut s = String::from("date,index,rate\n");
    for (d, x) in dates.iter().zip(index) {
        writeln!(s, "{},{},{}", d.format("%Y-%m-%d"), x, rate).unwrap();
    }
    std::fs::write(path, s).unwrap();
}

/// Monthly index file whose discounted, normalized series is a simulated
/// path of `params` under a constant short rate.
pub fn write_simulated_data(path: &Path, params: &MmmParams, years: u32, seed: u64, rate: f64) {
    let dates = monthly_dates(12 * years);
    let t = times_of(&dates);
    let grid = PathGrid::new(t.clone()).unwrap();
    let sim = simulate_path_indexed(params, &grid, seed, 0);
    let mut savings = 1.0;
    let mut index = Vec::with_capacity(t.len());
    for i in 0..t.len() {
        if i > 0 {
            savings *= (rate * (t[i] - t[i - 1])).exp();
        }
        index.push(sim.nbar[i] * savings);
    }
    write_rows(path, &dates, &index, rate);
}

/// Monthly index file whose realized QV of `sqrt(nbar)` equals `rho` exactly
/// at every date: `sqrt(nbar)` zig-zags by `sqrt(rho_{i+1} - rho_i)`.
pub fn write_exact_rho_data(path: &Path, params: &MmmParams, years: u32) {
    let dates = monthly_dates(12 * years);
    let t = times_of(&dates);
    let mut root = params.n0().sqrt();
    let mut index = vec![params.n0()];
    for i in 1..t.len() {
        let d = rho(params, YearTime::new(t[i]).unwrap()) - rho(params, YearTime::new(t[i - 1]).unwrap());
        root += if i % 2 == 1 { d.sqrt() } else { -d.sqrt() };
        index.push(root * root);
    }
    write_rows(path, &dates, &index, 0.0);
}
