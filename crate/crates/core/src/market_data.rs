//! Index and short-rate ingestion, savings account and discounted NP series,
//! and the realized quadratic variation of `sqrt(nbar)`.

use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::model::YearTime;

/// Days per year for ACT/365.25 year fractions.
pub const DAYS_PER_YEAR: f64 = 365.25;

#[derive(Debug, Clone, PartialEq)]
pub struct RawRow {
    pub date: NaiveDate,
    pub index_level: f64,
    /// Annualized continuously compounded short rate. `None` when the cell
    /// (or the whole column) is absent.
    pub short_rate: Option<f64>,
}

/// Validated input rows: dates strictly increasing, positive index levels.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSeries {
    rows: Vec<RawRow>,
    /// Set when any short rate was missing and defaulted to zero.
    pub rates_defaulted: bool,
}

impl RawSeries {
    pub fn new(rows: Vec<RawRow>) -> Result<Self> {
        for (i, row) in rows.iter().enumerate() {
            // 1-based data rows, header excluded
            let row_no = i + 1;
            if !(row.index_level.is_finite() && row.index_level > 0.0) {
                return Err(Error::NonPositiveIndex {
                    row: row_no,
                    value: row.index_level,
                });
            }
            if let Some(r) = row.short_rate {
                if !r.is_finite() {
                    return Err(Error::Parse {
                        row: row_no,
                        message: format!("short rate {r} is not finite"),
                    });
                }
            }
            if i > 0 && row.date <= rows[i - 1].date {
                return Err(Error::NonIncreasingDate {
                    row: row_no,
                    date: row.date.to_string(),
                });
            }
        }
        let rates_defaulted = rows.iter().any(|r| r.short_rate.is_none());
        Ok(Self { rows, rates_defaulted })
    }

    pub fn rows(&self) -> &[RawRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Reads a `date,index[,rate]` CSV file.
pub fn load_raw(path: impl AsRef<Path>) -> Result<RawSeries> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_raw(file)
}

/// Parses the CSV contract from any reader. Errors name the 1-based data row.
pub fn read_raw(reader: impl Read) -> Result<RawSeries> {
    let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = csv.headers()?.clone();
    let column = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let (date_col, index_col) = match (column("date"), column("index")) {
        (Some(d), Some(i)) => (d, i),
        _ => {
            return Err(Error::Parse {
                row: 0,
                message: "header must contain `date` and `index` columns".into(),
            })
        }
    };
    let rate_col = column("rate");

    let mut rows = Vec::new();
    for (i, record) in csv.records().enumerate() {
        let row_no = i + 1;
        let record = record.map_err(|e| Error::Parse {
            row: row_no,
            message: e.to_string(),
        })?;
        let field = |col: usize| record.get(col).unwrap_or("");
        let date = NaiveDate::parse_from_str(field(date_col), "%Y-%m-%d").map_err(|e| Error::Parse {
            row: row_no,
            message: format!("bad date {:?}: {e}", field(date_col)),
        })?;
        let index_level = parse_number(field(index_col), row_no, "index")?;
        let short_rate = match rate_col.map(field) {
            None | Some("") => None,
            Some(s) => Some(parse_number(s, row_no, "rate")?),
        };
        rows.push(RawRow {
            date,
            index_level,
            short_rate,
        });
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            row: 0,
            message: "no data rows".into(),
        });
    }
    RawSeries::new(rows)
}

fn parse_number(s: &str, row: usize, what: &str) -> Result<f64> {
    s.parse::<f64>().map_err(|_| Error::Parse {
        row,
        message: format!("cannot parse {what} value {s:?}"),
    })
}

/// Time-stamped discounted NP values and the savings account that discounts them.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscountedSeries {
    pub t: Vec<YearTime>,
    pub nbar: Vec<f64>,
    pub savings: Vec<f64>,
}

impl DiscountedSeries {
    pub fn new(t: Vec<YearTime>, nbar: Vec<f64>, savings: Vec<f64>) -> Result<Self> {
        if t.len() < 2 {
            return Err(Error::InsufficientData(format!(
                "a discounted series needs at least 2 points, got {}",
                t.len()
            )));
        }
        for (what, len) in [("nbar", nbar.len()), ("savings", savings.len())] {
            if len != t.len() {
                return Err(Error::LengthMismatch {
                    what,
                    got: len,
                    expected: t.len(),
                });
            }
        }
        if let Some(&bad) = nbar.iter().chain(&savings).find(|v| !(**v > 0.0)) {
            return Err(Error::InvalidParameter {
                name: "nbar/savings",
                value: bad,
                reason: "series values must be positive",
            });
        }
        if t.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid("times must be strictly increasing".into()));
        }
        Ok(Self { t, nbar, savings })
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "nbar", "savings"])?;
        for i in 0..self.len() {
            w.write_record([
                self.t[i].to_string(),
                self.nbar[i].to_string(),
                self.savings[i].to_string(),
            ])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

/// Builds the savings account by piecewise-exponential compounding of the
/// left-endpoint short rate and divides it out of the index. With
/// `normalize_to`, the discounted series is rescaled to start at that value.
pub fn build_discounted(raw: &RawSeries, normalize_to: Option<f64>) -> Result<DiscountedSeries> {
    let rows = raw.rows();
    if rows.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 rows, got {}",
            rows.len()
        )));
    }
    if let Some(c) = normalize_to {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::InvalidParameter {
                name: "normalize_to",
                value: c,
                reason: "must be finite and positive",
            });
        }
    }
    let first = rows[0].date;
    let t: Vec<YearTime> = rows
        .iter()
        .map(|r| YearTime::new((r.date - first).num_days() as f64 / DAYS_PER_YEAR))
        .collect::<Result<_>>()?;

    let mut savings = Vec::with_capacity(rows.len());
    savings.push(1.0);
    for i in 1..rows.len() {
        let rate = rows[i - 1].short_rate.unwrap_or(0.0);
        let dt = t[i].years() - t[i - 1].years();
        savings.push(savings[i - 1] * (rate * dt).exp());
    }

    let mut nbar: Vec<f64> = rows.iter().zip(&savings).map(|(r, s)| r.index_level / s).collect();
    if let Some(target) = normalize_to {
        let scale = target / nbar[0];
        for v in nbar.iter_mut().skip(1) {
            *v *= scale;
        }
        nbar[0] = target;
    }
    DiscountedSeries::new(t, nbar, savings)
}

/// Running realized quadratic variation of `sqrt(nbar)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticVariationCurve {
    pub t: Vec<YearTime>,
    pub qv: Vec<f64>,
}

impl QuadraticVariationCurve {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "qv"])?;
        for (t, q) in self.t.iter().zip(&self.qv) {
            w.write_record([t.to_string(), q.to_string()])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

pub fn quadratic_variation(series: &DiscountedSeries) -> QuadraticVariationCurve {
    quadratic_variation_of(&series.t, &series.nbar)
}

/// Realized QV of `sqrt(values)` on the given time stamps.
pub fn quadratic_variation_of(t: &[YearTime], values: &[f64]) -> QuadraticVariationCurve {
    let mut qv = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    qv.push(acc);
    for w in values.windows(2) {
        acc += (w[1].sqrt() - w[0].sqrt()).powi(2);
        qv.push(acc);
    }
    QuadraticVariationCurve { t: t.to_vec(), qv }
}
