//! Price and sector loading, daily returns, and month-end rolling windows.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};
use tracing::warn;

use crate::error::{Error, Result};
use crate::numerics::Matrix;

pub const DEFAULT_MIN_COVERAGE: f64 = 0.95;

/// The eleven GICS sectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sector {
    Energy,
    Materials,
    Industrials,
    ConsumerDiscretionary,
    ConsumerStaples,
    HealthCare,
    Financials,
    InformationTechnology,
    CommunicationServices,
    Utilities,
    RealEstate,
}

impl Sector {
    pub const ALL: [Sector; 11] = [
        Sector::Energy,
        Sector::Materials,
        Sector::Industrials,
        Sector::ConsumerDiscretionary,
        Sector::ConsumerStaples,
        Sector::HealthCare,
        Sector::Financials,
        Sector::InformationTechnology,
        Sector::CommunicationServices,
        Sector::Utilities,
        Sector::RealEstate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Sector::Energy => "Energy",
            Sector::Materials => "Materials",
            Sector::Industrials => "Industrials",
            Sector::ConsumerDiscretionary => "Consumer Discretionary",
            Sector::ConsumerStaples => "Consumer Staples",
            Sector::HealthCare => "Health Care",
            Sector::Financials => "Financials",
            Sector::InformationTechnology => "Information Technology",
            Sector::CommunicationServices => "Communication Services",
            Sector::Utilities => "Utilities",
            Sector::RealEstate => "Real Estate",
        }
    }

    /// Two-digit GICS sector code.
    pub fn gics_code(self) -> u8 {
        10 + 5 * self as u8
    }
}

impl fmt::Display for Sector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Sector {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Sector::ALL
            .into_iter()
            .find(|sec| sec.name() == s)
            .ok_or_else(|| s.to_string())
    }
}

/// Ticker → sector assignment.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SectorMap(BTreeMap<String, Sector>);

impl SectorMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, ticker: impl Into<String>, sector: Sector) {
        self.0.insert(ticker.into(), sector);
    }

    pub fn get(&self, ticker: &str) -> Option<Sector> {
        self.0.get(ticker).copied()
    }

    pub fn require(&self, ticker: &str) -> Result<Sector> {
        self.get(ticker)
            .ok_or_else(|| Error::UnmappedTicker(ticker.to_string()))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, Sector)> {
        self.0.iter().map(|(t, s)| (t.as_str(), *s))
    }
}

impl FromIterator<(String, Sector)> for SectorMap {
    fn from_iter<I: IntoIterator<Item = (String, Sector)>>(iter: I) -> Self {
        SectorMap(iter.into_iter().collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PricePanel {
    pub dates: Vec<NaiveDate>,
    pub tickers: Vec<String>,
    /// `[day × ticker]`
    pub close: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReturnPanel {
    pub dates: Vec<NaiveDate>,
    pub tickers: Vec<String>,
    /// `[day × ticker]` simple returns.
    pub returns: Matrix,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CoverageReport {
    /// `(ticker, fraction of trading days observed)` for each dropped ticker.
    pub dropped: Vec<(String, f64)>,
    /// Cells filled from a neighbouring observation.
    pub filled_cells: usize,
}

#[derive(Debug, Deserialize)]
struct PriceRow {
    date: String,
    ticker: String,
    close: String,
}

#[derive(Debug, Deserialize)]
struct SectorRow {
    ticker: String,
    sector: String,
}

fn check_header(path: &Path, headers: &csv::StringRecord, expected: &[&str]) -> Result<()> {
    let got: Vec<&str> = headers.iter().map(str::trim).collect();
    if got != expected {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: format!("expected header {}, got {}", expected.join(","), got.join(",")),
        });
    }
    Ok(())
}

fn open_csv(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file))
}

/// Load a `date,ticker,close` price file.
///
/// Tickers observed on fewer than `min_coverage` of the trading days (the
/// union of all dates in the file) are dropped; remaining gaps are
/// forward-filled, and leading gaps take the first observed price.
pub fn load_prices(path: &Path, min_coverage: f64) -> Result<(PricePanel, CoverageReport)> {
    let mut reader = open_csv(path)?;
    check_header(path, reader.headers()?, &["date", "ticker", "close"])?;

    let mut cells: HashMap<(NaiveDate, String), f64> = HashMap::new();
    let mut dates = BTreeSet::new();
    let mut tickers = BTreeSet::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let row: PriceRow = record
            .deserialize(None)
            .map_err(|e| parse_err(e.to_string()))?;
        let date = NaiveDate::parse_from_str(&row.date, "%Y-%m-%d")
            .map_err(|e| parse_err(format!("bad date {:?}: {e}", row.date)))?;
        let close: f64 = row
            .close
            .parse()
            .map_err(|_| parse_err(format!("non-numeric close {:?}", row.close)))?;
        if !close.is_finite() {
            return Err(parse_err(format!("non-finite close {:?}", row.close)));
        }
        if row.ticker.is_empty() {
            return Err(parse_err("empty ticker".into()));
        }
        dates.insert(date);
        tickers.insert(row.ticker.clone());
        if cells.insert((date, row.ticker.clone()), close).is_some() {
            return Err(parse_err(format!("duplicate row for {} on {date}", row.ticker)));
        }
    }
    if cells.is_empty() {
        return Err(Error::Empty(format!("no price rows in {}", path.display())));
    }

    let dates: Vec<NaiveDate> = dates.into_iter().collect();
    let n_days = dates.len();
    let mut report = CoverageReport::default();
    let mut kept = Vec::new();
    let mut columns = Vec::new();
    for ticker in tickers {
        let observed: Vec<Option<f64>> = dates
            .iter()
            .map(|d| cells.get(&(*d, ticker.clone())).copied())
            .collect();
        let present = observed.iter().filter(|v| v.is_some()).count();
        let coverage = present as f64 / n_days as f64;
        if coverage < min_coverage {
            report.dropped.push((ticker, coverage));
            continue;
        }
        let first = observed.iter().flatten().next().copied().expect("ticker has a row");
        let mut last = first;
        let col: Vec<f64> = observed
            .into_iter()
            .map(|v| match v {
                Some(p) => {
                    last = p;
                    p
                }
                None => {
                    report.filled_cells += 1;
                    last
                }
            })
            .collect();
        kept.push(ticker);
        columns.push(col);
    }
    if kept.is_empty() {
        return Err(Error::Empty(format!(
            "every ticker in {} is below coverage {min_coverage}",
            path.display()
        )));
    }
    for (t, c) in &report.dropped {
        warn!(ticker = %t, coverage = c, "dropping ticker below coverage threshold");
    }
    let close = Matrix::from_fn(n_days, kept.len(), |d, t| columns[t][d]);
    Ok((
        PricePanel {
            dates,
            tickers: kept,
            close,
        },
        report,
    ))
}

/// Load a `ticker,sector` file; labels must be GICS sector names.
pub fn load_sectors(path: &Path) -> Result<SectorMap> {
    let mut reader = open_csv(path)?;
    let headers = reader.headers()?.clone();
    if headers.is_empty() {
        return Err(Error::Empty(format!("sector file {} is empty", path.display())));
    }
    check_header(path, &headers, &["ticker", "sector"])?;
    let mut map = SectorMap::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let row: SectorRow = record.deserialize(None).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line,
            message: e.to_string(),
        })?;
        let sector = row.sector.parse::<Sector>().map_err(|label| Error::UnknownSector {
            ticker: row.ticker.clone(),
            label,
        })?;
        map.insert(row.ticker, sector);
    }
    if map.is_empty() {
        return Err(Error::Empty(format!("sector file {} has no rows", path.display())));
    }
    Ok(map)
}

pub fn compute_returns(panel: &PricePanel) -> Result<ReturnPanel> {
    let n_days = panel.dates.len();
    if n_days < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 days of prices, got {n_days}"
        )));
    }
    for (t, ticker) in panel.tickers.iter().enumerate() {
        for (d, date) in panel.dates.iter().enumerate() {
            let price = panel.close[(d, t)];
            if price <= 0.0 || price.is_nan() {
                return Err(Error::NonPositivePrice {
                    ticker: ticker.clone(),
                    date: *date,
                    price,
                });
            }
        }
    }
    let returns = Matrix::from_fn(n_days - 1, panel.tickers.len(), |d, t| {
        let prev = panel.close[(d, t)];
        (panel.close[(d + 1, t)] - prev) / prev
    });
    Ok(ReturnPanel {
        dates: panel.dates[1..].to_vec(),
        tickers: panel.tickers.clone(),
        returns,
    })
}

/// A month-end anchored look-back over a contiguous range of return days.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Window {
    /// Last calendar day of the anchor month.
    pub anchor: NaiveDate,
    pub lookback_months: u32,
    /// Index of the first return day in the window.
    pub start: usize,
    /// One past the last return day.
    pub end: usize,
}

impl Window {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }
}

fn month_index(d: NaiveDate) -> i32 {
    d.year() * 12 + d.month0() as i32
}

pub(crate) fn month_end(month_idx: i32) -> NaiveDate {
    let (y, m) = (month_idx.div_euclid(12), month_idx.rem_euclid(12) as u32 + 1);
    let next_first = if m == 12 {
        NaiveDate::from_ymd_opt(y + 1, 1, 1)
    } else {
        NaiveDate::from_ymd_opt(y, m + 1, 1)
    };
    next_first.and_then(|d| d.pred_opt()).expect("valid calendar month")
}

/// Month-end windows with `n` full calendar months of look-back.
///
/// The first month of the panel is burn-in (its opening day has no return),
/// so an `M`-month span yields `M - n` windows.
pub fn month_end_windows(rp: &ReturnPanel, n: u32) -> Vec<Window> {
    let (Some(first), Some(last)) = (rp.dates.first(), rp.dates.last()) else {
        warn!("empty return panel, no windows");
        return Vec::new();
    };
    let first_m = month_index(*first);
    let total_months = month_index(*last) - first_m + 1;
    if n == 0 || total_months <= n as i32 {
        warn!(total_months, lookback = n, "panel too short for look-back");
        return Vec::new();
    }
    let mut windows = Vec::new();
    for anchor_m in (first_m + n as i32)..=month_index(*last) {
        let start_m = anchor_m - n as i32 + 1;
        let start = rp.dates.partition_point(|d| month_index(*d) < start_m);
        let end = rp.dates.partition_point(|d| month_index(*d) <= anchor_m);
        let anchor = month_end(anchor_m);
        if end <= start {
            warn!(%anchor, "no trading days in window, skipped");
            continue;
        }
        windows.push(Window {
            anchor,
            lookback_months: n,
            start,
            end,
        });
    }
    windows
}

/// Symmetric unit-diagonal correlation matrix tagged with its tickers.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationMatrix {
    pub tickers: Vec<String>,
    pub values: Matrix,
    pub anchor: Option<NaiveDate>,
    /// Number of return observations behind the estimate.
    pub n_days: usize,
    /// Tickers removed for zero variance in the window.
    pub excluded: Vec<String>,
}

impl CorrelationMatrix {
    /// Wrap an existing matrix; checks shape and symmetry only.
    pub fn new(tickers: Vec<String>, values: Matrix, n_days: usize) -> Result<Self> {
        if !values.is_square() || values.rows() != tickers.len() {
            return Err(Error::Dimension(format!(
                "{} tickers for a {}x{} matrix",
                tickers.len(),
                values.rows(),
                values.cols()
            )));
        }
        let asym = values.max_asymmetry();
        if asym > 1e-12 {
            return Err(Error::NotSymmetric(asym));
        }
        Ok(Self {
            tickers,
            values,
            anchor: None,
            n_days,
            excluded: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.tickers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tickers.is_empty()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[(i, j)]
    }

    pub fn with_values(&self, values: Matrix) -> Self {
        Self {
            values,
            ..self.clone()
        }
    }
}

/// Pearson correlation over a window; zero-variance tickers are excluded.
pub fn pearson_correlation(rp: &ReturnPanel, w: &Window) -> Result<CorrelationMatrix> {
    let days = w.len();
    if days < 2 || w.end > rp.dates.len() {
        return Err(Error::InvalidArgument(format!(
            "window ending {} has {days} days",
            w.anchor
        )));
    }
    let mut tickers = Vec::new();
    let mut excluded = Vec::new();
    let mut centred: Vec<Vec<f64>> = Vec::new();
    let mut norms = Vec::new();
    for (t, ticker) in rp.tickers.iter().enumerate() {
        let col: Vec<f64> = (w.start..w.end).map(|d| rp.returns[(d, t)]).collect();
        let first = col[0];
        if col.iter().all(|&x| x == first) {
            excluded.push(ticker.clone());
            continue;
        }
        let mean = col.iter().sum::<f64>() / days as f64;
        let c: Vec<f64> = col.iter().map(|x| x - mean).collect();
        norms.push(c.iter().map(|x| x * x).sum::<f64>().sqrt());
        centred.push(c);
        tickers.push(ticker.clone());
    }
    if !excluded.is_empty() {
        warn!(anchor = %w.anchor, excluded = ?excluded, "zero-variance tickers excluded");
    }
    let n = tickers.len();
    let mut values = Matrix::identity(n);
    for i in 0..n {
        for j in (i + 1)..n {
            let dot: f64 = centred[i].iter().zip(&centred[j]).map(|(a, b)| a * b).sum();
            let r = (dot / (norms[i] * norms[j])).clamp(-1.0, 1.0);
            values[(i, j)] = r;
            values[(j, i)] = r;
        }
    }
    Ok(CorrelationMatrix {
        tickers,
        values,
        anchor: Some(w.anchor),
        n_days: days,
        excluded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn ymd(y: i32, m: u32, d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, d).unwrap()
    }

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    fn panel(prices: &[f64]) -> PricePanel {
        let dates = (0..prices.len()).map(|i| ymd(2020, 1, 1 + i as u32)).collect();
        PricePanel {
            dates,
            tickers: vec!["A".into()],
            close: Matrix::from_vec(prices.len(), 1, prices.to_vec()).unwrap(),
        }
    }

    #[test]
    fn full_coverage_passes_through() {
        let mut csv = String::from("date,ticker,close\n");
        for d in 1..=5 {
            for (t, base) in [("AAA", 10.0), ("BBB", 20.0), ("CCC", 30.0)] {
                csv.push_str(&format!("2021-03-0{d},{t},{}\n", base + d as f64));
            }
        }
        let f = write_tmp(&csv);
        let (p, report) = load_prices(f.path(), 0.95).unwrap();
        assert_eq!((p.close.rows(), p.close.cols()), (5, 3));
        assert!(report.dropped.is_empty());
        assert_eq!(p.close[(4, 1)], 25.0);
    }

    #[test]
    fn sparse_ticker_dropped() {
        // 10 days; LOW misses 4 of them (60% coverage)
        let mut csv = String::from("date,ticker,close\n");
        for d in 1..=10 {
            csv.push_str(&format!("2021-03-{d:02},AAA,{}\n", 10 + d));
            csv.push_str(&format!("2021-03-{d:02},BBB,{}\n", 20 + d));
            if d > 4 {
                csv.push_str(&format!("2021-03-{d:02},LOW,{}\n", 30 + d));
            }
        }
        let f = write_tmp(&csv);
        let (p, report) = load_prices(f.path(), 0.95).unwrap();
        assert_eq!(p.tickers, vec!["AAA", "BBB"]);
        assert_eq!(report.dropped.len(), 1);
        assert!((report.dropped[0].1 - 0.6).abs() < 1e-12);
    }

    #[test]
    fn gaps_forward_filled() {
        let csv = "date,ticker,close\n2021-01-04,A,10\n2021-01-05,A,11\n2021-01-06,A,12\n\
                   2021-01-04,B,5\n2021-01-06,B,6\n";
        let f = write_tmp(csv);
        let (p, report) = load_prices(f.path(), 0.5).unwrap();
        assert_eq!(p.close.column(1), vec![5.0, 5.0, 6.0]);
        assert_eq!(report.filled_cells, 1);
    }

    #[test]
    fn non_numeric_price_names_line() {
        let f = write_tmp("date,ticker,close\n2021-01-04,A,10\n2021-01-05,A,abc\n");
        match load_prices(f.path(), 0.9) {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 3);
                assert!(message.contains("abc"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn empty_price_file_is_fatal() {
        let f = write_tmp("date,ticker,close\n");
        assert!(matches!(load_prices(f.path(), 0.9), Err(Error::Empty(_))));
    }

    #[test]
    fn sector_file_roundtrip_and_errors() {
        let f = write_tmp("ticker,sector\nXOM,Energy\nAAPL,Information Technology\n");
        let m = load_sectors(f.path()).unwrap();
        assert_eq!(m.get("AAPL"), Some(Sector::InformationTechnology));
        let bad = write_tmp("ticker,sector\nXOM,Oil\n");
        assert!(matches!(load_sectors(bad.path()), Err(Error::UnknownSector { .. })));
        let empty = write_tmp("");
        assert!(load_sectors(empty.path()).is_err());
    }

    #[test]
    fn gics_codes() {
        assert_eq!(Sector::Energy.gics_code(), 10);
        assert_eq!(Sector::RealEstate.gics_code(), 60);
    }

    #[test]
    fn simple_returns() {
        let r = compute_returns(&panel(&[100.0, 110.0])).unwrap();
        assert!((r.returns[(0, 0)] - 0.10).abs() < 1e-15);
        let r = compute_returns(&panel(&[50.0, 50.0, 50.0])).unwrap();
        assert_eq!(r.returns.column(0), vec![0.0, 0.0]);
        // hand arithmetic: 95/100 - 1 = -0.05, 104.5/95 - 1 = 0.10
        let r = compute_returns(&panel(&[100.0, 95.0, 104.5])).unwrap();
        assert!((r.returns[(0, 0)] + 0.05).abs() < 1e-15);
        assert!((r.returns[(1, 0)] - 0.10).abs() < 1e-15);
    }

    #[test]
    fn nonpositive_price_rejected() {
        let err = compute_returns(&panel(&[1.0, 0.0, 2.0])).unwrap_err();
        assert!(matches!(err, Error::NonPositivePrice { ref ticker, .. } if ticker == "A"));
    }

    fn business_day_returns(first: NaiveDate, months: u32) -> ReturnPanel {
        let last = month_end(month_index(first) + months as i32 - 1);
        let mut dates = Vec::new();
        let mut d = first;
        while d <= last {
            if d.weekday().num_days_from_monday() < 5 {
                dates.push(d);
            }
            d = d.succ_opt().unwrap();
        }
        // the first day only supplies a price, mirroring compute_returns
        let dates = dates[1..].to_vec();
        let n = dates.len();
        ReturnPanel {
            dates,
            tickers: vec!["A".into()],
            returns: Matrix::zeros(n, 1),
        }
    }

    #[test]
    fn window_counts_follow_span() {
        let rp = business_day_returns(ymd(2017, 7, 3), 85);
        for (n, expected) in [(3, 82), (6, 79), (12, 73), (24, 61)] {
            assert_eq!(month_end_windows(&rp, n).len(), expected);
        }
        let short = business_day_returns(ymd(2020, 1, 1), 4);
        let w = month_end_windows(&short, 3);
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].anchor, ymd(2020, 4, 30));
        assert_eq!(short.dates[w[0].start], ymd(2020, 2, 3));
        assert_eq!(short.dates[w[0].end - 1], ymd(2020, 4, 30));
        assert!(month_end_windows(&short, 4).is_empty());
    }

    fn returns_panel(cols: &[Vec<f64>]) -> ReturnPanel {
        let n = cols[0].len();
        ReturnPanel {
            dates: (0..n).map(|i| ymd(2020, 1, 1 + i as u32)).collect(),
            tickers: (0..cols.len()).map(|i| format!("T{i}")).collect(),
            returns: Matrix::from_fn(n, cols.len(), |d, t| cols[t][d]),
        }
    }

    fn whole(rp: &ReturnPanel) -> Window {
        Window {
            anchor: ymd(2020, 1, 31),
            lookback_months: 1,
            start: 0,
            end: rp.dates.len(),
        }
    }

    #[test]
    fn perfect_and_anti_correlation() {
        let x = vec![0.01, -0.02, 0.03, 0.0, 0.015];
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let rp = returns_panel(&[x.clone(), x.clone(), neg]);
        let c = pearson_correlation(&rp, &whole(&rp)).unwrap();
        assert!((c.get(0, 1) - 1.0).abs() < 1e-15);
        assert!((c.get(0, 2) + 1.0).abs() < 1e-15);
    }

    #[test]
    fn matches_double_loop_oracle() {
        let cols = vec![
            vec![0.010, -0.004, 0.007, 0.012, -0.009, 0.003],
            vec![0.002, 0.001, -0.006, 0.008, -0.001, 0.004],
            vec![-0.011, 0.005, 0.002, -0.003, 0.009, 0.000],
        ];
        let rp = returns_panel(&cols);
        let c = pearson_correlation(&rp, &whole(&rp)).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let n = 6.0;
                let mi: f64 = cols[i].iter().sum::<f64>() / n;
                let mj: f64 = cols[j].iter().sum::<f64>() / n;
                let mut sij = 0.0;
                let mut sii = 0.0;
                let mut sjj = 0.0;
                for (x, y) in cols[i].iter().zip(&cols[j]) {
                    sij += (x - mi) * (y - mj);
                    sii += (x - mi) * (x - mi);
                    sjj += (y - mj) * (y - mj);
                }
                let oracle = sij / (sii * sjj).sqrt();
                assert!((c.get(i, j) - oracle).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_variance_excluded() {
        let rp = returns_panel(&[vec![0.01, 0.02, -0.01], vec![0.0, 0.0, 0.0], vec![0.02, 0.0, 0.01]]);
        let c = pearson_correlation(&rp, &whole(&rp)).unwrap();
        assert_eq!(c.tickers, vec!["T0", "T2"]);
        assert_eq!(c.excluded, vec!["T1"]);
    }
}
