//! Cluster-aware stock selection, equal-weight backtests and performance KPIs.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{CorrelationMatrix, ReturnPanel};
use crate::numerics::{mean, sample_std};
use crate::partition::Partition;

pub const TRADING_DAYS: f64 = 252.0;
pub const DEFAULT_PORTFOLIO_K: usize = 75;
/// Spreads below this are rounding noise from a constant series.
const DEGENERATE_SPREAD: f64 = 1e-14;

pub const KPI_HEADER: [&str; 10] = [
    "strategy",
    "ann_ret",
    "ann_vola",
    "sharpe",
    "sortino",
    "max_dd",
    "down_vola",
    "beta",
    "r_squared",
    "alpha",
];

/// Which end of the within-cluster correlation ranking to buy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionMode {
    /// Least correlated with their cluster.
    Bottom,
    /// Most correlated with their cluster.
    Top,
}

impl SelectionMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SelectionMode::Bottom => "bottom",
            SelectionMode::Top => "top",
        }
    }
}

impl fmt::Display for SelectionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SelectionMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "bottom" => Ok(SelectionMode::Bottom),
            "top" => Ok(SelectionMode::Top),
            other => Err(format!("unknown selection mode {other:?} (expected bottom or top)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionConfig {
    pub k: usize,
    pub small_n: usize,
    pub mode: SelectionMode,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            k: DEFAULT_PORTFOLIO_K,
            small_n: crate::spectral::DEFAULT_SMALL_N,
            mode: SelectionMode::Bottom,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StockScore {
    /// Position of the stock in the correlation matrix.
    pub index: usize,
    pub ticker: String,
    pub cluster: usize,
    /// Mean correlation with the other members of its cluster.
    pub stock_intra: f64,
}

/// Scores for every stock in a cluster of two or more.
pub fn stock_scores(p: &Partition, corr: &CorrelationMatrix) -> Result<Vec<StockScore>> {
    if p.len() != corr.len() {
        return Err(Error::Dimension(format!(
            "partition over {} stocks for a {}-stock matrix",
            p.len(),
            corr.len()
        )));
    }
    let mut out = Vec::new();
    for (c, members) in p.clusters().into_iter().enumerate() {
        if members.len() < 2 {
            continue;
        }
        for &i in &members {
            let sum: f64 = members.iter().filter(|&&j| j != i).map(|&j| corr.get(i, j)).sum();
            out.push(StockScore {
                index: i,
                ticker: corr.tickers[i].clone(),
                cluster: c,
                stock_intra: sum / (members.len() - 1) as f64,
            });
        }
    }
    out.sort_by_key(|s| s.index);
    Ok(out)
}

/// Pick `cfg.k` stocks: every member of a small cluster, then a proportional
/// share of each large cluster ranked by `stock_intra`.
///
/// Large-cluster quotas are floored; leftover slots go one at a time by
/// largest fractional remainder, then larger cluster, then lower cluster id.
/// Returns stock indices in ascending order.
pub fn select(p: &Partition, scores: &[StockScore], cfg: &SelectionConfig) -> Result<Vec<usize>> {
    if cfg.k == 0 || cfg.small_n == 0 {
        return Err(Error::InvalidArgument("selection needs k >= 1 and small_n >= 1".into()));
    }
    if p.len() < cfg.k {
        return Err(Error::InvalidArgument(format!(
            "cannot pick {} stocks from {}",
            cfg.k,
            p.len()
        )));
    }
    let clusters = p.clusters();
    let mut chosen: Vec<usize> = Vec::with_capacity(cfg.k);
    let mut large: Vec<usize> = Vec::new();
    for (c, members) in clusters.iter().enumerate() {
        if members.len() <= cfg.small_n {
            chosen.extend_from_slice(members);
        } else {
            large.push(c);
        }
    }
    if chosen.len() > cfg.k {
        return Err(Error::InvalidArgument(format!(
            "{} small-cluster stocks exceed a budget of {}",
            chosen.len(),
            cfg.k
        )));
    }

    let slots = cfg.k - chosen.len();
    let pool: usize = large.iter().map(|&c| clusters[c].len()).sum();
    if slots > 0 {
        let mut quota: Vec<usize> = large.iter().map(|&c| clusters[c].len() * slots / pool).collect();
        let shortfall = slots - quota.iter().sum::<usize>();
        let mut order: Vec<usize> = (0..large.len()).collect();
        order.sort_by(|&a, &b| {
            let (ca, cb) = (clusters[large[a]].len(), clusters[large[b]].len());
            let (ra, rb) = (ca * slots % pool, cb * slots % pool);
            rb.cmp(&ra).then(cb.cmp(&ca)).then(large[a].cmp(&large[b]))
        });
        for &slot in order.iter().take(shortfall) {
            quota[slot] += 1;
        }

        let score: HashMap<usize, f64> = scores.iter().map(|s| (s.index, s.stock_intra)).collect();
        for (slot, &c) in large.iter().enumerate() {
            let mut ranked: Vec<(f64, usize)> = clusters[c]
                .iter()
                .map(|&i| {
                    score
                        .get(&i)
                        .map(|&v| (v, i))
                        .ok_or_else(|| Error::InvalidArgument(format!("no score for stock {i}")))
                })
                .collect::<Result<_>>()?;
            ranked.sort_by(|a, b| {
                let by_score = a.0.total_cmp(&b.0);
                let by_score = match cfg.mode {
                    SelectionMode::Bottom => by_score,
                    SelectionMode::Top => by_score.reverse(),
                };
                by_score.then(a.1.cmp(&b.1))
            });
            chosen.extend(ranked.iter().take(quota[slot]).map(|&(_, i)| i));
        }
    }
    chosen.sort_unstable();
    Ok(chosen)
}

/// `Σᵢ Σⱼ wᵢ wⱼ σᵢ σⱼ ρᵢⱼ` with unit diagonal.
pub fn portfolio_risk(weights: &[f64], vols: &[f64], corr: &CorrelationMatrix) -> Result<f64> {
    let n = corr.len();
    if weights.len() != n || vols.len() != n {
        return Err(Error::Dimension(format!(
            "{} weights and {} vols for {n} assets",
            weights.len(),
            vols.len()
        )));
    }
    let wv: Vec<f64> = weights.iter().zip(vols).map(|(w, s)| w * s).collect();
    let mut risk = 0.0;
    for i in 0..n {
        risk += wv[i] * wv[i];
        for j in (i + 1)..n {
            risk += 2.0 * wv[i] * wv[j] * corr.get(i, j);
        }
    }
    Ok(risk)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BacktestResult {
    pub dates: Vec<NaiveDate>,
    pub portfolio: Vec<f64>,
    pub benchmark: Vec<f64>,
    pub portfolio_equity: Vec<f64>,
    pub benchmark_equity: Vec<f64>,
}

fn compound(returns: &[f64]) -> Vec<f64> {
    let mut level = 1.0;
    std::iter::once(1.0)
        .chain(returns.iter().map(|r| {
            level *= 1.0 + r;
            level
        }))
        .collect()
}

/// Equal-weight backtest of monthly selections against the equal-weight
/// `benchmark` universe.
///
/// Each selection is held from the first trading day after its anchor up to
/// and including the next anchor; the last one runs to the end of the panel.
/// Weights are reset to equal every day. Equity curves start at 1.0, one
/// point ahead of the first return.
pub fn backtest(
    rp: &ReturnPanel,
    selections: &[(NaiveDate, Vec<String>)],
    benchmark: &[String],
) -> Result<BacktestResult> {
    let pos: HashMap<&str, usize> = rp.tickers.iter().enumerate().map(|(i, t)| (t.as_str(), i)).collect();
    let lookup = |names: &[String]| -> Result<Vec<usize>> {
        if names.is_empty() {
            return Err(Error::InvalidArgument("empty ticker set in backtest".into()));
        }
        names
            .iter()
            .map(|t| pos.get(t.as_str()).copied().ok_or_else(|| Error::UnmappedTicker(t.clone())))
            .collect()
    };
    let bench_idx = lookup(benchmark)?;
    let mut ordered: Vec<&(NaiveDate, Vec<String>)> = selections.iter().collect();
    ordered.sort_by_key(|(d, _)| *d);

    let day_mean = |d: usize, idx: &[usize]| idx.iter().map(|&i| rp.returns[(d, i)]).sum::<f64>() / idx.len() as f64;
    let mut out = BacktestResult {
        dates: Vec::new(),
        portfolio: Vec::new(),
        benchmark: Vec::new(),
        portfolio_equity: Vec::new(),
        benchmark_equity: Vec::new(),
    };
    for (s, (anchor, names)) in ordered.iter().enumerate() {
        let idx = lookup(names)?;
        let start = rp.dates.partition_point(|d| d <= anchor);
        let end = match ordered.get(s + 1) {
            Some((next, _)) => rp.dates.partition_point(|d| d <= next),
            None => rp.dates.len(),
        };
        for d in start..end {
            out.dates.push(rp.dates[d]);
            out.portfolio.push(day_mean(d, &idx));
            out.benchmark.push(day_mean(d, &bench_idx));
        }
    }
    out.portfolio_equity = compound(&out.portfolio);
    out.benchmark_equity = compound(&out.benchmark);
    Ok(out)
}

/// Performance summary; ratios that are undefined for the input are `None`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KpiRecord {
    pub ann_ret: f64,
    pub ann_vola: f64,
    pub sharpe: Option<f64>,
    pub sortino: Option<f64>,
    pub max_dd: f64,
    pub down_vola: f64,
    pub beta: Option<f64>,
    pub r_squared: Option<f64>,
    pub alpha: Option<f64>,
}

impl KpiRecord {
    /// CSV fields after the strategy name; undefined values are left empty.
    pub fn csv_fields(&self) -> Vec<String> {
        let f = |v: f64| v.to_string();
        let o = |v: Option<f64>| v.map(f).unwrap_or_default();
        vec![
            f(self.ann_ret),
            f(self.ann_vola),
            o(self.sharpe),
            o(self.sortino),
            f(self.max_dd),
            f(self.down_vola),
            o(self.beta),
            o(self.r_squared),
            o(self.alpha),
        ]
    }
}

/// Largest peak-to-trough loss of an equity curve, as a non-positive fraction.
pub fn max_drawdown(equity: &[f64]) -> f64 {
    let mut peak = f64::NEG_INFINITY;
    let mut worst = 0.0f64;
    for &v in equity {
        peak = peak.max(v);
        worst = worst.min(v / peak - 1.0);
    }
    worst
}

/// KPIs of daily returns against benchmark daily returns.
///
/// Annualisation uses 252 days and a zero risk-free rate. Downside deviation
/// is the root mean square of the negative part of the daily returns.
pub fn kpis(daily: &[f64], benchmark_daily: &[f64]) -> Result<KpiRecord> {
    let n = daily.len();
    if n != benchmark_daily.len() {
        return Err(Error::Dimension(format!(
            "{n} portfolio returns vs {} benchmark returns",
            benchmark_daily.len()
        )));
    }
    if n < 2 {
        return Err(Error::InvalidArgument(format!("KPIs need at least 2 returns, got {n}")));
    }
    let equity = compound(daily);
    let growth = equity[n];
    let ann_ret = growth.powf(TRADING_DAYS / n as f64) - 1.0;
    let mu = mean(daily);
    let sd = sample_std(daily);
    let ann_vola = sd * TRADING_DAYS.sqrt();
    let downside = (daily.iter().map(|r| r.min(0.0).powi(2)).sum::<f64>() / n as f64).sqrt();
    let down_vola = downside * TRADING_DAYS.sqrt();
    let ratio = |num: f64, den: f64| (den > DEGENERATE_SPREAD).then(|| num / den);

    let mb = mean(benchmark_daily);
    let mut cov = 0.0;
    let mut var_b = 0.0;
    let mut var_p = 0.0;
    for (p, b) in daily.iter().zip(benchmark_daily) {
        cov += (p - mu) * (b - mb);
        var_b += (b - mb) * (b - mb);
        var_p += (p - mu) * (p - mu);
    }
    let floor = DEGENERATE_SPREAD * DEGENERATE_SPREAD * n as f64;
    let beta = (var_b > floor).then(|| cov / var_b);
    let r_squared = (var_b > floor && var_p > floor).then(|| cov * cov / (var_b * var_p));
    let alpha = beta.map(|b| (mu - b * mb) * TRADING_DAYS);

    Ok(KpiRecord {
        ann_ret,
        ann_vola,
        sharpe: ratio(mu, sd).map(|s| s * TRADING_DAYS.sqrt()),
        sortino: ratio(mu * TRADING_DAYS, down_vola),
        max_dd: max_drawdown(&equity),
        down_vola,
        beta,
        r_squared,
        alpha,
    })
}
