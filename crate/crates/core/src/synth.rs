//! Planted-block price panels with known cluster labels.
//!
//! Daily returns follow a two-level factor model: a market factor shared by
//! every stock, a block factor shared within a block, and idiosyncratic
//! noise. An optional shock month replaces the block structure with a strong
//! market-wide co-movement at elevated volatility.

use std::io::Write;
use std::path::Path;

use chrono::{Datelike, NaiveDate, Weekday};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{month_end, PricePanel, Sector, SectorMap};
use crate::numerics::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub months: u32,
    pub stocks: usize,
    pub blocks: usize,
    pub seed: u64,
    /// First calendar day; the panel starts on the first weekday on or after it.
    pub start: NaiveDate,
    pub daily_vol: f64,
    /// Correlation between two stocks of the same block.
    pub within_rho: f64,
    /// Correlation between stocks of different blocks.
    pub across_rho: f64,
    /// Month offset from the start month that carries the shock.
    pub shock_month: Option<u32>,
    pub shock_rho: f64,
    /// Volatility multiplier during the shock month.
    pub shock_vol: f64,
    /// Fraction of stocks whose sector label is moved to another sector.
    pub shuffle_sectors: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            months: 85,
            stocks: 120,
            blocks: 6,
            seed: 7,
            start: NaiveDate::from_ymd_opt(2017, 7, 1).expect("valid date"),
            daily_vol: 0.01,
            within_rho: 0.7,
            across_rho: 0.05,
            shock_month: None,
            shock_rho: 0.9,
            shock_vol: 5.0,
            shuffle_sectors: 0.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthPanel {
    pub prices: PricePanel,
    pub sectors: SectorMap,
    /// Planted block of each ticker, aligned with `prices.tickers`.
    pub labels: Vec<usize>,
    /// Tickers whose sector no longer matches their block.
    pub shuffled: Vec<String>,
}

fn weekdays(from: NaiveDate, through: NaiveDate) -> Vec<NaiveDate> {
    from.iter_days()
        .take_while(|d| *d <= through)
        .filter(|d| !matches!(d.weekday(), Weekday::Sat | Weekday::Sun))
        .collect()
}

fn month_idx(d: NaiveDate) -> i32 {
    d.year() * 12 + d.month0() as i32
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthPanel> {
    if cfg.stocks == 0 || cfg.blocks == 0 || cfg.blocks > cfg.stocks || cfg.months == 0 {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= blocks <= stocks and months >= 1, got {} blocks, {} stocks, {} months",
            cfg.blocks, cfg.stocks, cfg.months
        )));
    }
    let rho_ok = |r: f64| (0.0..=1.0).contains(&r);
    if !rho_ok(cfg.across_rho) || !rho_ok(cfg.within_rho) || cfg.within_rho < cfg.across_rho || !rho_ok(cfg.shock_rho) {
        return Err(Error::InvalidArgument(
            "correlations must satisfy 0 <= across <= within <= 1 and 0 <= shock <= 1".into(),
        ));
    }
    if !(0.0..=1.0).contains(&cfg.shuffle_sectors) {
        return Err(Error::InvalidArgument(format!(
            "shuffle fraction {} outside [0, 1]",
            cfg.shuffle_sectors
        )));
    }

    let first_month = month_idx(cfg.start);
    let last = month_end(first_month + cfg.months as i32 - 1);
    let dates = weekdays(cfg.start, last);
    let shock = cfg.shock_month.map(|m| first_month + m as i32);

    let labels: Vec<usize> = (0..cfg.stocks).map(|i| i * cfg.blocks / cfg.stocks).collect();
    let tickers: Vec<String> = (0..cfg.stocks).map(|i| format!("S{i:03}")).collect();
    let market = cfg.across_rho.sqrt();
    let block = (cfg.within_rho - cfg.across_rho).sqrt();
    let idio = (1.0 - cfg.within_rho).sqrt();
    let shock_market = cfg.shock_rho.sqrt();
    let shock_idio = (1.0 - cfg.shock_rho).sqrt();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut close = Matrix::zeros(dates.len(), cfg.stocks);
    for i in 0..cfg.stocks {
        close[(0, i)] = 100.0;
    }
    let mut block_f = vec![0.0; cfg.blocks];
    for d in 1..dates.len() {
        let m: f64 = rng.sample(StandardNormal);
        for f in &mut block_f {
            *f = rng.sample(StandardNormal);
        }
        let shocked = shock == Some(month_idx(dates[d]));
        for i in 0..cfg.stocks {
            let e: f64 = rng.sample(StandardNormal);
            let z = if shocked {
                cfg.shock_vol * (shock_market * m + shock_idio * e)
            } else {
                market * m + block * block_f[labels[i]] + idio * e
            };
            close[(d, i)] = close[(d - 1, i)] * (1.0 + cfg.daily_vol * z).max(1e-3);
        }
    }

    let in_use: Vec<Sector> = (0..cfg.blocks.min(Sector::ALL.len())).map(|b| Sector::ALL[b]).collect();
    let mut sector_of: Vec<Sector> = labels.iter().map(|&b| Sector::ALL[b % Sector::ALL.len()]).collect();
    let mut shuffled = Vec::new();
    let n_shuffle = (cfg.shuffle_sectors * cfg.stocks as f64).round() as usize;
    if in_use.len() > 1 && n_shuffle > 0 {
        let mut picked = sample(&mut rng, cfg.stocks, n_shuffle).into_vec();
        picked.sort_unstable();
        for i in picked {
            let others: Vec<Sector> = in_use.iter().copied().filter(|s| *s != sector_of[i]).collect();
            sector_of[i] = others[rng.random_range(0..others.len())];
            shuffled.push(tickers[i].clone());
        }
    }
    let sectors: SectorMap = tickers.iter().cloned().zip(sector_of).collect();

    Ok(SynthPanel {
        prices: PricePanel {
            dates,
            tickers,
            close,
        },
        sectors,
        labels,
        shuffled,
    })
}

impl SynthPanel {
    /// Write `prices.csv`, `sectors.csv` and `labels.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let file = |name: &str| -> Result<std::io::BufWriter<std::fs::File>> {
            let path = dir.join(name);
            let f = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
            Ok(std::io::BufWriter::new(f))
        };
        let io = |name: &str| {
            let path = dir.join(name);
            move |e| Error::io(&path, e)
        };

        let mut w = file("prices.csv")?;
        writeln!(w, "date,ticker,close").map_err(io("prices.csv"))?;
        for (d, date) in self.prices.dates.iter().enumerate() {
            for (t, ticker) in self.prices.tickers.iter().enumerate() {
                writeln!(w, "{date},{ticker},{}", self.prices.close[(d, t)]).map_err(io("prices.csv"))?;
            }
        }
        w.flush().map_err(io("prices.csv"))?;

        let mut w = file("sectors.csv")?;
        writeln!(w, "ticker,sector").map_err(io("sectors.csv"))?;
        for (ticker, sector) in self.sectors.iter() {
            writeln!(w, "{ticker},{sector}").map_err(io("sectors.csv"))?;
        }
        w.flush().map_err(io("sectors.csv"))?;

        let mut w = file("labels.csv")?;
        writeln!(w, "ticker,block").map_err(io("labels.csv"))?;
        for (ticker, block) in self.prices.tickers.iter().zip(&self.labels) {
            writeln!(w, "{ticker},{block}").map_err(io("labels.csv"))?;
        }
        w.flush().map_err(io("labels.csv"))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{compute_returns, load_prices, load_sectors, month_end_windows, pearson_correlation};

    fn small() -> SynthConfig {
        SynthConfig {
            months: 13,
            stocks: 30,
            blocks: 3,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn planted_correlations_are_close_to_targets() {
        let cfg = SynthConfig { months: 25, ..small() };
        let panel = generate(&cfg).unwrap();
        let rp = compute_returns(&panel.prices).unwrap();
        let all = crate::ingest::Window {
            anchor: *rp.dates.last().unwrap(),
            lookback_months: 24,
            start: 0,
            end: rp.dates.len(),
        };
        let c = pearson_correlation(&rp, &all).unwrap();
        let (mut within, mut across) = (Vec::new(), Vec::new());
        for i in 0..30 {
            for j in (i + 1)..30 {
                let v = c.get(i, j);
                if panel.labels[i] == panel.labels[j] {
                    within.push(v)
                } else {
                    across.push(v)
                }
            }
        }
        let avg = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        assert!((avg(&within) - 0.7).abs() < 0.05, "within {}", avg(&within));
        assert!((avg(&across) - 0.05).abs() < 0.05, "across {}", avg(&across));
    }

    #[test]
    fn month_span_and_determinism() {
        let panel = generate(&SynthConfig::default()).unwrap();
        assert_eq!(panel.prices.dates[0], NaiveDate::from_ymd_opt(2017, 7, 3).unwrap());
        let rp = compute_returns(&panel.prices).unwrap();
        assert_eq!(month_end_windows(&rp, 3).len(), 82);
        let again = generate(&SynthConfig::default()).unwrap();
        assert_eq!(panel.prices, again.prices);
    }

    #[test]
    fn shuffle_moves_the_requested_share() {
        let cfg = SynthConfig {
            shuffle_sectors: 0.3,
            ..small()
        };
        let panel = generate(&cfg).unwrap();
        assert_eq!(panel.shuffled.len(), 9);
        for t in &panel.shuffled {
            let i = panel.prices.tickers.iter().position(|x| x == t).unwrap();
            assert_ne!(panel.sectors.get(t), Some(Sector::ALL[panel.labels[i]]));
        }
    }

    #[test]
    fn files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let panel = generate(&small()).unwrap();
        panel.write(dir.path()).unwrap();
        let (prices, report) = load_prices(&dir.path().join("prices.csv"), 0.95).unwrap();
        assert_eq!(prices, panel.prices);
        assert!(report.dropped.is_empty());
        assert_eq!(load_sectors(&dir.path().join("sectors.csv")).unwrap(), panel.sectors);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(generate(&SynthConfig { blocks: 0, ..small() }).is_err());
        assert!(generate(&SynthConfig { within_rho: 0.01, ..small() }).is_err());
    }
}
