//! End-to-end runs: per-window clustering, cross-window statistics,
//! portfolio backtests and the on-disk run directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tracing::{info, warn};

use crate::community::{build_graph, leiden, sector_seed, Graph, DEFAULT_RESOLUTION};
use crate::error::{Error, Result};
use crate::ingest::{
    compute_returns, load_prices, load_sectors, month_end_windows, pearson_correlation, CorrelationMatrix, ReturnPanel,
    SectorMap, Window, DEFAULT_MIN_COVERAGE,
};
use crate::metrics::{
    ari_common, cluster_quality, cocluster, cross_sector, objective_opt, paired_t_test, zscores, ClusterQuality,
};
use crate::partition::Partition;
use crate::portfolio::{
    backtest, kpis, select, stock_scores, BacktestResult, KpiRecord, SelectionConfig, SelectionMode,
    DEFAULT_PORTFOLIO_K, KPI_HEADER,
};
use crate::rmtclean::{clean, mp_bounds, threshold, CleanedCorrelation};
use crate::spectral::{refine, Provenance, DEFAULT_SMALL_N};

pub const DEFAULT_THETA_GRID: usize = 41;
pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub lookback_months: u32,
    pub theta_grid_size: usize,
    pub small_n: usize,
    pub portfolio_k: usize,
    pub modes: Vec<SelectionMode>,
    pub rng_seed: u64,
    pub min_coverage: f64,
    pub resolution: f64,
    /// Worker threads; 0 uses one per core.
    pub workers: usize,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            lookback_months: 3,
            theta_grid_size: DEFAULT_THETA_GRID,
            small_n: DEFAULT_SMALL_N,
            portfolio_k: DEFAULT_PORTFOLIO_K,
            modes: vec![SelectionMode::Bottom, SelectionMode::Top],
            rng_seed: DEFAULT_SEED,
            min_coverage: DEFAULT_MIN_COVERAGE,
            resolution: DEFAULT_RESOLUTION,
            workers: 0,
            output_dir: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    /// Read a flat JSON config; absent fields take their defaults.
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: RunConfig = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.lookback_months == 0 {
            return bad("lookback_months must be at least 1".into());
        }
        if self.theta_grid_size < 2 {
            return bad(format!("theta_grid_size must be at least 2, got {}", self.theta_grid_size));
        }
        if self.small_n == 0 || self.portfolio_k == 0 {
            return bad("small_n and portfolio_k must be at least 1".into());
        }
        if self.modes.is_empty() {
            return bad("at least one selection mode is required".into());
        }
        if !(0.0..=1.0).contains(&self.min_coverage) {
            return bad(format!("min_coverage {} outside [0, 1]", self.min_coverage));
        }
        if !(self.resolution.is_finite() && self.resolution > 0.0) {
            return bad(format!("resolution must be positive, got {}", self.resolution));
        }
        Ok(())
    }

    fn selection(&self, mode: SelectionMode) -> SelectionConfig {
        SelectionConfig {
            k: self.portfolio_k,
            small_n: self.small_n,
            mode,
        }
    }
}

/// `size` evenly spaced points from 0 to `upper` inclusive.
pub fn theta_grid(upper: f64, size: usize) -> Vec<f64> {
    let last = (size - 1) as f64;
    (0..size).map(|g| upper * g as f64 / last).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThetaPoint {
    pub theta: f64,
    pub edges: usize,
    pub n_clusters: usize,
    pub objective: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThetaSearch {
    pub theta_star: f64,
    /// Top of the searched range.
    pub upper: f64,
    pub partition: Partition,
    pub graph: Graph,
    pub objective: Option<f64>,
    pub grid: Vec<ThetaPoint>,
}

/// Grid search for the threshold whose sector-seeded Leiden partition has the
/// highest intra/inter objective on the cleaned matrix.
///
/// Ties go to the smallest threshold. If no grid point gives a partition with
/// a defined objective, the smallest threshold is used.
pub fn optimize_theta(
    cleaned: &CleanedCorrelation,
    sectors: &SectorMap,
    grid_size: usize,
    resolution: f64,
    seed: u64,
) -> Result<ThetaSearch> {
    if grid_size < 2 {
        return Err(Error::InvalidArgument(format!("theta grid needs at least 2 points, got {grid_size}")));
    }
    let corr = &cleaned.matrix;
    let seed_partition = sector_seed(&corr.tickers, sectors)?;
    let upper = cleaned.bounds.lambda_plus.min(cleaned.max_off_diagonal()).max(0.0);

    let mut grid = Vec::with_capacity(grid_size);
    let mut best: Option<(usize, f64, Partition, Graph)> = None;
    let mut fallback: Option<(Partition, Graph)> = None;
    for (g, theta) in theta_grid(upper, grid_size).into_iter().enumerate() {
        let graph = build_graph(&threshold(corr, theta), &corr.tickers)?;
        let partition = leiden(&graph, &seed_partition, resolution, seed)?;
        let objective = objective_opt(&partition, corr);
        grid.push(ThetaPoint {
            theta,
            edges: graph.edge_count(),
            n_clusters: partition.n_clusters(),
            objective,
        });
        if let Some(q) = objective {
            if best.as_ref().is_none_or(|(_, b, _, _)| q > *b) {
                best = Some((g, q, partition, graph));
            }
        } else if fallback.is_none() {
            fallback = Some((partition, graph));
        }
    }

    let (index, objective, partition, graph) = match best {
        Some((g, q, p, graph)) => (g, Some(q), p, graph),
        None => {
            warn!(anchor = ?corr.anchor, "no threshold gives a defined objective; using the smallest");
            let (p, graph) = fallback.expect("grid is non-empty");
            (0, None, p, graph)
        }
    };
    Ok(ThetaSearch {
        theta_star: grid[index].theta,
        upper,
        partition,
        graph,
        objective,
        grid,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowResult {
    pub anchor: NaiveDate,
    pub lookback_months: u32,
    pub n_days: usize,
    pub tickers: Vec<String>,
    pub theta_star: f64,
    pub theta_upper: f64,
    pub lambda_minus: f64,
    pub lambda_plus: f64,
    /// Eigenvalues outside the noise band.
    pub signal_eigenvalues: usize,
    /// Sector partition scored on the graph at `theta_star`.
    pub sector: ClusterQuality,
    pub leiden: ClusterQuality,
    #[serde(rename = "final")]
    pub final_quality: ClusterQuality,
    pub leiden_partition: Partition,
    pub partition: Partition,
    pub provenance: Provenance,
    pub k_chosen: Option<usize>,
    pub selections: Vec<(SelectionMode, Vec<String>)>,
}

impl WindowResult {
    /// Final clusters as ticker lists.
    pub fn clusters(&self) -> Vec<Vec<String>> {
        self.partition
            .clusters()
            .into_iter()
            .map(|c| c.into_iter().map(|i| self.tickers[i].clone()).collect())
            .collect()
    }
}

/// Clean, search the threshold, refine, score and select for one window.
pub fn run_window(corr: &CorrelationMatrix, sectors: &SectorMap, cfg: &RunConfig, seed: u64) -> Result<WindowResult> {
    let anchor = corr
        .anchor
        .ok_or_else(|| Error::InvalidArgument("correlation matrix has no anchor date".into()))?;
    let bounds = mp_bounds(corr.len(), corr.n_days, 1.0)?;
    let cleaned = clean(corr, &bounds)?;
    let search = optimize_theta(&cleaned, sectors, cfg.theta_grid_size, cfg.resolution, seed)?;
    let c = &cleaned.matrix;
    let outcome = refine(&search.partition, c, cfg.small_n, seed)?;
    let seed_partition = sector_seed(&c.tickers, sectors)?;

    let scores = stock_scores(&outcome.final_partition, c)?;
    let selections = cfg
        .modes
        .iter()
        .map(|&mode| {
            let picked = select(&outcome.final_partition, &scores, &cfg.selection(mode))?;
            Ok((mode, picked.into_iter().map(|i| c.tickers[i].clone()).collect()))
        })
        .collect::<Result<_>>()?;

    Ok(WindowResult {
        anchor,
        lookback_months: cfg.lookback_months,
        n_days: corr.n_days,
        tickers: c.tickers.clone(),
        theta_star: search.theta_star,
        theta_upper: search.upper,
        lambda_minus: bounds.lambda_minus,
        lambda_plus: bounds.lambda_plus,
        signal_eigenvalues: cleaned.kept_count,
        sector: cluster_quality(&seed_partition, c, &search.graph)?,
        leiden: cluster_quality(&search.partition, c, &search.graph)?,
        final_quality: cluster_quality(&outcome.final_partition, c, &search.graph)?,
        leiden_partition: search.partition,
        partition: outcome.final_partition,
        provenance: outcome.chosen,
        k_chosen: outcome.k_chosen,
        selections,
    })
}

/// Seed for window `index`, so results do not depend on scheduling.
pub fn window_seed(base: u64, index: usize) -> u64 {
    base.wrapping_add((index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Every month-end window of the panel, in anchor order.
pub fn run_windows(rp: &ReturnPanel, sectors: &SectorMap, cfg: &RunConfig) -> Result<Vec<(Window, Result<WindowResult>)>> {
    cfg.validate()?;
    let windows = month_end_windows(rp, cfg.lookback_months);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("worker pool: {e}")))?;
    let results: Vec<Result<WindowResult>> = pool.install(|| {
        windows
            .par_iter()
            .enumerate()
            .map(|(i, w)| {
                pearson_correlation(rp, w)
                    .and_then(|mut corr| {
                        corr.anchor = Some(w.anchor);
                        run_window(&corr, sectors, cfg, window_seed(cfg.rng_seed, i))
                    })
                    .map_err(|e| e.in_window(w.anchor))
            })
            .collect()
    });
    Ok(windows.into_iter().zip(results).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ManifestEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowFailure {
    pub anchor: NaiveDate,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct Manifest<'a> {
    config: &'a RunConfig,
    windows_total: usize,
    windows_ok: usize,
    failures: &'a [WindowFailure],
    files: &'a [ManifestEntry],
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub windows: Vec<WindowResult>,
    pub failures: Vec<WindowFailure>,
    pub ari: Vec<AriPoint>,
    pub backtests: Vec<(SelectionMode, BacktestResult)>,
    pub kpis: Vec<(String, KpiRecord)>,
    pub files: Vec<ManifestEntry>,
}

impl RunSummary {
    pub fn succeeded(&self) -> bool {
        self.failures.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AriPoint {
    pub anchor: NaiveDate,
    /// Agreement with the previous window on their common tickers.
    pub ari: f64,
    pub zscore: f64,
}

/// ARI of each window against its predecessor, with series z-scores.
pub fn ari_series(windows: &[WindowResult]) -> Vec<AriPoint> {
    let mut raw = Vec::new();
    for pair in windows.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        match ari_common(&a.tickers, &a.partition, &b.tickers, &b.partition) {
            Ok(v) => raw.push((b.anchor, v)),
            Err(e) => warn!(anchor = %b.anchor, "ARI skipped: {e}"),
        }
    }
    let z = zscores(&raw.iter().map(|(_, v)| *v).collect::<Vec<_>>());
    raw.into_iter()
        .zip(z)
        .map(|((anchor, ari), zscore)| AriPoint { anchor, ari, zscore })
        .collect()
}

fn num(v: f64) -> String {
    v.to_string()
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

struct RunWriter {
    dir: PathBuf,
    files: Vec<ManifestEntry>,
}

impl RunWriter {
    fn put(&mut self, rel: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        self.files.push(ManifestEntry {
            path: rel.to_string(),
            sha256: hex::encode(Sha256::digest(bytes)),
            bytes: bytes.len(),
        });
        Ok(())
    }

    fn csv<I, R>(&mut self, rel: &str, header: &[&str], rows: I) -> Result<()>
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator<Item = String>,
    {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        for row in rows {
            w.write_record(row.into_iter().collect::<Vec<_>>())?;
        }
        let bytes = w.into_inner().map_err(|e| Error::InvalidArgument(e.to_string()))?;
        self.put(rel, &bytes)
    }
}

#[derive(Serialize)]
struct WindowJson<'a> {
    anchor: NaiveDate,
    theta_star: f64,
    clusters: Vec<Vec<String>>,
    rho_intra: Option<f64>,
    rho_inter: Option<f64>,
    objective: Option<f64>,
    modularity: f64,
    provenance: Provenance,
    lookback_months: u32,
    n_days: usize,
    k_chosen: Option<usize>,
    leiden: &'a ClusterQuality,
    sector: &'a ClusterQuality,
    selections: BTreeMap<SelectionMode, &'a [String]>,
}

fn window_json(w: &WindowResult) -> Result<Vec<u8>> {
    let q = &w.final_quality;
    let doc = WindowJson {
        anchor: w.anchor,
        theta_star: w.theta_star,
        clusters: w.clusters(),
        rho_intra: q.rho_intra,
        rho_inter: q.rho_inter,
        objective: q.objective,
        modularity: q.modularity,
        provenance: w.provenance,
        lookback_months: w.lookback_months,
        n_days: w.n_days,
        k_chosen: w.k_chosen,
        leiden: &w.leiden,
        sector: &w.sector,
        selections: w.selections.iter().map(|(m, t)| (*m, t.as_slice())).collect(),
    };
    let mut bytes = serde_json::to_vec_pretty(&doc)?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn quality_cells(q: &ClusterQuality) -> [String; 5] {
    [
        opt(q.rho_intra),
        opt(q.rho_inter),
        opt(q.objective),
        num(q.modularity),
        q.n_clusters.to_string(),
    ]
}

const QUALITY_FIELDS: [&str; 5] = ["rho_intra", "rho_inter", "objective", "modularity", "n_clusters"];

fn metrics_header() -> Vec<String> {
    let mut h: Vec<String> = ["anchor", "n_stocks", "theta_star", "provenance", "k_chosen"]
        .map(String::from)
        .to_vec();
    for stage in ["sector", "leiden", "final"] {
        h.extend(QUALITY_FIELDS.iter().map(|f| format!("{stage}_{f}")));
    }
    h
}

type MetricPick = fn(&ClusterQuality) -> Option<f64>;

const TESTED_METRICS: [(&str, MetricPick); 5] = [
    ("rho_intra", |q| q.rho_intra),
    ("rho_inter", |q| q.rho_inter),
    ("objective", |q| q.objective),
    ("modularity", |q| Some(q.modularity)),
    ("n_clusters", |q| Some(q.n_clusters as f64)),
];

fn ttest_rows(windows: &[WindowResult]) -> Vec<Vec<String>> {
    type Stage = fn(&WindowResult) -> &ClusterQuality;
    let comparisons: [(&str, Stage); 2] = [("leiden", |w| &w.leiden), ("sector", |w| &w.sector)];
    let mut rows = Vec::new();
    for (baseline, stage) in comparisons {
        for (metric, pick) in TESTED_METRICS {
            let (before, after): (Vec<f64>, Vec<f64>) = windows
                .iter()
                .filter_map(|w| Some((pick(stage(w))?, pick(&w.final_quality)?)))
                .unzip();
            let mut row = vec![baseline.to_string(), "final".to_string(), metric.to_string()];
            match paired_t_test(&before, &after) {
                Ok(t) => row.extend([t.n.to_string(), num(t.mean_diff), opt(t.t), opt(t.p_value)]),
                Err(_) => row.extend([before.len().to_string(), String::new(), String::new(), String::new()]),
            }
            rows.push(row);
        }
    }
    rows
}

/// Load inputs, process every window and write the run directory.
///
/// Input problems are returned as errors before any window runs. Window
/// failures are recorded in the manifest and summary; outputs for the
/// windows that succeeded are still written.
pub fn run_pipeline(cfg: &RunConfig, prices: &Path, sectors_path: &Path) -> Result<RunSummary> {
    cfg.validate()?;
    let sectors = load_sectors(sectors_path)?;
    let (panel, coverage) = load_prices(prices, cfg.min_coverage)?;
    for t in &panel.tickers {
        sectors.require(t)?;
    }
    let rp = compute_returns(&panel)?;
    info!(
        tickers = rp.tickers.len(),
        days = rp.dates.len(),
        dropped = coverage.dropped.len(),
        "panel loaded"
    );

    let mut windows = Vec::new();
    let mut failures = Vec::new();
    let total;
    {
        let results = run_windows(&rp, &sectors, cfg)?;
        total = results.len();
        for (w, r) in results {
            match r {
                Ok(res) => windows.push(res),
                Err(e) => {
                    warn!(anchor = %w.anchor, "window failed: {e}");
                    failures.push(WindowFailure {
                        anchor: w.anchor,
                        error: e.to_string(),
                    });
                }
            }
        }
    }
    info!(ok = windows.len(), failed = failures.len(), "windows processed");

    let mut out = RunWriter {
        dir: cfg.output_dir.clone(),
        files: Vec::new(),
    };
    std::fs::create_dir_all(&out.dir).map_err(|e| Error::io(&out.dir, e))?;

    for w in &windows {
        out.put(&format!("windows/{}.json", w.anchor), &window_json(w)?)?;
    }

    let header = metrics_header();
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    out.csv(
        "metrics.csv",
        &header_refs,
        windows.iter().map(|w| {
            let mut row = vec![
                w.anchor.to_string(),
                w.tickers.len().to_string(),
                num(w.theta_star),
                w.provenance.as_str().to_string(),
                w.k_chosen.map(|k| k.to_string()).unwrap_or_default(),
            ];
            for q in [&w.sector, &w.leiden, &w.final_quality] {
                row.extend(quality_cells(q));
            }
            row
        }),
    )?;
    out.csv(
        "ttests.csv",
        &["baseline", "compared", "metric", "n", "mean_diff", "t", "p_value"],
        ttest_rows(&windows),
    )?;

    let ari = ari_series(&windows);
    out.csv(
        "ari.csv",
        &["anchor", "ari", "zscore"],
        ari.iter().map(|a| vec![a.anchor.to_string(), num(a.ari), num(a.zscore)]),
    )?;

    if !windows.is_empty() {
        let snapshots: Vec<(Vec<String>, Partition)> =
            windows.iter().map(|w| (w.tickers.clone(), w.partition.clone())).collect();
        let co = cocluster(&snapshots)?;
        let mut rows = Vec::new();
        for i in 0..co.len() {
            for j in (i + 1)..co.len() {
                if let Some(p) = co.get(i, j) {
                    rows.push(vec![
                        co.tickers[i].clone(),
                        co.tickers[j].clone(),
                        num(p),
                        co.co_present(i, j).to_string(),
                    ]);
                }
            }
        }
        out.csv("cocluster.csv", &["ticker_a", "ticker_b", "probability", "co_present"], rows)?;

        let report = cross_sector(&co, &sectors)?;
        out.csv(
            "cross_sector.csv",
            &[
                "ticker",
                "sector",
                "s_cross",
                "s_same",
                "s_total",
                "s_most",
                "p_cross",
                "p_most",
                "most_connected_sector",
            ],
            report.iter().map(|r| {
                vec![
                    r.ticker.clone(),
                    r.sector.to_string(),
                    num(r.s_cross),
                    num(r.s_same),
                    num(r.s_total),
                    num(r.s_most),
                    opt(r.p_cross),
                    opt(r.p_most),
                    r.most_connected_sector.map(|s| s.to_string()).unwrap_or_default(),
                ]
            }),
        )?;
    }

    let mut rows = Vec::new();
    for &mode in &cfg.modes {
        for w in &windows {
            for (m, tickers) in &w.selections {
                if *m == mode {
                    rows.extend(tickers.iter().map(|t| vec![mode.to_string(), w.anchor.to_string(), t.clone()]));
                }
            }
        }
    }
    out.csv("selections.csv", &["mode", "anchor", "ticker"], rows)?;

    let mut backtests = Vec::new();
    let mut kpi_rows = Vec::new();
    if !windows.is_empty() {
        for &mode in &cfg.modes {
            let sel: Vec<(NaiveDate, Vec<String>)> = windows
                .iter()
                .filter_map(|w| w.selections.iter().find(|(m, _)| *m == mode).map(|(_, t)| (w.anchor, t.clone())))
                .collect();
            backtests.push((mode, backtest(&rp, &sel, &rp.tickers)?));
        }
        if let Some((_, first)) = backtests.first() {
            let mut strategies: Vec<(String, &[f64])> = vec![("benchmark".into(), &first.benchmark)];
            for (mode, bt) in &backtests {
                strategies.push((format!("portfolio_{mode}"), &bt.portfolio));
            }
            for (name, daily) in strategies {
                match kpis(daily, &first.benchmark) {
                    Ok(k) => kpi_rows.push((name, k)),
                    Err(e) => warn!(strategy = %name, "KPIs skipped: {e}"),
                }
            }

            let mut header = vec!["date".to_string(), "benchmark".to_string()];
            header.extend(backtests.iter().map(|(m, _)| format!("portfolio_{m}")));
            let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
            let start = windows[0].anchor;
            let rows = (0..first.benchmark_equity.len()).map(|d| {
                let date = if d == 0 { start } else { first.dates[d - 1] };
                let mut row = vec![date.to_string(), num(first.benchmark_equity[d])];
                row.extend(backtests.iter().map(|(_, bt)| num(bt.portfolio_equity[d])));
                row
            });
            out.csv("equity_curves.csv", &header_refs, rows)?;
        }
    }
    out.csv(
        "kpis.csv",
        &KPI_HEADER,
        kpi_rows.iter().map(|(name, k)| {
            let mut row = vec![name.clone()];
            row.extend(k.csv_fields());
            row
        }),
    )?;

    let manifest = Manifest {
        config: cfg,
        windows_total: total,
        windows_ok: windows.len(),
        failures: &failures,
        files: &out.files,
    };
    let mut bytes = serde_json::to_vec_pretty(&manifest)?;
    bytes.push(b'\n');
    let manifest_path = out.dir.join("manifest.json");
    std::fs::write(&manifest_path, bytes).map_err(|e| Error::io(&manifest_path, e))?;

    Ok(RunSummary {
        out_dir: out.dir,
        windows,
        failures,
        ari,
        backtests,
        kpis: kpi_rows,
        files: out.files,
    })
}
