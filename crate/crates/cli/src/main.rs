use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use dynmsa_core::portfolio::SelectionMode;
use dynmsa_core::synth::{generate, SynthConfig};
use dynmsa_core::{run_pipeline, RunConfig};
use tracing_subscriber::EnvFilter;

/// Correlation-network clustering and cluster-aware portfolios.
#[derive(Parser)]
#[command(name = "dynmsa", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cluster every month-end window and backtest the selections.
    Run(RunArgs),
    /// Write a planted-block synthetic panel with ground-truth labels.
    Synth(SynthArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Long-format price file with header date,ticker,close.
    #[arg(long)]
    prices: PathBuf,
    /// Sector file with header ticker,sector.
    #[arg(long)]
    sectors: PathBuf,
    /// Flat JSON config; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = ["3", "6", "12", "24"])]
    lookback: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Run a single selection mode instead of the configured ones.
    #[arg(long)]
    mode: Option<SelectionMode>,
    #[arg(long)]
    theta_grid_size: Option<usize>,
    #[arg(long)]
    small_n: Option<usize>,
    #[arg(long)]
    portfolio_k: Option<usize>,
    #[arg(long)]
    min_coverage: Option<f64>,
    #[arg(long)]
    resolution: Option<f64>,
    /// Worker threads (0 = one per core).
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 85)]
    months: u32,
    #[arg(long, default_value_t = 120)]
    stocks: usize,
    #[arg(long, default_value_t = 6)]
    blocks: usize,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = SynthConfig::default().seed)]
    seed: u64,
    /// Month offset from the first month that carries a market-wide shock.
    #[arg(long)]
    shock_month: Option<u32>,
    #[arg(long, default_value_t = SynthConfig::default().shock_vol)]
    shock_vol: f64,
    /// Fraction of stocks given a wrong sector label.
    #[arg(long, default_value_t = 0.0)]
    shuffle_sectors: f64,
}

impl RunArgs {
    fn config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_json_file(path).with_context(|| format!("reading config {}", path.display()))?,
            None => RunConfig::default(),
        };
        if let Some(n) = &self.lookback {
            cfg.lookback_months = n.parse()?;
        }
        if let Some(out) = &self.out {
            cfg.output_dir = out.clone();
        }
        if let Some(seed) = self.seed {
            cfg.rng_seed = seed;
        }
        if let Some(mode) = self.mode {
            cfg.modes = vec![mode];
        }
        if let Some(v) = self.theta_grid_size {
            cfg.theta_grid_size = v;
        }
        if let Some(v) = self.small_n {
            cfg.small_n = v;
        }
        if let Some(v) = self.portfolio_k {
            cfg.portfolio_k = v;
        }
        if let Some(v) = self.min_coverage {
            cfg.min_coverage = v;
        }
        if let Some(v) = self.resolution {
            cfg.resolution = v;
        }
        if let Some(v) = self.workers {
            cfg.workers = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(args: RunArgs) -> Result<ExitCode> {
    let cfg = args.config()?;
    let summary = run_pipeline(&cfg, &args.prices, &args.sectors)?;
    println!(
        "{} windows written to {}",
        summary.windows.len(),
        summary.out_dir.display()
    );
    for (name, k) in &summary.kpis {
        let show = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.3}"));
        println!(
            "{name:<18} ann_ret {:>7.2}%  sharpe {:>6}  sortino {:>6}  max_dd {:>7.2}%",
            100.0 * k.ann_ret,
            show(k.sharpe),
            show(k.sortino),
            100.0 * k.max_dd
        );
    }
    if summary.succeeded() {
        return Ok(ExitCode::SUCCESS);
    }
    for f in &summary.failures {
        eprintln!("window {} failed: {}", f.anchor, f.error);
    }
    eprintln!("{} of {} windows failed; see manifest.json", summary.failures.len(), summary.failures.len() + summary.windows.len());
    Ok(ExitCode::FAILURE)
}

fn synth(args: SynthArgs) -> Result<ExitCode> {
    let cfg = SynthConfig {
        months: args.months,
        stocks: args.stocks,
        blocks: args.blocks,
        seed: args.seed,
        shock_month: args.shock_month,
        shock_vol: args.shock_vol,
        shuffle_sectors: args.shuffle_sectors,
        ..SynthConfig::default()
    };
    let panel = generate(&cfg)?;
    panel.write(&args.out)?;
    println!(
        "{} stocks x {} days written to {}",
        panel.prices.tickers.len(),
        panel.prices.dates.len(),
        args.out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Synth(args) => synth(args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
