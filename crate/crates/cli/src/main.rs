use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use geocon::consensus::aggregate_votes;
use geocon::pipeline::{self, PipelineConfig};
use geocon::synth::{generate, SynthConfig};
use geocon::GraphKind;
use geocon_serve::ResultStore;

#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

#[derive(Parser)]
#[command(name = "geocon", version, about = "County-level forecasting ensembles and consensus votes")]
struct Cli {
    /// Experiment config (TOML).
    #[arg(long, global = true, env = "GEOCON_CONFIG", default_value = "config.toml")]
    config: PathBuf,
    /// Output directory for artifacts.
    #[arg(long, global = true, env = "GEOCON_OUT", default_value = "out")]
    out: PathBuf,
    /// Worker threads for training; 0 uses every core.
    #[arg(long, global = true, env = "GEOCON_JOBS", default_value_t = 0)]
    jobs: usize,
    /// Overrides the config's master seed.
    #[arg(long, global = true, env = "GEOCON_SEED")]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load, normalize and align the configured state's series.
    Ingest,
    /// Build the border and socioeconomic networks.
    Graph,
    /// Run (or resume) the baseline / with-factor sweep.
    Train {
        /// Graph kind to train on; defaults to the config's.
        #[arg(long)]
        kind: Option<GraphKind>,
    },
    /// Tally vote tables from recorded runs.
    Vote {
        #[arg(long)]
        kind: Option<GraphKind>,
    },
    /// Write a planted-signal synthetic state into --out.
    Synth {
        #[arg(long, default_value_t = 20)]
        counties: usize,
        /// Number of counties the factor drives.
        #[arg(long, default_value_t = 5)]
        signal_set: usize,
        #[arg(long, default_value_t = 0.8)]
        beta: f64,
        #[arg(long, default_value_t = 250)]
        days: usize,
        /// Two-digit state prefix.
        #[arg(long, default_value = "99")]
        state: String,
    },
    /// Serve the JSON API over an output directory.
    Serve {
        #[arg(long, env = "GEOCON_PORT", default_value_t = 8080)]
        port: u16,
        /// Output directory to serve; defaults to --out.
        #[arg(long, env = "GEOCON_DATA")]
        data: Option<PathBuf>,
        #[arg(long, default_value = "127.0.0.1")]
        host: std::net::IpAddr,
    },
    /// Generate a small synthetic state and run every stage on it.
    Demo,
}

fn load(cli: &Cli, kind: Option<GraphKind>) -> Result<PipelineConfig> {
    let mut cfg = PipelineConfig::load(&cli.config, &cli.out)?;
    if let Some(seed) = cli.seed {
        cfg.experiment.seed = seed;
    }
    if let Some(kind) = kind {
        cfg.experiment.graph_kind = kind;
    }
    Ok(cfg)
}

fn report_votes(tables: &[geocon::consensus::VoteTable]) {
    for t in tables {
        let agg = aggregate_votes(t);
        println!(
            "{} {} {} alpha={}: total {} of {} (histogram {:?})",
            t.state,
            t.factor,
            t.graph_kind,
            t.alpha,
            agg.total,
            t.counties.len() * t.ceiling(),
            agg.histogram
        );
    }
}

fn serve(data: &Path, addr: SocketAddr) -> Result<()> {
    let store = Arc::new(ResultStore::load(data).with_context(|| format!("loading {}", data.display()))?);
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await.with_context(|| format!("binding {addr}"))?;
        println!("serving {} on http://{}", data.display(), listener.local_addr()?);
        geocon_serve::serve(store, listener).await?;
        Ok(())
    })
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Ingest => {
            let s = pipeline::ingest(&load(cli, None)?)?;
            println!("panel {:?} (T, N, F); {} rows rejected", s.panel_shape, s.rejected_rows);
        }
        Command::Graph => {
            let kinds = pipeline::graph(&load(cli, None)?)?;
            println!("built {kinds:?}");
        }
        Command::Train { kind } => {
            let records = pipeline::train(&load(cli, *kind)?, cli.jobs)?;
            let failed = records.iter().filter(|r| r.failed.is_some()).count();
            println!("{} run records ({failed} failed)", records.len());
        }
        Command::Vote { kind } => report_votes(&pipeline::vote(&load(cli, *kind)?)?),
        Command::Synth { counties, signal_set, beta, days, state } => {
            let config = SynthConfig {
                state: state.clone(),
                counties: *counties,
                signal: *signal_set,
                beta: *beta,
                days: *days,
                seed: cli.seed.unwrap_or(SynthConfig::default().seed),
                ..SynthConfig::default()
            };
            generate(&config)?.write(&cli.out, None)?;
            println!("wrote synthetic state {state} to {}", cli.out.display());
        }
        Command::Serve { port, data, host } => serve(data.as_deref().unwrap_or(&cli.out), SocketAddr::new(*host, *port))?,
        Command::Demo => {
            let cfg = pipeline::demo(&cli.out, cli.seed.unwrap_or(SynthConfig::default().seed), cli.jobs)?;
            for kind in [GraphKind::Border, GraphKind::Socio] {
                let mut c = cfg.clone();
                c.experiment.graph_kind = kind;
                report_votes(&pipeline::vote(&c)?);
            }
            println!("demo output in {}", cli.out.display());
        }
    }
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Err(e) = run(&cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
