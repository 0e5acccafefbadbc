//! The `audit` command line: one subcommand per pipeline stage plus the
//! labeling service.

pub mod config;
pub mod error;
pub mod fixture;
pub mod stages;
pub mod workspace;

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use audit_core::corpus::{load_index, VenueConfig};
use audit_core::fetch::HostThrottle;
use audit_core::labels::{targets_from_matches, LabelStore};
use audit_core::mine::import_matches;
use audit_service::{AppState, ArticleMeta, ServiceOptions};
use clap::{Parser, Subcommand};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::stages::Ctx;
use crate::workspace::Workspace;

#[derive(Debug, Parser)]
#[command(name = "audit", version, about = "Audit data and code availability in a venue's published articles")]
pub struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true, default_value = "audit.toml")]
    pub config: PathBuf,
    /// Workspace directory; overrides `workspace_dir` from the config.
    #[arg(long, global = true)]
    pub workspace: Option<PathBuf>,
    /// Sampling seed; overrides `sample.seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Restrict to one venue id.
    #[arg(long, global = true)]
    pub venue: Option<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build or refresh the article index from listing pages.
    Index,
    /// Draw the reproducible random sample.
    Sample,
    /// Download sampled PDFs into the cache.
    Fetch,
    /// Extract paragraphs from cached PDFs.
    Extract,
    /// Run the keyword patterns over extracted paragraphs.
    Mine,
    /// Write per-venue figures and the aggregate report.
    Report,
    /// Index, sample, fetch, extract and mine every venue, then report.
    RunAll,
    /// Start the labeling service for one venue.
    Serve {
        /// Listen address; defaults to the config's bind_addr and port.
        #[arg(long)]
        bind: Option<SocketAddr>,
        /// Built UI assets to serve instead of the embedded page.
        #[arg(long)]
        static_dir: Option<PathBuf>,
    },
    /// Label log maintenance.
    Labels {
        #[command(subcommand)]
        action: LabelsCommand,
    },
    /// Write a synthetic venue with planted trigger sentences.
    Fixture {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 20)]
        articles: usize,
        #[arg(long, default_value_t = 7)]
        planted: usize,
    },
}

#[derive(Debug, Subcommand)]
pub enum LabelsCommand {
    /// Append judgments from a CSV file made outside the service.
    ImportCsv {
        csv: PathBuf,
        /// Labeler id for rows that leave it blank.
        #[arg(long)]
        labeler: String,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Index => "index",
            Command::Sample => "sample",
            Command::Fetch => "fetch",
            Command::Extract => "extract",
            Command::Mine => "mine",
            Command::Report => "report",
            Command::RunAll => "run-all",
            Command::Serve { .. } => "serve",
            Command::Labels { .. } => "labels import-csv",
            Command::Fixture { .. } => "fixture",
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    init_tracing();
    let name = cli.command.name();
    let mut ws_for_error: Option<Workspace> = None;
    let result = run(&cli, &mut ws_for_error);
    match result {
        Ok(()) => {
            if let Some(ws) = &ws_for_error {
                ws.clear_error();
            }
            0
        }
        Err(e) => {
            eprintln!("error[{}]: {e}", e.code());
            if let Some(ws) = &ws_for_error {
                ws.write_error(&e, Some(name));
            }
            e.exit_code()
        }
    }
}

fn init_tracing() {
    let filter = tracing_subscriber::EnvFilter::try_from_default_env()
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("warn"));
    let _ = tracing_subscriber::fmt().with_env_filter(filter).with_writer(std::io::stderr).try_init();
}

fn run(cli: &Cli, ws_slot: &mut Option<Workspace>) -> Result<(), CliError> {
    if let Command::Fixture { out, articles, planted } = &cli.command {
        let truth = fixture::generate(out, *articles, *planted)?;
        println!(
            "fixture {}: {} articles, {} planted, config {}",
            truth.venue_id,
            truth.planted.len() + truth.control.len(),
            truth.planted.len(),
            out.join("audit.toml").display()
        );
        return Ok(());
    }

    let cfg = RunConfig::load(&cli.config)?;
    let ws = Workspace::new(cli.workspace.clone().unwrap_or_else(|| cfg.workspace_dir.clone()));
    *ws_slot = Some(ws.clone());
    ws.create()?;
    let ctx = Ctx { cfg: &cfg, ws: &ws, seed: cli.seed };
    let venues = cfg.venues(cli.venue.as_deref())?;

    match &cli.command {
        Command::Index => venues.iter().try_for_each(|v| run_index(&ctx, v)),
        Command::Sample => venues.iter().try_for_each(|v| run_sample(&ctx, v)),
        Command::Fetch => {
            let throttle = Arc::new(HostThrottle::new());
            venues.iter().try_for_each(|v| run_fetch(&ctx, v, throttle.clone()))
        }
        Command::Extract => venues.iter().try_for_each(|v| run_extract(&ctx, v)),
        Command::Mine => venues.iter().try_for_each(|v| run_mine(&ctx, v)),
        Command::Report => run_report(&ctx, &venues),
        Command::RunAll => {
            let throttle = Arc::new(HostThrottle::new());
            for v in &venues {
                run_index(&ctx, v)?;
                run_sample(&ctx, v)?;
                run_fetch(&ctx, v, throttle.clone())?;
                run_extract(&ctx, v)?;
                run_mine(&ctx, v)?;
            }
            run_report(&ctx, &venues)
        }
        Command::Labels { action: LabelsCommand::ImportCsv { csv, labeler } } => {
            let v = single_venue(&venues, "labels import-csv")?;
            let added = stages::import_labels(&ctx, v, csv, labeler)?;
            println!("labels {}: {added} records appended", v.venue_id);
            Ok(())
        }
        Command::Serve { bind, static_dir } => {
            let v = single_venue(&venues, "serve")?;
            let (addr, state) = service_state(&ctx, v, *bind, static_dir.clone())?;
            println!("serve {}: http://{addr}/", v.venue_id);
            audit_service::run_blocking(addr, state).map_err(|e| CliError::Stage(format!("service: {e}")))
        }
        Command::Fixture { .. } => unreachable!("handled above"),
    }
}

fn single_venue<'a>(venues: &[&'a VenueConfig], cmd: &str) -> Result<&'a VenueConfig, CliError> {
    match venues {
        [v] => Ok(v),
        _ => Err(CliError::Usage(format!("{cmd} works on one venue; pass --venue"))),
    }
}

fn run_index(ctx: &Ctx, v: &VenueConfig) -> Result<(), CliError> {
    let n = stages::index(ctx, v)?;
    println!("index {}: {n} articles", v.venue_id);
    Ok(())
}

fn run_sample(ctx: &Ctx, v: &VenueConfig) -> Result<(), CliError> {
    let m = stages::sample_stage(ctx, v)?;
    println!("sample {}: {} of k={} selected (seed {})", v.venue_id, m.selected.len(), m.requested_k, m.seed);
    Ok(())
}

fn run_fetch(ctx: &Ctx, v: &VenueConfig, throttle: Arc<HostThrottle>) -> Result<(), CliError> {
    let t = stages::fetch(ctx, v, throttle)?;
    println!("fetch {}: {} fetched, {} cached, {} failed", v.venue_id, t.fetched, t.cached, t.failed);
    Ok(())
}

fn run_extract(ctx: &Ctx, v: &VenueConfig) -> Result<(), CliError> {
    let docs = stages::extract(ctx, v)?;
    let paragraphs: usize = docs.iter().map(|d| d.paragraphs.len()).sum();
    let empty = docs.iter().filter(|d| d.paragraphs.is_empty()).count();
    println!("extract {}: {} documents, {paragraphs} paragraphs, {empty} without text", v.venue_id, docs.len());
    Ok(())
}

fn run_mine(ctx: &Ctx, v: &VenueConfig) -> Result<(), CliError> {
    let counts = stages::mine(ctx, v)?;
    let hits = counts.values().filter(|&&c| c > 0).count();
    let total: usize = counts.values().sum();
    println!("mine {}: {total} matches in {hits} of {} articles", v.venue_id, counts.len());
    Ok(())
}

fn run_report(ctx: &Ctx, venues: &[&VenueConfig]) -> Result<(), CliError> {
    let reports = stages::report(ctx, venues)?;
    for r in &reports {
        println!(
            "report {}: n={}, data {}, code {}, any {}",
            r.venue_id, r.n_sampled, r.display.pct_data, r.display.pct_code, r.display.pct_any
        );
    }
    Ok(())
}

/// Loads matches, article metadata and the label log for one venue.
pub fn service_state(
    ctx: &Ctx,
    v: &VenueConfig,
    bind: Option<SocketAddr>,
    static_dir: Option<PathBuf>,
) -> Result<(SocketAddr, AppState), CliError> {
    let id = v.venue_id.as_str();
    let matches_rel = Workspace::matches(id);
    ctx.ws.require("serve", &matches_rel, "mine", Some(&Workspace::stage_manifest("mine", Some(id))))?;
    let matches = import_matches(&ctx.ws.path(&matches_rel))?;
    let mut meta = BTreeMap::new();
    let index_path = ctx.ws.path(&Workspace::index(id));
    if index_path.is_file() {
        for r in load_index(&index_path)?.records {
            meta.insert(r.article_id.clone(), ArticleMeta { title: r.title, venue_id: r.venue_id, year: r.year });
        }
    }
    let store = LabelStore::open(&ctx.ws.path(&Workspace::labels(id)), targets_from_matches(&matches))?;
    let svc = &ctx.cfg.service;
    let addr = match bind {
        Some(a) => a,
        None => format!("{}:{}", svc.bind_addr, svc.port)
            .parse()
            .map_err(|e| CliError::Config(format!("service address {}:{}: {e}", svc.bind_addr, svc.port)))?,
    };
    let opts = ServiceOptions {
        lease: chrono::Duration::minutes(svc.lease_minutes),
        static_dir: static_dir.or_else(|| svc.static_dir.clone()),
        ..ServiceOptions::default()
    };
    Ok((addr, AppState::new(matches, meta, store, opts)))
}
