use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use tracing_subscriber::EnvFilter;

use mrsls::audience::{simulate_audience, AudienceScript};
use mrsls::chatparse::CommandAliases;
use mrsls::scenegeo::SceneConfig;
use mrsls::server::{Server, ServerOptions};
use mrsls::session::{read_log, replay, ReplayLog, SessionConfig, SessionSettings};
use mrsls::versegame::Corpus;

#[derive(Parser)]
#[command(name = "mrsls", version, about = "Mixed-reality scenic live stream server")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a live session.
    Serve(ServeArgs),
    /// Re-run a session log and check its hashes.
    Replay(ReplayArgs),
    /// Drive a running server with scripted bots.
    Simulate(SimulateArgs),
    /// Export the gift ledger of a session log.
    Ledger(LedgerArgs),
}

/// Scene, corpus and alias inputs; bundled defaults when omitted.
#[derive(Args)]
struct Inputs {
    #[arg(long)]
    scene: Option<PathBuf>,
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    aliases: Option<PathBuf>,
}

impl Inputs {
    fn load(&self) -> Result<SessionConfig> {
        let mut config = SessionConfig::demo();
        if let Some(path) = &self.scene {
            config.scene = Arc::new(
                SceneConfig::load(path).with_context(|| format!("scene {}", path.display()))?,
            );
        }
        if let Some(path) = &self.corpus {
            config.corpus =
                Arc::new(Corpus::load(path).with_context(|| format!("corpus {}", path.display()))?);
        }
        if let Some(path) = &self.aliases {
            config.aliases = Arc::new(
                CommandAliases::load(path)
                    .with_context(|| format!("aliases {}", path.display()))?,
            );
        }
        Ok(config)
    }
}

#[derive(Args)]
struct ServeArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 7878)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    bind: String,
    #[arg(long, default_value_t = 30)]
    tick_rate: u32,
    /// Verse count the round must exceed to be won.
    #[arg(long, default_value_t = 20)]
    threshold: u32,
    /// Replay log path; defaults to `<session id>.log`.
    #[arg(long)]
    log: Option<PathBuf>,
    /// Stop after this many seconds of session time.
    #[arg(long)]
    duration: Option<f64>,
    /// Write one hex state hash per tick here.
    #[arg(long)]
    hashes: Option<PathBuf>,
}

#[derive(Args)]
struct ReplayArgs {
    log: PathBuf,
    #[command(flatten)]
    inputs: Inputs,
    /// Defaults to the seed recorded in the log.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    hashes: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, default_value = "127.0.0.1:7878")]
    addr: SocketAddr,
    #[arg(long, default_value_t = 40)]
    bots: usize,
    /// Script length in seconds.
    #[arg(long, default_value_t = 1200.0)]
    duration: f64,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Verses the bots know.
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct LedgerArgs {
    log: PathBuf,
    #[command(flatten)]
    inputs: Inputs,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> std::process::ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            EnvFilter::try_from_env("MRSLS_LOG").unwrap_or_else(|_| EnvFilter::new("info")),
        )
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Cmd::Serve(args) => serve(args),
        Cmd::Replay(args) => replay_cmd(args),
        Cmd::Simulate(args) => simulate(args),
        Cmd::Ledger(args) => ledger(args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::ExitCode::FAILURE
        }
    }
}

fn runtime() -> Result<tokio::runtime::Runtime> {
    Ok(tokio::runtime::Builder::new_multi_thread().enable_all().build()?)
}

fn write_hashes(path: &Path, hashes: &[[u8; 32]]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for h in hashes {
        writeln!(out, "{}", hex::encode(h))?;
    }
    out.flush()?;
    Ok(())
}

fn serve(args: ServeArgs) -> Result<std::process::ExitCode> {
    // everything is validated before the port is bound
    let config = args.inputs.load()?.with_settings(SessionSettings {
        tick_rate: args.tick_rate,
        game: mrsls::versegame::GameSettings {
            threshold: args.threshold,
            ..Default::default()
        },
        ..SessionSettings::default()
    });
    if args.tick_rate == 0 {
        bail!("--tick-rate must be positive");
    }
    let started = SystemTime::now().duration_since(UNIX_EPOCH)?.as_millis();
    let session_id = format!("s{}-{started}", args.seed);
    let log_path = args
        .log
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("{session_id}.log")));
    let mut options = ServerOptions::new(&session_id, args.seed);
    options.record_hashes = args.hashes.is_some();
    options.max_ticks = args
        .duration
        .map(|s| (s * args.tick_rate as f64).round() as u64);

    let rt = runtime()?;
    let summary = rt.block_on(async {
        let listener = tokio::net::TcpListener::bind((args.bind.as_str(), args.port))
            .await
            .with_context(|| format!("binding {}:{}", args.bind, args.port))?;
        let log = File::create(&log_path)
            .with_context(|| format!("creating {}", log_path.display()))?;
        let server = Server::start(config, options, Some(Box::new(BufWriter::new(log))))?;
        let handle = server.handle();
        tracing::info!(addr = %listener.local_addr()?, session = %session_id, log = %log_path.display(), "listening");
        let accept = {
            let handle = handle.clone();
            tokio::spawn(async move { handle.serve_tcp(listener).await })
        };
        tokio::select! {
            _ = tokio::signal::ctrl_c() => handle.shutdown(),
            _ = async { while !handle.is_shut_down() { tokio::time::sleep(Duration::from_millis(100)).await } } => {}
        }
        let summary = server.finish().await?;
        let _ = accept.await;
        anyhow::Ok(summary)
    })?;
    if let Some(path) = &args.hashes {
        write_hashes(path, &summary.tick_hashes)?;
    }
    println!(
        "session {} ended at tick {}: {} events, ledger total {} CNY, final hash {}, chain {}",
        summary.session_id,
        summary.ticks,
        summary.events,
        summary.ledger.total(),
        summary.final_hash,
        summary.chain
    );
    Ok(std::process::ExitCode::SUCCESS)
}

fn load_log(path: &Path) -> Result<ReplayLog> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_log(BufReader::new(file)).with_context(|| format!("reading {}", path.display()))
}

fn replay_cmd(args: ReplayArgs) -> Result<std::process::ExitCode> {
    let log = load_log(&args.log)?;
    let config = args.inputs.load()?;
    let seed = args.seed.unwrap_or(log.header.seed);
    let started = std::time::Instant::now();
    let outcome = replay(&log, config, seed)?;
    if let Some(path) = &args.hashes {
        write_hashes(path, &outcome.tick_hashes)?;
    }
    println!(
        "replayed {} events over {} ticks in {:.2?}; final hash {}, chain {}",
        log.events.len(),
        outcome.session.tick(),
        started.elapsed(),
        outcome.final_hash(),
        outcome.chain()
    );
    match outcome.matches(&log) {
        Some(true) => {
            println!("match: hashes equal the live run");
            Ok(std::process::ExitCode::SUCCESS)
        }
        Some(false) => {
            println!("MISMATCH: hashes differ from the live run");
            Ok(std::process::ExitCode::from(2))
        }
        None => {
            println!("log has no end record; nothing to compare against");
            Ok(std::process::ExitCode::SUCCESS)
        }
    }
}

fn simulate(args: SimulateArgs) -> Result<std::process::ExitCode> {
    let corpus = match &args.corpus {
        Some(path) => Corpus::load(path).with_context(|| format!("corpus {}", path.display()))?,
        None => Corpus::sample(),
    };
    if !(args.duration >= 0.0 && args.duration.is_finite()) {
        bail!("--duration must be a non-negative number of seconds");
    }
    let script = AudienceScript::new(
        args.bots,
        Duration::from_secs_f64(args.duration),
        args.seed,
        Arc::new(corpus),
    );
    let addr = args.addr;
    let report = runtime()?.block_on(simulate_audience(script, move |_| async move {
        let stream = tokio::net::TcpStream::connect(addr).await?;
        stream.set_nodelay(true)?;
        Ok(stream)
    }));
    let text = serde_json::to_string_pretty(&report)?;
    match &args.out {
        Some(path) => std::fs::write(path, text + "\n")?,
        None => println!("{text}"),
    }
    if report.all_failed() {
        eprintln!("error: no bot could connect to {addr}");
        return Ok(std::process::ExitCode::FAILURE);
    }
    Ok(std::process::ExitCode::SUCCESS)
}

fn ledger(args: LedgerArgs) -> Result<std::process::ExitCode> {
    let log = load_log(&args.log)?;
    let config = args.inputs.load()?;
    let outcome = replay(&log, config, log.header.seed)?;
    let ledger = outcome.session.economy().ledger();
    let mut out = BufWriter::new(
        File::create(&args.out).with_context(|| format!("creating {}", args.out.display()))?,
    );
    ledger.write_jsonl(&mut out)?;
    out.flush()?;
    println!(
        "{} gifts, total {} CNY, written to {}",
        ledger.records().len(),
        ledger.total(),
        args.out.display()
    );
    Ok(std::process::ExitCode::SUCCESS)
}
