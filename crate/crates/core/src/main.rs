use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use exec_arena::env::{
    episode_report, run_episode, write_report_csv, write_summary_csv, EnvConfig, EpisodeOutcome, ExecutionEnv,
};
use exec_arena::features::{FeatureConfig, FEATURE_NAMES};
use exec_arena::gateway::{factory_from_config, serve};
use exec_arena::lob::DEPTH_LEVELS;
use exec_arena::market_data::{generate_synthetic_day, read_messages, write_messages, SyntheticConfig};
use exec_arena::pipeline::{feature_rows, ReplaySession};
use exec_arena::types::{Ts, NANOS_PER_SEC};

#[derive(Parser)]
#[command(name = "exec-arena", version, about = "Limit order book simulator and execution environment")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic message CSV.
    GenData(GenDataArgs),
    /// Replay a message CSV and write depth and trade logs.
    Replay(ReplayArgs),
    /// Run zero-action episodes and report costs against the teacher.
    Baseline(EpisodeArgs),
    /// Run scripted episodes with a constant or piecewise action.
    Eval(EvalArgs),
    /// Compute the feature matrix of a message CSV.
    Features(FeaturesArgs),
    /// Serve environments over TCP.
    Serve(ServeArgs),
}

#[derive(Args)]
struct GenDataArgs {
    /// TOML file with generator parameters; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    duration_secs: Option<u64>,
    #[arg(long)]
    limit_rate: Option<f64>,
    #[arg(long)]
    market_rate: Option<f64>,
    #[arg(long)]
    cancel_rate: Option<f64>,
    #[arg(long)]
    size_mean: Option<f64>,
    #[arg(long)]
    init_depth: Option<u64>,
    /// Output path; stdout when omitted.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReplayArgs {
    #[arg(long, short)]
    input: PathBuf,
    /// Depth snapshot spacing in milliseconds.
    #[arg(long, default_value_t = 1000)]
    depth_interval_ms: u64,
    #[arg(long)]
    depth_out: Option<PathBuf>,
    #[arg(long)]
    trades_out: Option<PathBuf>,
    #[arg(long, default_value_t = 0.01)]
    tick_size: f64,
}

#[derive(Args)]
struct EpisodeArgs {
    /// Environment TOML; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    episodes: u64,
    /// Seed of the first episode; later episodes count up from it.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Per-episode report CSV; stdout when omitted.
    #[arg(long, short)]
    out: Option<PathBuf>,
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    episode: EpisodeArgs,
    /// Constant action `a1,a2,a3`.
    #[arg(long, allow_hyphen_values = true, conflicts_with = "actions")]
    action: Option<String>,
    /// CSV of `step,a1,a2,a3`; each row applies from its step onward.
    #[arg(long)]
    actions: Option<PathBuf>,
}

#[derive(Args)]
struct FeaturesArgs {
    #[arg(long, short)]
    input: PathBuf,
    #[arg(long, default_value_t = 60_000)]
    interval_ms: u64,
    /// TOML with feature parameters.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, short)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 0.01)]
    tick_size: f64,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:7070")]
    bind: String,
    /// Environment TOML used for every connection.
    #[arg(long)]
    episodes_config: Option<PathBuf>,
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => {
            Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?))
        }
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn load_toml<T: serde::de::DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing {}", p.display()))
        }
        None => Ok(T::default()),
    }
}

fn gen_data(args: GenDataArgs) -> Result<()> {
    let mut cfg: SyntheticConfig = load_toml(args.config.as_deref())?;
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.duration_secs {
        cfg.duration = v * NANOS_PER_SEC;
    }
    if let Some(v) = args.limit_rate {
        cfg.limit_rate = v;
    }
    if let Some(v) = args.market_rate {
        cfg.market_rate = v;
    }
    if let Some(v) = args.cancel_rate {
        cfg.cancel_rate = v;
    }
    if let Some(v) = args.size_mean {
        cfg.size_mean = v;
    }
    if let Some(v) = args.init_depth {
        cfg.init_depth = v;
    }
    let records = generate_synthetic_day(&cfg)?;
    let mut out = output(args.out.as_deref())?;
    write_messages(&mut out, &records)?;
    out.flush()?;
    eprintln!("generated {} messages", records.len());
    Ok(())
}

fn depth_header() -> String {
    let mut cols = vec!["ts_ns".to_string()];
    for (side, what) in [("bid", "px"), ("ask", "px"), ("bid", "vol"), ("ask", "vol")] {
        cols.extend((1..=DEPTH_LEVELS).map(|i| format!("{side}_{what}_{i}")));
    }
    cols.join(",")
}

fn replay(args: ReplayArgs) -> Result<()> {
    if args.depth_interval_ms == 0 {
        bail!("--depth-interval-ms must be positive");
    }
    let records: Arc<[_]> =
        read_messages(&args.input).with_context(|| format!("reading {}", args.input.display()))?.into();
    let n = records.len();
    let began = Instant::now();
    let mut session = ReplaySession::new(records, args.tick_size, true, false)?;
    let mut depth_out = args.depth_out.as_deref().map(|p| output(Some(p))).transpose()?;
    if let Some(out) = depth_out.as_mut() {
        writeln!(out, "{}", depth_header())?;
    }
    let step: Ts = args.depth_interval_ms * 1_000_000;
    let mut t = session.start();
    loop {
        session.run_until(t)?;
        if let Some(out) = depth_out.as_mut() {
            let d = session.depth();
            let fields: Vec<String> = d
                .bid_prices
                .iter()
                .chain(&d.ask_prices)
                .map(|p| p.to_string())
                .chain(d.bid_vols.iter().chain(&d.ask_vols).map(|v| v.to_string()))
                .collect();
            writeln!(out, "{},{}", t, fields.join(","))?;
        }
        if t >= session.end() {
            break;
        }
        t = (t + step).min(session.end());
    }
    let elapsed = began.elapsed();
    if let Some(mut out) = depth_out {
        out.flush()?;
    }
    if let Some(p) = args.trades_out.as_deref() {
        let mut out = output(Some(p))?;
        writeln!(out, "ts_ns,price_ticks,qty,aggressor,maker_order_id,taker_order_id")?;
        for tr in session.tape() {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                tr.ts,
                tr.price,
                tr.qty,
                tr.aggressor_side.as_char(),
                tr.maker_order_id.0,
                tr.taker_order_id.0
            )?;
        }
        out.flush()?;
    }
    let stats = session.stats();
    eprintln!(
        "{n} messages, {} trades, {} skipped, {} rejected in {:.3}s",
        session.tape().len(),
        stats.skipped,
        session.rejections(),
        elapsed.as_secs_f64()
    );
    Ok(())
}

fn parse_action(s: &str) -> Result<[f64; 3]> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .with_context(|| format!("bad action {s:?}"))?;
    match parts.as_slice() {
        [a, b, c] if parts.iter().all(|x| x.is_finite()) => Ok([*a, *b, *c]),
        _ => bail!("action needs three finite numbers, got {s:?}"),
    }
}

/// Step-indexed action schedule; each entry holds from its step onward.
fn load_schedule(path: &Path) -> Result<Vec<(u64, [f64; 3])>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let mut out: Vec<(u64, [f64; 3])> = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row?;
        if i == 0 && row.get(0).is_some_and(|f| f.parse::<u64>().is_err()) {
            continue; // header
        }
        if row.len() != 4 {
            bail!("{}: row {} needs step,a1,a2,a3", path.display(), i + 1);
        }
        let step: u64 = row[0].parse().with_context(|| format!("row {}", i + 1))?;
        let action = parse_action(&format!("{},{},{}", &row[1], &row[2], &row[3]))?;
        if out.last().is_some_and(|(s, _)| *s >= step) {
            bail!("{}: steps must increase", path.display());
        }
        out.push((step, action));
    }
    if out.is_empty() {
        bail!("{}: empty action schedule", path.display());
    }
    Ok(out)
}

fn action_at(schedule: &[(u64, [f64; 3])], step: u64) -> [f64; 3] {
    schedule.iter().take_while(|(s, _)| *s <= step).last().map_or([0.0; 3], |(_, a)| *a)
}

fn run_episodes(args: &EpisodeArgs, schedule: &[(u64, [f64; 3])]) -> Result<()> {
    let cfg = match args.config.as_deref() {
        Some(p) => EnvConfig::load(p)?,
        None => EnvConfig::default(),
    };
    let mut env = ExecutionEnv::new(cfg)?;
    let mut outcomes: Vec<EpisodeOutcome> = Vec::new();
    for e in 0..args.episodes {
        let (outcome, _) =
            run_episode(&mut env, Some(args.seed + e), |last| action_at(schedule, last.info.step + 1))?;
        outcomes.push(outcome);
    }
    let mut out = output(args.out.as_deref())?;
    write_report_csv(&mut out, &outcomes)?;
    out.flush()?;
    let report = episode_report(&outcomes)?;
    match args.summary.as_deref() {
        Some(p) => {
            let mut s = output(Some(p))?;
            write_summary_csv(&mut s, &report)?;
            s.flush()?;
        }
        None => {
            let mut s = Vec::new();
            write_summary_csv(&mut s, &report)?;
            eprint!("{}", String::from_utf8_lossy(&s));
        }
    }
    Ok(())
}

fn eval(args: EvalArgs) -> Result<()> {
    let schedule = match (&args.action, &args.actions) {
        (Some(a), None) => vec![(1, parse_action(a)?)],
        (None, Some(p)) => load_schedule(p)?,
        _ => bail!("give exactly one of --action or --actions"),
    };
    run_episodes(&args.episode, &schedule)
}

fn features(args: FeaturesArgs) -> Result<()> {
    if args.interval_ms == 0 {
        bail!("--interval-ms must be positive");
    }
    let cfg: FeatureConfig = load_toml(args.config.as_deref())?;
    let records: Arc<[_]> =
        read_messages(&args.input).with_context(|| format!("reading {}", args.input.display()))?.into();
    let rows = feature_rows(records, &cfg, args.interval_ms * 1_000_000, args.tick_size)?;
    let mut out = output(args.out.as_deref())?;
    writeln!(out, "ts_ns,{}", FEATURE_NAMES.join(","))?;
    for (ts, row) in rows {
        let cells: Vec<String> = row.iter().map(|x| format!("{x:?}")).collect();
        writeln!(out, "{ts},{}", cells.join(","))?;
    }
    out.flush()?;
    Ok(())
}

fn serve_cmd(args: ServeArgs) -> Result<()> {
    let cfg = match args.episodes_config.as_deref() {
        Some(p) => EnvConfig::load(p)?,
        None => EnvConfig::default(),
    };
    cfg.validate()?;
    eprintln!("serving on {}", args.bind);
    serve(args.bind.as_str(), factory_from_config(cfg))?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::GenData(a) => gen_data(a),
        Command::Replay(a) => replay(a),
        Command::Baseline(a) => run_episodes(&a, &[(1, [0.0; 3])]),
        Command::Eval(a) => eval(a),
        Command::Features(a) => features(a),
        Command::Serve(a) => serve_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
