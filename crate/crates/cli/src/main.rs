//! `vhb`: simulate sessions, analyze logs, compare score lists, serve live games.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use vhb_core::config::{Mode, SessionConfig};
use vhb_core::insights::report::{render_report, RenderFormat};
use vhb_core::insights::summarize;
use vhb_core::layout::{layout, scale_layout, LayoutName, MIN_SPACING_M};
use vhb_core::log::{parse_unvalidated, serialize, LOG_EXTENSION};
use vhb_core::player::{simulate_session, PlayerParams};
use vhb_core::stats::{paired_t, pearson_test, two_sample_t, welch_t};
use vhb_core::{replay, CohortStats, Millis};

#[derive(Parser)]
#[command(name = "vhb", version, about = "Lightboard reaction game toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Play a session with the simulated player and write its log.
    Simulate(SimulateArgs),
    /// Render an analytics report for a session log.
    Insights(InsightsArgs),
    /// Run a hypothesis test on two CSV score columns.
    Compare(CompareArgs),
    /// Serve live sessions over WebSocket.
    Serve(ServeArgs),
    /// Recompute a log's score and re-run its inputs through the engine.
    Replay {
        log: PathBuf,
    },
    /// Print the built-in layout table.
    Layouts {
        /// Emit JSON instead of a text table.
        #[arg(long)]
        json: bool,
    },
}

#[derive(clap::Args)]
struct SimulateArgs {
    #[arg(long, value_parser = parse_mode, default_value = "accumulator")]
    mode: Mode,
    #[arg(long, value_parser = parse_layout, default_value = "classic12")]
    layout: LayoutName,
    /// Multiplies every target position in the board plane.
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// JSON file with player parameters; missing fields take defaults.
    #[arg(long)]
    params: Option<PathBuf>,
    /// Overrides the player seed from --params.
    #[arg(long)]
    player_seed: Option<u64>,
    #[arg(long)]
    reaction_trials: Option<u32>,
    /// Accumulator time limit in seconds.
    #[arg(long)]
    limit: Option<f64>,
    #[arg(long)]
    sequence_max_trials: Option<u32>,
    /// Output path; defaults to `<session_id>.vhb.json` in the current directory.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Svg,
    Csv,
    Html,
    All,
}

#[derive(clap::Args)]
struct InsightsArgs {
    log: PathBuf,
    #[arg(long, value_enum, default_value = "html")]
    format: FormatArg,
    /// Output file (or directory with `--format all`); defaults to beside the log.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TestArg {
    Pearson,
    Paired,
    TwoSample,
    Welch,
}

#[derive(clap::Args)]
struct CompareArgs {
    a: PathBuf,
    b: PathBuf,
    #[arg(long, value_enum, default_value = "pearson")]
    test: TestArg,
    /// Column to read, by header name; defaults to the first column.
    #[arg(long)]
    column: Option<String>,
    #[arg(long)]
    json: bool,
}

#[derive(clap::Args)]
struct ServeArgs {
    #[arg(long, default_value_t = vhb_service::DEFAULT_PORT)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    #[arg(long, env = "VHB_LOG_DIR", default_value = "vhb-logs")]
    log_dir: PathBuf,
    #[arg(long, default_value_t = vhb_service::DEFAULT_CAPACITY)]
    capacity: usize,
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse().map_err(|e| format!("{e}"))
}

fn parse_layout(s: &str) -> Result<LayoutName, String> {
    s.parse().map_err(|e| format!("{e}"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => simulate(args),
        Command::Insights(args) => insights(args),
        Command::Compare(args) => compare(args),
        Command::Serve(args) => serve(args),
        Command::Replay { log } => replay_cmd(&log),
        Command::Layouts { json } => layouts(json),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn simulate(args: SimulateArgs) -> Result<ExitCode> {
    let spec = scale_layout(&layout(args.layout), args.scale)?;
    let mut config = SessionConfig::new(args.mode, spec).with_seed(args.seed);
    if let Some(n) = args.reaction_trials {
        config.reaction_trials = n;
    }
    if let Some(limit) = args.limit {
        config.accumulator_limit =
            Millis::from_secs_f64(limit).with_context(|| format!("invalid --limit {limit}"))?;
    }
    if let Some(n) = args.sequence_max_trials {
        config.sequence_max_trials = n;
    }
    let mut params = match &args.params {
        Some(path) => {
            let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
            PlayerParams::from_json(&bytes)?
        }
        None => PlayerParams::default(),
    };
    if let Some(seed) = args.player_seed {
        params.seed = seed;
    }
    let log = simulate_session(config, &params)?;
    let out = args
        .out
        .unwrap_or_else(|| PathBuf::from(format!("{}.{LOG_EXTENSION}", log.session_id)));
    std::fs::write(&out, serialize(&log)?).with_context(|| format!("writing {}", out.display()))?;
    println!("{}: {} score {}", out.display(), log.mode.as_str(), log.summary.score);
    Ok(ExitCode::SUCCESS)
}

fn read_log(path: &Path) -> Result<vhb_core::SessionLog> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    parse_unvalidated(&bytes).with_context(|| format!("parsing {}", path.display()))
}

/// `dir/a.vhb.json` -> `dir/a`.
fn log_stem(path: &Path) -> PathBuf {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let stem = name
        .strip_suffix(&format!(".{LOG_EXTENSION}"))
        .or_else(|| name.strip_suffix(".json"))
        .unwrap_or(&name)
        .to_owned();
    path.with_file_name(stem)
}

fn insights(args: InsightsArgs) -> Result<ExitCode> {
    let log = read_log(&args.log)?;
    let report = summarize(&log).with_context(|| format!("summarizing {}", args.log.display()))?;
    let formats: &[RenderFormat] = match args.format {
        FormatArg::Svg => &[RenderFormat::Svg],
        FormatArg::Csv => &[RenderFormat::Csv],
        FormatArg::Html => &[RenderFormat::Html],
        FormatArg::All => &[RenderFormat::Svg, RenderFormat::Csv, RenderFormat::Html],
    };
    let stem = log_stem(&args.log);
    for &format in formats {
        let ext = format!("insights.{}", format.extension());
        let path = match (&args.out, formats.len()) {
            (Some(out), 1) => out.clone(),
            (Some(dir), _) => {
                std::fs::create_dir_all(dir)?;
                dir.join(stem.file_name().unwrap_or_default()).with_extension(&ext)
            }
            (None, _) => stem.with_extension(&ext),
        };
        std::fs::write(&path, render_report(&report, format))
            .with_context(|| format!("writing {}", path.display()))?;
        println!("{}", path.display());
    }
    Ok(ExitCode::SUCCESS)
}

/// Reads one numeric column. A first row that does not parse is a header.
fn read_scores(path: &Path, column: Option<&str>) -> Result<Vec<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let mut rows = rdr.records();
    let mut index = 0;
    let mut values = Vec::new();
    let mut first = true;
    for row in rows.by_ref() {
        let row = row.with_context(|| format!("reading {}", path.display()))?;
        if row.iter().all(|c| c.is_empty()) {
            continue;
        }
        if first {
            first = false;
            if let Some(name) = column {
                index = row
                    .iter()
                    .position(|c| c == name)
                    .with_context(|| format!("{}: no column named {name:?}", path.display()))?;
                continue;
            }
            if row.get(0).is_some_and(|c| c.parse::<f64>().is_err()) {
                continue;
            }
        }
        let cell = row.get(index).unwrap_or("");
        let v: f64 = cell
            .parse()
            .with_context(|| format!("{}: {cell:?} is not a number", path.display()))?;
        values.push(v);
    }
    Ok(values)
}

fn compare(args: CompareArgs) -> Result<ExitCode> {
    let xs = read_scores(&args.a, args.column.as_deref())?;
    let ys = read_scores(&args.b, args.column.as_deref())?;
    let (name, stats): (&str, CohortStats) = match args.test {
        TestArg::Pearson => ("pearson", pearson_test(&xs, &ys)?),
        TestArg::Paired => ("paired_t", paired_t(&xs, &ys)?),
        TestArg::TwoSample => ("two_sample_t", two_sample_t(&xs, &ys)?),
        TestArg::Welch => ("welch_t", welch_t(&xs, &ys)?),
    };
    if args.json {
        let mut v = serde_json::to_value(stats)?;
        v["test"] = name.into();
        v["n"] = serde_json::json!([xs.len(), ys.len()]);
        println!("{}", serde_json::to_string_pretty(&v)?);
        return Ok(ExitCode::SUCCESS);
    }
    println!("{:<20}{name}", "test");
    println!("{:<20}{}, {}", "n", xs.len(), ys.len());
    if let Some(r) = stats.pearson_r {
        println!("{:<20}{r:.6}", "pearson_r");
    }
    println!("{:<20}{:.6}", "t_statistic", stats.t_statistic);
    println!("{:<20}{}", "degrees_of_freedom", stats.degrees_of_freedom);
    println!("{:<20}{:.6e}", "p_value", stats.p_value);
    println!("{:<20}{}", "significance", stars(stats.p_value));
    Ok(ExitCode::SUCCESS)
}

fn stars(p: f64) -> &'static str {
    match p {
        p if p < 0.001 => "***",
        p if p < 0.01 => "**",
        p if p < 0.05 => "*",
        _ => "ns",
    }
}

fn serve(args: ServeArgs) -> Result<ExitCode> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .init();
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async {
        let addr = format!("{}:{}", args.host, args.port);
        let listener = tokio::net::TcpListener::bind(&addr)
            .await
            .with_context(|| format!("binding {addr}"))?;
        tracing::info!("listening on {addr}, logs in {}", args.log_dir.display());
        let config = vhb_service::ServiceConfig { log_dir: args.log_dir, capacity: args.capacity };
        vhb_service::serve(listener, config).await?;
        Ok(ExitCode::SUCCESS)
    })
}

fn replay_cmd(path: &Path) -> Result<ExitCode> {
    let log = read_log(path)?;
    let recomputed = log.recomputed_score();
    let mut ok = true;
    if recomputed == log.summary.score {
        println!("score OK ({recomputed})");
    } else {
        println!("score MISMATCH: summary {}, recomputed {recomputed}", log.summary.score);
        ok = false;
    }
    match log.validate() {
        Ok(()) => println!("log OK"),
        Err(e) => {
            println!("log INVALID: {e}");
            ok = false;
        }
    }
    match replay(&log) {
        Ok(rerun) if rerun == log => println!("engine replay OK"),
        Ok(rerun) => {
            println!(
                "engine replay MISMATCH: score {} vs {}, {} vs {} snapshots",
                rerun.summary.score,
                log.summary.score,
                rerun.snapshots.len(),
                log.snapshots.len()
            );
            ok = false;
        }
        Err(e) => {
            println!("engine replay FAILED: {e}");
            ok = false;
        }
    }
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn layouts(json: bool) -> Result<ExitCode> {
    if json {
        let all: Vec<serde_json::Value> = LayoutName::ALL
            .iter()
            .map(|&n| serde_json::from_str(&layout(n).to_json()).expect("layout json"))
            .collect();
        println!("{}", serde_json::to_string_pretty(&all)?);
        return Ok(ExitCode::SUCCESS);
    }
    println!("{:<14}{:>8}{:>14}{:>12}{:>12}", "name", "targets", "min_spacing_m", "width_m", "height_m");
    for name in LayoutName::ALL {
        let spec = layout(name);
        let span = |f: fn(&vhb_core::Position3) -> f64| {
            let vals = spec.targets().iter().map(f);
            let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
            hi - lo
        };
        println!(
            "{:<14}{:>8}{:>14.3}{:>12.3}{:>12.3}",
            name.as_str(),
            spec.len(),
            spec.min_spacing(),
            span(|p| p.x),
            span(|p| p.y)
        );
    }
    println!("minimum spacing {MIN_SPACING_M} m at scale 1.0");
    Ok(ExitCode::SUCCESS)
}
