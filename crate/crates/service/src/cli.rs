//! Command-line entry points.

use std::fs;
use std::net::SocketAddr;
use std::path::PathBuf;

use airbubble_core::calibrate::calibrate_emissions;
use airbubble_core::scenario::{HeightLabel, Mode, Scenario};
use airbubble_core::trace::{run_headless, ProbeTrace};
use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use serde_json::json;

use crate::png::write_heatmap_png;
use crate::server::{router, AppState, ServerConfig};

#[derive(Debug, Parser)]
#[command(
    name = "airbubble",
    version,
    about = "Indoor CO2 bubble game: simulator, batch runs and HTTP host"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a scenario headless and write its probe trace and event log.
    Run {
        /// Bundled scenario name or path to a scenario TOML file.
        #[arg(long)]
        scenario: String,
        #[arg(long)]
        minutes: f64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Seconds between trace rows.
        #[arg(long, default_value_t = airbubble_core::trace::DEFAULT_SAMPLE_INTERVAL_S)]
        interval: f64,
    },
    /// Render one height of a probe trace at time `t` as CSV (and PNG).
    Heatmap {
        #[arg(long)]
        trace: PathBuf,
        /// Simulated seconds; the latest row at or before it is used.
        #[arg(long)]
        t: f64,
        /// G, T or C.
        #[arg(long)]
        height: HeightLabel,
        /// Also write a PNG here.
        #[arg(long)]
        png: Option<PathBuf>,
    },
    /// Serve the HTTP API with one session started from `--scenario`.
    /// Every flag can also be set through its `AIRBUBBLE_*` variable.
    Serve {
        #[arg(long, env = "AIRBUBBLE_SCENARIO")]
        scenario: String,
        #[arg(long, env = "AIRBUBBLE_PORT", default_value_t = 8080)]
        port: u16,
        #[arg(long, env = "AIRBUBBLE_SEED")]
        seed: Option<u64>,
        #[arg(long, env = "AIRBUBBLE_TIME_SCALE")]
        time_scale: Option<f64>,
        #[arg(long, env = "AIRBUBBLE_MODE")]
        mode: Option<Mode>,
        #[arg(long, env = "AIRBUBBLE_BIND", default_value = "127.0.0.1")]
        bind: String,
        /// Directory for per-session NDJSON event logs.
        #[arg(long, env = "AIRBUBBLE_LOG_DIR", default_value = "sessions")]
        log_dir: PathBuf,
    },
    /// Fit source emissions so the table-height corner peak hits a target.
    Calibrate {
        #[arg(long)]
        scenario: String,
        #[arg(long)]
        target_ppm: f64,
        #[arg(long)]
        target_minutes: f64,
        #[arg(long, default_value_t = 5.0)]
        tolerance_ppm: f64,
        /// Write the calibrated scenario TOML here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List bundled scenarios.
    Scenarios,
}

impl Cli {
    pub fn run(self) -> anyhow::Result<()> {
        match self.command {
            Command::Run {
                scenario,
                minutes,
                out,
                seed,
                interval,
            } => run(&scenario, minutes, &out, seed, interval),
            Command::Heatmap { trace, t, height, png } => {
                let csv = heatmap(&trace, t, height, png.as_deref())?;
                print!("{csv}");
                Ok(())
            }
            Command::Serve {
                scenario,
                port,
                seed,
                time_scale,
                mode,
                bind,
                log_dir,
            } => {
                let scenario = Scenario::resolve(&scenario)?;
                let config = ServerConfig {
                    time_scale,
                    log_dir: Some(log_dir),
                    ..ServerConfig::default()
                };
                let addr: SocketAddr = format!("{bind}:{port}").parse().context("bind address")?;
                let rt = tokio::runtime::Runtime::new()?;
                rt.block_on(serve(scenario, mode, seed, config, addr))
            }
            Command::Calibrate {
                scenario,
                target_ppm,
                target_minutes,
                tolerance_ppm,
                out,
            } => {
                let scenario = Scenario::resolve(&scenario)?;
                let cal = calibrate_emissions(&scenario, target_ppm, target_minutes, tolerance_ppm)?;
                if let Some(path) = out {
                    fs::write(&path, cal.scenario.to_toml_string())
                        .with_context(|| format!("writing {}", path.display()))?;
                }
                let report = json!({
                    "scenario": scenario.name,
                    "emission_scale": cal.scale,
                    "peak_ppm": cal.peak.ppm,
                    "peak_minutes": cal.peak.t_s / 60.0,
                    "peak_probe": format!("r{}c{}_T", cal.peak.probe_row, cal.peak.probe_col),
                    "runs": cal.runs,
                });
                println!("{}", serde_json::to_string_pretty(&report)?);
                Ok(())
            }
            Command::Scenarios => {
                for name in Scenario::bundled_names() {
                    println!("{name}");
                }
                Ok(())
            }
        }
    }
}

/// `run`: writes `trace.csv`, `events.ndjson`, `summary.json` and one
/// final-time heatmap PNG per height into `out`.
pub fn run(
    scenario: &str,
    minutes: f64,
    out: &std::path::Path,
    seed: Option<u64>,
    interval: f64,
) -> anyhow::Result<()> {
    if !(minutes.is_finite() && minutes >= 0.0) {
        bail!("--minutes must be a non-negative number");
    }
    let scenario = Scenario::resolve(scenario)?;
    let seed = seed.unwrap_or(scenario.session.seed);
    let result = run_headless(&scenario, minutes * 60.0, interval, seed)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    fs::write(out.join("trace.csv"), result.trace.to_csv())?;
    fs::write(out.join("events.ndjson"), result.events.to_ndjson())?;
    for h in HeightLabel::ALL {
        write_heatmap_png(&result.session.heatmap(h), &out.join(format!("heatmap_{h}.png")))?;
    }
    let summary = json!({
        "scenario": scenario.name,
        "seed": seed,
        "minutes": minutes,
        "rows": result.trace.len(),
        "columns": result.trace.columns.len(),
        "events": result.events.len(),
        "final_mean_ppm": result.session.field().mean_ppm(),
        "final_max_ppm": result.session.field().max_ppm(),
    });
    fs::write(out.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
    Ok(())
}

/// `heatmap`: the grid as CSV, optionally also written as PNG.
pub fn heatmap(
    trace: &std::path::Path,
    t: f64,
    height: HeightLabel,
    png: Option<&std::path::Path>,
) -> anyhow::Result<String> {
    let file = fs::File::open(trace).with_context(|| format!("opening {}", trace.display()))?;
    let trace = ProbeTrace::from_reader(file)?;
    let grid = trace.heatmap(t, height)?;
    if let Some(path) = png {
        write_heatmap_png(&grid, path)?;
    }
    Ok(grid.to_csv())
}

pub async fn serve(
    scenario: Scenario,
    mode: Option<Mode>,
    seed: Option<u64>,
    config: ServerConfig,
    addr: SocketAddr,
) -> anyhow::Result<()> {
    let state = AppState::new(config);
    let mode = mode.unwrap_or(scenario.session.mode);
    let id = state.start_session(&scenario, mode, seed.unwrap_or(scenario.session.seed))?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!(
        "serving session {id} ({}) on http://{}",
        scenario.name,
        listener.local_addr()?
    );
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
