mod feedback;

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use homelearn_core::events::NullSink;
use homelearn_core::runner::{
    load_qtable, load_trace, read_scenario_file, replay_trace, save_qtable, save_report, save_trace, Engine,
    OracleConfig, Scenario, TraceFile,
};
use homelearn_core::world::JointState;
use homelearn_gateway::GatewayError;

#[derive(Parser)]
#[command(name = "homelearn", version, about = "Train and serve smart-home Q-learning scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a scenario and write qtable.json, trace.json and report.json.
    Run {
        scenario: PathBuf,
        #[arg(long)]
        episodes: Option<u32>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Print a saved Q-table, or one row of it.
    Inspect {
        qtable: PathBuf,
        /// Row to show, as `device=label,...`.
        #[arg(long)]
        state: Option<String>,
    },
    /// Serve a scenario over HTTP.
    Serve {
        scenario: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: std::net::IpAddr,
    },
    /// Recompute a saved trace and check it against its Q-table.
    Replay {
        trace: PathBuf,
        /// Defaults to qtable.json next to the trace.
        #[arg(long)]
        qtable: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Run {
            scenario,
            episodes,
            seed,
            out,
        } => run(&scenario, episodes, seed, &out),
        Command::Inspect { qtable, state } => inspect(&qtable, state.as_deref()),
        Command::Serve { scenario, port, host } => serve(&scenario, SocketAddr::new(host, port)),
        Command::Replay { trace, qtable } => replay(&trace, qtable.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(exit_code(&e))
        }
    }
}

/// The error chain, skipping causes already spelled out by their parent.
fn describe(e: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in e.chain() {
        let text = cause.to_string();
        if !out.contains(&text) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&text);
        }
    }
    out
}

/// 1 for bad input, 2 for failures while running.
fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if let Some(err) = cause.downcast_ref::<homelearn_core::Error>() {
            return if err.is_validation() { 1 } else { 2 };
        }
        if let Some(GatewayError::Engine(err)) = cause.downcast_ref::<GatewayError>() {
            return if err.is_validation() { 1 } else { 2 };
        }
        if cause.downcast_ref::<UsageError>().is_some() {
            return 1;
        }
    }
    2
}

#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn run(path: &Path, episodes: Option<u32>, seed: Option<u64>, out: &Path) -> Result<()> {
    let mut file = read_scenario_file(path)?;
    if let Some(n) = episodes {
        file.episodes = n;
    }
    if let Some(s) = seed {
        file.seed = s;
    }
    let scenario = Arc::new(Scenario::from_file(file.clone())?);
    let mut engine = match scenario.oracle {
        OracleConfig::Collaborative { .. } => {
            Engine::with_feedback(scenario.clone(), Box::new(feedback::StdinChannel::spawn()))?
        }
        _ => Engine::new(scenario.clone())?,
    };
    let report = engine.run(&mut NullSink)?;
    let outcome = engine.into_outcome().expect("run finished");

    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    save_qtable(&outcome.qtable, out.join("qtable.json"))?;
    save_trace(
        &TraceFile {
            scenario: file,
            episodes: outcome.traces,
        },
        out.join("trace.json"),
    )?;
    save_report(&report, out.join("report.json"))?;

    let last = report.episodes.last().expect("at least one episode");
    println!(
        "{}: {} episodes, seed {}, final epsilon {:.4}",
        report.scenario,
        report.episodes.len(),
        report.seed,
        report.final_epsilon
    );
    println!("last episode reward {}", last.cumulative_reward);
    match report.convergence_episode {
        Some(k) => println!("aligned with the user from episode {k}"),
        None if last.alignment_rate.is_some() => println!("not aligned with the user by the last episode"),
        None => {}
    }
    println!("wrote {}", out.display());
    Ok(())
}

fn inspect(path: &Path, state: Option<&str>) -> Result<()> {
    let q = load_qtable(path)?;
    let actions = q.vocab().names();
    let rows: Vec<usize> = match state {
        Some(text) => {
            let s: JointState = text
                .parse()
                .map_err(|e| UsageError(format!("bad --state `{text}`: {e}")))?;
            vec![q.space().encode_state(&s)?]
        }
        None => (0..q.rows()).collect(),
    };
    let width = actions.iter().map(String::len).max().unwrap_or(4).max(10);
    for r in rows {
        let s = q.space().decode_state(r)?;
        let terminal = if q.is_terminal(r) { "  (terminal)" } else { "" };
        println!("{}{terminal}", s.key());
        let best = q.greedy_index(r);
        for (i, name) in actions.iter().enumerate() {
            let mark = if i == best { "*" } else { " " };
            println!("  {mark} {name:<width$} {:>12.6}", q.get(r, i));
        }
    }
    Ok(())
}

fn serve(path: &Path, addr: SocketAddr) -> Result<()> {
    let file = read_scenario_file(path)?;
    let scenario = Arc::new(Scenario::from_file(file)?);
    let rt = tokio::runtime::Runtime::new().context("starting runtime")?;
    rt.block_on(async move {
        let service = homelearn_gateway::serve(scenario, addr).await?;
        println!("listening on http://{}", service.local_addr());
        tokio::select! {
            r = service.wait() => r?,
            _ = tokio::signal::ctrl_c() => {}
        }
        Ok(())
    })
}

fn replay(path: &Path, qtable: Option<&Path>) -> Result<()> {
    let trace = load_trace(path)?;
    let replayed = replay_trace(&trace)?;
    let updates: usize = trace
        .episodes
        .iter()
        .flat_map(|e| &e.steps)
        .map(|s| s.updates.len())
        .sum();
    let sibling = path.with_file_name("qtable.json");
    let target = match qtable {
        Some(p) => Some(p.to_owned()),
        None if sibling.exists() => Some(sibling),
        None => None,
    };
    println!("replayed {} episodes, {updates} updates", trace.episodes.len());
    if let Some(target) = target {
        let stored = load_qtable(&target)?;
        if stored != replayed {
            bail!(homelearn_core::Error::ReplayDiverged {
                episode: trace.episodes.len() as u32,
                step: 0,
                detail: format!("final table differs from {}", target.display()),
            });
        }
        println!("matches {}", target.display());
    }
    Ok(())
}
