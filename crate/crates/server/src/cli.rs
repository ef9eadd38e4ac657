//! `scriptorium` command line. Exit codes: 0 success, 1 usage error,
//! 2 runtime failure.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use clap::{Parser, Subcommand, ValueEnum};

use scriptorium::agent::{Agent, ImageInput, LlmConfig, LlmMode, PlannerMode, TurnInput};
use scriptorium::bench::{
    generate_questions, run_benchmark, LlmModelClient, ModelClient, OracleClient, QuestionSet, ScriptedClient, Task,
    ToolsClient,
};
use scriptorium::error::{Error, Result};
use scriptorium::kb::{ingest_dir, load_snapshot, save_snapshot, KbSnapshot};
use scriptorium::raster::RasterImage;
use scriptorium::synth::{generate_corpus, NoiseLevel, SynthConfig, GROUND_TRUTH_FILE};
use scriptorium::vision::VisionTools;

use crate::api::{router, AppState};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "scriptorium", version, about = "Oracle bone research assistant")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic corpus and save it as a knowledge-base snapshot.
    Synth {
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        classes: usize,
        #[arg(long, default_value_t = 20)]
        fragments: usize,
        #[arg(long, value_enum, default_value_t = Noise::Low)]
        noise: Noise,
        #[arg(long)]
        out: PathBuf,
    },
    /// Validate a payload directory and write it as a snapshot.
    Ingest {
        dir: PathBuf,
        /// Snapshot directory; defaults to the payload directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long, env = "SCRIPTORIUM_KB_DIR")]
        kb: PathBuf,
        #[arg(long, env = "SCRIPTORIUM_BIND", default_value = "127.0.0.1:8080")]
        bind: String,
        /// Idle seconds before a session expires.
        #[arg(long, default_value_t = 3600)]
        session_ttl: u64,
        /// Trace events kept per session.
        #[arg(long, default_value_t = 10_000)]
        trace_cap: usize,
        #[arg(long, value_enum, default_value_t = Planner::Rule)]
        planner: Planner,
        /// Let the LLM rewrite rendered answers.
        #[arg(long)]
        rewrite: bool,
    },
    /// Generate questions from a snapshot and score a client.
    Bench {
        #[arg(long, env = "SCRIPTORIUM_KB_DIR")]
        kb: PathBuf,
        /// Task name or `all`.
        #[arg(long, default_value = "all")]
        task: String,
        /// Questions per task.
        #[arg(long, default_value_t = 10)]
        n: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = ClientKind::Oracle)]
        client: ClientKind,
        /// Attempts per question.
        #[arg(long, default_value_t = 3)]
        retries: u32,
        /// Fixture table for `--client scripted`.
        #[arg(long)]
        fixtures: Option<PathBuf>,
        /// Write the oracle's answers as a fixture table and exit.
        #[arg(long)]
        record_fixtures: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// Run one agent turn and print the answer.
    Query {
        #[arg(long, env = "SCRIPTORIUM_KB_DIR")]
        kb: PathBuf,
        text: String,
        #[arg(long = "image")]
        images: Vec<PathBuf>,
        /// Print the whole turn as JSON.
        #[arg(long)]
        json: bool,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Noise {
    None,
    Low,
    High,
}

impl From<Noise> for NoiseLevel {
    fn from(n: Noise) -> Self {
        match n {
            Noise::None => NoiseLevel::None,
            Noise::Low => NoiseLevel::Low,
            Noise::High => NoiseLevel::High,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Planner {
    Rule,
    Llm,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ClientKind {
    Oracle,
    Scripted,
    Remote,
    Tools,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Format {
    Table,
    Json,
}

/// Parses `argv` (program name first), runs the command and returns the
/// exit code. Output goes to stdout, diagnostics to stderr.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}: {e}", e.code());
            EXIT_RUNTIME
        }
    }
}

fn execute(command: Command) -> Result<i32> {
    match command {
        Command::Synth {
            seed,
            classes,
            fragments,
            noise,
            out,
        } => synth(seed, classes, fragments, noise.into(), &out),
        Command::Ingest { dir, out } => ingest(&dir, out.as_deref().unwrap_or(&dir)),
        Command::Serve {
            kb,
            bind,
            session_ttl,
            trace_cap,
            planner,
            rewrite,
        } => serve(&kb, &bind, Duration::from_secs(session_ttl), trace_cap, planner, rewrite),
        Command::Bench {
            kb,
            task,
            n,
            seed,
            client,
            retries,
            fixtures,
            record_fixtures,
            format,
        } => bench(BenchArgs {
            kb,
            task,
            n,
            seed,
            client,
            retries,
            fixtures,
            record_fixtures,
            format,
        }),
        Command::Query { kb, text, images, json } => query(&kb, text, &images, json),
    }
}

fn synth(seed: u64, classes: usize, fragments: usize, noise: NoiseLevel, out: &Path) -> Result<i32> {
    let config = SynthConfig {
        seed,
        n_classes: classes,
        n_fragments: fragments,
        noise,
        ..SynthConfig::default()
    };
    let corpus = generate_corpus(&config)?;
    let kb = corpus.build_snapshot()?;
    let manifest = save_snapshot(&kb, out)?;
    corpus.ground_truth.save(&out.join(GROUND_TRUTH_FILE))?;
    for (store, n) in &manifest.counts {
        println!("{store:<16} {n}");
    }
    println!("wrote {}", out.display());
    Ok(EXIT_OK)
}

/// Accepted records are written even when some are rejected; rejections
/// make the exit code 2.
fn ingest(dir: &Path, out: &Path) -> Result<i32> {
    let (builder, reports) = ingest_dir(dir)?;
    let mut rejected = 0;
    for r in &reports {
        println!(
            "{:<16} accepted {:>5}  unchanged {:>5}  rejected {:>5}",
            r.store.name(),
            r.accepted,
            r.unchanged,
            r.rejected_count()
        );
        for x in &r.rejected {
            eprintln!("  rejected #{} {}: {:?}: {}", x.index, x.key, x.reason, x.detail);
        }
        rejected += r.rejected_count();
    }
    let kb = builder.build_indexes();
    save_snapshot(&kb, out)?;
    println!("wrote {}", out.display());
    Ok(if rejected == 0 { EXIT_OK } else { EXIT_RUNTIME })
}

fn llm_for(planner: Planner, rewrite: bool) -> Result<Option<Arc<dyn scriptorium::agent::LlmClient>>> {
    if matches!(planner, Planner::Rule) && !rewrite {
        return Ok(None);
    }
    Ok(Some(LlmConfig::from_env()?.build()?))
}

fn build_agent(kb: KbSnapshot, planner: Planner, rewrite: bool) -> Result<Agent> {
    let mut agent = Agent::new(kb)
        .with_planner(match planner {
            Planner::Rule => PlannerMode::Rule,
            Planner::Llm => PlannerMode::Llm,
        })
        .with_rewrite(rewrite);
    if let Some(llm) = llm_for(planner, rewrite)? {
        agent = agent.with_llm(llm);
    }
    Ok(agent)
}

fn serve(kb_dir: &Path, bind: &str, ttl: Duration, trace_cap: usize, planner: Planner, rewrite: bool) -> Result<i32> {
    let _ = tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .try_init();
    if trace_cap == 0 {
        return Err(Error::argument("--trace-cap must be positive"));
    }
    let kb = load_snapshot(kb_dir)?;
    let problems = kb.verify_integrity();
    if !problems.is_empty() {
        return Err(Error::Corruption(problems.join("; ")));
    }
    let state = AppState::new(build_agent(kb, planner, rewrite)?, ttl, trace_cap);
    let runtime = tokio::runtime::Runtime::new().map_err(|e| Error::State(format!("runtime: {e}")))?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(bind)
            .await
            .map_err(|e| Error::argument(format!("cannot bind {bind}: {e}")))?;
        tracing::info!(addr = %bind, "listening");
        axum::serve(listener, router(state))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(|e| Error::State(format!("server: {e}")))
    })?;
    Ok(EXIT_OK)
}

struct BenchArgs {
    kb: PathBuf,
    task: String,
    n: usize,
    seed: u64,
    client: ClientKind,
    retries: u32,
    fixtures: Option<PathBuf>,
    record_fixtures: Option<PathBuf>,
    format: Format,
}

fn bench(a: BenchArgs) -> Result<i32> {
    let kb = load_snapshot(&a.kb)?;
    let tasks = if a.task == "all" {
        Task::ALL.to_vec()
    } else {
        vec![Task::parse(&a.task)?]
    };
    let mut set = QuestionSet::default();
    for task in tasks {
        set.extend(generate_questions(&kb, task, a.n, a.seed)?);
    }
    set.seed = a.seed;

    if let Some(path) = &a.record_fixtures {
        let table = ScriptedClient::record_oracle(&set)?;
        let text = serde_json::to_string_pretty(&table)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))?;
        println!("recorded {} replies to {}", table.len(), path.display());
        return Ok(EXIT_OK);
    }

    let client: Box<dyn ModelClient> = match a.client {
        ClientKind::Oracle => Box::new(OracleClient),
        ClientKind::Tools => Box::new(ToolsClient::new(kb, VisionTools::new())),
        ClientKind::Scripted => {
            let path = a
                .fixtures
                .as_ref()
                .ok_or_else(|| Error::argument("--client scripted needs --fixtures"))?;
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let table: BTreeMap<String, String> = serde_json::from_str(&text)?;
            Box::new(ScriptedClient::new(table))
        }
        ClientKind::Remote => {
            let config = LlmConfig {
                mode: LlmMode::Remote,
                ..LlmConfig::from_env()?
            };
            Box::new(LlmModelClient::new(config.model.clone(), config.build()?))
        }
    };
    let report = run_benchmark(client.as_ref(), &set, a.retries)?;
    match a.format {
        Format::Table => print!("{}", report.to_table()),
        Format::Json => println!("{}", report.to_json()),
    }
    Ok(EXIT_OK)
}

fn query(kb_dir: &Path, text: String, images: &[PathBuf], json: bool) -> Result<i32> {
    let kb = load_snapshot(kb_dir)?;
    let mut input = TurnInput::text(text);
    for path in images {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        input = input.with_image(ImageInput::Raster(RasterImage::from_png(&bytes)?));
    }
    let agent = Agent::new(kb);
    let mut state = scriptorium::agent::SessionState::new("cli");
    let outcome = agent.run_turn(&mut state, input)?;
    if json {
        println!("{}", serde_json::to_string_pretty(&outcome)?);
    } else {
        println!("{}", outcome.response);
    }
    Ok(EXIT_OK)
}
