//! `sqlclarify` command line: detection, interactive clarification, batch
//! evaluation, SQL comparison and the HTTP server.

pub mod server;

use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sqlclarify_core::engine::AnswerRound;
use sqlclarify_core::eval::{load_dataset, render_report, run_end_to_end};
use sqlclarify_core::hook::{GeneratorHook, HookKind, SqlGenerator};
use sqlclarify_core::llm::BackendMode;
use sqlclarify_core::schema::{SchemaCatalog, DEFAULT_SAMPLE_K};
use sqlclarify_core::service::{ExampleEntry, Service};
use sqlclarify_core::sql::compare;
use sqlclarify_core::{BackendConfig, Engine, EngineConfig, Gateway, Session, SessionState, UserAnswer};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Generator script used when the gateway is scripted and no hook is given.
pub const ENV_GENERATOR_SCRIPT: &str = "AMBI_GENERATOR_SCRIPT";

#[derive(Debug, Parser)]
#[command(name = "sqlclarify", version, about = "Detect and clarify ambiguous text-to-SQL questions")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalOpts {
    /// Directory of SQLite files and JSON schema descriptors.
    #[arg(long, global = true, default_value = "fixtures/databases")]
    pub db_dir: PathBuf,
    /// Annotated JSONL dataset; also the example catalog of `serve`.
    #[arg(long, global = true, default_value = "fixtures/cases.jsonl")]
    pub dataset: PathBuf,
    /// POST endpoint of an external text-to-SQL generator.
    #[arg(long, global = true)]
    pub hook_url: Option<String>,
    /// Scripted generator file (list of {match_substring, sql}).
    #[arg(long, global = true)]
    pub generator_script: Option<PathBuf>,
    /// Use the gateway's own model as the generator.
    #[arg(long, global = true)]
    pub gateway_generator: bool,
    /// Generator timeout in milliseconds.
    #[arg(long, global = true, default_value_t = 30_000)]
    pub hook_timeout_ms: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the ambiguities detected in a question.
    Detect {
        question: String,
        #[arg(long)]
        db: String,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Clarify a question interactively on the terminal.
    Interactive {
        question: String,
        #[arg(long)]
        db: String,
        #[arg(long)]
        dialect: Option<String>,
    },
    /// Score detection and exact-match accuracy on an annotated dataset.
    Eval {
        dataset: PathBuf,
        #[arg(long)]
        with_disambiguation: bool,
        #[arg(long, default_value_t = 4)]
        workers: usize,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        /// Also write the JSON report to this file.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Compare a predicted SQL file with a gold SQL file.
    Compare {
        pred: PathBuf,
        gold: PathBuf,
        /// SQLite file, or a database id from --db-dir, for execution match.
        #[arg(long)]
        exec: Option<String>,
    },
    /// Serve the HTTP API and the web UI.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Directory with the built web UI.
        #[arg(long, default_value = "webui/dist")]
        static_dir: PathBuf,
        /// Write session summaries here on shutdown.
        #[arg(long)]
        snapshot: Option<PathBuf>,
    },
}

type Env<'a> = &'a dyn Fn(&str) -> Option<String>;

/// Process environment lookup for [`run`].
pub fn process_env(key: &str) -> Option<String> {
    std::env::var(key).ok()
}

struct Failure(String);

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(e.to_string())
    }
}

type CmdResult = Result<(), Failure>;

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run(
    args: &[String],
    env: Env<'_>,
    input: &mut dyn BufRead,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{}", e.render());
                    return EXIT_OK;
                }
                _ => EXIT_USAGE,
            };
            let _ = write!(err, "{}", e.render());
            return code;
        }
    };
    let result = match &cli.command {
        Command::Detect { question, db, format } => detect(&cli.global, env, question, db, *format, out),
        Command::Interactive { question, db, dialect } => {
            interactive(&cli.global, env, question, db, dialect.as_deref(), input, out)
        }
        Command::Eval {
            dataset,
            with_disambiguation,
            workers,
            format,
            output,
        } => eval(&cli.global, env, dataset, *with_disambiguation, *workers, *format, output.as_deref(), out),
        Command::Compare { pred, gold, exec } => compare_files(&cli.global, pred, gold, exec.as_deref(), out),
        Command::Serve {
            port,
            host,
            static_dir,
            snapshot,
        } => serve(&cli.global, env, host, *port, static_dir, snapshot.clone(), out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(Failure(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_FAILURE
        }
    }
}

fn gateway(env: Env<'_>) -> Result<(BackendConfig, Arc<Gateway>), Failure> {
    let config = BackendConfig::from_lookup(env)?;
    let gateway = Gateway::from_config(&config)?;
    Ok((config, Arc::new(gateway)))
}

fn catalog(opts: &GlobalOpts) -> Result<SchemaCatalog, Failure> {
    let catalog = SchemaCatalog::load_dir(&opts.db_dir, DEFAULT_SAMPLE_K)?;
    if catalog.is_empty() {
        return Err(Failure(format!("no databases found in {}", opts.db_dir.display())));
    }
    Ok(catalog)
}

/// Picks the generator: an explicit URL, script or gateway flag first; with
/// a scripted gateway, the script next to the pipeline script; otherwise the
/// gateway's own model.
fn generator(
    opts: &GlobalOpts,
    env: Env<'_>,
    config: &BackendConfig,
    gateway: &Arc<Gateway>,
) -> Result<Box<dyn SqlGenerator>, Failure> {
    let kind = if let Some(url) = &opts.hook_url {
        HookKind::ExternalHttp(url.clone())
    } else if let Some(path) = &opts.generator_script {
        HookKind::Scripted(path.clone())
    } else if opts.gateway_generator {
        HookKind::GatewayPrompt
    } else if let Some(path) = env(ENV_GENERATOR_SCRIPT).filter(|p| !p.is_empty()) {
        HookKind::Scripted(PathBuf::from(path))
    } else if config.mode == BackendMode::Scripted {
        let sibling = config
            .script_path
            .as_deref()
            .and_then(Path::parent)
            .map(|dir| dir.join("generator.json"))
            .filter(|p| p.is_file())
            .ok_or_else(|| Failure("scripted mode needs --generator-script or --hook-url".into()))?;
        HookKind::Scripted(sibling)
    } else {
        HookKind::GatewayPrompt
    };
    let hook = GeneratorHook {
        kind,
        timeout_ms: opts.hook_timeout_ms,
    };
    Ok(hook.build(Some(gateway.clone()))?)
}

fn detect(opts: &GlobalOpts, env: Env<'_>, question: &str, db: &str, format: Format, out: &mut dyn Write) -> CmdResult {
    let catalog = catalog(opts)?;
    let schema = catalog.get(db)?.model.clone();
    let (_, gateway) = gateway(env)?;
    let engine = Engine::new(gateway, EngineConfig::default());
    let found = engine.detect(question, &schema)?;
    match format {
        Format::Json => writeln!(out, "{}", serde_json::to_string_pretty(&found)?)?,
        Format::Text => {
            if found.is_empty() {
                writeln!(out, "no ambiguity detected")?;
            }
            for a in &found {
                writeln!(out, "{:<8} {:<10} {:<32} \"{}\"", a.id, a.span.to_string(), a.category.label(), a.phrase)?;
                writeln!(out, "         {}", a.rationale)?;
                for s in &a.evidence {
                    writeln!(out, "         evidence {}.{}: {}", s.table, s.column, s.values.join(", "))?;
                }
            }
        }
    }
    Ok(())
}

fn read_line(input: &mut dyn BufRead) -> Result<Option<String>, Failure> {
    let mut line = String::new();
    if input.read_line(&mut line)? == 0 {
        return Ok(None);
    }
    Ok(Some(line.trim().to_string()))
}

fn ask_round(session: &Session, input: &mut dyn BufRead, out: &mut dyn Write) -> Result<AnswerRound, Failure> {
    writeln!(out, "\nIteration {}: {}", session.iteration + 1, session.rewritten_question)?;
    let mut answers = Vec::new();
    for q in &session.open_questions {
        writeln!(out, "\n[{}] {} ({})", q.id, q.text, q.category.display_name())?;
        for o in &q.options {
            writeln!(out, "  {}) {}", o.key, o.display)?;
            if let Some(s) = &o.snippet {
                writeln!(out, "     {}.{}: {}", s.table, s.column, s.values.join(", "))?;
            }
        }
        loop {
            write!(out, "choice> ")?;
            out.flush()?;
            let line = read_line(input)?.ok_or_else(|| Failure("input closed".into()))?;
            if let Some(o) = q.option(&line) {
                answers.push(UserAnswer::new(&q.id, &o.key));
                break;
            }
            writeln!(out, "pick one of: {}", q.options.iter().map(|o| o.key.as_str()).collect::<Vec<_>>().join(", "))?;
        }
    }
    writeln!(out, "\nAdditional constraints, one per line (empty line to finish):")?;
    let mut constraints = Vec::new();
    loop {
        write!(out, "constraint> ")?;
        out.flush()?;
        match read_line(input)? {
            Some(line) if !line.is_empty() => constraints.push(line),
            _ => break,
        }
    }
    Ok((answers, constraints))
}

fn interactive(
    opts: &GlobalOpts,
    env: Env<'_>,
    question: &str,
    db: &str,
    dialect: Option<&str>,
    input: &mut dyn BufRead,
    out: &mut dyn Write,
) -> CmdResult {
    let catalog = catalog(opts)?;
    let schema = catalog.get(db)?.model.clone();
    let (config, gateway) = gateway(env)?;
    let engine = Engine::new(gateway.clone(), EngineConfig::default());
    let dialect = dialect.unwrap_or(&schema.dialect).to_string();
    let session = Session::new(question, schema.clone(), &dialect);

    let mut io_error = None;
    let mut provider = |s: &Session| {
        ask_round(s, input, out).map_err(|Failure(m)| {
            io_error = Some(m.clone());
            m
        })
    };
    let session = engine.resolve_loop(session, &mut provider)?;
    if let Some(m) = io_error {
        return Err(Failure(m));
    }
    if session.state != SessionState::Resolved {
        return Err(Failure(session.failure.unwrap_or_else(|| "session did not resolve".into())));
    }
    writeln!(out, "\nRewritten question: {}", session.rewritten_question)?;
    let prefs = session.preference_tree.render();
    if !prefs.is_empty() {
        writeln!(out, "Recorded preferences:\n{prefs}")?;
    }
    match generator(opts, env, &config, &gateway)
        .and_then(|g| g.generate(&session.rewritten_question, &schema, &dialect).map_err(Failure::from))
    {
        Ok(sql) => writeln!(out, "SQL: {sql}")?,
        Err(Failure(m)) => writeln!(out, "SQL generation unavailable: {m}")?,
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn eval(
    opts: &GlobalOpts,
    env: Env<'_>,
    dataset: &Path,
    with_disambiguation: bool,
    workers: usize,
    format: Format,
    output: Option<&Path>,
    out: &mut dyn Write,
) -> CmdResult {
    let cases = load_dataset(dataset)?;
    let catalog = catalog(opts)?;
    let (config, gateway) = gateway(env)?;
    let generator = generator(opts, env, &config, &gateway)?;
    let engine = Engine::new(gateway, EngineConfig::default());
    let report = run_end_to_end(&cases, &catalog, &engine, generator.as_ref(), with_disambiguation, workers)?;
    let json = serde_json::to_string_pretty(&report)?;
    if let Some(path) = output {
        std::fs::write(path, format!("{json}\n")).map_err(|e| Failure(format!("{}: {e}", path.display())))?;
    }
    match format {
        Format::Json => writeln!(out, "{json}")?,
        Format::Text => write!(out, "{}", render_report(&report))?,
    }
    Ok(())
}

fn compare_files(opts: &GlobalOpts, pred: &Path, gold: &Path, exec: Option<&str>, out: &mut dyn Write) -> CmdResult {
    let read = |p: &Path| std::fs::read_to_string(p).map_err(|e| Failure(format!("{}: {e}", p.display())));
    let (pred_sql, gold_sql) = (read(pred)?, read(gold)?);
    let db = match exec {
        None => None,
        Some(target) if Path::new(target).is_file() => Some(PathBuf::from(target)),
        Some(id) => Some(
            catalog(opts)?
                .get(id)?
                .database_file
                .clone()
                .ok_or_else(|| Failure(format!("database `{id}` has no SQLite file")))?,
        ),
    };
    let report = compare(&pred_sql, &gold_sql, db.as_deref());
    writeln!(out, "{}", serde_json::to_string_pretty(&report)?)?;
    Ok(())
}

/// Builds the session service from the command line options.
pub fn build_service(opts: &GlobalOpts, env: Env<'_>) -> Result<Service, String> {
    let inner = || -> Result<Service, Failure> {
        let catalog = catalog(opts)?;
        let (config, gateway) = gateway(env)?;
        let generator = generator(opts, env, &config, &gateway)?;
        let examples = if opts.dataset.is_file() {
            Service::examples_from_cases(&catalog, &load_dataset(&opts.dataset)?)
        } else {
            Vec::<ExampleEntry>::new()
        };
        let engine = Arc::new(Engine::new(gateway, EngineConfig::default()));
        Ok(Service::new(engine, Arc::new(catalog), Arc::from(generator), examples))
    };
    inner().map_err(|Failure(m)| m)
}

fn serve(
    opts: &GlobalOpts,
    env: Env<'_>,
    host: &str,
    port: u16,
    static_dir: &Path,
    snapshot: Option<PathBuf>,
    out: &mut dyn Write,
) -> CmdResult {
    let service = Arc::new(build_service(opts, env).map_err(Failure)?);
    let static_dir = static_dir.is_dir().then(|| static_dir.to_path_buf());
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind((host, port)).await?;
        writeln!(out, "listening on http://{}", listener.local_addr()?)?;
        out.flush()?;
        let app = server::router(service.clone(), static_dir);
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        Ok::<_, Failure>(())
    })?;
    if let Some(path) = snapshot {
        std::fs::write(&path, serde_json::to_string_pretty(&service.snapshot())?)
            .map_err(|e| Failure(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}
