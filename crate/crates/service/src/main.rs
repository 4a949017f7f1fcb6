use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use flexq_core::matching::DistanceMetric;
use flexq_core::resolver::ResolverConfig;
use flexq_service::{router, run_repl, Engine, EngineConfig, PipelineError};

#[derive(Parser, Debug)]
#[command(name = "flexq", version, about = "Translate flexible natural-language queries into SQL")]
struct Cli {
    /// Base directory for relative paths.
    #[arg(long, global = true, default_value = ".")]
    workdir: PathBuf,
    #[arg(long, global = true, env = "FLEXQ_CATALOG", default_value = "fixtures/catalog.json")]
    catalog: PathBuf,
    /// Directory holding the catalog's CSV files.
    #[arg(long, global = true, env = "FLEXQ_DATA", default_value = "fixtures/data")]
    data: PathBuf,
    #[arg(long, global = true, env = "FLEXQ_LEXICON", default_value = "fixtures/lexicon.json")]
    lexicon: PathBuf,
    /// Knowledge journal (JSON lines); created on first write.
    #[arg(long, global = true, env = "FLEXQ_KB", default_value = "flexq-kb.jsonl")]
    kb: PathBuf,
    /// Largest edit distance accepted by fuzzy table/field matching.
    #[arg(long, global = true, default_value_t = 2)]
    max_distance: usize,
    /// Count adjacent transpositions as one edit.
    #[arg(long, global = true)]
    damerau: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print the SQL and resolution trace for a query.
    Translate { query: String },
    /// Translate and execute a query, printing the result grid.
    Run { query: String },
    /// Interactive loop with accept/reject feedback.
    Repl,
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Allowed CORS origin for the web console (any when omitted).
        #[arg(long)]
        cors_origin: Option<String>,
    },
    /// Teach the lexicon a new conjunction word.
    AddConjunction { word: String },
}

fn resolve(workdir: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        workdir.join(p)
    }
}

fn pipeline_failure(err: &PipelineError) -> ExitCode {
    eprintln!("error [{}] {}", err.stage(), err);
    for c in err.candidates() {
        eprintln!("  candidate: {c}");
    }
    if let Some(words) = err.conjunction_suggestions() {
        eprintln!("  hint: flexq add-conjunction <word>  (maybe: {})", words.join(", "));
    }
    ExitCode::from(1)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = EngineConfig {
        catalog: resolve(&cli.workdir, &cli.catalog),
        data_dir: resolve(&cli.workdir, &cli.data),
        lexicon: resolve(&cli.workdir, &cli.lexicon),
        knowledge: Some(resolve(&cli.workdir, &cli.kb)),
        resolver: ResolverConfig {
            max_distance: cli.max_distance,
            metric: if cli.damerau {
                DistanceMetric::Damerau
            } else {
                DistanceMetric::Levenshtein
            },
        },
    };
    let engine = match Engine::load(&config) {
        Ok(e) => e,
        Err(e) => {
            eprintln!("error [config] {e}");
            return ExitCode::from(2);
        }
    };

    match cli.command {
        Command::Translate { query } => match engine.translate(&query) {
            Ok(resp) => {
                println!("{}", resp.sql);
                println!("-- source: {}, query id: {}", resp.source.as_str(), resp.query_id);
                for step in &resp.trace {
                    println!("-- [{}] {} => {}", step.stage, step.input, step.outcome);
                }
                for w in &resp.warnings {
                    println!("-- warning: {w}");
                }
                ExitCode::SUCCESS
            }
            Err(e) => pipeline_failure(&e),
        },
        Command::Run { query } => {
            let resp = match engine.translate(&query) {
                Ok(r) => r,
                Err(e) => return pipeline_failure(&e),
            };
            println!("{}", resp.sql);
            match engine.execute(&resp.query_id) {
                Ok(rs) => {
                    print!("{}", rs.to_grid());
                    ExitCode::SUCCESS
                }
                Err(e) => pipeline_failure(&e),
            }
        }
        Command::Repl => {
            let stdin = std::io::stdin();
            match run_repl(&engine, stdin.lock(), std::io::stdout()) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!("error [repl] {e}");
                    ExitCode::from(1)
                }
            }
        }
        Command::AddConjunction { word } => match engine.add_conjunction(&word) {
            Ok(lex) => {
                let words: Vec<&str> = lex.conjunctions().iter().map(String::as_str).collect();
                println!("conjunctions: {}", words.join(", "));
                ExitCode::SUCCESS
            }
            Err(e) => pipeline_failure(&e),
        },
        Command::Serve {
            port,
            host,
            cors_origin,
        } => {
            tracing_subscriber::fmt()
                .with_env_filter(
                    tracing_subscriber::EnvFilter::try_from_default_env()
                        .unwrap_or_else(|_| "info".into()),
                )
                .init();
            let runtime = match tokio::runtime::Runtime::new() {
                Ok(r) => r,
                Err(e) => {
                    eprintln!("error [serve] {e}");
                    return ExitCode::from(2);
                }
            };
            let app = router(Arc::new(engine), cors_origin.as_deref());
            let result: anyhow::Result<()> = runtime.block_on(async move {
                let listener = tokio::net::TcpListener::bind((host.as_str(), port)).await?;
                tracing::info!("listening on {}", listener.local_addr()?);
                axum::serve(listener, app)
                    .with_graceful_shutdown(async {
                        let _ = tokio::signal::ctrl_c().await;
                    })
                    .await?;
                Ok(())
            });
            match result {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!("error [serve] {e}");
                    ExitCode::from(2)
                }
            }
        }
    }
}
