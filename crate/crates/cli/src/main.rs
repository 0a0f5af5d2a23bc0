use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use disambig::corpus::ingest;
use disambig::embed::{Embedder, HashEmbedder, TokenHashEmbedder};
use disambig::eval::render_table;
use disambig::orchestrator::{
    build_embedder, evaluate_run_dir, export_report, run_config, Engine, Method, RunConfig, SessionStore,
};
use disambig::retrieval::VectorIndex;
use disambig::Error;
use disambig_cli::{router, AppState};

#[derive(Parser)]
#[command(name = "disambig", version, about = "Grounded clarification of ambiguous queries")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum EmbedderKind {
    TokenHash,
    Hash,
}

#[derive(Subcommand)]
enum Command {
    /// Embed a corpus and write its vector index.
    Ingest {
        corpus: PathBuf,
        #[arg(long)]
        index_out: PathBuf,
        /// Take the embedder and seed from this run config.
        #[arg(long, conflicts_with_all = ["embedder", "dim", "seed"])]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "token-hash")]
        embedder: EmbedderKind,
        #[arg(long, default_value_t = 256)]
        dim: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run one method over the gold queries of a config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the method in the config.
        #[arg(long)]
        method: Option<Method>,
        /// Overrides the output directory in the config.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        parallelism: Option<usize>,
    },
    /// Re-judge a method run directory.
    Eval {
        #[arg(long)]
        run_dir: PathBuf,
    },
    /// Serve clarification sessions and batch runs over HTTP.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
        #[arg(long)]
        config: PathBuf,
        /// Mirror sessions to this JSON file.
        #[arg(long)]
        snapshot: Option<PathBuf>,
    },
    /// Render the results table for a method or output directory.
    Report {
        #[arg(long)]
        run_dir: PathBuf,
    },
}

/// Error paired with its exit code: 1 for configuration, 2 for runtime.
struct Failure(u8, String);

fn config_error(e: Error) -> Failure {
    Failure(1, e.to_string())
}

fn runtime_error(e: Error) -> Failure {
    match e {
        Error::Config(_) | Error::Fingerprint { .. } => Failure(1, e.to_string()),
        e => Failure(2, e.to_string()),
    }
}

fn ingest_cmd(
    corpus: PathBuf,
    index_out: PathBuf,
    config: Option<PathBuf>,
    kind: EmbedderKind,
    dim: usize,
    seed: u64,
) -> Result<(), Failure> {
    let embedder: Arc<dyn Embedder> = match config {
        Some(path) => {
            let c = RunConfig::load(path).map_err(config_error)?;
            build_embedder(&c.backends[&c.roles.embedder], c.seed).map_err(config_error)?
        }
        None if dim == 0 => return Err(Failure(1, "--dim must be positive".into())),
        None => match kind {
            EmbedderKind::TokenHash => Arc::new(TokenHashEmbedder::new(dim, seed)),
            EmbedderKind::Hash => Arc::new(HashEmbedder::new(dim, seed)),
        },
    };
    let corpus = ingest(&corpus).map_err(runtime_error)?;
    let index = VectorIndex::build(&corpus, embedder.as_ref()).map_err(runtime_error)?;
    index.save(&index_out).map_err(runtime_error)?;
    eprintln!("indexed {} passages into {}", corpus.len(), index_out.display());
    Ok(())
}

fn run_cmd(
    config: PathBuf,
    method: Option<Method>,
    out: Option<PathBuf>,
    parallelism: Option<usize>,
) -> Result<(), Failure> {
    let mut c = RunConfig::load(config).map_err(config_error)?;
    if let Some(m) = method {
        c.method = m;
    }
    if let Some(o) = out {
        c.paths.output = o;
    }
    if let Some(p) = parallelism {
        c.parallelism = p;
    }
    c.validate().map_err(config_error)?;
    let run_dir = c.run_dir();
    let report = run_config(c).map_err(runtime_error)?;
    print!("{}", render_table(std::slice::from_ref(&report)));
    eprintln!(
        "{} queries ({} failed), artifacts in {}",
        report.aggregate.queries,
        report.aggregate.failed,
        run_dir.display()
    );
    Ok(())
}

fn serve_cmd(addr: String, config: PathBuf, snapshot: Option<PathBuf>) -> Result<(), Failure> {
    let c = RunConfig::load(config).map_err(config_error)?;
    let engine = Engine::from_config(c).map_err(runtime_error)?;
    let mut store = SessionStore::new(Arc::new(engine));
    if let Some(path) = snapshot {
        store = store.with_snapshot(path).map_err(runtime_error)?;
    }
    let app = router(AppState::new(store));
    let rt = tokio::runtime::Runtime::new().map_err(|e| Failure(2, e.to_string()))?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&addr)
            .await
            .map_err(|e| Failure(1, format!("cannot bind {addr}: {e}")))?;
        log::info!("listening on {addr}");
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(|e| Failure(2, e.to_string()))
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let outcome = match cli.command {
        Command::Ingest {
            corpus,
            index_out,
            config,
            embedder,
            dim,
            seed,
        } => ingest_cmd(corpus, index_out, config, embedder, dim, seed),
        Command::Run {
            config,
            method,
            out,
            parallelism,
        } => run_cmd(config, method, out, parallelism),
        Command::Eval { run_dir } => evaluate_run_dir(&run_dir)
            .map(|r| print!("{}", render_table(std::slice::from_ref(&r))))
            .map_err(runtime_error),
        Command::Serve { addr, config, snapshot } => serve_cmd(addr, config, snapshot),
        Command::Report { run_dir } => export_report(&run_dir).map(|t| print!("{t}")).map_err(runtime_error),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure(code, message)) => {
            eprintln!("error: {message}");
            ExitCode::from(code)
        }
    }
}
