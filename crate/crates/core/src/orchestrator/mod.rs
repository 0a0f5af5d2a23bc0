//! End-to-end wiring: configuration, per-method runs, batch evaluation
//! with on-disk artifacts, and interactive clarification sessions.

mod batch;
mod config;
mod engine;
mod session;

pub use batch::{evaluate_run_dir, export_report, run_batch, run_config, REPORT_JSON, REPORT_MD};
pub use config::{env_key, BackendSpec, Method, Paths, Roles, RunConfig};
pub use engine::{build_embedder, load_or_build_index, verdict, Engine, MethodRun};
pub use session::{Choice, ClarifySession, SessionState, SessionStore, Transition, SNIPPET_CHARS};
