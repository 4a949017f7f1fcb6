//! HTTP API, REPL and CLI plumbing around `flexq-core`.

pub mod engine;
pub mod http;
pub mod repl;

pub use engine::{Engine, EngineConfig, PipelineError, Source, TranslateResponse};
pub use http::router;
pub use repl::run_repl;
