//! Preprocessing, sampling and evaluation pipeline for LLM-based crystal
//! generation, plus the `spacegen` command line front end.

pub mod cli;
pub mod client;
pub mod config;
pub mod generate;
pub mod mock;
pub mod preprocess;

pub use client::{ClientError, CompletionClient, CompletionRequest, EndpointConfig, HttpClient, RetryPolicy};
pub use generate::{generate_batch, generate_structures, GenerationTask, SampleOutcome, SamplingParams};
pub use mock::{MockClient, MockMode};
pub use preprocess::{convert_cif, preprocess, PreprocessOptions};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("{0}")]
    Data(String),
    #[error(transparent)]
    Core(#[from] spacegen_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
