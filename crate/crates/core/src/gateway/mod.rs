//! Client side of the inference wire protocol and the per-clip dialogue loop.

mod client;
mod dialogue;
mod wire;

use thiserror::Error;

pub use client::{InferenceClient, ModelClient, RetryPolicy};
pub use dialogue::{run_dialogue, ClipMedia, DialogueOptions, DialogueTranscript, TranscriptEntry};
pub use wire::{
    ChatTurn, DecodeParams, EmbedRequest, EmbedResponse, EmbeddingRecord, ErrorBody, InferResponse,
    InferenceRequest, Media, Role,
};

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum GatewayError {
    #[error("invalid request: {0}")]
    Precondition(String),
    #[error("timed out after {attempts} attempt(s)")]
    Timeout { attempts: u32 },
    #[error("transport error after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("server returned {code}: {message}")]
    Status { code: u16, message: String },
    #[error("malformed response body: {0}")]
    MalformedBody(String),
    #[error("protocol error: {0}")]
    Protocol(String),
}

impl GatewayError {
    /// Short tag recorded in transcripts and reports.
    pub fn kind(&self) -> &'static str {
        match self {
            GatewayError::Precondition(_) => "precondition",
            GatewayError::Timeout { .. } => "timeout",
            GatewayError::Transport { .. } => "transport",
            GatewayError::Status { .. } => "status",
            GatewayError::MalformedBody(_) => "malformed_body",
            GatewayError::Protocol(_) => "protocol",
        }
    }
}
