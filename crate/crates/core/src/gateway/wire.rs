//! JSON bodies of the `/infer` and `/embed` endpoints.

use std::io::Cursor;

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use image::ImageFormat;
use serde::{Deserialize, Serialize};

use super::GatewayError;
use crate::media::MergedFrameSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatTurn {
    pub role: Role,
    pub content: String,
}

impl ChatTurn {
    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: Role::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self {
            role: Role::Assistant,
            content: content.into(),
        }
    }
}

/// Visual input: inline base64 PNG frames, or a path the server can read.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Media {
    Frames(Vec<String>),
    VideoPath(String),
}

impl Media {
    /// Encodes each composite frame as base64 PNG.
    pub fn from_frames(frames: &MergedFrameSet) -> Self {
        Media::Frames(
            frames
                .frames
                .iter()
                .map(|frame| {
                    let mut png = Cursor::new(Vec::new());
                    frame
                        .write_to(&mut png, ImageFormat::Png)
                        .expect("PNG encoding into memory cannot fail");
                    BASE64.encode(png.into_inner())
                })
                .collect(),
        )
    }

    /// Text-only requests carry an empty frame list.
    pub fn none() -> Self {
        Media::Frames(Vec::new())
    }

    pub fn frame_count(&self) -> Option<usize> {
        match self {
            Media::Frames(frames) => Some(frames.len()),
            Media::VideoPath(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodeParams {
    pub temperature: f64,
    pub max_tokens: u32,
    pub seed: u64,
}

impl Default for DecodeParams {
    fn default() -> Self {
        Self {
            temperature: 0.0,
            max_tokens: 256,
            seed: 42,
        }
    }
}

/// A validated `/infer` request body.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InferenceRequest {
    media: Media,
    #[serde(skip_serializing_if = "Option::is_none")]
    audio: Option<String>,
    turns: Vec<ChatTurn>,
    params: DecodeParams,
}

impl InferenceRequest {
    /// Checks the request invariants: at least one turn, alternating roles
    /// starting and ending with the user, sane decoding parameters, and
    /// exactly `expected_frames` inline frames.
    pub fn new(
        media: Media,
        audio: Option<String>,
        turns: Vec<ChatTurn>,
        params: DecodeParams,
        expected_frames: usize,
    ) -> Result<Self, GatewayError> {
        let pre = |m: String| Err(GatewayError::Precondition(m));
        if turns.is_empty() {
            return pre("request has no turns".into());
        }
        for (i, turn) in turns.iter().enumerate() {
            let expected = if i % 2 == 0 { Role::User } else { Role::Assistant };
            if turn.role != expected {
                return pre(format!("turn {i} should be {expected:?}, got {:?}", turn.role));
            }
        }
        if turns.last().map(|t| t.role) != Some(Role::User) {
            return pre("last turn must come from the user".into());
        }
        if !(params.temperature.is_finite() && params.temperature >= 0.0) {
            return pre(format!("temperature must be >= 0, got {}", params.temperature));
        }
        if params.max_tokens == 0 {
            return pre("max_tokens must be positive".into());
        }
        if let Some(n) = media.frame_count() {
            if n != expected_frames {
                return pre(format!("request carries {n} frames, policy expects {expected_frames}"));
            }
        }
        Ok(Self {
            media,
            audio,
            turns,
            params,
        })
    }

    pub fn media(&self) -> &Media {
        &self.media
    }

    pub fn turns(&self) -> &[ChatTurn] {
        &self.turns
    }

    pub fn params(&self) -> &DecodeParams {
        &self.params
    }

    pub fn audio(&self) -> Option<&str> {
        self.audio.as_deref()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InferResponse {
    pub text: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmbedRequest {
    pub texts: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmbeddingRecord {
    pub tokens: Vec<String>,
    pub vectors: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmbedResponse {
    pub embeddings: Vec<EmbeddingRecord>,
    pub dim: usize,
}
