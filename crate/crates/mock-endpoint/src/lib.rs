//! In-process mock of the model server's `/infer`, `/embed` and `/healthz`
//! endpoints, for tests.
//!
//! Answers are deterministic: the response to an `/infer` call is chosen
//! from a pool by hashing the seeds, the last user turn and a digest of the
//! media, so different questions and clips get different (but repeatable)
//! answers. Embeddings hash each whitespace token into a unit vector.

use std::io;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use tiny_http::{Header, Method, Response, Server};

pub const BINARY_POOL: &[&str] = &[
    "Yes.",
    "No.",
    "Sure! Yes, it is clearly visible in the footage.",
    "No, there is no sign of that in the video.",
    "Yes, that happens in the video.",
    "There is no evidence of that.",
    "It is hard to tell from these frames.",
    "Certainly. No.",
    "ASSISTANT: Yes.",
    "Based on the video, no.",
];

/// `{}` is replaced by the chosen label.
pub const CHOICE_POOL: &[&str] = &[
    "{}.",
    "Sure! The answer is {}.",
    "It looks {} to me.",
    "I would say {}.",
    "Hello! {}.",
];

pub const OPEN_POOL: &[&str] = &[
    "The ego-car is driving on a multi-lane road while a vehicle ahead slows down, and the driver keeps both hands on the wheel.",
    "Sure! A car cuts into the ego-car's lane without signaling and the ego-car brakes to keep a safe distance.",
    "The driver looks down at a phone while the ego-car approaches an intersection.",
    "The ego-car changes lanes to pass a slow truck on the highway.",
    "The ego-car should slow down, increase its following distance and stay alert for merging vehicles.",
    "Hello! The driver should keep both hands on the wheel and avoid distractions. Let me know if you have any other questions.",
];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StubConfig {
    pub seed: u64,
    pub embed_dim: usize,
    /// Questions containing the first string get the second as a fixed answer.
    #[serde(default)]
    pub overrides: Vec<(String, String)>,
    /// Every `/infer` call gets this answer unless an override matches.
    #[serde(default)]
    pub answer_all: Option<String>,
    /// Questions containing any of these get a 500.
    #[serde(default)]
    pub fail_questions: Vec<String>,
    /// `/embed` returns a narrower vector for the third text.
    #[serde(default)]
    pub mixed_embed_dims: bool,
}

impl Default for StubConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            embed_dim: 64,
            overrides: Vec::new(),
            answer_all: None,
            fail_questions: Vec::new(),
            mixed_embed_dims: false,
        }
    }
}

fn sha256(parts: &[&[u8]]) -> [u8; 32] {
    let mut hasher = Sha256::new();
    for part in parts {
        hasher.update((part.len() as u64).to_le_bytes());
        hasher.update(part);
    }
    hasher.finalize().into()
}

fn pick(hash: &[u8; 32], len: usize) -> usize {
    let mut first = [0u8; 8];
    first.copy_from_slice(&hash[..8]);
    (u64::from_le_bytes(first) % len as u64) as usize
}

/// Options listed after the last ':' of a question, e.g.
/// "What is the road condition: Dry, Wet or Icy?".
pub fn question_choices(question: &str) -> Option<Vec<String>> {
    let (_, tail) = question.rsplit_once(':')?;
    let tail = tail.trim().trim_end_matches(['?', '.']);
    let choices: Vec<String> = tail
        .split(", ")
        .flat_map(|part| part.split(" or "))
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect();
    (choices.len() >= 2).then_some(choices)
}

fn is_yes_no_question(question: &str) -> bool {
    const AUX: &[&str] = &[
        "is", "are", "was", "were", "did", "does", "do", "can", "could", "has", "have", "will", "would",
    ];
    question
        .split_whitespace()
        .next()
        .is_some_and(|w| AUX.contains(&w.to_lowercase().as_str()))
}

/// Deterministic answer for an `/infer` body that already passed validation.
pub fn stub_infer(config: &StubConfig, body: &Value) -> String {
    let question = last_user_turn(body).unwrap_or_default();
    if let Some((_, answer)) = config.overrides.iter().find(|(q, _)| question.contains(q.as_str())) {
        return answer.clone();
    }
    if let Some(answer) = &config.answer_all {
        return answer.clone();
    }
    let request_seed = body["params"]["seed"].as_u64().unwrap_or(0);
    let media = media_digest(&body["media"]);
    let hash = sha256(&[
        &config.seed.to_le_bytes(),
        &request_seed.to_le_bytes(),
        question.as_bytes(),
        &media,
    ]);
    if let Some(choices) = question_choices(&question) {
        let label = &choices[pick(&hash, choices.len())];
        let template = CHOICE_POOL[pick(&sha256(&[&hash, b"template"]), CHOICE_POOL.len())];
        template.replace("{}", label)
    } else if is_yes_no_question(&question) {
        BINARY_POOL[pick(&hash, BINARY_POOL.len())].to_string()
    } else {
        OPEN_POOL[pick(&hash, OPEN_POOL.len())].to_string()
    }
}

fn last_user_turn(body: &Value) -> Option<String> {
    body["turns"]
        .as_array()?
        .iter()
        .rev()
        .find(|t| t["role"] == "user")
        .and_then(|t| t["content"].as_str())
        .map(str::to_string)
}

fn media_digest(media: &Value) -> [u8; 32] {
    if let Some(frames) = media["frames"].as_array() {
        let joined: Vec<&str> = frames.iter().filter_map(Value::as_str).collect();
        sha256(&[joined.join("\n").as_bytes()])
    } else {
        sha256(&[media["video_path"].as_str().unwrap_or_default().as_bytes()])
    }
}

/// Seeded hash of the token stretched to `dim` values and L2-normalized.
pub fn token_vector(seed: u64, token: &str, dim: usize) -> Vec<f64> {
    let mut values = Vec::with_capacity(dim);
    let mut block = 0u64;
    while values.len() < dim {
        let hash = sha256(&[&seed.to_le_bytes(), token.as_bytes(), &block.to_le_bytes()]);
        for chunk in hash.chunks_exact(4) {
            if values.len() == dim {
                break;
            }
            let v = u32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]);
            values.push(v as f64 / u32::MAX as f64 * 2.0 - 1.0);
        }
        block += 1;
    }
    let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    values.iter().map(|v| v / norm).collect()
}

pub fn stub_embed(config: &StubConfig, texts: &[String]) -> Value {
    let embeddings: Vec<Value> = texts
        .iter()
        .enumerate()
        .map(|(i, text)| {
            let tokens: Vec<&str> = text.split_whitespace().collect();
            let dim = if config.mixed_embed_dims && i == 2 {
                config.embed_dim - 1
            } else {
                config.embed_dim
            };
            let vectors: Vec<Vec<f64>> = tokens.iter().map(|t| token_vector(config.seed, t, dim)).collect();
            json!({"tokens": tokens, "vectors": vectors})
        })
        .collect();
    json!({"embeddings": embeddings, "dim": config.embed_dim})
}

fn validate_infer(body: &Value) -> Result<(), String> {
    let media = body.get("media").ok_or("missing media")?;
    let frames_ok = media.get("frames").and_then(Value::as_array).is_some_and(|f| f.iter().all(Value::is_string));
    let path_ok = media.get("video_path").is_some_and(Value::is_string);
    if !(frames_ok || path_ok) {
        return Err("media needs frames or video_path".into());
    }
    let turns = body.get("turns").and_then(Value::as_array).ok_or("missing turns")?;
    if turns.is_empty() {
        return Err("no turns".into());
    }
    for turn in turns {
        let role = turn.get("role").and_then(Value::as_str).ok_or("turn without role")?;
        if role != "user" && role != "assistant" {
            return Err(format!("bad role {role:?}"));
        }
        turn.get("content").and_then(Value::as_str).ok_or("turn without content")?;
    }
    let params = body.get("params").ok_or("missing params")?;
    params.get("temperature").and_then(Value::as_f64).ok_or("missing temperature")?;
    params.get("max_tokens").and_then(Value::as_u64).ok_or("missing max_tokens")?;
    params.get("seed").and_then(Value::as_u64).ok_or("missing seed")?;
    if let Some(audio) = body.get("audio") {
        if !audio.is_string() {
            return Err("audio must be a string".into());
        }
    }
    Ok(())
}

/// Routes one request body to a status code and JSON response.
pub fn handle(config: &StubConfig, method: &str, path: &str, body: &str) -> (u16, Value) {
    let error = |code: u16, msg: String| (code, json!({"error": msg}));
    match (method, path) {
        ("GET", "/healthz") => (200, json!({"status": "ok"})),
        ("POST", "/infer") => {
            let value: Value = match serde_json::from_str(body) {
                Ok(v) => v,
                Err(e) => return error(400, format!("invalid JSON: {e}")),
            };
            if let Err(msg) = validate_infer(&value) {
                return error(400, msg);
            }
            let question = last_user_turn(&value).unwrap_or_default();
            if config.fail_questions.iter().any(|q| question.contains(q.as_str())) {
                return error(500, "injected failure".into());
            }
            (200, json!({"text": stub_infer(config, &value)}))
        }
        ("POST", "/embed") => {
            let value: Value = match serde_json::from_str(body) {
                Ok(v) => v,
                Err(e) => return error(400, format!("invalid JSON: {e}")),
            };
            let Some(texts) = value["texts"].as_array() else {
                return error(400, "missing texts".into());
            };
            let texts: Option<Vec<String>> = texts.iter().map(|t| t.as_str().map(str::to_string)).collect();
            match texts {
                Some(texts) if !texts.is_empty() => (200, stub_embed(config, &texts)),
                _ => error(400, "texts must be a non-empty list of strings".into()),
            }
        }
        _ => error(404, format!("no route for {method} {path}")),
    }
}

/// A running mock server bound to an ephemeral localhost port.
pub struct MockServer {
    server: Arc<Server>,
    url: String,
    requests: Arc<AtomicUsize>,
    worker: Option<JoinHandle<()>>,
}

impl MockServer {
    pub fn start(config: StubConfig) -> io::Result<Self> {
        let server = Server::http("127.0.0.1:0").map_err(io::Error::other)?;
        let addr = server
            .server_addr()
            .to_ip()
            .ok_or_else(|| io::Error::other("mock server has no IP address"))?;
        let server = Arc::new(server);
        let requests = Arc::new(AtomicUsize::new(0));
        let worker = {
            let server = Arc::clone(&server);
            let requests = Arc::clone(&requests);
            thread::spawn(move || {
                for mut request in server.incoming_requests() {
                    requests.fetch_add(1, Ordering::SeqCst);
                    let mut body = String::new();
                    let (status, value) = match request.as_reader().read_to_string(&mut body) {
                        Ok(_) => {
                            let method = match request.method() {
                                Method::Get => "GET",
                                Method::Post => "POST",
                                _ => "OTHER",
                            };
                            let path = request.url().split('?').next().unwrap_or("").to_string();
                            handle(&config, method, &path, &body)
                        }
                        Err(e) => (400, json!({"error": e.to_string()})),
                    };
                    let header = Header::from_bytes("Content-Type", "application/json").expect("static header");
                    let response = Response::from_string(value.to_string())
                        .with_status_code(status)
                        .with_header(header);
                    let _ = request.respond(response);
                }
            })
        };
        Ok(Self {
            server,
            url: format!("http://{addr}"),
            requests,
            worker: Some(worker),
        })
    }

    pub fn url(&self) -> &str {
        &self.url
    }

    pub fn request_count(&self) -> usize {
        self.requests.load(Ordering::SeqCst)
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        self.server.unblock();
        if let Some(worker) = self.worker.take() {
            let _ = worker.join();
        }
    }
}
