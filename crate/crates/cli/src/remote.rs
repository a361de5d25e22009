//! HTTP bindings for the pluggable providers: completion, embedding,
//! summarization and reconstruction. All clients are blocking (they are
//! called from synchronous pipeline code) and retry transient failures with
//! capped exponential backoff.

use promptcloak_core::assist::{AssistError, AssistantClient, CompletionRequest, Suggestion};
use promptcloak_core::embed::{EmbedError, Embedding, EmbeddingProvider};
use promptcloak_core::manip::{SummarizeError, Summarizer};
use promptcloak_core::recon::{ReconError, Reconstructor};
use serde::{Deserialize, Serialize};
use std::sync::OnceLock;
use std::time::Duration;

const MAX_RETRIES: u32 = 3;
const BASE_BACKOFF_MS: u64 = 200;

fn backoff(attempt: u32) {
    let ms = BASE_BACKOFF_MS.saturating_mul(1u64 << attempt.min(4));
    std::thread::sleep(Duration::from_millis(ms.min(2_000)));
}

fn retriable_status(status: reqwest::StatusCode) -> bool {
    status == reqwest::StatusCode::TOO_MANY_REQUESTS || status.is_server_error()
}

/// POSTs `body` to `url`, retrying transport faults and 429/5xx responses.
fn post_json<Req: Serialize, Resp: for<'de> Deserialize<'de>>(
    client: &reqwest::blocking::Client,
    url: &str,
    body: &Req,
) -> Result<Resp, String> {
    let mut last_error = String::new();
    for attempt in 0..=MAX_RETRIES {
        if attempt > 0 {
            backoff(attempt - 1);
        }
        match client.post(url).json(body).send() {
            Err(e) => last_error = format!("transport: {e}"),
            Ok(resp) => {
                let status = resp.status();
                if status.is_success() {
                    return resp.json::<Resp>().map_err(|e| format!("bad response body: {e}"));
                }
                last_error = format!("status {status}");
                if !retriable_status(status) {
                    return Err(last_error);
                }
            }
        }
    }
    Err(format!("{last_error} (after {MAX_RETRIES} retries)"))
}

fn http_client() -> reqwest::blocking::Client {
    reqwest::blocking::Client::builder()
        .timeout(Duration::from_secs(60))
        .build()
        .expect("default client")
}

#[derive(Serialize)]
struct CompleteWire<'a> {
    prefix: &'a str,
    suffix: &'a str,
    max_tokens: usize,
}

#[derive(Deserialize)]
struct CompleteReply {
    text: String,
    token_count: Option<usize>,
}

/// Remote code-assistant client speaking POST {base}/v1/complete.
pub struct RemoteAssistant {
    base_url: String,
    auth_header: Option<(String, String)>,
    client: reqwest::blocking::Client,
}

impl RemoteAssistant {
    pub fn new(base_url: impl Into<String>, auth_header: Option<(String, String)>) -> Self {
        RemoteAssistant { base_url: base_url.into(), auth_header, client: http_client() }
    }
}

impl AssistantClient for RemoteAssistant {
    fn complete(&self, request: &CompletionRequest) -> Result<Suggestion, AssistError> {
        let url = format!("{}/v1/complete", self.base_url.trim_end_matches('/'));
        let wire = CompleteWire {
            prefix: &request.prefix,
            suffix: &request.suffix,
            max_tokens: request.max_tokens,
        };
        let mut req = self.client.post(&url).json(&wire);
        if let Some((name, value)) = &self.auth_header {
            req = req.header(name, value);
        }
        // single-shot send here so the auth header applies; retries wrap it
        let mut last_error = String::new();
        for attempt in 0..=MAX_RETRIES {
            if attempt > 0 {
                backoff(attempt - 1);
            }
            let cloned = req.try_clone().expect("json body is cloneable");
            match cloned.send() {
                Err(e) => last_error = format!("transport: {e}"),
                Ok(resp) => {
                    let status = resp.status();
                    if status.is_success() {
                        let reply: CompleteReply = resp
                            .json()
                            .map_err(|e| AssistError::Transport(format!("bad body: {e}")))?;
                        let token_count = reply
                            .token_count
                            .unwrap_or_else(|| promptcloak_core::code::count_tokens(&reply.text));
                        return Ok(Suggestion {
                            text: reply.text,
                            token_count,
                            provider_id: self.base_url.clone(),
                        });
                    }
                    last_error = format!("status {status}");
                    if !retriable_status(status) {
                        return Err(AssistError::Config(last_error));
                    }
                }
            }
        }
        Err(AssistError::Transport(last_error))
    }
}

#[derive(Serialize)]
struct EmbedWire<'a> {
    text: &'a str,
    pooling: &'a str,
}

#[derive(Deserialize)]
struct EmbedReply {
    dim: usize,
    values: Vec<f64>,
}

/// Remote encoder speaking POST {base}/v1/embed {text, pooling} ->
/// {dim, values[]}. The dimension is discovered from the first response and
/// pinned for the provider's lifetime.
pub struct RemoteEmbedder {
    base_url: String,
    pooling: String,
    max_tokens: usize,
    client: reqwest::blocking::Client,
    dim: OnceLock<usize>,
}

impl RemoteEmbedder {
    pub fn new(base_url: impl Into<String>, pooling: impl Into<String>, max_tokens: usize) -> Self {
        RemoteEmbedder {
            base_url: base_url.into(),
            pooling: pooling.into(),
            max_tokens,
            client: http_client(),
            dim: OnceLock::new(),
        }
    }

    /// Performs the discovery handshake so `dim()` is meaningful before the
    /// first real request.
    pub fn handshake(&self) -> Result<usize, EmbedError> {
        self.embed("")?;
        Ok(self.dim())
    }
}

impl EmbeddingProvider for RemoteEmbedder {
    fn dim(&self) -> usize {
        *self.dim.get().unwrap_or(&0)
    }

    fn max_tokens(&self) -> usize {
        self.max_tokens
    }

    fn embed(&self, text: &str) -> Result<Embedding, EmbedError> {
        let tokens = promptcloak_core::code::count_tokens(text);
        if tokens > self.max_tokens {
            return Err(EmbedError::OverLimit { tokens, max: self.max_tokens });
        }
        let url = format!("{}/v1/embed", self.base_url.trim_end_matches('/'));
        let reply: EmbedReply =
            post_json(&self.client, &url, &EmbedWire { text, pooling: &self.pooling })
                .map_err(EmbedError::Transport)?;
        let pinned = *self.dim.get_or_init(|| reply.dim);
        if reply.dim != pinned || reply.values.len() != reply.dim {
            return Err(EmbedError::DimensionMismatch { got: reply.dim, expected: pinned });
        }
        Ok(Embedding { values: reply.values })
    }
}

#[derive(Serialize)]
struct SummarizeWire<'a> {
    body_text: &'a str,
}

#[derive(Deserialize)]
struct SummarizeReply {
    summary: String,
}

/// Remote summarization model speaking POST {base}/v1/summarize.
pub struct RemoteSummarizer {
    base_url: String,
    client: reqwest::blocking::Client,
}

impl RemoteSummarizer {
    pub fn new(base_url: impl Into<String>) -> Self {
        RemoteSummarizer { base_url: base_url.into(), client: http_client() }
    }
}

impl Summarizer for RemoteSummarizer {
    fn summarize(&self, body_text: &str) -> Result<String, SummarizeError> {
        let url = format!("{}/v1/summarize", self.base_url.trim_end_matches('/'));
        let reply: SummarizeReply =
            post_json(&self.client, &url, &SummarizeWire { body_text })
                .map_err(SummarizeError::Backend)?;
        Ok(reply.summary)
    }
}

#[derive(Serialize)]
struct ReconstructWire<'a> {
    instructions: &'a str,
    prior_codebase: &'a str,
    segments: &'a [String],
}

#[derive(Deserialize)]
struct ReconstructReply {
    files: Vec<ReconstructedFile>,
}

#[derive(Deserialize)]
struct ReconstructedFile {
    #[allow(dead_code)]
    path: String,
    content: String,
}

/// Remote LLM reconstructor speaking POST {base}/v1/reconstruct
/// {instructions, prior_codebase, segments[]} -> {files: [{path, content}]}.
pub struct RemoteReconstructor {
    base_url: String,
    client: reqwest::blocking::Client,
}

impl RemoteReconstructor {
    pub fn new(base_url: impl Into<String>) -> Self {
        RemoteReconstructor { base_url: base_url.into(), client: http_client() }
    }
}

impl Reconstructor for RemoteReconstructor {
    fn reconstruct(
        &self,
        instructions: &str,
        prior_codebase: &str,
        segments: &[String],
    ) -> Result<String, ReconError> {
        let url = format!("{}/v1/reconstruct", self.base_url.trim_end_matches('/'));
        let reply: ReconstructReply = post_json(
            &self.client,
            &url,
            &ReconstructWire { instructions, prior_codebase, segments },
        )
        .map_err(ReconError::Backend)?;
        Ok(reply
            .files
            .into_iter()
            .map(|f| f.content)
            .collect::<Vec<_>>()
            .join("\n"))
    }
}
