//! Uniform interface to code-assistant services, plus the deterministic
//! replay assistant used for training and desk-scale evaluation.

use crate::code::{tokenize, Span};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

/// Default completion length, in tokens.
pub const DEFAULT_SUGGESTION_TOKENS: usize = 20;
/// Default suffix-match window of the replay assistant, in tokens.
pub const DEFAULT_MATCH_WINDOW: usize = 32;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletionRequest {
    /// Text before the cursor.
    pub prefix: String,
    /// Text after the cursor.
    pub suffix: String,
    pub max_tokens: usize,
}

impl CompletionRequest {
    pub fn new(prefix: impl Into<String>, suffix: impl Into<String>) -> Self {
        CompletionRequest {
            prefix: prefix.into(),
            suffix: suffix.into(),
            max_tokens: DEFAULT_SUGGESTION_TOKENS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Suggestion {
    pub text: String,
    pub token_count: usize,
    pub provider_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AssistError {
    /// Transient failure (network, 429). Retriable with backoff.
    #[error("assistant transport failed: {0}")]
    Transport(String),
    /// Misconfiguration; retrying will not help.
    #[error("assistant configuration error: {0}")]
    Config(String),
}

impl AssistError {
    pub fn is_retriable(&self) -> bool {
        matches!(self, AssistError::Transport(_))
    }
}

pub trait AssistantClient {
    fn complete(&self, request: &CompletionRequest) -> Result<Suggestion, AssistError>;
}

impl<T: AssistantClient + ?Sized> AssistantClient for alloc::boxed::Box<T> {
    fn complete(&self, request: &CompletionRequest) -> Result<Suggestion, AssistError> {
        (**self).complete(request)
    }
}

impl<T: AssistantClient + ?Sized> AssistantClient for alloc::sync::Arc<T> {
    fn complete(&self, request: &CompletionRequest) -> Result<Suggestion, AssistError> {
        (**self).complete(request)
    }
}

#[derive(Debug)]
struct ReplayFile {
    path: String,
    text: String,
    token_spans: Vec<Span>,
}

/// Positions keyed by the token preceding them, so matching only visits
/// offsets that can extend past length zero.
type TokenIndex = alloc::collections::BTreeMap<String, Vec<(usize, usize)>>;

/// Retrieval-based completion stub. Finds the corpus position whose preceding
/// `window` tokens share the longest common suffix with the request prefix
/// (ties: lexicographically-first file, then smallest offset) and returns the
/// following `max_tokens` tokens verbatim.
///
/// Deletions far from the cursor rarely change the answer while edits near it
/// do, so the stub reacts to manipulations the way a context-driven assistant
/// would, without any model weights.
#[derive(Debug)]
pub struct ReplayAssistant {
    files: Vec<ReplayFile>,
    window: usize,
    index: TokenIndex,
}

impl ReplayAssistant {
    pub fn new(corpus: Vec<(String, String)>, window: usize) -> Result<Self, AssistError> {
        if corpus.is_empty() {
            return Err(AssistError::Config("replay corpus is empty".to_string()));
        }
        let mut files: Vec<ReplayFile> = corpus
            .into_iter()
            .map(|(path, text)| {
                let token_spans = token_spans(&text);
                ReplayFile { path, text, token_spans }
            })
            .collect();
        files.sort_by(|a, b| a.path.cmp(&b.path));
        let mut index: TokenIndex = TokenIndex::new();
        for (fi, file) in files.iter().enumerate() {
            for (o, span) in file.token_spans.iter().enumerate() {
                index
                    .entry(span.slice(&file.text).to_string())
                    .or_default()
                    .push((fi, o + 1));
            }
        }
        Ok(ReplayAssistant { files, window, index })
    }

    pub fn with_default_window(corpus: Vec<(String, String)>) -> Result<Self, AssistError> {
        Self::new(corpus, DEFAULT_MATCH_WINDOW)
    }
}

fn token_spans(text: &str) -> Vec<Span> {
    let mut spans = Vec::new();
    let mut consumed = 0usize;
    for tok in tokenize(text) {
        let rel = text[consumed..].find(tok).expect("token comes from text");
        let start = consumed + rel;
        spans.push(Span::new(start, start + tok.len()));
        consumed = start + tok.len();
    }
    spans
}

impl AssistantClient for ReplayAssistant {
    fn complete(&self, request: &CompletionRequest) -> Result<Suggestion, AssistError> {
        let prefix_tokens = tokenize(&request.prefix);
        let tail_start = prefix_tokens.len().saturating_sub(self.window);
        let tail = &prefix_tokens[tail_start..];

        // best = (match_len, file_idx, offset). Zero-length matches tie-break
        // to the first file's start; longer matches only exist at positions
        // preceded by the tail's last token, which the index enumerates in
        // (file, offset) order.
        let mut best: (usize, usize, usize) = (0, 0, 0);
        if let Some(candidates) = tail.last().and_then(|t| self.index.get(*t)) {
            for &(fi, offset) in candidates {
                let file = &self.files[fi];
                let mut len = 0;
                while len < tail.len()
                    && len < offset
                    && len < self.window
                    && file.token_spans[offset - 1 - len].slice(&file.text)
                        == tail[tail.len() - 1 - len]
                {
                    len += 1;
                }
                if len > best.0 {
                    best = (len, fi, offset);
                }
            }
        }
        let (_, fi, offset) = best;
        let file = &self.files[fi];
        let end_tok = (offset + request.max_tokens).min(file.token_spans.len());
        let (text, token_count) = if offset >= file.token_spans.len() {
            (String::new(), 0)
        } else {
            let start = file.token_spans[offset].start;
            let end = file.token_spans[end_tok - 1].end;
            (file.text[start..end].to_string(), end_tok - offset)
        };
        Ok(Suggestion { text, token_count, provider_id: "replay".to_string() })
    }
}
