//! Inference-time gateway logic: the per-prompt manipulation loop under a
//! trained policy, sequential-session preprocessing, and suggestion
//! back-translation. Transport (HTTP) lives in the std companion crate; this
//! module is the complete behavior behind it.

use crate::agent::{greedy_action, PolicyParams};
use crate::assist::{AssistantClient, AssistError, CompletionRequest, Suggestion};
use crate::code::{line_spans, PromptRecord, Span};
use crate::embed::{EmbedError, EmbeddingProvider};
use crate::env::current_segment_index;
use crate::manip::edit;
use crate::manip::{
    apply_action, cursor_to_offset, offset_to_cursor, propagate_renames, Action, CursorPos,
    ManipError, PromptState, TranslationMap,
};
use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailMode {
    /// On internal failure, forward the ORIGINAL prompt upstream and flag the
    /// response; availability over privacy.
    Open,
    /// On internal failure, return an error; the original prompt never leaves
    /// the gateway. The default.
    Closed,
}

#[derive(Debug, Clone)]
pub struct GatewayConfig {
    pub n_segments: usize,
    pub time_limit: u32,
    pub max_suggestion_tokens: usize,
    pub fail_mode: FailMode,
    pub seed: u64,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        GatewayConfig {
            n_segments: crate::env::DEFAULT_N_SEGMENTS,
            time_limit: crate::env::DEFAULT_TIME_LIMIT,
            max_suggestion_tokens: crate::assist::DEFAULT_SUGGESTION_TOKENS,
            fail_mode: FailMode::Closed,
            seed: 0,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PolicyFault {
    #[error("policy produced a non-finite output")]
    NonFinite,
    #[error("policy failure: {0}")]
    Other(String),
}

/// Per-decision context handed to the policy.
#[derive(Debug, Clone, Copy)]
pub struct PolicyContext {
    /// Ordinal of the prompt within its session.
    pub prompt_index: u64,
    /// Manipulation step within the current prompt.
    pub step: u32,
}

/// Action source for the manipulation loop. Implemented by trained
/// [`PolicyParams`]; tests inject scripted or broken policies.
pub trait GatewayPolicy {
    fn initial_state(&self) -> Vec<f64>;
    fn choose(
        &self,
        ctx: PolicyContext,
        raw_obs: &[f64],
        recurrent_state: &mut Vec<f64>,
    ) -> Result<Action, PolicyFault>;
}

impl GatewayPolicy for PolicyParams {
    fn initial_state(&self) -> Vec<f64> {
        self.initial_recurrent_state()
    }

    fn choose(
        &self,
        _ctx: PolicyContext,
        raw_obs: &[f64],
        recurrent_state: &mut Vec<f64>,
    ) -> Result<Action, PolicyFault> {
        // Inference uses the frozen training statistics and the greedy arm.
        let obs = self.normalize_obs(raw_obs);
        let (logits, _value, next) = self.forward(&obs, recurrent_state);
        if logits.iter().any(|l| !l.is_finite()) {
            return Err(PolicyFault::NonFinite);
        }
        *recurrent_state = next;
        Action::from_index(greedy_action(&logits)).ok_or(PolicyFault::NonFinite)
    }
}

/// Fixed action sequence; steps past the end stop.
#[derive(Debug, Clone)]
pub struct ScriptedPolicy(pub Vec<Action>);

impl GatewayPolicy for ScriptedPolicy {
    fn initial_state(&self) -> Vec<f64> {
        Vec::new()
    }

    fn choose(
        &self,
        ctx: PolicyContext,
        _raw_obs: &[f64],
        _recurrent_state: &mut Vec<f64>,
    ) -> Result<Action, PolicyFault> {
        Ok(self
            .0
            .get(ctx.step as usize)
            .copied()
            .unwrap_or(Action::StopManipulations))
    }
}

/// The evaluation baseline as a gateway policy: a fresh uniformly random
/// action sequence per prompt, reproducible from the seed.
#[derive(Debug, Clone)]
pub struct RandomBaselinePolicy {
    pub seed: u64,
    pub time_limit: u32,
}

impl GatewayPolicy for RandomBaselinePolicy {
    fn initial_state(&self) -> Vec<f64> {
        Vec::new()
    }

    fn choose(
        &self,
        ctx: PolicyContext,
        _raw_obs: &[f64],
        _recurrent_state: &mut Vec<f64>,
    ) -> Result<Action, PolicyFault> {
        let seq = crate::manip::random_action_sequence(
            self.seed ^ ctx.prompt_index.wrapping_mul(0x9e37_79b9_7f4a_7c15),
            self.time_limit,
        );
        Ok(seq.get(ctx.step as usize).copied().unwrap_or(Action::StopManipulations))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum GatewayError {
    #[error("policy failed ({fail_mode:?} mode): {source}")]
    Policy { source: PolicyFault, fail_mode: FailMode },
    #[error("embedding failed: {0}")]
    Embed(#[from] EmbedError),
    #[error("manipulation failed: {0}")]
    Manip(#[from] ManipError),
    #[error("assistant unavailable in fail-closed mode: {0}")]
    Assistant(#[from] AssistError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct TraceStep {
    pub t: u32,
    pub segment: usize,
    pub action: Action,
}

#[derive(Debug, Clone)]
pub struct GatewayResponse {
    /// What actually went upstream.
    pub upstream_prompt: String,
    /// The suggestion after back-translation.
    pub suggestion: Suggestion,
    pub trace: Vec<TraceStep>,
    /// True when fail-open forwarded the original prompt unprotected.
    pub privacy_disabled: bool,
}

#[derive(Debug, Clone)]
struct CachedSegment {
    original: String,
    manipulated: String,
}

/// Per-session state: the cumulative rename record and the cache of
/// previously manipulated segments, so identical code always leaves the
/// gateway in the identical manipulated form.
#[derive(Debug, Clone)]
pub struct Session {
    pub session_id: String,
    pub translation: TranslationMap,
    cache: BTreeMap<u64, CachedSegment>,
    prompt_counter: u64,
}

impl Session {
    pub fn new(session_id: impl Into<String>) -> Self {
        Session {
            session_id: session_id.into(),
            translation: TranslationMap::default(),
            cache: BTreeMap::new(),
            prompt_counter: 0,
        }
    }

    pub fn cached_segments(&self) -> usize {
        self.cache.len()
    }

    pub fn prompts_handled(&self) -> u64 {
        self.prompt_counter
    }
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Cache keys survive trivial reformatting: whitespace runs collapse to one
/// space before hashing.
fn normalized_key(text: &str) -> u64 {
    let mut normalized = String::with_capacity(text.len());
    let mut in_space = true;
    for c in text.chars() {
        if c.is_whitespace() {
            if !in_space {
                normalized.push(' ');
                in_space = true;
            }
        } else {
            normalized.push(c);
            in_space = false;
        }
    }
    fnv1a64(normalized.trim_end().as_bytes())
}

/// Output of [`preprocess_sequential`]: the rewritten prompt, the remapped
/// cursor, and which byte ranges of the new text came from the cache (with
/// the original text they replaced).
#[derive(Debug, Clone)]
pub struct Preprocessed {
    pub text: String,
    pub cursor: CursorPos,
    pub replaced: Vec<(Span, String)>,
}

/// Replaces every cached segment appearing verbatim in the prompt with its
/// cached manipulated form. Renames are re-propagated later, once the prompt
/// is segmented.
pub fn preprocess_sequential(session: &Session, text: &str, cursor: CursorPos) -> Preprocessed {
    // Collect candidate occurrences of every cached original, prefer longer
    // originals at equal start, keep non-overlapping matches.
    let mut candidates: Vec<(usize, &CachedSegment)> = Vec::new();
    for entry in session.cache.values() {
        if entry.original.is_empty() || entry.original == entry.manipulated {
            continue;
        }
        let mut from = 0usize;
        while let Some(rel) = text[from..].find(&entry.original) {
            candidates.push((from + rel, entry));
            from += rel + 1;
        }
    }
    candidates.sort_by(|a, b| {
        a.0.cmp(&b.0)
            .then(b.1.original.len().cmp(&a.1.original.len()))
    });

    let mut edits: Vec<edit::SpanEdit> = Vec::new();
    let mut covered_until = 0usize;
    let mut replaced_originals: Vec<String> = Vec::new();
    for (start, entry) in candidates {
        if start < covered_until {
            continue;
        }
        edits.push(edit::SpanEdit {
            span: Span::new(start, start + entry.original.len()),
            replacement: entry.manipulated.clone(),
        });
        replaced_originals.push(entry.original.clone());
        covered_until = start + entry.original.len();
    }

    let cursor_offset = cursor_to_offset(text, cursor);
    let (new_text, regions, new_spans) = edit::apply_span_edits_tracked(text, &edits);
    let new_offset = edit::remap_offset(&regions, cursor_offset);
    let replaced = new_spans.into_iter().zip(replaced_originals).collect();
    Preprocessed {
        cursor: offset_to_cursor(&new_text, new_offset),
        text: new_text,
        replaced,
    }
}

pub struct Gateway<A, E> {
    assistant: A,
    embedder: E,
    config: GatewayConfig,
}

impl<A: AssistantClient, E: EmbeddingProvider> Gateway<A, E> {
    pub fn new(assistant: A, embedder: E, config: GatewayConfig) -> Self {
        Gateway { assistant, embedder, config }
    }

    pub fn config(&self) -> &GatewayConfig {
        &self.config
    }

    pub fn assistant(&self) -> &A {
        &self.assistant
    }

    /// The full inference path for one prompt: sequential preprocessing, the
    /// manipulation loop, one upstream completion, back-translation, cache
    /// update.
    pub fn handle_prompt<P: GatewayPolicy + ?Sized>(
        &self,
        policy: &P,
        session: &mut Session,
        prompt: &PromptRecord,
    ) -> Result<GatewayResponse, GatewayError> {
        match self.cloak_and_complete(policy, session, prompt) {
            Ok(response) => Ok(response),
            Err(err) => match self.config.fail_mode {
                FailMode::Closed => Err(err),
                FailMode::Open => {
                    // Availability fallback: the original prompt goes out.
                    let suggestion = self.complete_at(
                        &prompt.text,
                        cursor_to_offset(
                            &prompt.text,
                            CursorPos { line: prompt.cursor_line, col: prompt.cursor_col },
                        ),
                    )?;
                    Ok(GatewayResponse {
                        upstream_prompt: prompt.text.clone(),
                        suggestion,
                        trace: Vec::new(),
                        privacy_disabled: true,
                    })
                }
            },
        }
    }

    fn complete_at(&self, text: &str, offset: usize) -> Result<Suggestion, AssistError> {
        let request = CompletionRequest {
            prefix: text[..offset].to_string(),
            suffix: text[offset..].to_string(),
            max_tokens: self.config.max_suggestion_tokens,
        };
        self.assistant.complete(&request)
    }

    fn cloak_and_complete<P: GatewayPolicy + ?Sized>(
        &self,
        policy: &P,
        session: &mut Session,
        prompt: &PromptRecord,
    ) -> Result<GatewayResponse, GatewayError> {
        let pre = preprocess_sequential(
            session,
            &prompt.text,
            CursorPos { line: prompt.cursor_line, col: prompt.cursor_col },
        );

        // Single-line prompts cannot be split into the configured segment
        // count; they run as one segment.
        let mut state = PromptState::from_text(&pre.text, pre.cursor, self.config.n_segments)
            .or_else(|_| PromptState::from_text(&pre.text, pre.cursor, 1))
            .expect("single-segment construction cannot fail");
        // Segment boundaries in pre.text coordinates, captured before rename
        // propagation changes byte lengths; the cache inversion needs them.
        let pre_segment_count = state.n_segments();
        let pre_segments: Vec<String> = state.segments.clone();
        state.translation = session.translation.clone();
        if !state.translation.is_empty() {
            state = propagate_renames(&state);
        }

        // Algorithm-1 loop: at most time_limit manipulations, one policy
        // forward each; the assistant is queried once, afterwards.
        let mut trace = Vec::new();
        let mut recurrent = policy.initial_state();
        let mut t: u32 = 0;
        loop {
            if t >= self.config.time_limit {
                break;
            }
            let i = current_segment_index(t, state.n_segments());
            let obs = self.observe(&state, i)?;
            let ctx = PolicyContext { prompt_index: session.prompt_counter, step: t };
            let action = policy
                .choose(ctx, &obs, &mut recurrent)
                .map_err(|source| GatewayError::Policy {
                    source,
                    fail_mode: self.config.fail_mode,
                })?;
            if action.is_terminal() {
                break;
            }
            let seed = fnv1a64(
                alloc::format!("{}/{}/{}", session.session_id, session.prompt_counter, t)
                    .as_bytes(),
            )
            .wrapping_add(self.config.seed);
            let outcome = apply_action(&state, i, action, seed)?;
            state = propagate_renames(&outcome.state);
            trace.push(TraceStep { t, segment: i, action });
            t += 1;
        }

        let final_text = state.current_text();
        let suggestion_raw =
            self.complete_at(&final_text, cursor_to_offset(&final_text, state.cursor))?;
        let translated = crate::manip::translate_suggestion(&suggestion_raw.text, &state.translation);

        // Persist session state only after the upstream call succeeded.
        session.translation = state.translation.clone();
        update_cache(session, &pre, &pre_segments, &state.segments, pre_segment_count);
        session.prompt_counter += 1;

        Ok(GatewayResponse {
            upstream_prompt: final_text,
            suggestion: Suggestion {
                text: translated,
                token_count: suggestion_raw.token_count,
                provider_id: suggestion_raw.provider_id,
            },
            trace,
            privacy_disabled: false,
        })
    }

    fn observe(&self, state: &PromptState, segment: usize) -> Result<Vec<f64>, GatewayError> {
        let embedding = self.embedder.embed(&state.segments[segment])?;
        let text = state.current_text();
        let lines = line_spans(&text);
        let line_count = lines.len().max(1);
        let line_len = lines
            .get(state.cursor.line)
            .map(|s| s.slice(&text).trim_end_matches('\n').len())
            .unwrap_or(0);
        let mut obs = embedding.values;
        obs.push(segment as f64 / state.n_segments().max(1) as f64);
        obs.push(state.cursor.line as f64 / line_count as f64);
        obs.push(if line_len == 0 { 0.0 } else { state.cursor.col as f64 / line_len as f64 });
        Ok(obs)
    }
}

/// Maps each final segment back to the original text it came from and caches
/// the pair. Segments whose pre-image partially overlaps a cache replacement
/// cannot be inverted exactly and are skipped; existing entries are never
/// overwritten, so the cache grows monotonically.
fn update_cache(
    session: &mut Session,
    pre: &Preprocessed,
    pre_segments: &[String],
    final_segments: &[String],
    segment_count: usize,
) {
    let mut offset = 0usize;
    for i in 0..segment_count {
        let seg_len = pre_segments[i].len();
        let seg_span = Span::new(offset, offset + seg_len);
        offset += seg_len;

        let original = invert_region(pre, seg_span);
        let Some(original) = original else { continue };
        if original.trim().is_empty() {
            continue;
        }
        let key = normalized_key(&original);
        session.cache.entry(key).or_insert_with(|| CachedSegment {
            original,
            manipulated: final_segments[i].clone(),
        });
    }
}

/// Restores the original text for a byte range of the preprocessed prompt.
/// Returns None when the range cuts through a replaced region.
fn invert_region(pre: &Preprocessed, range: Span) -> Option<String> {
    let mut out = String::new();
    let mut pos = range.start;
    for (span, original) in &pre.replaced {
        if span.end <= range.start || span.start >= range.end {
            continue;
        }
        // partial overlap is not invertible
        if span.start < range.start || span.end > range.end {
            return None;
        }
        out.push_str(&pre.text[pos..span.start]);
        out.push_str(original);
        pos = span.end;
    }
    out.push_str(&pre.text[pos..range.end]);
    Some(out)
}
