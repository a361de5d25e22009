//! The prompt-manipulation MDP: state construction, stepping through
//! manipulations against a live assistant, reward computation with scaling
//! and moving-average normalization, and episode lifecycle.

mod reward;
mod stats;
mod toy;

pub use reward::{step_reward, RewardConfig, RewardNormalizer, ScalingRange};
pub use stats::RunningStats;
pub use toy::ToyEnv;

use crate::assist::{AssistantClient, AssistError, CompletionRequest};
use crate::code::{line_spans, PromptRecord, SplitError};
use crate::embed::{EmbedError, Embedding, EmbeddingProvider};
use crate::manip::{
    apply_action_with, cursor_to_offset, propagate_renames, Action, ManipError, PromptState,
    RuleSummarizer, Summarizer,
};
use crate::metrics::{codebleu, CodeBleuWeights};
use alloc::string::String;
use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Episode step budget (manipulations per prompt).
pub const DEFAULT_TIME_LIMIT: u32 = 15;
/// Segments per prompt.
pub const DEFAULT_N_SEGMENTS: usize = 2;

/// The agent's observation: current-segment embedding plus three positional
/// fragments (segment location, relative cursor line, relative cursor
/// column), all in [0, 1]. Total dimension = embedding dim + 3.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    pub embedding: Embedding,
    pub segment_location: f64,
    pub cursor_line_rel: f64,
    pub cursor_col_rel: f64,
}

impl StateVector {
    pub fn dim(&self) -> usize {
        self.embedding.dim() + 3
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.dim());
        v.extend_from_slice(&self.embedding.values);
        v.push(self.segment_location);
        v.push(self.cursor_line_rel);
        v.push(self.cursor_col_rel);
        v
    }
}

/// Segment manipulated at step `t` when the prompt has `n` segments.
pub fn current_segment_index(t: u32, n: usize) -> usize {
    t as usize % n.max(1)
}

/// Per-dimension standardization: (x - mean) / sqrt(variance + 1e-8).
/// During training the stats are updated with the observation first; at
/// inference they stay frozen.
pub fn normalize_observation(obs: &[f64], stats: &RunningStats) -> Vec<f64> {
    stats.normalize(obs)
}

#[derive(Debug, thiserror::Error)]
pub enum EnvError {
    #[error("prompt cannot be segmented: {0}")]
    Split(#[from] SplitError),
    #[error("manipulation failed: {0}")]
    Manip(#[from] ManipError),
    #[error("embedding failed: {0}")]
    Embed(#[from] EmbedError),
    #[error("assistant failed: {0}")]
    Assist(#[from] AssistError),
    #[error("episode is not active; call reset first")]
    NotActive,
    #[error("action index {0} out of range")]
    BadAction(usize),
    #[error("no usable prompts: every candidate has fewer lines than segments")]
    NoUsablePrompts,
}

impl EnvError {
    /// Retriable faults let the caller resume the episode; everything else
    /// should abort it.
    pub fn is_retriable(&self) -> bool {
        match self {
            EnvError::Assist(e) => e.is_retriable(),
            EnvError::Embed(e) => e.is_retriable(),
            _ => false,
        }
    }
}

/// Environment configuration; defaults follow the training setup.
#[derive(Debug, Clone)]
pub struct EnvConfig {
    pub n_segments: usize,
    pub time_limit: u32,
    pub max_suggestion_tokens: usize,
    pub reward: RewardConfig,
    pub codebleu: CodeBleuWeights,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            n_segments: DEFAULT_N_SEGMENTS,
            time_limit: DEFAULT_TIME_LIMIT,
            max_suggestion_tokens: crate::assist::DEFAULT_SUGGESTION_TOKENS,
            reward: RewardConfig::default(),
            codebleu: CodeBleuWeights::default(),
        }
    }
}

/// Emitted when an episode finishes; feeds the training metrics log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeSummary {
    pub suggestion_similarity: f64,
    pub prompt_similarity: f64,
    pub final_rscore: f64,
    pub steps: u32,
}

#[derive(Debug, Clone, Default)]
pub struct StepInfo {
    /// Present on the episode's final step.
    pub episode: Option<EpisodeSummary>,
    /// False when the applied action had no target.
    pub applied: bool,
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub obs: Vec<f64>,
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

/// Trainer-facing environment interface with a discrete action space.
pub trait Environment {
    fn obs_dim(&self) -> usize;
    fn n_actions(&self) -> usize;
    fn reset(&mut self) -> Result<Vec<f64>, EnvError>;
    fn step(&mut self, action: usize) -> Result<StepOutcome, EnvError>;
}

struct Episode {
    state: PromptState,
    original_prompt: String,
    baseline_suggestion: String,
    prev_rscore: f64,
    last_suggestion_similarity: f64,
    last_prompt_similarity: f64,
    t: u32,
}

/// The prompt-manipulation environment. Cycles through its prompt shard,
/// one prompt per episode.
pub struct CloakEnv<A, E, S = RuleSummarizer> {
    assistant: A,
    embedder: E,
    summarizer: S,
    prompts: Vec<PromptRecord>,
    next_prompt: usize,
    config: EnvConfig,
    rng: ChaCha8Rng,
    normalizer: RewardNormalizer,
    episode: Option<Episode>,
}

impl<A: AssistantClient, E: EmbeddingProvider> CloakEnv<A, E, RuleSummarizer> {
    pub fn new(
        assistant: A,
        embedder: E,
        prompts: Vec<PromptRecord>,
        config: EnvConfig,
        seed: u64,
    ) -> Result<Self, EnvError> {
        Self::with_summarizer(assistant, embedder, RuleSummarizer, prompts, config, seed)
    }
}

impl<A: AssistantClient, E: EmbeddingProvider, S: Summarizer> CloakEnv<A, E, S> {
    pub fn with_summarizer(
        assistant: A,
        embedder: E,
        summarizer: S,
        prompts: Vec<PromptRecord>,
        config: EnvConfig,
        seed: u64,
    ) -> Result<Self, EnvError> {
        let usable: Vec<PromptRecord> = prompts
            .into_iter()
            .filter(|p| {
                PromptState::from_record(p, config.n_segments).is_ok()
                    && crate::code::count_tokens(&p.text) <= embedder.max_tokens()
            })
            .collect();
        if usable.is_empty() {
            return Err(EnvError::NoUsablePrompts);
        }
        let normalizer = RewardNormalizer::new(&config.reward);
        Ok(CloakEnv {
            assistant,
            embedder,
            summarizer,
            prompts: usable,
            next_prompt: 0,
            config,
            rng: ChaCha8Rng::seed_from_u64(seed),
            normalizer,
            episode: None,
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn prompt_count(&self) -> usize {
        self.prompts.len()
    }

    fn query_assistant(&self, state: &PromptState) -> Result<String, EnvError> {
        let text = state.current_text();
        let offset = cursor_to_offset(&text, state.cursor);
        let request = CompletionRequest {
            prefix: text[..offset].into(),
            suffix: text[offset..].into(),
            max_tokens: self.config.max_suggestion_tokens,
        };
        Ok(self.assistant.complete(&request)?.text)
    }

    fn build_observation(&self, episode: &Episode) -> Result<StateVector, EnvError> {
        let i = current_segment_index(episode.t, episode.state.n_segments());
        let segment = &episode.state.segments[i];
        let embedding = self.embedder.embed(segment)?;
        let text = episode.state.current_text();
        let lines = line_spans(&text);
        let line_count = lines.len().max(1);
        let cursor = episode.state.cursor;
        let line_len = lines
            .get(cursor.line)
            .map(|s| s.slice(&text).trim_end_matches('\n').len())
            .unwrap_or(0);
        Ok(StateVector {
            embedding,
            segment_location: i as f64 / episode.state.n_segments().max(1) as f64,
            cursor_line_rel: cursor.line as f64 / line_count as f64,
            cursor_col_rel: if line_len == 0 { 0.0 } else { cursor.col as f64 / line_len as f64 },
        })
    }

    /// RScore of the current manipulated prompt against the originals.
    fn rscore_now(&self, episode: &Episode, manipulated_suggestion: &str) -> (f64, f64, f64) {
        let suggestion_similarity = codebleu(
            &episode.baseline_suggestion,
            manipulated_suggestion,
            &self.config.codebleu,
        );
        let prompt_similarity = codebleu(
            &episode.original_prompt,
            &episode.state.current_text(),
            &self.config.codebleu,
        );
        let rscore = rscore_value(
            suggestion_similarity,
            prompt_similarity,
            &self.config.reward,
        );
        (rscore, suggestion_similarity, prompt_similarity)
    }
}

/// lambda1 * sim(suggestions) - lambda2 * sim(prompts).
pub fn rscore(
    original_prompt: &str,
    manipulated_prompt: &str,
    original_suggestion: &str,
    manipulated_suggestion: &str,
    reward: &RewardConfig,
    weights: &CodeBleuWeights,
) -> f64 {
    rscore_value(
        codebleu(original_suggestion, manipulated_suggestion, weights),
        codebleu(original_prompt, manipulated_prompt, weights),
        reward,
    )
}

fn rscore_value(suggestion_similarity: f64, prompt_similarity: f64, reward: &RewardConfig) -> f64 {
    reward.lambda1 * suggestion_similarity - reward.lambda2 * prompt_similarity
}

impl<A: AssistantClient, E: EmbeddingProvider, S: Summarizer> Environment for CloakEnv<A, E, S> {
    fn obs_dim(&self) -> usize {
        self.embedder.dim() + 3
    }

    fn n_actions(&self) -> usize {
        Action::COUNT
    }

    fn reset(&mut self) -> Result<Vec<f64>, EnvError> {
        let record = self.prompts[self.next_prompt % self.prompts.len()].clone();
        self.next_prompt += 1;
        let state = PromptState::from_record(&record, self.config.n_segments)?;
        let mut episode = Episode {
            original_prompt: state.current_text(),
            baseline_suggestion: String::new(),
            state,
            prev_rscore: 0.0,
            last_suggestion_similarity: 1.0,
            last_prompt_similarity: 1.0,
            t: 0,
        };
        episode.baseline_suggestion = self.query_assistant(&episode.state)?;
        let obs = self.build_observation(&episode)?.to_vec();
        self.episode = Some(episode);
        Ok(obs)
    }

    fn step(&mut self, action: usize) -> Result<StepOutcome, EnvError> {
        let action = Action::from_index(action).ok_or(EnvError::BadAction(action))?;
        let mut episode = self.episode.take().ok_or(EnvError::NotActive)?;

        if action.is_terminal() {
            // No manipulation: RScore is unchanged, so the raw step reward is 0.
            let reward = self.normalizer.normalize(0.0, episode.last_suggestion_similarity);
            let obs = self.build_observation(&episode)?.to_vec();
            let info = StepInfo {
                episode: Some(EpisodeSummary {
                    suggestion_similarity: episode.last_suggestion_similarity,
                    prompt_similarity: episode.last_prompt_similarity,
                    final_rscore: episode.prev_rscore,
                    steps: episode.state.step_count,
                }),
                applied: false,
            };
            return Ok(StepOutcome { obs, reward, done: true, info });
        }

        let i = current_segment_index(episode.t, episode.state.n_segments());
        let seed: u64 = self.rng.gen();
        let outcome = match apply_action_with(&episode.state, i, action, seed, &self.summarizer) {
            Ok(outcome) => outcome,
            Err(e) => {
                self.episode = Some(episode);
                return Err(e.into());
            }
        };
        let applied = outcome.applied;
        let with_renames = propagate_renames(&outcome.state);
        episode.state = with_renames;

        let manipulated_suggestion = match self.query_assistant(&episode.state) {
            Ok(s) => s,
            Err(e) => {
                // Leave the episode resumable: the manipulation is kept, the
                // reward for it will be computed on the retried query.
                episode.t += 1;
                self.episode = Some(episode);
                return Err(e);
            }
        };
        let (cur_rscore, suggestion_similarity, prompt_similarity) =
            self.rscore_now(&episode, &manipulated_suggestion);

        let mut raw = cur_rscore - episode.prev_rscore;
        if !applied {
            raw -= self.config.reward.noop_penalty;
        }
        let reward = self.normalizer.normalize(raw, suggestion_similarity);

        episode.prev_rscore = cur_rscore;
        episode.last_suggestion_similarity = suggestion_similarity;
        episode.last_prompt_similarity = prompt_similarity;
        episode.t += 1;

        let done = episode.state.step_count >= self.config.time_limit;
        let obs = self.build_observation(&episode)?.to_vec();
        let info = StepInfo {
            episode: done.then_some(EpisodeSummary {
                suggestion_similarity,
                prompt_similarity,
                final_rscore: cur_rscore,
                steps: episode.state.step_count,
            }),
            applied,
        };
        if !done {
            self.episode = Some(episode);
        }
        Ok(StepOutcome { obs, reward, done, info })
    }
}
