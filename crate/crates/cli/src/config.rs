//! Layered configuration: built-in defaults, then a flat key = value file,
//! then PROMPTCLOAK_* environment variables, then --set flags. The resolved
//! config prints back in the same file format and round-trips through it.

use anyhow::{bail, Context, Result};
use promptcloak_core::env::{RewardConfig, ScalingRange};
use promptcloak_core::metrics::CodeBleuWeights;
use promptcloak_core::sim::{PromptTrigger, SimulatorParams};
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const ENV_PREFIX: &str = "PROMPTCLOAK_";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    // --- gateway / serve ---
    /// Address the gateway listens on.
    pub listen_addr: String,
    /// Upstream assistant base URL; empty selects the built-in replay stub.
    pub upstream_url: String,
    /// Auth header name sent to the upstream assistant; empty disables.
    pub upstream_auth_header: String,
    /// Auth header value sent to the upstream assistant.
    pub upstream_auth_value: String,
    /// Trained policy checkpoint path (serve/manipulate).
    pub policy_path: String,
    /// "closed" never forwards the original prompt on failure; "open" does.
    pub fail_mode: String,
    /// Write every upstream prompt to this JSONL file; empty disables.
    pub capture_log: String,
    /// Record-only mode: no manipulation, originals captured (baseline arm).
    pub record_only: bool,

    // --- prompt processing ---
    pub n_segments: usize,
    pub time_limit: u32,
    pub max_prompt_tokens: usize,
    pub max_suggestion_tokens: usize,

    // --- embedding provider ---
    /// Remote encoder base URL; empty selects the hashing fallback.
    pub embed_url: String,
    pub embed_dim: usize,
    /// Pooling mode sent to the remote encoder.
    pub embed_pooling: String,

    // --- summarizer ---
    /// Remote summarizer base URL; empty selects the rule fallback.
    pub summarize_url: String,

    // --- replay assistant ---
    /// Directory of .py files backing the replay stub and the simulator.
    pub corpus_dir: String,
    /// Suffix-match window, tokens.
    pub match_window: usize,

    // --- reward ---
    pub lambda1: f64,
    /// "threshold:multiplier,..." with strictly increasing thresholds.
    pub scaling_ranges: String,
    pub ema_decay: f64,
    pub ema_enabled: bool,
    pub noop_penalty: f64,

    // --- codebleu ---
    pub alpha: f64,
    pub beta: f64,
    pub gamma_weight: f64,
    pub delta: f64,

    // --- training ---
    pub learning_rate: f64,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub n_steps: usize,
    pub batch_size: usize,
    pub clip_range: f64,
    pub entropy_coef: f64,
    pub vf_coef: f64,
    pub n_envs: usize,
    pub epochs: usize,
    pub max_grad_norm: f64,
    pub iterations: usize,

    // --- simulator ---
    pub typing_speed: f64,
    pub typing_jitter: f64,
    pub error_rate: f64,
    pub correction_delay: u32,
    pub pause_probability: f64,
    pub pause_min_secs: f64,
    pub pause_max_secs: f64,
    pub navigation_rate: f64,
    pub session_min_secs: f64,
    pub session_max_secs: f64,
    /// "pause" or "edits:N".
    pub prompt_trigger: String,
    /// Keep only prompts parsing to more than this many functions; 0 = off.
    pub min_functions: usize,

    // --- reconstruction ---
    /// Remote reconstructor base URL; empty selects the mechanical overlay.
    pub reconstruct_url: String,
    pub recon_max_tokens: usize,
    pub recon_instructions: String,

    pub seed: u64,
}

impl Default for Config {
    fn default() -> Self {
        let reward = RewardConfig::default();
        let weights = CodeBleuWeights::default();
        let sim = SimulatorParams::default();
        Config {
            listen_addr: "127.0.0.1:8095".into(),
            upstream_url: String::new(),
            upstream_auth_header: String::new(),
            upstream_auth_value: String::new(),
            policy_path: String::new(),
            fail_mode: "closed".into(),
            capture_log: String::new(),
            record_only: false,
            n_segments: promptcloak_core::env::DEFAULT_N_SEGMENTS,
            time_limit: promptcloak_core::env::DEFAULT_TIME_LIMIT,
            max_prompt_tokens: promptcloak_core::embed::DEFAULT_MAX_TOKENS,
            max_suggestion_tokens: promptcloak_core::assist::DEFAULT_SUGGESTION_TOKENS,
            embed_url: String::new(),
            embed_dim: promptcloak_core::embed::DEFAULT_EMBED_DIM,
            embed_pooling: "last-token".into(),
            summarize_url: String::new(),
            corpus_dir: String::new(),
            match_window: promptcloak_core::assist::DEFAULT_MATCH_WINDOW,
            lambda1: reward.lambda1,
            scaling_ranges: "0.75:1.5,0.9:2.0".into(),
            ema_decay: 0.99,
            ema_enabled: true,
            noop_penalty: 0.0,
            alpha: weights.alpha,
            beta: weights.beta,
            gamma_weight: weights.gamma,
            delta: weights.delta,
            learning_rate: 2.5e-4,
            gamma: 0.99,
            gae_lambda: 0.95,
            n_steps: 128,
            batch_size: 64,
            clip_range: 0.2,
            entropy_coef: 0.01,
            vf_coef: 1.0,
            n_envs: 8,
            epochs: 4,
            max_grad_norm: 0.5,
            iterations: 100,
            typing_speed: sim.typing_speed,
            typing_jitter: sim.typing_jitter,
            error_rate: sim.error_rate,
            correction_delay: sim.correction_delay,
            pause_probability: sim.pause_probability,
            pause_min_secs: sim.pause_secs.0,
            pause_max_secs: sim.pause_secs.1,
            navigation_rate: sim.navigation_rate,
            session_min_secs: sim.session_secs.0,
            session_max_secs: sim.session_secs.1,
            prompt_trigger: "pause".into(),
            min_functions: 0,
            reconstruct_url: String::new(),
            recon_max_tokens: 4000,
            recon_instructions: promptcloak_core::recon::DEFAULT_RECONSTRUCTION_INSTRUCTIONS
                .into(),
            seed: 0,
        }
    }
}

impl Config {
    /// defaults <- file <- environment <- --set pairs.
    pub fn load(
        file: Option<&Path>,
        env_vars: impl Iterator<Item = (String, String)>,
        overrides: &[(String, String)],
    ) -> Result<Config> {
        let mut cfg = Config::default();
        if let Some(path) = file {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config file {}", path.display()))?;
            cfg.apply_file(&text)
                .with_context(|| format!("parsing config file {}", path.display()))?;
        }
        let keys = cfg.keys();
        for (var, value) in env_vars {
            let Some(rest) = var.strip_prefix(ENV_PREFIX) else { continue };
            let key = rest.to_ascii_lowercase();
            if keys.contains(&key) {
                cfg.set(&key, &value)
                    .with_context(|| format!("applying environment variable {var}"))?;
            }
        }
        for (key, value) in overrides {
            cfg.set(key, value)
                .with_context(|| format!("applying override {key}={value}"))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply_file(&mut self, text: &str) -> Result<()> {
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!("line {}: expected `key = value`", lineno + 1);
            };
            self.set(key.trim(), value.trim())
                .with_context(|| format!("line {}", lineno + 1))?;
        }
        Ok(())
    }

    fn as_map(&self) -> serde_json::Map<String, serde_json::Value> {
        match serde_json::to_value(self).expect("config serializes") {
            serde_json::Value::Object(map) => map,
            _ => unreachable!("config is a struct"),
        }
    }

    pub fn keys(&self) -> Vec<String> {
        self.as_map().keys().cloned().collect()
    }

    /// Sets one key from its textual value, coercing to the field's type.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let mut map = self.as_map();
        let Some(slot) = map.get_mut(key) else {
            bail!("unknown config key `{key}`");
        };
        let coerced = match slot {
            serde_json::Value::String(_) => serde_json::Value::String(value.to_string()),
            serde_json::Value::Bool(_) => serde_json::Value::Bool(
                value
                    .parse::<bool>()
                    .with_context(|| format!("`{key}` expects true/false, got `{value}`"))?,
            ),
            serde_json::Value::Number(n) => {
                if n.is_u64() {
                    serde_json::Value::from(value.parse::<u64>().with_context(|| {
                        format!("`{key}` expects an unsigned integer, got `{value}`")
                    })?)
                } else {
                    serde_json::Value::from(value.parse::<f64>().with_context(|| {
                        format!("`{key}` expects a number, got `{value}`")
                    })?)
                }
            }
            _ => bail!("unsupported config field type for `{key}`"),
        };
        *slot = coerced;
        *self = serde_json::from_value(serde_json::Value::Object(map))
            .with_context(|| format!("value `{value}` does not fit `{key}`"))?;
        Ok(())
    }

    /// The flat, commented key = value rendering; parses back to `self`.
    pub fn to_file_string(&self) -> String {
        let mut out = String::from("# promptcloak configuration (key = value)\n");
        for (key, value) in self.as_map() {
            let rendered = match value {
                serde_json::Value::String(s) => s,
                other => other.to_string(),
            };
            out.push_str(&format!("{key} = {rendered}\n"));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        self.reward_config().validate().map_err(anyhow::Error::from)?;
        if self.fail_mode != "open" && self.fail_mode != "closed" {
            bail!("fail_mode must be `open` or `closed`, got `{}`", self.fail_mode);
        }
        self.prompt_trigger()?;
        self.parse_scaling_ranges()?;
        if self.n_segments == 0 {
            bail!("n_segments must be at least 1");
        }
        Ok(())
    }

    fn parse_scaling_ranges(&self) -> Result<Vec<ScalingRange>> {
        let mut out = Vec::new();
        for part in self.scaling_ranges.split(',').filter(|p| !p.trim().is_empty()) {
            let Some((t, m)) = part.split_once(':') else {
                bail!("scaling_ranges entry `{part}` is not `threshold:multiplier`");
            };
            out.push(ScalingRange {
                threshold: t.trim().parse().context("scaling threshold")?,
                multiplier: m.trim().parse().context("scaling multiplier")?,
            });
        }
        Ok(out)
    }

    pub fn reward_config(&self) -> RewardConfig {
        RewardConfig {
            lambda1: self.lambda1,
            lambda2: 1.0 - self.lambda1,
            scaling_ranges: self.parse_scaling_ranges().unwrap_or_default(),
            ema_decay: self.ema_enabled.then_some(self.ema_decay),
            noop_penalty: self.noop_penalty,
        }
    }

    pub fn codebleu_weights(&self) -> CodeBleuWeights {
        CodeBleuWeights {
            alpha: self.alpha,
            beta: self.beta,
            gamma: self.gamma_weight,
            delta: self.delta,
        }
    }

    pub fn prompt_trigger(&self) -> Result<PromptTrigger> {
        if self.prompt_trigger == "pause" {
            return Ok(PromptTrigger::OnPause);
        }
        if let Some(n) = self.prompt_trigger.strip_prefix("edits:") {
            return Ok(PromptTrigger::EveryEdits(
                n.parse().context("prompt_trigger edits count")?,
            ));
        }
        bail!("prompt_trigger must be `pause` or `edits:N`, got `{}`", self.prompt_trigger)
    }

    pub fn simulator_params(&self) -> Result<SimulatorParams> {
        Ok(SimulatorParams {
            typing_speed: self.typing_speed,
            typing_jitter: self.typing_jitter,
            error_rate: self.error_rate,
            correction_delay: self.correction_delay,
            pause_probability: self.pause_probability,
            pause_secs: (self.pause_min_secs, self.pause_max_secs),
            navigation_rate: self.navigation_rate,
            session_secs: (self.session_min_secs, self.session_max_secs),
            prompt_trigger: self.prompt_trigger()?,
        })
    }

    pub fn train_config(&self) -> promptcloak_core::agent::TrainConfig {
        promptcloak_core::agent::TrainConfig {
            learning_rate: self.learning_rate,
            gamma: self.gamma,
            gae_lambda: self.gae_lambda,
            n_steps: self.n_steps,
            batch_size: self.batch_size,
            clip_range: self.clip_range,
            entropy_coef: self.entropy_coef,
            vf_coef: self.vf_coef,
            n_envs: self.n_envs,
            time_limit: self.time_limit,
            epochs: self.epochs,
            max_grad_norm: self.max_grad_norm,
            iterations: self.iterations,
            seed: self.seed,
        }
    }

    pub fn env_config(&self) -> promptcloak_core::env::EnvConfig {
        promptcloak_core::env::EnvConfig {
            n_segments: self.n_segments,
            time_limit: self.time_limit,
            max_suggestion_tokens: self.max_suggestion_tokens,
            reward: self.reward_config(),
            codebleu: self.codebleu_weights(),
        }
    }

    pub fn gateway_config(&self) -> promptcloak_core::gateway::GatewayConfig {
        promptcloak_core::gateway::GatewayConfig {
            n_segments: self.n_segments,
            time_limit: self.time_limit,
            max_suggestion_tokens: self.max_suggestion_tokens,
            fail_mode: if self.fail_mode == "open" {
                promptcloak_core::gateway::FailMode::Open
            } else {
                promptcloak_core::gateway::FailMode::Closed
            },
            seed: self.seed,
        }
    }

    pub fn recon_config(&self) -> promptcloak_core::recon::ReconstructionConfig {
        promptcloak_core::recon::ReconstructionConfig {
            max_tokens: self.recon_max_tokens,
            instructions: self.recon_instructions.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_the_file_format() {
        let cfg = Config::default();
        let text = cfg.to_file_string();
        let mut parsed = Config::default();
        parsed.apply_file(&text).unwrap();
        assert_eq!(parsed, cfg);
    }

    #[test]
    fn modified_config_round_trips() {
        let mut cfg = Config::default();
        cfg.set("lambda1", "0.3").unwrap();
        cfg.set("n_envs", "4").unwrap();
        cfg.set("fail_mode", "open").unwrap();
        cfg.set("scaling_ranges", "0.5:1.25,0.8:1.75").unwrap();
        let text = cfg.to_file_string();
        let mut parsed = Config::default();
        parsed.apply_file(&text).unwrap();
        assert_eq!(parsed, cfg);
        assert_eq!(parsed.reward_config().lambda2, 0.7);
    }

    #[test]
    fn layering_order_is_defaults_file_env_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.conf");
        std::fs::write(&path, "seed = 10\nn_envs = 2\n").unwrap();
        let env = vec![
            ("PROMPTCLOAK_SEED".to_string(), "20".to_string()),
            ("UNRELATED".to_string(), "x".to_string()),
        ];
        let overrides = vec![("n_envs".to_string(), "6".to_string())];
        let cfg = Config::load(Some(&path), env.into_iter(), &overrides).unwrap();
        assert_eq!(cfg.seed, 20, "env beats file");
        assert_eq!(cfg.n_envs, 6, "flags beat env/file");
    }

    #[test]
    fn unknown_keys_and_bad_values_error() {
        let mut cfg = Config::default();
        assert!(cfg.set("nonsense", "1").is_err());
        assert!(cfg.set("n_envs", "many").is_err());
        assert!(cfg.set("record_only", "yep").is_err());
    }

    #[test]
    fn validation_catches_bad_enums() {
        let mut cfg = Config::default();
        cfg.fail_mode = "maybe".into();
        assert!(cfg.validate().is_err());
        let mut cfg2 = Config::default();
        cfg2.prompt_trigger = "sometimes".into();
        assert!(cfg2.validate().is_err());
        let mut cfg3 = Config::default();
        cfg3.scaling_ranges = "0.9:2.0,0.75:1.5".into();
        assert!(cfg3.validate().is_err(), "thresholds must increase");
    }
}
