//! Assembles the pluggable providers (assistant, embedder, summarizer,
//! reconstructor) from configuration: remote bindings when a URL is set,
//! built-in fallbacks otherwise.

use crate::config::Config;
use crate::dataset::collect_py_files;
use crate::remote::{RemoteAssistant, RemoteEmbedder, RemoteReconstructor, RemoteSummarizer};
use anyhow::{bail, Context, Result};
use promptcloak_core::assist::{AssistantClient, ReplayAssistant};
use promptcloak_core::embed::{EmbeddingProvider, HashEmbedder};
use promptcloak_core::manip::{RuleSummarizer, Summarizer};
use promptcloak_core::recon::{OverlayReconstructor, Reconstructor};
use std::path::Path;
use std::sync::Arc;

pub type SharedAssistant = Arc<dyn AssistantClient + Send + Sync>;
pub type SharedEmbedder = Arc<dyn EmbeddingProvider + Send + Sync>;

pub fn load_corpus(cfg: &Config) -> Result<Vec<(String, String)>> {
    if cfg.corpus_dir.is_empty() {
        bail!("corpus_dir is required when no upstream_url is configured");
    }
    let files = collect_py_files(Path::new(&cfg.corpus_dir))
        .with_context(|| format!("walking corpus_dir {}", cfg.corpus_dir))?;
    if files.is_empty() {
        bail!("corpus_dir {} contains no .py files", cfg.corpus_dir);
    }
    Ok(files)
}

pub fn make_assistant(cfg: &Config) -> Result<SharedAssistant> {
    if cfg.upstream_url.is_empty() {
        let corpus = load_corpus(cfg)?;
        Ok(Arc::new(ReplayAssistant::new(corpus, cfg.match_window)?))
    } else {
        let auth = (!cfg.upstream_auth_header.is_empty())
            .then(|| (cfg.upstream_auth_header.clone(), cfg.upstream_auth_value.clone()));
        Ok(Arc::new(RemoteAssistant::new(&cfg.upstream_url, auth)))
    }
}

pub fn make_embedder(cfg: &Config) -> Result<SharedEmbedder> {
    if cfg.embed_url.is_empty() {
        Ok(Arc::new(HashEmbedder::new(cfg.embed_dim, cfg.max_prompt_tokens)))
    } else {
        let remote = RemoteEmbedder::new(&cfg.embed_url, &cfg.embed_pooling, cfg.max_prompt_tokens);
        remote.handshake().context("embedding provider handshake")?;
        Ok(Arc::new(remote))
    }
}

pub fn make_summarizer(cfg: &Config) -> Arc<dyn Summarizer + Send + Sync> {
    if cfg.summarize_url.is_empty() {
        Arc::new(RuleSummarizer)
    } else {
        Arc::new(RemoteSummarizer::new(&cfg.summarize_url))
    }
}

pub fn make_reconstructor(cfg: &Config) -> Box<dyn Reconstructor> {
    if cfg.reconstruct_url.is_empty() {
        Box::new(OverlayReconstructor)
    } else {
        Box::new(RemoteReconstructor::new(&cfg.reconstruct_url))
    }
}
