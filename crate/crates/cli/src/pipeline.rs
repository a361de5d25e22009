//! End-to-end leakage pipeline: simulate coding sessions, capture the prompt
//! stream with or without the gateway in the path, reconstruct the codebase
//! from the captures, and score the leak.

use anyhow::{Context, Result};
use promptcloak_core::gateway::{Gateway, GatewayPolicy, Session};
use promptcloak_core::metrics::CodeBleuWeights;
use promptcloak_core::recon::{
    evaluate_leakage, prepare_segments, reconstruct, LeakageReport, ReconstructionConfig,
    Reconstructor,
};
use promptcloak_core::sim::{derive_session_seed, simulate_session, SimulatorParams};
use promptcloak_core::{Action, PromptRecord};
use std::collections::BTreeMap;

use crate::providers::{SharedAssistant, SharedEmbedder};

/// The observer's view without mitigation: the raw prompt stream.
pub fn capture_unmitigated(
    files: &[(String, String)],
    sessions_per_file: usize,
    params: &SimulatorParams,
    master_seed: u64,
) -> Vec<PromptRecord> {
    let mut records = Vec::new();
    for (path, text) in files {
        for session in 0..sessions_per_file {
            let seed = derive_session_seed(master_seed, path, session);
            records.extend(simulate_session(text, path, 0, params, seed));
        }
    }
    records
}

/// The observer's view with the gateway in the path: every record carries the
/// upstream (manipulated) prompt; one gateway session per simulated session.
pub fn capture_mitigated<P: GatewayPolicy + ?Sized>(
    gateway: &Gateway<SharedAssistant, SharedEmbedder>,
    policy: &P,
    files: &[(String, String)],
    sessions_per_file: usize,
    params: &SimulatorParams,
    master_seed: u64,
) -> Result<Vec<PromptRecord>> {
    let mut records = Vec::new();
    for (path, text) in files {
        for session_index in 0..sessions_per_file {
            let seed = derive_session_seed(master_seed, path, session_index);
            let mut session = Session::new(format!("{path}#{session_index}"));
            for record in simulate_session(text, path, 0, params, seed) {
                let out = gateway
                    .handle_prompt(policy, &mut session, &record)
                    .with_context(|| format!("gateway failed on {path}"))?;
                records.push(PromptRecord { text: out.upstream_prompt, ..record });
            }
        }
    }
    Ok(records)
}

/// Captured stream -> per-file segments -> reconstruction -> leakage scores.
pub fn leakage_from_records(
    label: &str,
    records: &[PromptRecord],
    reconstructor: &dyn Reconstructor,
    recon_config: &ReconstructionConfig,
    originals: &BTreeMap<String, String>,
    weights: &CodeBleuWeights,
) -> Result<LeakageReport> {
    let log = prepare_segments(records);
    let rebuilt = reconstruct(&log, reconstructor, recon_config)?;
    Ok(evaluate_leakage(label, originals, &rebuilt, weights))
}

/// An aggressive fixed manipulation plan used when no trained policy is
/// supplied: delete every body, rename everything, redact, stop.
pub fn aggressive_script() -> Vec<Action> {
    vec![
        Action::DeleteFnBodiesAll,
        Action::RenameFunctions,
        Action::RenameVariables,
        Action::RenameArguments,
        Action::ReplacePii,
        Action::DeleteFnBodiesAll,
        Action::StopManipulations,
    ]
}

pub fn originals_map(files: &[(String, String)]) -> BTreeMap<String, String> {
    files.iter().cloned().collect()
}
