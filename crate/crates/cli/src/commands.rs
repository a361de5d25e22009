//! Subcommand implementations.

use crate::config::Config;
use crate::dataset::{build_dataset, collect_py_files, read_records, write_records, RepoFiles};
use crate::pipeline;
use crate::providers;
use anyhow::{bail, Context, Result};
use promptcloak_core::agent::{load_policy, save_policy, PolicyParams};
use promptcloak_core::env::CloakEnv;
use promptcloak_core::gateway::{Gateway, GatewayPolicy, RandomBaselinePolicy, Session};
use promptcloak_core::manip::offset_to_cursor;
use promptcloak_core::metrics::{codebleu_breakdown, normalized_edit_distance};
use promptcloak_core::recon::{prepare_segments, reconstruct};
use promptcloak_core::PromptRecord;
use serde_json::json;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

fn out_writer(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(std::io::BufWriter::new(
            std::fs::File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(std::io::stdout().lock()),
    })
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

pub fn simulate(
    cfg: &Config,
    repos: &[PathBuf],
    sessions: usize,
    out: &Path,
    filter_functions: bool,
) -> Result<()> {
    if repos.is_empty() {
        bail!("at least one --repo is required");
    }
    let mut repo_files = Vec::new();
    for repo in repos {
        let files = collect_py_files(repo)
            .with_context(|| format!("walking repository {}", repo.display()))?;
        if files.is_empty() {
            bail!("repository {} contains no .py files", repo.display());
        }
        repo_files.push(RepoFiles { name: repo.to_string_lossy().to_string(), files });
    }
    let params = cfg.simulator_params()?;
    let min_functions = if filter_functions { 4 } else { cfg.min_functions };
    let (records, stats) =
        build_dataset(&repo_files, sessions, &params, cfg.seed, min_functions);
    write_records(out, &records)?;
    eprintln!(
        "{}",
        json!({
            "event": "dataset-written",
            "path": out.display().to_string(),
            "repos": repo_files.len(),
            "sessions": stats.sessions,
            "prompts_emitted": stats.emitted,
            "prompts_kept": stats.kept,
        })
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

pub fn train(cfg: &Config, dataset: &Path, out: &Path, metrics_out: Option<&Path>) -> Result<()> {
    let records = read_records(dataset)?;
    if records.is_empty() {
        bail!("dataset {} is empty", dataset.display());
    }
    let assistant = providers::make_assistant(cfg)?;
    let embedder = providers::make_embedder(cfg)?;
    let summarizer = providers::make_summarizer(cfg);
    let env_config = cfg.env_config();
    let train_config = cfg.train_config();

    let mut envs = Vec::with_capacity(train_config.n_envs);
    for e in 0..train_config.n_envs {
        // round-robin dataset shards, one per environment
        let shard: Vec<PromptRecord> =
            records.iter().skip(e).step_by(train_config.n_envs).cloned().collect();
        let shard = if shard.is_empty() { records.clone() } else { shard };
        envs.push(CloakEnv::with_summarizer(
            assistant.clone(),
            embedder.clone(),
            summarizer.clone(),
            shard,
            env_config.clone(),
            cfg.seed ^ (e as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15),
        )?);
    }

    let mut metrics_sink = metrics_out.map(out_writer_some).transpose()?;
    let output = promptcloak_core::agent::train_with(envs, &train_config, |m| {
        let line = serde_json::to_string(m).expect("metrics serialize");
        if let Some(sink) = metrics_sink.as_mut() {
            let _ = writeln!(sink, "{line}");
        }
        eprintln!("{line}");
        true
    })?;

    std::fs::write(out, save_policy(&output.policy))
        .with_context(|| format!("writing checkpoint {}", out.display()))?;
    eprintln!(
        "{}",
        json!({
            "event": "checkpoint-written",
            "path": out.display().to_string(),
            "iterations": output.metrics.len(),
            "parameters": output.policy.n_params(),
        })
    );
    Ok(())
}

fn out_writer_some(path: &Path) -> Result<Box<dyn Write>> {
    out_writer(Some(path))
}

// ---------------------------------------------------------------------------
// manipulate
// ---------------------------------------------------------------------------

pub struct ManipulateArgs<'a> {
    pub prompt_file: &'a Path,
    pub policy_path: Option<&'a Path>,
    pub random: bool,
    pub cursor_line: Option<usize>,
    pub cursor_col: Option<usize>,
}

pub fn manipulate(cfg: &Config, args: &ManipulateArgs) -> Result<()> {
    let text = std::fs::read_to_string(args.prompt_file)
        .with_context(|| format!("reading prompt {}", args.prompt_file.display()))?;
    let cursor = match (args.cursor_line, args.cursor_col) {
        (Some(line), col) => promptcloak_core::manip::CursorPos { line, col: col.unwrap_or(0) },
        _ => offset_to_cursor(&text, text.len()),
    };

    let embedder = providers::make_embedder(cfg)?;
    let policy: Arc<dyn GatewayPolicy + Send + Sync> = match (args.policy_path, args.random) {
        (Some(path), _) => {
            let policy = load_policy_file(path)?;
            promptcloak_core::agent::expect_shape(
                &policy,
                embedder.dim() + 3,
                promptcloak_core::Action::COUNT,
            )?;
            Arc::new(policy)
        }
        (None, true) => {
            Arc::new(RandomBaselinePolicy { seed: cfg.seed, time_limit: cfg.time_limit })
        }
        (None, false) => bail!("either --policy or --random is required"),
    };

    // Manipulation only: a stub assistant that is never consulted for the
    // trace itself (the gateway queries once at the end, which we satisfy
    // with the replay stub over the prompt itself).
    let assistant: providers::SharedAssistant = Arc::new(
        promptcloak_core::assist::ReplayAssistant::new(
            vec![("prompt.py".to_string(), text.clone())],
            cfg.match_window,
        )?,
    );
    let gateway = Gateway::new(assistant, embedder, cfg.gateway_config());
    let mut session = Session::new("manipulate");
    let record = PromptRecord {
        session_id: "manipulate".into(),
        file_path: args.prompt_file.to_string_lossy().to_string(),
        text,
        cursor_line: cursor.line,
        cursor_col: cursor.col,
        timestamp: 0,
    };
    let out = gateway.handle_prompt(&*policy, &mut session, &record)?;

    let stdout = std::io::stdout();
    let mut w = stdout.lock();
    for step in &out.trace {
        writeln!(
            w,
            "{}",
            json!({ "t": step.t, "segment": step.segment, "action": step.action.name() })
        )?;
    }
    writeln!(w, "---")?;
    w.write_all(out.upstream_prompt.as_bytes())?;
    Ok(())
}

pub fn load_policy_file(path: &Path) -> Result<PolicyParams> {
    let bytes = std::fs::read(path)
        .with_context(|| format!("reading policy checkpoint {}", path.display()))?;
    Ok(load_policy(&bytes)?)
}

// ---------------------------------------------------------------------------
// serve
// ---------------------------------------------------------------------------

pub fn serve(cfg: &Config, listen: Option<&str>) -> Result<()> {
    let assistant = providers::make_assistant(cfg)?;
    let embedder = providers::make_embedder(cfg)?;
    let policy: crate::server::SharedPolicy = if cfg.record_only {
        Arc::new(promptcloak_core::gateway::ScriptedPolicy(vec![]))
    } else if cfg.policy_path.is_empty() {
        bail!("policy_path is required to serve (or set record_only = true)");
    } else {
        let policy = load_policy_file(Path::new(&cfg.policy_path))?;
        promptcloak_core::agent::expect_shape(
            &policy,
            embedder.dim() + 3,
            promptcloak_core::Action::COUNT,
        )?;
        Arc::new(policy)
    };
    let capture: Option<Box<dyn Write + Send>> = if cfg.capture_log.is_empty() {
        None
    } else {
        Some(Box::new(std::io::BufWriter::new(
            std::fs::OpenOptions::new()
                .create(true)
                .append(true)
                .open(&cfg.capture_log)
                .with_context(|| format!("opening capture log {}", cfg.capture_log))?,
        )))
    };
    let state = Arc::new(crate::server::ServerState::new(
        assistant,
        embedder,
        policy,
        cfg.gateway_config(),
        capture,
        cfg.record_only,
    ));
    let addr = listen.unwrap_or(&cfg.listen_addr).to_string();
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()?
        .block_on(crate::server::serve(state, &addr))
}

// ---------------------------------------------------------------------------
// metrics
// ---------------------------------------------------------------------------

pub fn metrics(cfg: &Config, reference: &Path, hypothesis: &Path, out: Option<&Path>) -> Result<()> {
    let pairs: Vec<(String, String, String, String)> = if reference.is_dir() {
        if !hypothesis.is_dir() {
            bail!("--reference is a directory but --hypothesis is not");
        }
        let refs = collect_py_files(reference)?;
        let hyps: std::collections::BTreeMap<String, String> =
            collect_py_files(hypothesis)?.into_iter().collect();
        refs.into_iter()
            .filter_map(|(rel, text)| {
                hyps.get(&rel).map(|h| {
                    (
                        format!("{}/{rel}", reference.display()),
                        format!("{}/{rel}", hypothesis.display()),
                        text,
                        h.clone(),
                    )
                })
            })
            .collect()
    } else {
        let r = std::fs::read_to_string(reference)
            .with_context(|| format!("reading {}", reference.display()))?;
        let h = std::fs::read_to_string(hypothesis)
            .with_context(|| format!("reading {}", hypothesis.display()))?;
        vec![(
            reference.display().to_string(),
            hypothesis.display().to_string(),
            r,
            h,
        )]
    };
    if pairs.is_empty() {
        bail!("no (reference, hypothesis) pairs matched");
    }

    let weights = cfg.codebleu_weights();
    let mut w = out_writer(out)?;
    for (ref_id, hyp_id, ref_text, hyp_text) in pairs {
        let b = codebleu_breakdown(&ref_text, &hyp_text, &weights);
        let ned = normalized_edit_distance(&ref_text, &hyp_text);
        writeln!(
            w,
            "{}",
            json!({
                "ref_id": ref_id,
                "hyp_id": hyp_id,
                "bleu": b.bleu,
                "wbleu": b.weighted,
                "ast": b.ast,
                "dataflow": b.dataflow,
                "codebleu": b.codebleu,
                "ned": ned,
            })
        )?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// reconstruct
// ---------------------------------------------------------------------------

pub fn reconstruct_cmd(cfg: &Config, log: &Path, out_dir: &Path) -> Result<()> {
    let records = read_records(log)?;
    if records.is_empty() {
        bail!("capture log {} is empty", log.display());
    }
    let segment_log = prepare_segments(&records);
    let reconstructor = providers::make_reconstructor(cfg);
    let rebuilt = reconstruct(&segment_log, &reconstructor, &cfg.recon_config())?;
    std::fs::create_dir_all(out_dir)?;
    let mut w = std::io::stdout().lock();
    for (path, content) in &rebuilt {
        let safe: String = path
            .chars()
            .map(|c| if c == '/' || c == '\\' { '_' } else { c })
            .collect();
        let dest = out_dir.join(safe);
        std::fs::write(&dest, content)?;
        writeln!(
            w,
            "{}",
            json!({
                "file": path,
                "written": dest.display().to_string(),
                "bytes": content.len(),
                "segments": segment_log.files[path].len(),
            })
        )?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

pub struct EvaluateArgs<'a> {
    pub with_mitigation: bool,
    pub without_mitigation: bool,
    pub policy_path: Option<&'a Path>,
    pub sessions: usize,
    pub out: Option<&'a Path>,
}

pub fn evaluate(cfg: &Config, args: &EvaluateArgs) -> Result<()> {
    if !args.with_mitigation && !args.without_mitigation {
        bail!("pass --with-mitigation and/or --without-mitigation");
    }
    let files = providers::load_corpus(cfg)?;
    let originals = pipeline::originals_map(&files);
    let params = cfg.simulator_params()?;
    let reconstructor = providers::make_reconstructor(cfg);
    let recon_config = cfg.recon_config();
    let weights = cfg.codebleu_weights();

    let mut reports = Vec::new();
    if args.without_mitigation {
        let records = pipeline::capture_unmitigated(&files, args.sessions, &params, cfg.seed);
        reports.push(pipeline::leakage_from_records(
            "without-mitigation",
            &records,
            &reconstructor,
            &recon_config,
            &originals,
            &weights,
        )?);
    }
    if args.with_mitigation {
        let assistant = providers::make_assistant(cfg)?;
        let embedder = providers::make_embedder(cfg)?;
        let gateway = Gateway::new(assistant, embedder, cfg.gateway_config());
        let policy: Arc<dyn GatewayPolicy + Send + Sync> = match args.policy_path {
            Some(p) => Arc::new(load_policy_file(p)?),
            None => {
                Arc::new(RandomBaselinePolicy { seed: cfg.seed, time_limit: cfg.time_limit })
            }
        };
        let records = pipeline::capture_mitigated(
            &gateway,
            &*policy,
            &files,
            args.sessions,
            &params,
            cfg.seed,
        )?;
        reports.push(pipeline::leakage_from_records(
            "with-mitigation",
            &records,
            &reconstructor,
            &recon_config,
            &originals,
            &weights,
        )?);
    }

    let mut w = out_writer(args.out)?;
    for report in &reports {
        for row in &report.files {
            writeln!(
                w,
                "{}",
                json!({
                    "arm": report.label,
                    "file": row.path,
                    "ned": row.ned,
                    "codebleu": row.codebleu,
                })
            )?;
        }
        writeln!(
            w,
            "{}",
            json!({
                "arm": report.label,
                "mean_ned": report.mean_ned,
                "mean_codebleu": report.mean_codebleu,
                "files": report.files.len(),
            })
        )?;
    }
    // plain-text summary table on stderr
    eprintln!("{:<24} {:>10} {:>14}", "arm", "mean NED", "mean CodeBLEU");
    for report in &reports {
        eprintln!(
            "{:<24} {:>10.4} {:>14.4}",
            report.label, report.mean_ned, report.mean_codebleu
        );
    }
    Ok(())
}
