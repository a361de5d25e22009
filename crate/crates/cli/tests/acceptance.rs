//! Acceptance suite. Each test implements one release criterion at its
//! stated tolerance and prints a single pass/fail line.
//!
//! Heavy criteria (policy training, the service soak) stay within their
//! declared runtime budgets; everything is seeded and reproducible.

use promptcloak::pipeline;
use promptcloak::providers::{SharedAssistant, SharedEmbedder};
use promptcloak_core::agent::{
    compute_returns_and_gae, greedy_action, init_params, loss_and_gradient, train_with, Layout,
    LossTerms, NetConfig, PolicyParams, Sequence, TrainConfig,
};
use promptcloak_core::assist::ReplayAssistant;
use promptcloak_core::embed::HashEmbedder;
use promptcloak_core::env::{CloakEnv, EnvConfig, Environment, RewardConfig, ToyEnv};
use promptcloak_core::gateway::{Gateway, GatewayConfig};
use promptcloak_core::manip::{
    apply_action, propagate_renames, random_action_sequence, translate_suggestion, Action,
    CursorPos, PromptState,
};
use promptcloak_core::metrics::{
    codebleu, codebleu_breakdown, normalized_edit_distance, CodeBleuWeights,
};
use promptcloak_core::recon::ReconstructionConfig;
use promptcloak_core::sim::{simulate_session, SimulatorParams};
use promptcloak_core::PromptRecord;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

fn report(criterion: &str, pass: bool, detail: &str, started: Instant) {
    let status = if pass { "PASS" } else { "FAIL" };
    println!(
        "acceptance {criterion}: {status} ({detail}; {:.1}s)",
        started.elapsed().as_secs_f64()
    );
    assert!(pass, "{criterion} failed: {detail}");
}

fn desk_corpus() -> Vec<(String, String)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/desk");
    let mut files: Vec<(String, String)> = std::fs::read_dir(&dir)
        .expect("desk corpus present")
        .filter_map(|e| e.ok())
        .filter(|e| e.path().extension().is_some_and(|x| x == "py"))
        .map(|e| {
            (
                e.file_name().to_string_lossy().to_string(),
                std::fs::read_to_string(e.path()).expect("readable fixture"),
            )
        })
        .collect();
    files.sort();
    assert_eq!(files.len(), 10, "the desk corpus is ten files");
    files
}

fn generated_snippet(i: usize) -> String {
    let mut src = String::new();
    for f in 0..(1 + i % 3) {
        src.push_str(&format!("def helper_{i}_{f}(amount_{f}, rate_{f}):\n"));
        src.push_str(&format!("    scaled_{f} = amount_{f} * rate_{f} + {i}\n"));
        if i % 2 == 0 {
            src.push_str(&format!("    scaled_{f} += {f}\n"));
        }
        src.push_str(&format!("    return scaled_{f}\n\n"));
    }
    src.push_str(&format!("result_{i} = helper_{i}_0({i}, 2)\nprint(result_{i})\n"));
    src
}

fn rename_consistently(src: &str, seed: u64) -> (String, PromptState) {
    let state = PromptState::from_text(src, CursorPos::default(), 1).unwrap();
    let mut renamed = state;
    for (k, action) in [Action::RenameFunctions, Action::RenameVariables, Action::RenameArguments]
        .into_iter()
        .enumerate()
    {
        let out = apply_action(&renamed, 0, action, seed.wrapping_add(k as u64)).unwrap();
        renamed = propagate_renames(&out.state);
    }
    (renamed.current_text(), renamed)
}

// ---------------------------------------------------------------------------
// 1. Metric oracle suite
// ---------------------------------------------------------------------------

#[test]
fn criterion_1_metric_oracles() {
    let started = Instant::now();
    let weights = CodeBleuWeights::default();

    // NED("kitten", "sitting") = 3/7 exactly
    let ned = normalized_edit_distance("kitten", "sitting");
    assert_eq!(ned, 3.0 / 7.0);
    assert_eq!(normalized_edit_distance("abc", "abc"), 0.0);
    assert_eq!(normalized_edit_distance("", "abc"), 1.0);

    // codebleu(x, x) = 1 on 100 parsed snippets
    for i in 0..100 {
        let src = generated_snippet(i);
        let s = codebleu(&src, &src, &weights);
        assert!((s - 1.0).abs() < 1e-9, "snippet {i}: self-similarity {s}");
    }

    // AST and dataflow components invariant under consistent renaming on 50
    // generated pairs; the n-gram components must move.
    for i in 0..50 {
        let src = generated_snippet(i);
        let (renamed, _) = rename_consistently(&src, 1000 + i as u64);
        assert_ne!(renamed, src, "pair {i} must actually rename");
        let b = codebleu_breakdown(&src, &renamed, &weights);
        assert!((b.ast - 1.0).abs() < 1e-9, "pair {i}: ast {}", b.ast);
        assert_eq!(b.dataflow, Some(1.0), "pair {i}: dataflow {:?}", b.dataflow);
        assert!(b.bleu < 1.0 - 1e-9, "pair {i}: bleu unaffected by rename");
    }

    let within_budget = started.elapsed().as_secs() < 60;
    report(
        "criterion-1 metric-oracles",
        within_budget,
        "ned exact, 100 self-similarities, 50 rename-invariance pairs",
        started,
    );
}

// ---------------------------------------------------------------------------
// 2. Rename round-trip
// ---------------------------------------------------------------------------

#[test]
fn criterion_2_rename_round_trip() {
    let started = Instant::now();
    let corpus = desk_corpus();
    let mut checked = 0usize;
    for case in 0..200u64 {
        // Alternate generated snippets and desk-corpus files.
        let src = if case % 2 == 0 {
            generated_snippet(case as usize / 2)
        } else {
            corpus[(case as usize / 2) % corpus.len()].1.clone()
        };
        let n_segments = 1 + (case % 2) as usize;
        let mut state = PromptState::from_text(&src, CursorPos::default(), n_segments).unwrap();
        let actions =
            [Action::RenameFunctions, Action::RenameVariables, Action::RenameArguments];
        let count = 1 + (case % 3) as usize;
        for k in 0..count {
            let segment = k % state.n_segments();
            let out =
                apply_action(&state, segment, actions[k % 3], case.wrapping_mul(31) + k as u64)
                    .unwrap();
            state = propagate_renames(&out.state);
        }
        let restored = translate_suggestion(&state.current_text(), &state.translation);
        assert_eq!(restored, src, "case {case}: round trip must restore every identifier");
        checked += 1;
    }
    let within_budget = started.elapsed().as_secs() < 60;
    report(
        "criterion-2 rename-round-trip",
        within_budget && checked == 200,
        "200 (prompt, rename-sequence) pairs restored exactly",
        started,
    );
}

// ---------------------------------------------------------------------------
// 3. Reward algebra (telescoping)
// ---------------------------------------------------------------------------

#[test]
fn criterion_3_reward_telescoping() {
    let started = Instant::now();
    let corpus = desk_corpus();
    let assistant = ReplayAssistant::with_default_window(corpus.clone()).unwrap();
    let embedder = HashEmbedder::new(64, 1600);
    let prompts: Vec<PromptRecord> = corpus
        .iter()
        .map(|(path, text)| PromptRecord {
            session_id: "accept".into(),
            file_path: path.clone(),
            text: text.clone(),
            cursor_line: promptcloak_core::code::line_count(text).saturating_sub(3),
            cursor_col: 0,
            timestamp: 0,
        })
        .collect();
    let config = EnvConfig { reward: RewardConfig::plain(0.5), ..EnvConfig::default() };
    let mut env = CloakEnv::new(assistant, embedder, prompts, config, 99).unwrap();

    let mut worst = 0.0f64;
    for episode in 0..100u64 {
        env.reset().unwrap();
        let mut total = 0.0;
        let mut final_rscore = f64::NAN;
        for action in random_action_sequence(episode * 7 + 3, 12) {
            let out = env.step(action.index()).unwrap();
            total += out.reward;
            if out.done {
                final_rscore = out.info.episode.unwrap().final_rscore;
                break;
            }
        }
        worst = worst.max((total - final_rscore).abs());
    }
    report(
        "criterion-3 reward-telescoping",
        worst < 1e-9,
        &format!("100 episodes, max |sum - final RScore| = {worst:.2e}"),
        started,
    );
}

// ---------------------------------------------------------------------------
// 4. PPO correctness
// ---------------------------------------------------------------------------

#[test]
fn criterion_4_ppo_correctness() {
    let started = Instant::now();

    // Analytic gradients vs central finite differences on a toy net.
    let cfg = NetConfig {
        obs_dim: 3,
        n_actions: 4,
        recurrent_dim: 3,
        pi_dims: vec![4],
        vf_dims: vec![3],
    };
    let layout = Layout::new(&cfg);
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4242);
    let params = init_params(&layout, &mut rng);
    let mut batch = Vec::new();
    for _ in 0..2 {
        let mut seq = Sequence {
            initial_recurrent_state: (0..3).map(|_| rng.gen_range(-0.5..0.5)).collect(),
            ..Default::default()
        };
        for _ in 0..4 {
            seq.observations.push((0..3).map(|_| rng.gen_range(-1.0..1.0)).collect());
            seq.actions.push(rng.gen_range(0..4));
            seq.old_log_probs.push(rng.gen_range(-2.0..-0.5));
            seq.advantages.push(rng.gen_range(-1.0..1.0));
            seq.returns.push(rng.gen_range(-1.0..1.0));
        }
        batch.push(seq);
    }
    let refs: Vec<&Sequence> = batch.iter().collect();
    let mut worst_rel = 0.0f64;
    for terms in [
        LossTerms { policy: 1.0, value: 0.0, entropy: 0.0 },
        LossTerms { policy: 0.0, value: 1.0, entropy: 0.0 },
        LossTerms { policy: 0.0, value: 0.0, entropy: 1.0 },
        LossTerms { policy: 1.0, value: 1.0, entropy: 0.01 },
    ] {
        let mut grads = vec![0.0; layout.total];
        loss_and_gradient(&params, &layout, &refs, 0.2, terms, &mut grads);
        let h = 1e-6;
        for i in 0..layout.total {
            let mut plus = params.clone();
            plus[i] += h;
            let mut minus = params.clone();
            minus[i] -= h;
            let mut scratch = vec![0.0; layout.total];
            let lp = loss_and_gradient(&plus, &layout, &refs, 0.2, terms, &mut scratch).total;
            let mut scratch2 = vec![0.0; layout.total];
            let lm = loss_and_gradient(&minus, &layout, &refs, 0.2, terms, &mut scratch2).total;
            let numeric = (lp - lm) / (2.0 * h);
            let denom = numeric.abs().max(grads[i].abs());
            if denom > 1e-10 {
                worst_rel = worst_rel.max((numeric - grads[i]).abs() / denom);
            }
        }
    }
    assert!(worst_rel < 1e-4, "finite differences disagree: {worst_rel}");

    // GAE vs brute force for lambda in {0, 1} exactly.
    let rewards = [1.0, -0.5, 2.0, 0.25, 1.5];
    let values = [0.3, -0.2, 0.8, 0.1, -0.4];
    let dones = [false, false, true, false, true];
    for lambda in [0.0, 1.0] {
        let (adv, _) = compute_returns_and_gae(&rewards, &values, &dones, 0.9, 0.99, lambda);
        // brute-force recursion
        let mut expected = [0.0f64; 5];
        let mut next_a = 0.0;
        for t in (0..5).rev() {
            let not_done = if dones[t] { 0.0 } else { 1.0 };
            let next_v = if t + 1 < 5 {
                if dones[t] { 0.0 } else { values[t + 1] }
            } else {
                0.9
            };
            let delta = rewards[t] + 0.99 * next_v * not_done - values[t];
            next_a = delta + 0.99 * lambda * not_done * next_a;
            expected[t] = next_a;
        }
        for t in 0..5 {
            assert_eq!(adv[t], expected[t], "lambda {lambda} must match exactly at t={t}");
        }
    }
    // lambda = 0.95 hand-unrolled within 1e-9
    let (adv, _) = compute_returns_and_gae(&rewards, &values, &dones, 0.9, 0.99, 0.95);
    let mut expected = [0.0f64; 5];
    let mut next_a = 0.0;
    for t in (0..5).rev() {
        let not_done = if dones[t] { 0.0 } else { 1.0 };
        let next_v = if t + 1 < 5 {
            if dones[t] { 0.0 } else { values[t + 1] }
        } else {
            0.9
        };
        let delta = rewards[t] + 0.99 * next_v * not_done - values[t];
        next_a = delta + 0.99 * 0.95 * not_done * next_a;
        expected[t] = next_a;
    }
    let worst_gae = (0..5).map(|t| (adv[t] - expected[t]).abs()).fold(0.0, f64::max);
    report(
        "criterion-4 ppo-correctness",
        worst_gae < 1e-9,
        &format!("FD rel err {worst_rel:.2e}; 5-step GAE err {worst_gae:.2e}"),
        started,
    );
}

// ---------------------------------------------------------------------------
// 5. Sanity RL convergence
// ---------------------------------------------------------------------------

#[test]
fn criterion_5_toy_convergence() {
    let started = Instant::now();
    let envs: Vec<ToyEnv> = (0..8).map(|_| ToyEnv::new(15)).collect();
    let config = TrainConfig { iterations: 50, seed: 7, ..TrainConfig::default() };
    let mut best = 0.0f64;
    let out = train_with(envs, &config, |m| {
        best = best.max(m.mean_episode_reward);
        m.mean_episode_reward <= 0.9
    })
    .unwrap();
    let within_budget = started.elapsed().as_secs() < 300;
    report(
        "criterion-5 toy-convergence",
        best > 0.9 && within_budget,
        &format!(
            "mean episode reward {best:.3} after {} iterations (default hyperparameters, 8 envs)",
            out.metrics.len()
        ),
        started,
    );
}

// ---------------------------------------------------------------------------
// 6. Trend reproduction (suggestion preserved, leakage reduced)
// ---------------------------------------------------------------------------

fn prompts_from_sessions(
    corpus: &[(String, String)],
    master_seed: u64,
    sessions_per_file: usize,
) -> Vec<PromptRecord> {
    let params = SimulatorParams {
        error_rate: 0.02,
        navigation_rate: 0.0,
        session_secs: (1e9, 1e9),
        prompt_trigger: promptcloak_core::sim::PromptTrigger::EveryEdits(6),
        ..SimulatorParams::default()
    };
    let mut prompts = Vec::new();
    for (path, text) in corpus {
        for s in 0..sessions_per_file {
            let seed = promptcloak_core::sim::derive_session_seed(master_seed, path, s);
            for record in simulate_session(text, path, 0, &params, seed) {
                // keep prompts with enough substance to manipulate
                let info = promptcloak_core::code::parse_segment(&record.text);
                if info.functions.len() >= 4
                    && promptcloak_core::code::line_count(&record.text) >= 8
                {
                    prompts.push(record);
                }
            }
        }
    }
    prompts
}

struct EvalOutcome {
    suggestion_similarity: f64,
    prompt_similarity: f64,
}

/// Greedy rollout of a trained policy over one prompt, mirroring inference:
/// frozen stats, argmax actions.
fn eval_policy_on(
    policy: &PolicyParams,
    env: &mut CloakEnv<ReplayAssistant, HashEmbedder>,
) -> EvalOutcome {
    let mut obs = env.reset().unwrap();
    let mut h = policy.initial_recurrent_state();
    loop {
        let normalized = policy.normalize_obs(&obs);
        let (logits, _v, next_h) = policy.forward(&normalized, &h);
        h = next_h;
        let action = greedy_action(&logits);
        let out = env.step(action).unwrap();
        obs = out.obs;
        if out.done {
            let summary = out.info.episode.unwrap();
            return EvalOutcome {
                suggestion_similarity: summary.suggestion_similarity,
                prompt_similarity: summary.prompt_similarity,
            };
        }
    }
}

fn eval_random_on(seed: u64, env: &mut CloakEnv<ReplayAssistant, HashEmbedder>) -> EvalOutcome {
    env.reset().unwrap();
    for action in random_action_sequence(seed, 15) {
        let out = env.step(action.index()).unwrap();
        if out.done {
            let summary = out.info.episode.unwrap();
            return EvalOutcome {
                suggestion_similarity: summary.suggestion_similarity,
                prompt_similarity: summary.prompt_similarity,
            };
        }
    }
    unreachable!("random sequences always end with stop");
}

#[test]
fn criterion_6_trend_reproduction() {
    let started = Instant::now();
    let corpus = desk_corpus();
    let embedder = HashEmbedder::new(128, 1600);

    let train_prompts = prompts_from_sessions(&corpus, 11, 4);
    let heldout = prompts_from_sessions(&corpus, 9999, 3);
    assert!(heldout.len() >= 100, "need >=100 held-out prompts, got {}", heldout.len());

    let make_env = |prompts: Vec<PromptRecord>, seed: u64| {
        CloakEnv::new(
            ReplayAssistant::with_default_window(corpus.clone()).unwrap(),
            embedder.clone(),
            prompts,
            EnvConfig::default(),
            seed,
        )
        .unwrap()
    };

    // one env per shard, training defaults
    let n_envs = 8;
    let mut envs = Vec::new();
    for e in 0..n_envs {
        let shard: Vec<PromptRecord> =
            train_prompts.iter().skip(e).step_by(n_envs).cloned().collect();
        envs.push(make_env(shard, 1000 + e as u64));
    }

    let config = TrainConfig { iterations: 150, seed: 5, ..TrainConfig::default() };
    let heldout_eval = |policy: &PolicyParams, prompts: &[PromptRecord]| {
        let mut sug = 0.0;
        let mut prm = 0.0;
        for (i, p) in prompts.iter().enumerate() {
            let mut env = make_env(vec![p.clone()], 7_000 + i as u64);
            let out = eval_policy_on(policy, &mut env);
            sug += out.suggestion_similarity;
            prm += out.prompt_similarity;
        }
        (sug / prompts.len() as f64, prm / prompts.len() as f64)
    };

    // Early stop once the stochastic training metrics hold clear of the
    // held-out thresholds for two consecutive iterations.
    let mut iterations_used = 0usize;
    let mut consecutive_good = 0u32;
    let out = train_with(envs, &config, |m| {
        iterations_used = m.iteration + 1;
        eprintln!(
            "iter {:>3}: reward {:>7.3} sug {:.3} prompt {:.3} entropy {:.3} episodes {}",
            m.iteration,
            m.mean_episode_reward,
            m.mean_suggestion_similarity,
            m.mean_prompt_similarity,
            m.entropy,
            m.episodes
        );
        let good = m.mean_suggestion_similarity >= 0.62 && m.mean_prompt_similarity <= 0.30;
        consecutive_good = if good { consecutive_good + 1 } else { 0 };
        m.iteration < 60 || consecutive_good < 2
    })
    .unwrap();
    let policy = out.policy;

    let (trained_sug, trained_prompt) = heldout_eval(&policy, &heldout);
    let mut baseline_sug = 0.0;
    for (i, p) in heldout.iter().enumerate() {
        let mut env = make_env(vec![p.clone()], 3_000 + i as u64);
        baseline_sug += eval_random_on(40_000 + i as u64, &mut env).suggestion_similarity;
    }
    baseline_sug /= heldout.len() as f64;

    let gap_ok = trained_sug >= baseline_sug + 0.10;
    let leak_ok = trained_prompt <= 0.6;
    let within_budget = started.elapsed().as_secs() < 7200;
    report(
        "criterion-6 trend-reproduction",
        gap_ok && leak_ok && within_budget,
        &format!(
            "{} held-out prompts; trained suggestion sim {trained_sug:.3} vs random {baseline_sug:.3} \
             (gap {:+.3}, need +0.10); prompt self-similarity {trained_prompt:.3} (need <= 0.6); \
             {iterations_used} training iterations",
            heldout.len(),
            trained_sug - baseline_sug,
        ),
        started,
    );
}

// ---------------------------------------------------------------------------
// 7. End-to-end leakage
// ---------------------------------------------------------------------------

#[test]
fn criterion_7_end_to_end_leakage() {
    let started = Instant::now();
    let corpus = desk_corpus();
    let originals = pipeline::originals_map(&corpus);
    let weights = CodeBleuWeights::default();
    let recon_config = ReconstructionConfig::default();
    let overlay = promptcloak_core::recon::OverlayReconstructor;

    // Unmitigated arm: clean prefix-growth sessions typing the whole file
    // reconstruct exactly (NED = 0); substantial leakage.
    let clean = SimulatorParams::clean_full_file();
    let unmitigated = pipeline::capture_unmitigated(&corpus, 1, &clean, 42);
    let report_unmitigated = pipeline::leakage_from_records(
        "without-mitigation",
        &unmitigated,
        &overlay,
        &recon_config,
        &originals,
        &weights,
    )
    .unwrap();
    let ned_zero = report_unmitigated.mean_ned.abs() < 1e-12;

    // Mitigated arm: the gateway with an aggressive scripted policy.
    let assistant: SharedAssistant =
        Arc::new(ReplayAssistant::with_default_window(corpus.clone()).unwrap());
    let shared_embedder: SharedEmbedder = Arc::new(HashEmbedder::new(64, 1600));
    let gateway = Gateway::new(assistant, shared_embedder, GatewayConfig::default());
    let policy = promptcloak_core::gateway::ScriptedPolicy(pipeline::aggressive_script());
    let mitigated =
        pipeline::capture_mitigated(&gateway, &policy, &corpus, 1, &clean, 42).unwrap();
    let report_mitigated = pipeline::leakage_from_records(
        "with-mitigation",
        &mitigated,
        &overlay,
        &recon_config,
        &originals,
        &weights,
    )
    .unwrap();

    let gap = report_unmitigated.mean_codebleu - report_mitigated.mean_codebleu;
    let within_budget = started.elapsed().as_secs() < 1200;
    report(
        "criterion-7 end-to-end-leakage",
        ned_zero && gap >= 0.15 && within_budget,
        &format!(
            "unmitigated NED {:.4} (need 0), CodeBLEU {:.3} -> mitigated {:.3} (gap {gap:.3}, need >= 0.15)",
            report_unmitigated.mean_ned,
            report_unmitigated.mean_codebleu,
            report_mitigated.mean_codebleu,
        ),
        started,
    );
}

// ---------------------------------------------------------------------------
// 8. Algorithm-1 service contract under concurrency and faults
// ---------------------------------------------------------------------------

mod service {
    use super::*;
    use promptcloak::server::{router, ServerState, SharedPolicy};
    use promptcloak_core::assist::{AssistError, AssistantClient, CompletionRequest, Suggestion};
    use promptcloak_core::gateway::{GatewayPolicy, PolicyContext, PolicyFault, ScriptedPolicy};
    use std::io::Write;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Mutex;

    /// Counts every request that reaches the upstream side.
    struct SpyAssistant {
        inner: ReplayAssistant,
        upstream_calls: Arc<AtomicUsize>,
    }

    impl AssistantClient for SpyAssistant {
        fn complete(&self, request: &CompletionRequest) -> Result<Suggestion, AssistError> {
            self.upstream_calls.fetch_add(1, Ordering::SeqCst);
            self.inner.complete(request)
        }
    }

    struct BrokenPolicy;
    impl GatewayPolicy for BrokenPolicy {
        fn initial_state(&self) -> Vec<f64> {
            Vec::new()
        }
        fn choose(
            &self,
            _ctx: PolicyContext,
            _obs: &[f64],
            _state: &mut Vec<f64>,
        ) -> Result<Action, PolicyFault> {
            Err(PolicyFault::Other("injected fault".into()))
        }
    }

    #[derive(Clone)]
    struct SharedBuf(Arc<Mutex<Vec<u8>>>);

    impl Write for SharedBuf {
        fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
            self.0.lock().unwrap().extend_from_slice(buf);
            Ok(buf.len())
        }
        fn flush(&mut self) -> std::io::Result<()> {
            Ok(())
        }
    }

    fn session_file(k: usize) -> String {
        format!(
            "def scale_{k}(value, factor):\n    result_{k} = value * factor\n    return result_{k}\n\n\
             def apply_{k}(items):\n    out_{k} = []\n    for item in items:\n        \
             out_{k}.append(scale_{k}(item, {k}))\n    return out_{k}\n"
        )
    }

    async fn start(state: Arc<ServerState>) -> String {
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
        let addr = listener.local_addr().unwrap();
        tokio::spawn(async move {
            axum::serve(listener, router(state)).await.unwrap();
        });
        format!("http://{addr}")
    }

    #[test]
    fn criterion_8_service_contract() {
        let started = Instant::now();
        let corpus = desk_corpus();
        let runtime = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(4)
            .enable_all()
            .build()
            .unwrap();

        // Phase A: 16 concurrent sessions, a policy that never stops on its
        // own; per-session rename consistency and the 15-manipulation cap.
        let capture = SharedBuf(Arc::new(Mutex::new(Vec::new())));
        let upstream_calls = Arc::new(AtomicUsize::new(0));
        let mut script = vec![Action::RenameFunctions];
        script.extend(std::iter::repeat(Action::InsertRandomLine).take(30));
        let policy: SharedPolicy = Arc::new(ScriptedPolicy(script));
        let state = Arc::new(ServerState::new(
            Arc::new(SpyAssistant {
                inner: ReplayAssistant::with_default_window(corpus.clone()).unwrap(),
                upstream_calls: upstream_calls.clone(),
            }),
            Arc::new(HashEmbedder::new(64, 1600)),
            policy,
            GatewayConfig::default(),
            Some(Box::new(capture.clone())),
            false,
        ));

        runtime.block_on(async {
            let base = start(state).await;
            let client = reqwest::Client::new();
            let health = client.get(format!("{base}/healthz")).send().await.unwrap();
            assert_eq!(health.status(), 200);

            let mut tasks = Vec::new();
            for k in 0..16usize {
                let client = client.clone();
                let base = base.clone();
                tasks.push(tokio::spawn(async move {
                    let file = session_file(k);
                    for round in 0..2 {
                        let text = if round == 0 {
                            file.clone()
                        } else {
                            format!("{file}\ntotal_{k} = apply_{k}([1, 2, 3])\n")
                        };
                        let resp = client
                            .post(format!("{base}/v1/complete"))
                            .header("x-session-id", format!("session-{k}"))
                            .header("x-file-path", format!("file_{k}.py"))
                            .json(&serde_json::json!({
                                "prefix": text,
                                "suffix": "",
                                "max_tokens": 20,
                            }))
                            .send()
                            .await
                            .unwrap();
                        assert_eq!(resp.status(), 200, "session {k} round {round}");
                    }
                }));
            }
            for t in tasks {
                t.await.unwrap();
            }
        });

        // parse captured upstream prompts
        let raw = capture.0.lock().unwrap().clone();
        let records: Vec<PromptRecord> = String::from_utf8(raw)
            .unwrap()
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
        assert_eq!(records.len(), 32, "two captures per session");
        assert_eq!(upstream_calls.load(Ordering::SeqCst), 32);

        let mut max_added_lines = 0usize;
        for k in 0..16usize {
            let session: Vec<&PromptRecord> = records
                .iter()
                .filter(|r| r.session_id == format!("session-{k}"))
                .collect();
            assert_eq!(session.len(), 2, "session {k}");
            let original = session_file(k);
            for r in &session {
                assert!(
                    !r.text.contains(&format!("scale_{k}")),
                    "session {k}: original function name leaked upstream"
                );
            }
            // the replacement name is consistent across both prompts
            let name_of = |text: &str| -> String {
                text.lines()
                    .find(|l| l.starts_with("def "))
                    .and_then(|l| l.split(['(', ' ']).nth(1).map(str::to_string))
                    .expect("a def line survives")
            };
            let first = name_of(&session[0].text);
            let second = name_of(&session[1].text);
            assert_eq!(first, second, "session {k}: rename changed between prompts");

            // line growth bounds the number of insert manipulations
            let added = session[0]
                .text
                .lines()
                .count()
                .saturating_sub(original.lines().count());
            max_added_lines = max_added_lines.max(added);
            assert!(
                added <= 14,
                "session {k}: {added} inserted lines imply more than 15 manipulations"
            );
        }

        // Phase B: broken policy in fail-closed mode transmits nothing.
        let closed_calls = Arc::new(AtomicUsize::new(0));
        let state = Arc::new(ServerState::new(
            Arc::new(SpyAssistant {
                inner: ReplayAssistant::with_default_window(corpus).unwrap(),
                upstream_calls: closed_calls.clone(),
            }),
            Arc::new(HashEmbedder::new(64, 1600)),
            Arc::new(BrokenPolicy),
            GatewayConfig::default(),
            None,
            false,
        ));
        runtime.block_on(async {
            let base = start(state).await;
            let client = reqwest::Client::new();
            let mut tasks = Vec::new();
            for k in 0..16usize {
                let client = client.clone();
                let base = base.clone();
                tasks.push(tokio::spawn(async move {
                    let resp = client
                        .post(format!("{base}/v1/complete"))
                        .header("x-session-id", format!("fault-{k}"))
                        .json(&serde_json::json!({
                            "prefix": session_file(k),
                            "suffix": "",
                        }))
                        .send()
                        .await
                        .unwrap();
                    assert_eq!(resp.status(), 502, "fault session {k} must fail closed");
                }));
            }
            for t in tasks {
                t.await.unwrap();
            }
        });
        let leaked = closed_calls.load(Ordering::SeqCst);

        report(
            "criterion-8 service-contract",
            leaked == 0,
            &format!(
                "16 concurrent sessions: renames consistent, <=15 manipulations \
                 (max {max_added_lines} inserts), fail-closed leaked {leaked} prompts"
            ),
            started,
        );
    }
}
