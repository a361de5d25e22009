//! Cross-module integration through the public API: a policy trained on the
//! manipulation environment survives a checkpoint round trip and drives the
//! gateway loop.

use promptcloak_core::agent::{load_policy, save_policy, train, TrainConfig};
use promptcloak_core::assist::ReplayAssistant;
use promptcloak_core::embed::HashEmbedder;
use promptcloak_core::env::{CloakEnv, EnvConfig};
use promptcloak_core::gateway::{Gateway, GatewayConfig, Session};
use promptcloak_core::PromptRecord;

fn corpus() -> Vec<(String, String)> {
    (0..3)
        .map(|i| {
            let text = format!(
                "def load_{i}(path):\n    raw_{i} = open(path).read()\n    return raw_{i}\n\n\
                 def parse_{i}(raw):\n    rows_{i} = raw.splitlines()\n    return rows_{i}\n\n\
                 def count_{i}(path):\n    rows = parse_{i}(load_{i}(path))\n    return len(rows)\n\n\
                 total_{i} = count_{i}('data_{i}.txt')\nprint(total_{i})\n"
            );
            (format!("pkg/mod_{i}.py"), text)
        })
        .collect()
}

fn prompts() -> Vec<PromptRecord> {
    corpus()
        .into_iter()
        .enumerate()
        .map(|(i, (path, text))| PromptRecord {
            session_id: "e2e".into(),
            file_path: path,
            cursor_line: promptcloak_core::code::line_count(&text).saturating_sub(3),
            cursor_col: 0,
            text,
            timestamp: i as u64,
        })
        .collect()
}

#[test]
fn trained_policy_round_trips_into_the_gateway() {
    let embedder = HashEmbedder::new(48, 1600);
    let envs: Vec<_> = (0..2)
        .map(|e| {
            CloakEnv::new(
                ReplayAssistant::with_default_window(corpus()).unwrap(),
                embedder.clone(),
                prompts(),
                EnvConfig::default(),
                e as u64,
            )
            .unwrap()
        })
        .collect();
    let config = TrainConfig { iterations: 2, n_envs: 2, n_steps: 32, seed: 3, ..TrainConfig::default() };
    let trained = train(envs, &config).unwrap().policy;

    let bytes = save_policy(&trained);
    let restored = load_policy(&bytes).unwrap();
    assert_eq!(restored.stats().count(), trained.stats().count());

    let gateway = Gateway::new(
        ReplayAssistant::with_default_window(corpus()).unwrap(),
        embedder,
        GatewayConfig::default(),
    );
    let mut session = Session::new("e2e");
    for record in prompts() {
        let out = gateway.handle_prompt(&restored, &mut session, &record).unwrap();
        assert!(out.trace.len() <= 15);
        assert!(!out.privacy_disabled);
        // whatever was renamed must be translated back out of the suggestion
        for (_original, entry) in session.translation.iter() {
            assert!(
                !out.suggestion.text.contains(&entry.random),
                "suggestion leaked a random name"
            );
        }
    }
    assert_eq!(session.prompts_handled(), 3);
}
