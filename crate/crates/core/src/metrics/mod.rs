//! Code-similarity metrics: the four weighted CodeBLEU components driving the
//! reward, and normalized edit distance for leakage scoring.

mod astmatch;
mod bleu;
mod dataflow;
mod ned;

pub use astmatch::ast_match;
pub use bleu::{bleu_ngram, weighted_ngram, MAX_NGRAM_ORDER};
pub use dataflow::{dataflow_match, DataflowScore};
pub use ned::normalized_edit_distance;

use crate::code::{PYTHON_BUILTINS, PYTHON_KEYWORDS};
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

/// Component weights (n-gram, weighted n-gram, AST, dataflow).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CodeBleuWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
}

impl Default for CodeBleuWeights {
    fn default() -> Self {
        CodeBleuWeights { alpha: 0.1, beta: 0.4, gamma: 0.1, delta: 0.4 }
    }
}

/// The keyword set for the weighted n-gram component: Python reserved words
/// plus common builtins.
pub fn python_keyword_set() -> Vec<&'static str> {
    let mut set = Vec::with_capacity(PYTHON_KEYWORDS.len() + PYTHON_BUILTINS.len());
    set.extend_from_slice(PYTHON_KEYWORDS);
    set.extend_from_slice(PYTHON_BUILTINS);
    set
}

/// Per-component scores for one (reference, hypothesis) pair. `dataflow` is
/// `None` when the reference has no def-use edges; [`combine`] then
/// renormalizes the remaining weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CodeBleuBreakdown {
    pub bleu: f64,
    pub weighted: f64,
    pub ast: f64,
    pub dataflow: Option<f64>,
    pub codebleu: f64,
}

/// Weighted combination with weights renormalized over defined components.
pub fn combine(
    bleu: f64,
    weighted: f64,
    ast: f64,
    dataflow: Option<f64>,
    w: &CodeBleuWeights,
) -> f64 {
    let (mut num, mut den) = (
        w.alpha * bleu + w.beta * weighted + w.gamma * ast,
        w.alpha + w.beta + w.gamma,
    );
    if let Some(d) = dataflow {
        num += w.delta * d;
        den += w.delta;
    }
    if den == 0.0 {
        return 0.0;
    }
    num / den
}

pub fn codebleu_breakdown(reference: &str, hypothesis: &str, w: &CodeBleuWeights) -> CodeBleuBreakdown {
    let keywords = python_keyword_set();
    let bleu = bleu_ngram(reference, hypothesis, MAX_NGRAM_ORDER);
    let weighted = weighted_ngram(reference, hypothesis, &keywords);
    let ast = ast_match(reference, hypothesis);
    let df = dataflow_match(reference, hypothesis);
    let dataflow = (df.reference_edges > 0).then_some(df.score);
    let codebleu = combine(bleu, weighted, ast, dataflow, w);
    CodeBleuBreakdown { bleu, weighted, ast, dataflow, codebleu }
}

/// alpha*bleu + beta*weighted + gamma*ast + delta*dataflow in [0, 1].
pub fn codebleu(reference: &str, hypothesis: &str, w: &CodeBleuWeights) -> f64 {
    codebleu_breakdown(reference, hypothesis, w).codebleu
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;
    use alloc::string::String;

    #[test]
    fn identical_code_scores_one() {
        let src = "def f(a):\n    b = a + 1\n    return b\n";
        let b = codebleu_breakdown(src, src, &CodeBleuWeights::default());
        assert!((b.bleu - 1.0).abs() < 1e-12);
        assert!((b.weighted - 1.0).abs() < 1e-12);
        assert!((b.ast - 1.0).abs() < 1e-12);
        assert_eq!(b.dataflow, Some(1.0));
        assert!((b.codebleu - 1.0).abs() < 1e-12);
    }

    #[test]
    fn linear_combination_with_defaults() {
        // component scores (1, 1, 0, 0) with default weights -> 0.5
        let w = CodeBleuWeights::default();
        let s = combine(1.0, 1.0, 0.0, Some(0.0), &w);
        assert!((s - 0.5).abs() < 1e-12);
    }

    #[test]
    fn missing_dataflow_renormalizes() {
        let w = CodeBleuWeights::default();
        let s = combine(1.0, 1.0, 1.0, None, &w);
        assert!((s - 1.0).abs() < 1e-12);
        let s2 = combine(0.6, 0.6, 0.6, None, &w);
        assert!((s2 - 0.6).abs() < 1e-12);
    }

    #[test]
    fn consistent_rename_preserves_ast_and_dataflow_only() {
        let reference = "def load(path):\n    data = read(path)\n    return data\n";
        let renamed = "def qx1zk(ab3de):\n    fg7hi = read(ab3de)\n    return fg7hi\n";
        let b = codebleu_breakdown(reference, renamed, &CodeBleuWeights::default());
        assert!((b.ast - 1.0).abs() < 1e-12, "ast = {}", b.ast);
        assert_eq!(b.dataflow, Some(1.0));
        assert!(b.bleu < 1.0);
        assert!(b.weighted < 1.0);
    }

    #[test]
    fn codebleu_self_similarity_on_generated_snippets() {
        let w = CodeBleuWeights::default();
        for i in 0..100 {
            let mut src = String::new();
            for f in 0..(1 + i % 3) {
                src.push_str(&format!("def fn_{i}_{f}(a_{f}):\n"));
                src.push_str(&format!("    v_{f} = a_{f} * {i}\n"));
                if i % 2 == 0 {
                    src.push_str(&format!("    v_{f} += {f}\n"));
                }
                src.push_str(&format!("    return v_{f}\n"));
            }
            src.push_str(&format!("out_{i} = fn_{i}_0({i})\n"));
            let s = codebleu(&src, &src, &w);
            assert!((s - 1.0).abs() < 1e-9, "snippet {i}: {s}");
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn snippet() -> impl Strategy<Value = String> {
            (1usize..3, 1usize..4).prop_map(|(nf, nl)| {
                let mut s = String::new();
                for f in 0..nf {
                    s.push_str(&format!("def fun_{f}(par_{f}):\n"));
                    for l in 0..nl {
                        s.push_str(&format!("    loc_{f}_{l} = par_{f} + {l}\n"));
                    }
                    s.push_str(&format!("    return loc_{f}_0\n"));
                }
                s
            })
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]

            #[test]
            fn self_similarity_is_one(src in snippet()) {
                let s = codebleu(&src, &src, &CodeBleuWeights::default());
                prop_assert!((s - 1.0).abs() < 1e-9);
            }

            #[test]
            fn rename_invariance_split(src in snippet(), seed in 0u64..500) {
                use crate::manip::{apply_action, propagate_renames, Action, CursorPos, PromptState};
                let state = PromptState::from_text(&src, CursorPos::default(), 1).unwrap();
                let mut renamed = state.clone();
                for action in [Action::RenameFunctions, Action::RenameVariables, Action::RenameArguments] {
                    let out = apply_action(&renamed, 0, action, seed).unwrap();
                    renamed = propagate_renames(&out.state);
                }
                let hyp = renamed.current_text();
                prop_assume!(hyp != src);
                let b = codebleu_breakdown(&src, &hyp, &CodeBleuWeights::default());
                prop_assert!((b.ast - 1.0).abs() < 1e-9, "ast {}", b.ast);
                prop_assert_eq!(b.dataflow, Some(1.0));
                prop_assert!(b.bleu < 1.0 - 1e-9, "bleu must drop under renames: {}", b.bleu);
                prop_assert!(b.weighted < 1.0 - 1e-9);
            }
        }
    }
}
