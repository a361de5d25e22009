//! Clipped n-gram precision scores: plain BLEU and the keyword-weighted
//! variant. Both use add-epsilon smoothing for zero higher-order matches and
//! the standard brevity penalty.

use crate::code::tokenize;
use alloc::collections::BTreeMap;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

pub const MAX_NGRAM_ORDER: usize = 4;

const SMOOTH_EPS: f64 = 1e-9;

fn ngram_counts<'a>(tokens: &[&'a str], n: usize) -> BTreeMap<Vec<&'a str>, u64> {
    let mut counts = BTreeMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w.to_vec()).or_insert(0) += 1;
        }
    }
    counts
}

fn brevity_penalty(ref_len: usize, hyp_len: usize) -> f64 {
    if hyp_len >= ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    }
}

fn geometric_mean_of_precisions(precisions: &[f64]) -> f64 {
    if precisions.is_empty() {
        return 0.0;
    }
    let log_sum: f64 = precisions.iter().map(|p| p.ln()).sum();
    (log_sum / precisions.len() as f64).exp()
}

/// Geometric mean of clipped n-gram precisions (orders 1..=max_n) with
/// brevity penalty. Empty hypothesis or reference scores 0; zero unigram
/// overlap scores 0.
pub fn bleu_ngram(reference: &str, hypothesis: &str, max_n: usize) -> f64 {
    weighted_precision_score(reference, hypothesis, max_n, |_| 1.0)
}

/// Like [`bleu_ngram`], with each n-gram weighted by the mean of its token
/// weights: keyword tokens count 5x non-keywords. An empty keyword set makes
/// every weight uniform, reducing to the plain precision.
pub fn weighted_ngram(reference: &str, hypothesis: &str, keyword_set: &[&str]) -> f64 {
    weighted_precision_score(reference, hypothesis, MAX_NGRAM_ORDER, |tok| {
        if keyword_set.contains(&tok) {
            5.0
        } else {
            1.0
        }
    })
}

fn weighted_precision_score(
    reference: &str,
    hypothesis: &str,
    max_n: usize,
    token_weight: impl Fn(&str) -> f64,
) -> f64 {
    let ref_tokens = tokenize(reference);
    let hyp_tokens = tokenize(hypothesis);
    if ref_tokens.is_empty() || hyp_tokens.is_empty() {
        return 0.0;
    }

    // Mean token weight so the weight scale is independent of the order n
    // (keeps the epsilon smoothing comparable across orders).
    let gram_weight = |gram: &[&str]| -> f64 {
        gram.iter().map(|t| token_weight(t)).sum::<f64>() / gram.len() as f64
    };

    let mut precisions = Vec::new();
    let mut unigram_matches = 0u64;
    for n in 1..=max_n.max(1) {
        if hyp_tokens.len() < n {
            break;
        }
        let ref_counts = ngram_counts(&ref_tokens, n);
        let hyp_counts = ngram_counts(&hyp_tokens, n);
        let mut matched = 0.0f64;
        let mut total = 0.0f64;
        for (gram, hyp_count) in &hyp_counts {
            let clipped = (*hyp_count).min(ref_counts.get(gram).copied().unwrap_or(0));
            let w = gram_weight(gram);
            matched += w * clipped as f64;
            total += w * *hyp_count as f64;
            if n == 1 {
                unigram_matches += clipped;
            }
        }
        if total == 0.0 {
            continue;
        }
        precisions.push((matched + SMOOTH_EPS) / (total + SMOOTH_EPS));
    }
    if unigram_matches == 0 {
        return 0.0;
    }
    geometric_mean_of_precisions(&precisions) * brevity_penalty(ref_tokens.len(), hyp_tokens.len())
}
