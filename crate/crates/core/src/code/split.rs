//! Token-balanced prompt segmentation on line boundaries.

use super::lex::count_tokens;
use super::line_spans;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SplitError {
    #[error("cannot split into 0 segments")]
    ZeroSegments,
    #[error("text has {lines} lines but {segments} segments were requested")]
    TooFewLines { lines: usize, segments: usize },
}

/// Splits `text` into `n_segments` pieces that concatenate back byte-exactly.
/// Split points fall on the line boundaries nearest to equal token shares;
/// ties take the earlier boundary.
pub fn split_prompt(text: &str, n_segments: usize) -> Result<Vec<String>, SplitError> {
    if n_segments == 0 {
        return Err(SplitError::ZeroSegments);
    }
    if n_segments == 1 {
        return Ok(vec![text.to_string()]);
    }
    let mut spans = line_spans(text);
    // A trailing zero-length line is not a split target.
    if spans.last().is_some_and(|s| s.is_empty()) {
        spans.pop();
    }
    if spans.len() < n_segments {
        return Err(SplitError::TooFewLines { lines: spans.len(), segments: n_segments });
    }

    // cum[j] = tokens in lines[0..j]
    let mut cum = Vec::with_capacity(spans.len() + 1);
    cum.push(0usize);
    for s in &spans {
        cum.push(cum.last().unwrap() + count_tokens(s.slice(text)));
    }
    let total = *cum.last().unwrap() as f64;

    let mut boundaries = Vec::with_capacity(n_segments + 1);
    boundaries.push(0usize);
    for k in 1..n_segments {
        let target = total * k as f64 / n_segments as f64;
        let lo = boundaries[k - 1] + 1;
        let hi = spans.len() - (n_segments - k);
        let mut best = lo;
        let mut best_dist = f64::INFINITY;
        for b in lo..=hi {
            let dist = (cum[b] as f64 - target).abs();
            if dist < best_dist {
                best_dist = dist;
                best = b;
            }
        }
        boundaries.push(best);
    }
    boundaries.push(spans.len());

    let mut out = Vec::with_capacity(n_segments);
    for w in boundaries.windows(2) {
        let start = spans[w[0]].start;
        let end = if w[1] == spans.len() { text.len() } else { spans[w[1]].start };
        out.push(text[start..end].to_string());
    }
    Ok(out)
}
