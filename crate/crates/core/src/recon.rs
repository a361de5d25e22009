//! The adversary's view: turn an interception log into per-file segment
//! sequences, rebuild the codebase from them (LLM-backed or mechanical), and
//! score how much leaked.

use crate::code::{count_tokens, PromptRecord};
use crate::metrics::{codebleu, normalized_edit_distance, CodeBleuWeights};
use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

/// Group for records that carry no file path; grouping fidelity degrades but
/// reconstruction still runs.
pub const ANONYMOUS_FILE: &str = "<unknown>";

/// Default instruction text sent to an LLM-backed reconstructor. Carried as
/// config so operators can tune it without rebuilding.
pub const DEFAULT_RECONSTRUCTION_INSTRUCTIONS: &str = "You will receive code segments that were \
captured over time while a developer edited a file, newest last. Segments may overlap, repeat, \
or contain abandoned edits. Merge them into the most recent complete content of the file, \
preferring newer segments where they conflict, and return only the file content.";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogSegment {
    pub timestamp: u64,
    pub text: String,
}

/// Per-file, chronologically ordered, subsumption-deduplicated segments.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentLog {
    pub files: BTreeMap<String, Vec<LogSegment>>,
}

impl SegmentLog {
    pub fn total_segments(&self) -> usize {
        self.files.values().map(Vec::len).sum()
    }
}

/// Groups records by file, orders them chronologically, and drops every
/// segment fully contained in a LATER segment of the same file. Idempotent.
pub fn prepare_segments(records: &[PromptRecord]) -> SegmentLog {
    let mut files: BTreeMap<String, Vec<LogSegment>> = BTreeMap::new();
    for r in records {
        let key = if r.file_path.is_empty() { ANONYMOUS_FILE } else { &r.file_path };
        files
            .entry(key.to_string())
            .or_default()
            .push(LogSegment { timestamp: r.timestamp, text: r.text.clone() });
    }
    for segments in files.values_mut() {
        segments.sort_by_key(|s| s.timestamp);
        let kept: Vec<LogSegment> = segments
            .iter()
            .enumerate()
            .filter(|(i, seg)| {
                !segments[i + 1..].iter().any(|later| later.text.contains(&seg.text))
            })
            .map(|(_, seg)| seg.clone())
            .collect();
        *segments = kept;
    }
    files.retain(|_, v| !v.is_empty());
    SegmentLog { files }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ReconError {
    #[error("reconstructor backend failed: {0}")]
    Backend(String),
    #[error("token limit {limit} is too small: {what}")]
    TokenLimit { limit: usize, what: String },
}

/// Rebuilds a file from ordered segments. One call may be fed the previously
/// reconstructed codebase plus the next batch of segments.
pub trait Reconstructor {
    fn reconstruct(
        &self,
        instructions: &str,
        prior_codebase: &str,
        segments: &[String],
    ) -> Result<String, ReconError>;
}

impl<T: Reconstructor + ?Sized> Reconstructor for alloc::boxed::Box<T> {
    fn reconstruct(
        &self,
        instructions: &str,
        prior_codebase: &str,
        segments: &[String],
    ) -> Result<String, ReconError> {
        (**self).reconstruct(instructions, prior_codebase, segments)
    }
}

/// Deterministic fallback: overlays segments in order by maximal
/// suffix/prefix overlap, keeping the pipeline testable offline.
#[derive(Debug, Clone, Copy, Default)]
pub struct OverlayReconstructor;

impl Reconstructor for OverlayReconstructor {
    fn reconstruct(
        &self,
        _instructions: &str,
        prior_codebase: &str,
        segments: &[String],
    ) -> Result<String, ReconError> {
        let mut current = prior_codebase.to_string();
        for seg in segments {
            current = overlay(&current, seg);
        }
        Ok(current)
    }
}

/// Appends `seg` to `cur` at the maximal suffix/prefix overlap. Containment
/// in either direction short-circuits.
fn overlay(cur: &str, seg: &str) -> String {
    if cur.is_empty() {
        return seg.to_string();
    }
    if seg.is_empty() || cur.contains(seg) {
        return cur.to_string();
    }
    if seg.contains(cur) {
        return seg.to_string();
    }
    let max_k = cur.len().min(seg.len());
    for k in (1..=max_k).rev() {
        if !seg.is_char_boundary(k) {
            continue;
        }
        if cur.ends_with(&seg[..k]) {
            let mut out = cur.to_string();
            out.push_str(&seg[k..]);
            return out;
        }
    }
    // no overlap: the segment is new content further down the file
    let mut out = cur.to_string();
    if !out.ends_with('\n') {
        out.push('\n');
    }
    out.push_str(seg);
    out
}

#[derive(Debug, Clone)]
pub struct ReconstructionConfig {
    /// Per-request token budget for the instructions plus the new-segment
    /// payload. The previously reconstructed codebase rides along on
    /// iterative calls as carry-over context and is not counted against the
    /// batching budget.
    pub max_tokens: usize,
    pub instructions: String,
}

impl Default for ReconstructionConfig {
    fn default() -> Self {
        ReconstructionConfig {
            max_tokens: 4000,
            instructions: DEFAULT_RECONSTRUCTION_INSTRUCTIONS.to_string(),
        }
    }
}

/// Per-file resume state: how many segments were consumed and the codebase
/// reconstructed so far. Survives backend failures mid-run.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReconProgress {
    pub per_file: BTreeMap<String, FileProgress>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileProgress {
    pub consumed: usize,
    pub prior: String,
    pub done: bool,
}

/// Reconstructs every file in the log. See [`reconstruct_with_progress`] for
/// the resumable form.
pub fn reconstruct(
    log: &SegmentLog,
    reconstructor: &dyn Reconstructor,
    config: &ReconstructionConfig,
) -> Result<BTreeMap<String, String>, ReconError> {
    let mut progress = ReconProgress::default();
    reconstruct_with_progress(log, reconstructor, config, &mut progress)
}

/// Iterative reconstruction: per file, send the largest batch of segments
/// that fits the token budget; follow-up requests carry the codebase
/// reconstructed so far plus the next segments. On error, `progress` holds
/// the last completed iteration for each file, so the run can resume.
pub fn reconstruct_with_progress(
    log: &SegmentLog,
    reconstructor: &dyn Reconstructor,
    config: &ReconstructionConfig,
    progress: &mut ReconProgress,
) -> Result<BTreeMap<String, String>, ReconError> {
    let instruction_tokens = count_tokens(&config.instructions);
    let mut out = BTreeMap::new();

    for (path, segments) in &log.files {
        let state = progress.per_file.entry(path.clone()).or_default();
        if state.done {
            out.insert(path.clone(), state.prior.clone());
            continue;
        }

        // Oversized segments are split on line boundaries up front so no
        // single request can exceed the budget.
        let mut pending: Vec<String> = Vec::new();
        for seg in &segments[..] {
            split_to_budget(&seg.text, config.max_tokens.saturating_sub(instruction_tokens), &mut pending)
                .map_err(|_| ReconError::TokenLimit {
                    limit: config.max_tokens,
                    what: alloc::format!("a single line of {path} exceeds the budget"),
                })?;
        }

        let budget = config.max_tokens.saturating_sub(instruction_tokens);
        while state.consumed < pending.len() {
            let mut batch: Vec<String> = Vec::new();
            let mut used = 0usize;
            for seg in &pending[state.consumed..] {
                let t = count_tokens(seg);
                if used + t > budget {
                    break;
                }
                used += t;
                batch.push(seg.clone());
            }
            debug_assert!(!batch.is_empty(), "segments are pre-split to the budget");
            let next =
                reconstructor.reconstruct(&config.instructions, &state.prior, &batch)?;
            state.consumed += batch.len();
            state.prior = next;
        }
        state.done = true;
        out.insert(path.clone(), state.prior.clone());
    }
    Ok(out)
}

fn split_to_budget(text: &str, budget: usize, out: &mut Vec<String>) -> Result<(), ()> {
    if budget == 0 {
        return Err(());
    }
    if count_tokens(text) <= budget {
        out.push(text.to_string());
        return Ok(());
    }
    let mut chunk = String::new();
    let mut chunk_tokens = 0usize;
    for line in text.split_inclusive('\n') {
        let t = count_tokens(line);
        if t > budget {
            return Err(());
        }
        if chunk_tokens + t > budget {
            out.push(core::mem::take(&mut chunk));
            chunk_tokens = 0;
        }
        chunk.push_str(line);
        chunk_tokens += t;
    }
    if !chunk.is_empty() {
        out.push(chunk);
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileLeakage {
    pub path: String,
    pub ned: f64,
    pub codebleu: f64,
    pub reconstructed_bytes: usize,
    pub original_bytes: usize,
}

/// Per-file and aggregate leakage. Lower NED / higher CodeBLEU = more of the
/// original code leaked.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeakageReport {
    pub label: String,
    pub files: Vec<FileLeakage>,
    pub mean_ned: f64,
    pub mean_codebleu: f64,
}

/// Scores each reconstructed file against the original repository. Files
/// present on only one side are scored against the empty text.
pub fn evaluate_leakage(
    label: &str,
    original: &BTreeMap<String, String>,
    reconstructed: &BTreeMap<String, String>,
    weights: &CodeBleuWeights,
) -> LeakageReport {
    let mut paths: Vec<&String> = original.keys().chain(reconstructed.keys()).collect();
    paths.sort();
    paths.dedup();

    let empty = String::new();
    let mut files = Vec::with_capacity(paths.len());
    for path in paths {
        let orig = original.get(path).unwrap_or(&empty);
        let rec = reconstructed.get(path).unwrap_or(&empty);
        files.push(FileLeakage {
            path: path.clone(),
            ned: normalized_edit_distance(orig, rec),
            codebleu: codebleu(orig, rec, weights),
            reconstructed_bytes: rec.len(),
            original_bytes: orig.len(),
        });
    }
    let n = files.len().max(1) as f64;
    LeakageReport {
        label: label.to_string(),
        mean_ned: files.iter().map(|f| f.ned).sum::<f64>() / n,
        mean_codebleu: files.iter().map(|f| f.codebleu).sum::<f64>() / n,
        files,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn rec(file: &str, ts: u64, text: &str) -> PromptRecord {
        PromptRecord {
            session_id: "s".into(),
            file_path: file.into(),
            text: text.into(),
            cursor_line: 0,
            cursor_col: 0,
            timestamp: ts,
        }
    }

    #[test]
    fn later_superset_drops_earlier_subset() {
        let log = prepare_segments(&[
            rec("a.py", 1, "x = 1\n"),
            rec("a.py", 2, "x = 1\ny = 2\n"),
        ]);
        let segs = &log.files["a.py"];
        assert_eq!(segs.len(), 1);
        assert_eq!(segs[0].text, "x = 1\ny = 2\n");
    }

    #[test]
    fn earlier_superset_keeps_both() {
        // The later segment is contained in a PRECEDING one only: both stay.
        let log = prepare_segments(&[
            rec("a.py", 1, "x = 1\ny = 2\n"),
            rec("a.py", 2, "y = 2\n"),
        ]);
        assert_eq!(log.files["a.py"].len(), 2);
    }

    #[test]
    fn three_segment_orderings_truth_table() {
        // A inside B inside C in various arrival orders; containment in any LATER
        // segment triggers the drop.
        let a = "b = 2\n";
        let b = "a = 1\nb = 2\n";
        let c = "a = 1\nb = 2\nc = 3\n";
        let cases: &[(&[&str], usize)] = &[
            (&[a, b, c], 1), // a in b (later), b in c (later) -> only c
            (&[c, b, a], 3), // nothing is contained in a LATER segment
            (&[b, c, a], 2), // b in c (later) dropped; c, a stay
            (&[a, c, b], 2), // a in c (later) dropped; c stays; b in c but c is EARLIER
        ];
        for (order, expected) in cases {
            let records: Vec<PromptRecord> = order
                .iter()
                .enumerate()
                .map(|(i, t)| rec("a.py", i as u64, t))
                .collect();
            let log = prepare_segments(&records);
            assert_eq!(
                log.files["a.py"].len(),
                *expected,
                "order {order:?}"
            );
        }
    }

    #[test]
    fn single_record_passes_through() {
        let log = prepare_segments(&[rec("a.py", 5, "only\n")]);
        assert_eq!(log.files["a.py"].len(), 1);
    }

    #[test]
    fn prepare_is_idempotent() {
        let records = vec![
            rec("a.py", 1, "x = 1\n"),
            rec("a.py", 2, "x = 1\ny = 2\n"),
            rec("b.py", 1, "z = 0\n"),
        ];
        let once = prepare_segments(&records);
        let again_records: Vec<PromptRecord> = once
            .files
            .iter()
            .flat_map(|(path, segs)| {
                segs.iter().map(move |s| rec(path, s.timestamp, &s.text))
            })
            .collect();
        let twice = prepare_segments(&again_records);
        assert_eq!(once, twice);
    }

    #[test]
    fn missing_file_paths_group_anonymously() {
        let log = prepare_segments(&[rec("", 1, "x = 1\n"), rec("", 2, "x = 1\ny = 2\n")]);
        assert_eq!(log.files.len(), 1);
        assert!(log.files.contains_key(ANONYMOUS_FILE));
    }

    #[test]
    fn growing_prefixes_reconstruct_the_final_buffer() {
        let full = "a = 1\nb = 2\nc = 3\nd = 4\n";
        let records: Vec<PromptRecord> = (1..=4)
            .map(|i| {
                let upto: String =
                    full.split_inclusive('\n').take(i).collect();
                rec("a.py", i as u64, &upto)
            })
            .collect();
        let log = prepare_segments(&records);
        let out = reconstruct(&log, &OverlayReconstructor, &ReconstructionConfig::default())
            .unwrap();
        assert_eq!(out["a.py"], full);
        assert_eq!(normalized_edit_distance(&out["a.py"], full), 0.0);
    }

    #[test]
    fn overlapping_windows_merge_to_the_original_span() {
        let original = "line_a = 1\nline_b = 2\nline_c = 3\nline_d = 4\nline_e = 5\n";
        let window1: String = original.split_inclusive('\n').take(3).collect();
        let window2: String = original.split_inclusive('\n').skip(1).collect();
        let log = prepare_segments(&[rec("a.py", 1, &window1), rec("a.py", 2, &window2)]);
        let out =
            reconstruct(&log, &OverlayReconstructor, &ReconstructionConfig::default()).unwrap();
        assert_eq!(out["a.py"], original);
    }

    /// Counts calls and verifies every request stays within the budget.
    struct CountingRecon {
        calls: core::cell::RefCell<Vec<(usize, usize)>>, // (prior tokens, batch tokens)
        max_tokens: usize,
        instructions_tokens: usize,
    }

    impl Reconstructor for CountingRecon {
        fn reconstruct(
            &self,
            instructions: &str,
            prior: &str,
            segments: &[String],
        ) -> Result<String, ReconError> {
            let p = count_tokens(prior);
            let b: usize = segments.iter().map(|s| count_tokens(s)).sum();
            assert!(
                self.instructions_tokens + b <= self.max_tokens,
                "segment payload exceeded the token limit"
            );
            let _ = instructions;
            self.calls.borrow_mut().push((p, b));
            OverlayReconstructor.reconstruct("", prior, segments)
        }
    }

    #[test]
    fn batching_respects_the_token_limit() {
        // 3 segments of ~14 tokens each under a limit that fits one per call
        // (after instructions) -> exactly 3 calls, each carrying prior output.
        let segs = [
            "alpha_1 = 1\nalpha_2 = 2\n",
            "alpha_2 = 2\nalpha_3 = 3\n",
            "alpha_3 = 3\nalpha_4 = 4\n",
        ];
        let records: Vec<PromptRecord> =
            segs.iter().enumerate().map(|(i, t)| rec("a.py", i as u64, t)).collect();
        let log = prepare_segments(&records);
        // budget fits exactly one 6-token segment per call -> 3 calls
        let config = ReconstructionConfig {
            max_tokens: 10,
            instructions: "merge the code".into(),
        };
        let spy = CountingRecon {
            calls: core::cell::RefCell::new(Vec::new()),
            max_tokens: 10,
            instructions_tokens: count_tokens("merge the code"),
        };
        let out = reconstruct(&log, &spy, &config).unwrap();
        let calls = spy.calls.borrow();
        assert_eq!(calls.len(), 3, "one batch per call: {calls:?}");
        assert_eq!(calls[0].0, 0, "first call has no prior");
        assert!(calls[1].0 > 0, "later calls carry the prior codebase");
        assert!(out["a.py"].contains("alpha_4"));
    }

    #[test]
    fn resume_continues_from_last_completed_iteration() {
        struct FailOnce {
            failed: core::cell::Cell<bool>,
        }
        impl Reconstructor for FailOnce {
            fn reconstruct(
                &self,
                _i: &str,
                prior: &str,
                segments: &[String],
            ) -> Result<String, ReconError> {
                if !prior.is_empty() && !self.failed.get() {
                    self.failed.set(true);
                    return Err(ReconError::Backend("transient".into()));
                }
                OverlayReconstructor.reconstruct("", prior, segments)
            }
        }
        let segs = ["row_1 = 1\nrow_2 = 2\n", "row_2 = 2\nrow_3 = 3\n", "row_3 = 3\nrow_4 = 4\n"];
        let records: Vec<PromptRecord> =
            segs.iter().enumerate().map(|(i, t)| rec("a.py", i as u64, t)).collect();
        let log = prepare_segments(&records);
        let config = ReconstructionConfig { max_tokens: 7, instructions: "merge".into() };
        let backend = FailOnce { failed: core::cell::Cell::new(false) };
        let mut progress = ReconProgress::default();
        let first = reconstruct_with_progress(&log, &backend, &config, &mut progress);
        assert!(first.is_err());
        let state = &progress.per_file["a.py"];
        assert!(state.consumed > 0, "completed iterations survive the failure");
        assert!(!state.done);
        // resume with the same progress
        let out = reconstruct_with_progress(&log, &backend, &config, &mut progress).unwrap();
        assert!(out["a.py"].contains("row_4"));
    }

    #[test]
    fn leakage_report_extremes() {
        let w = CodeBleuWeights::default();
        let mut original = BTreeMap::new();
        original.insert("a.py".to_string(), "def f():\n    return 1\n".to_string());
        // identical reconstruction: total leakage
        let total = evaluate_leakage("test", &original, &original.clone(), &w);
        assert_eq!(total.files[0].ned, 0.0);
        assert!((total.files[0].codebleu - 1.0).abs() < 1e-9);
        // empty reconstruction: nothing leaked
        let none = evaluate_leakage("test", &original, &BTreeMap::new(), &w);
        assert_eq!(none.files[0].ned, 1.0);
    }
}
