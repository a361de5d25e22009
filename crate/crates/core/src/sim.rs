//! Developer-coding simulator: replays a source file as a typing session
//! with injected-then-corrected errors, pauses and cursor jumps, emitting the
//! prompt stream an IDE plugin would send.

use crate::code::{count_tokens, PromptRecord};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Fixed epoch base for deterministic timestamps.
const TIMESTAMP_BASE_MS: u64 = 1_600_000_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PromptTrigger {
    /// Emit after each simulated pause (plugin debounce behavior).
    OnPause,
    /// Emit every N buffer edits.
    EveryEdits(u32),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatorParams {
    /// Mean typing speed, tokens per second.
    pub typing_speed: f64,
    /// Relative jitter applied per line, in [0, 1).
    pub typing_jitter: f64,
    /// Probability per line of introducing a typo.
    pub error_rate: f64,
    /// Lines written before a typo is corrected.
    pub correction_delay: u32,
    /// Probability per line of pausing.
    pub pause_probability: f64,
    /// Pause duration range, seconds.
    pub pause_secs: (f64, f64),
    /// Probability per line of the cursor jumping elsewhere.
    pub navigation_rate: f64,
    /// Session duration range, seconds; drawn per session.
    pub session_secs: (f64, f64),
    pub prompt_trigger: PromptTrigger,
}

impl Default for SimulatorParams {
    fn default() -> Self {
        SimulatorParams {
            typing_speed: 5.0,
            typing_jitter: 0.3,
            error_rate: 0.05,
            correction_delay: 2,
            pause_probability: 0.25,
            pause_secs: (2.0, 8.0),
            navigation_rate: 0.1,
            session_secs: (20.0, 90.0),
            prompt_trigger: PromptTrigger::OnPause,
        }
    }
}

impl SimulatorParams {
    /// No errors, no navigation, no time limit: types the whole file and
    /// emits strictly prefix-growing prompts.
    pub fn clean_full_file() -> Self {
        SimulatorParams {
            error_rate: 0.0,
            navigation_rate: 0.0,
            session_secs: (1e9, 1e9),
            ..SimulatorParams::default()
        }
    }
}

/// One buffer edit; replaying the log from scratch reproduces every emitted
/// prompt text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EditOp {
    Append(String),
    Fix { line: usize, text: String },
}

#[derive(Debug, Clone)]
pub struct SessionTrace {
    pub records: Vec<PromptRecord>,
    pub edits: Vec<EditOp>,
    /// (edit count at emission, record index) pairs for replay checking.
    pub emissions: Vec<usize>,
    pub final_buffer: String,
}

pub fn derive_session_seed(master_seed: u64, file_path: &str, session_index: usize) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ master_seed;
    for b in file_path.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h ^ (session_index as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

/// Simulates one typing session over `file_text` starting at `start_line`.
/// Deterministic given the seed; records are chronologically ordered.
pub fn simulate_session(
    file_text: &str,
    file_path: &str,
    start_line: usize,
    params: &SimulatorParams,
    seed: u64,
) -> Vec<PromptRecord> {
    simulate_session_trace(file_text, file_path, start_line, params, seed).records
}

/// Full simulation output including the edit log (for replay checks).
pub fn simulate_session_trace(
    file_text: &str,
    file_path: &str,
    start_line: usize,
    params: &SimulatorParams,
    seed: u64,
) -> SessionTrace {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let source_lines: Vec<&str> = file_text.split('\n').collect();
    let start_line = start_line.min(source_lines.len());
    let session_id = alloc::format!("sim-{seed:016x}");

    let duration_secs = draw_range(&mut rng, params.session_secs);
    let mut clock_ms = TIMESTAMP_BASE_MS + (seed % 1000);
    let deadline_ms = clock_ms + (duration_secs * 1000.0) as u64;

    // The "copied" region the developer pasted before typing.
    let mut buffer: Vec<String> =
        source_lines[..start_line].iter().map(|s| s.to_string()).collect();
    let mut edits: Vec<EditOp> = Vec::new();
    let mut pending_fixes: Vec<(usize, String, u32)> = Vec::new(); // (line, correct text, lines remaining)
    let mut records: Vec<PromptRecord> = Vec::new();
    let mut emissions: Vec<usize> = Vec::new();
    let mut edit_count_since_emit = 0u32;

    let emit =
        |buffer: &[String],
         cursor_line: usize,
         clock_ms: u64,
         records: &mut Vec<PromptRecord>,
         emissions: &mut Vec<usize>,
         n_edits: usize| {
            let text = buffer.join("\n");
            let cursor_line = cursor_line.min(buffer.len().saturating_sub(1));
            let cursor_col = buffer.get(cursor_line).map(String::len).unwrap_or(0);
            records.push(PromptRecord {
                session_id: session_id.clone(),
                file_path: file_path.to_string(),
                text,
                cursor_line,
                cursor_col,
                timestamp: clock_ms,
            });
            emissions.push(n_edits);
        };

    for li in start_line..source_lines.len() {
        if clock_ms >= deadline_ms {
            break;
        }
        let line = source_lines[li];

        // typing time for the line
        let jitter = 1.0 + params.typing_jitter * (rng.gen::<f64>() * 2.0 - 1.0);
        let speed = (params.typing_speed * jitter).max(0.5);
        let line_tokens = count_tokens(line).max(1);
        clock_ms += (line_tokens as f64 / speed * 1000.0) as u64;

        // maybe introduce a typo that survives `correction_delay` more lines
        let typo = params.error_rate > 0.0 && rng.gen::<f64>() < params.error_rate;
        let typed = if typo { inject_typo(line, &mut rng) } else { line.to_string() };
        if typo && typed != line {
            // +1 compensates for the same-iteration countdown below, so the
            // typo survives exactly `correction_delay` further appends.
            pending_fixes.push((buffer.len(), line.to_string(), params.correction_delay + 1));
        }
        buffer.push(typed.clone());
        edits.push(EditOp::Append(typed));
        edit_count_since_emit += 1;

        // corrections whose delay elapsed
        let mut fixed_any = false;
        for fix in pending_fixes.iter_mut() {
            if fix.2 > 0 {
                fix.2 -= 1;
            }
        }
        while let Some(pos) = pending_fixes.iter().position(|f| f.2 == 0) {
            let (at, correct, _) = pending_fixes.remove(pos);
            buffer[at] = correct.clone();
            edits.push(EditOp::Fix { line: at, text: correct });
            edit_count_since_emit += 1;
            fixed_any = true;
        }
        let _ = fixed_any;

        // navigation: the cursor wanders; the insertion point does not
        let cursor_override = if params.navigation_rate > 0.0
            && rng.gen::<f64>() < params.navigation_rate
        {
            Some(rng.gen_range(0..buffer.len().max(1)))
        } else {
            None
        };

        let paused = params.pause_probability > 0.0 && rng.gen::<f64>() < params.pause_probability;
        if paused {
            clock_ms += (draw_range(&mut rng, params.pause_secs) * 1000.0) as u64;
        }

        let cursor_line = cursor_override.unwrap_or(buffer.len().saturating_sub(1));
        match params.prompt_trigger {
            PromptTrigger::OnPause if paused => {
                emit(&buffer, cursor_line, clock_ms, &mut records, &mut emissions, edits.len());
                edit_count_since_emit = 0;
            }
            PromptTrigger::EveryEdits(n) if n > 0 && edit_count_since_emit >= n => {
                emit(&buffer, cursor_line, clock_ms, &mut records, &mut emissions, edits.len());
                edit_count_since_emit = 0;
            }
            _ => {}
        }
    }

    // Flush outstanding corrections so the final buffer is honest about what
    // the developer would eventually have.
    for (at, correct, _) in pending_fixes.drain(..) {
        buffer[at] = correct.clone();
        edits.push(EditOp::Fix { line: at, text: correct });
    }

    // Final state always emitted: sessions without pauses still produce data.
    clock_ms += 1;
    emit(
        &buffer,
        buffer.len().saturating_sub(1),
        clock_ms,
        &mut records,
        &mut emissions,
        edits.len(),
    );

    SessionTrace { records, edits, emissions, final_buffer: buffer.join("\n") }
}

fn draw_range(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi <= lo {
        lo
    } else {
        rng.gen_range(lo..hi)
    }
}

/// Single-character substitution or transposition inside the line's first
/// identifier-like run.
fn inject_typo(line: &str, rng: &mut ChaCha8Rng) -> String {
    let bytes = line.as_bytes();
    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut start = None;
    for (i, b) in bytes.iter().enumerate() {
        if b.is_ascii_alphanumeric() || *b == b'_' {
            if start.is_none() {
                start = Some(i);
            }
        } else if let Some(s) = start.take() {
            if i - s >= 2 {
                runs.push((s, i));
            }
        }
    }
    if let Some(s) = start {
        if bytes.len() - s >= 2 {
            runs.push((s, bytes.len()));
        }
    }
    let Some(&(s, e)) = runs.first() else { return line.to_string() };
    let mut out = bytes.to_vec();
    if rng.gen::<bool>() && e - s >= 3 {
        let k = rng.gen_range(s..e - 1);
        out.swap(k, k + 1);
    } else {
        let k = rng.gen_range(s..e);
        out[k] = b'a' + rng.gen_range(0..26u8);
    }
    String::from_utf8(out).unwrap_or_else(|_| line.to_string())
}

/// Replays an edit log from an empty buffer (after the copied prefix).
pub fn replay_edits(initial: &[String], edits: &[EditOp]) -> Vec<String> {
    let mut buffer: Vec<String> = initial.to_vec();
    for op in edits {
        match op {
            EditOp::Append(s) => buffer.push(s.clone()),
            EditOp::Fix { line, text } => buffer[*line] = text.clone(),
        }
    }
    buffer
}
