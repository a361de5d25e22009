//! The prompt manipulation action set: twelve deterministic-given-seed
//! transforms over [`PromptState`], with cross-segment rename propagation and
//! suggestion back-translation.

pub(crate) mod edit;
mod summarize;

pub use summarize::{summarize_function_body, RuleSummarizer, SummarizeError, Summarizer};

use crate::code::{
    self, lex, line_spans, parse_segment, IdentKind, PromptRecord, Span, SplitError, TokenKind,
};
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use edit::{apply_span_edits, remap_offset, SpanEdit};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// One discrete prompt manipulation. `StopManipulations` is terminal: it ends
/// the episode instead of editing anything.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Action {
    ReplacePii,
    SwapRandomLines,
    DeleteRandomLine,
    InsertRandomLine,
    DeleteFnBodiesIncremental,
    DeleteFnBodiesKeepLast,
    DeleteFnBodiesAll,
    DeleteFunctionsIncremental,
    RenameFunctions,
    RenameVariables,
    RenameArguments,
    StopManipulations,
}

impl Action {
    pub const COUNT: usize = 12;

    pub const ALL: [Action; Action::COUNT] = [
        Action::ReplacePii,
        Action::SwapRandomLines,
        Action::DeleteRandomLine,
        Action::InsertRandomLine,
        Action::DeleteFnBodiesIncremental,
        Action::DeleteFnBodiesKeepLast,
        Action::DeleteFnBodiesAll,
        Action::DeleteFunctionsIncremental,
        Action::RenameFunctions,
        Action::RenameVariables,
        Action::RenameArguments,
        Action::StopManipulations,
    ];

    pub fn index(self) -> usize {
        Action::ALL.iter().position(|a| *a == self).unwrap()
    }

    pub fn from_index(index: usize) -> Option<Action> {
        Action::ALL.get(index).copied()
    }

    pub fn is_terminal(self) -> bool {
        self == Action::StopManipulations
    }

    pub fn name(self) -> &'static str {
        match self {
            Action::ReplacePii => "replace-pii",
            Action::SwapRandomLines => "swap-random-lines",
            Action::DeleteRandomLine => "delete-random-line",
            Action::InsertRandomLine => "insert-random-line",
            Action::DeleteFnBodiesIncremental => "delete-fn-bodies-incremental",
            Action::DeleteFnBodiesKeepLast => "delete-fn-bodies-keep-last",
            Action::DeleteFnBodiesAll => "delete-fn-bodies-all",
            Action::DeleteFunctionsIncremental => "delete-functions-incremental",
            Action::RenameFunctions => "rename-functions",
            Action::RenameVariables => "rename-variables",
            Action::RenameArguments => "rename-arguments",
            Action::StopManipulations => "stop",
        }
    }
}

impl core::fmt::Display for Action {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ManipError {
    #[error("segment index {index} out of range ({count} segments)")]
    SegmentOutOfRange { index: usize, count: usize },
    #[error("stop-manipulations cannot be applied as an edit")]
    TerminalAction,
}

/// Bidirectional identifier rename record. `reverse` is the exact inverse of
/// `renames`; random names are 5 characters and never collide with
/// identifiers of the original prompt.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranslationMap {
    renames: BTreeMap<String, RenameEntry>,
    reverse: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenameEntry {
    pub random: String,
    pub kind: IdentKind,
}

impl TranslationMap {
    pub fn is_empty(&self) -> bool {
        self.renames.is_empty()
    }

    pub fn len(&self) -> usize {
        self.renames.len()
    }

    pub fn random_of(&self, original: &str) -> Option<&str> {
        self.renames.get(original).map(|e| e.random.as_str())
    }

    pub fn original_of(&self, random: &str) -> Option<&str> {
        self.reverse.get(random).map(String::as_str)
    }

    pub fn is_random_name(&self, name: &str) -> bool {
        self.reverse.contains_key(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &RenameEntry)> {
        self.renames.iter().map(|(k, v)| (k.as_str(), v))
    }

    fn insert(&mut self, original: String, random: String, kind: IdentKind) {
        self.reverse.insert(random.clone(), original.clone());
        self.renames.insert(original, RenameEntry { random, kind });
    }
}

/// Cursor position as (0-based line, byte column within the line).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CursorPos {
    pub line: usize,
    pub col: usize,
}

/// A prompt mid-manipulation: segmented text, the untouched original, the
/// cursor tracked through every edit, the rename record, and per-action
/// progress counters for the incremental deletions.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptState {
    pub segments: Vec<String>,
    pub original_text: String,
    pub cursor: CursorPos,
    pub translation: TranslationMap,
    pub step_count: u32,
    pub incremental_cursors: BTreeMap<(usize, usize), usize>,
}

impl PromptState {
    pub fn from_record(record: &PromptRecord, n_segments: usize) -> Result<Self, SplitError> {
        Self::from_text(
            &record.text,
            CursorPos { line: record.cursor_line, col: record.cursor_col },
            n_segments,
        )
    }

    pub fn from_text(text: &str, cursor: CursorPos, n_segments: usize) -> Result<Self, SplitError> {
        let segments = code::split_prompt(text, n_segments)?;
        let mut state = PromptState {
            segments,
            original_text: text.to_string(),
            cursor,
            translation: TranslationMap::default(),
            step_count: 0,
            incremental_cursors: BTreeMap::new(),
        };
        state.cursor = clamp_cursor(&state.current_text(), cursor);
        Ok(state)
    }

    /// The manipulated prompt as one text; segments always rejoin exactly.
    pub fn current_text(&self) -> String {
        self.segments.concat()
    }

    pub fn n_segments(&self) -> usize {
        self.segments.len()
    }

    /// Byte offset of segment `i` within the joined text.
    pub fn segment_offset(&self, i: usize) -> usize {
        self.segments[..i].iter().map(String::len).sum()
    }

    /// Global byte offset of the cursor in the joined text.
    pub fn cursor_offset(&self) -> usize {
        cursor_to_offset(&self.current_text(), self.cursor)
    }
}

/// Byte offset of a (line, col) cursor within `text`.
pub fn cursor_to_offset(text: &str, cursor: CursorPos) -> usize {
    let lines = line_spans(text);
    if lines.is_empty() {
        return 0;
    }
    let line = lines[cursor.line.min(lines.len() - 1)];
    let content_len = line.slice(text).trim_end_matches('\n').len();
    line.start + cursor.col.min(content_len)
}

/// (line, col) cursor for a byte offset within `text`.
pub fn offset_to_cursor(text: &str, offset: usize) -> CursorPos {
    let offset = offset.min(text.len());
    let line = text[..offset].bytes().filter(|b| *b == b'\n').count();
    let line_start = text[..offset].rfind('\n').map_or(0, |p| p + 1);
    CursorPos { line, col: offset - line_start }
}

fn clamp_cursor(text: &str, cursor: CursorPos) -> CursorPos {
    let lines = line_spans(text);
    if lines.is_empty() {
        return CursorPos { line: 0, col: 0 };
    }
    let line = cursor.line.min(lines.len() - 1);
    let content_len = lines[line].slice(text).trim_end_matches('\n').len();
    CursorPos { line, col: cursor.col.min(content_len) }
}

/// Result of one [`apply_action`] call. `applied` is false when the action
/// had no target (for reward bookkeeping); the state still advances its step
/// counter so episodes keep moving.
#[derive(Debug, Clone)]
pub struct ApplyOutcome {
    pub state: PromptState,
    pub applied: bool,
}

/// Fixed pool of innocuous lines for `InsertRandomLine`.
const INSERT_POOL: [&str; 12] = [
    "pass",
    "_ = 0",
    "# ...",
    "result = None",
    "# helper section",
    "tmp = 0",
    "# end of block",
    "flag = False",
    "counter = 0",
    "# utility code",
    "buf = []",
    "# reserved",
];

const PII_REPLACEMENT_LEN: usize = 8;
const RANDOM_NAME_LEN: usize = 5;

/// Applies one manipulation to the indexed segment with the built-in rule
/// summarizer. Deterministic for identical `(state, action, rng_seed)`.
pub fn apply_action(
    state: &PromptState,
    segment_index: usize,
    action: Action,
    rng_seed: u64,
) -> Result<ApplyOutcome, ManipError> {
    apply_action_with(state, segment_index, action, rng_seed, &RuleSummarizer)
}

/// [`apply_action`] with a pluggable function-body summarizer.
pub fn apply_action_with(
    state: &PromptState,
    segment_index: usize,
    action: Action,
    rng_seed: u64,
    summarizer: &dyn Summarizer,
) -> Result<ApplyOutcome, ManipError> {
    if segment_index >= state.segments.len() {
        return Err(ManipError::SegmentOutOfRange {
            index: segment_index,
            count: state.segments.len(),
        });
    }
    if action.is_terminal() {
        return Err(ManipError::TerminalAction);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut next = state.clone();
    next.step_count += 1;

    let segment = &state.segments[segment_index];
    let plan = match action {
        Action::ReplacePii => plan_replace_pii(segment, &mut rng),
        Action::SwapRandomLines => plan_swap_lines(segment, &mut rng),
        Action::DeleteRandomLine => plan_delete_line(segment, &mut rng),
        Action::InsertRandomLine => plan_insert_line(segment, &mut rng),
        Action::DeleteFnBodiesIncremental => {
            plan_delete_bodies(segment, BodyScope::Incremental, state, segment_index, action, summarizer)
        }
        Action::DeleteFnBodiesKeepLast => {
            plan_delete_bodies(segment, BodyScope::AllButLast, state, segment_index, action, summarizer)
        }
        Action::DeleteFnBodiesAll => {
            plan_delete_bodies(segment, BodyScope::All, state, segment_index, action, summarizer)
        }
        Action::DeleteFunctionsIncremental => plan_delete_function(segment),
        Action::RenameFunctions => plan_rename(segment, IdentKind::Function, state, &mut rng),
        Action::RenameVariables => plan_rename(segment, IdentKind::Variable, state, &mut rng),
        Action::RenameArguments => plan_rename(segment, IdentKind::Argument, state, &mut rng),
        Action::StopManipulations => unreachable!(),
    };

    let Some(plan) = plan else {
        return Ok(ApplyOutcome { state: next, applied: false });
    };

    let (new_segment, regions) = apply_span_edits(segment, &plan.edits);
    let old_full = state.current_text();
    let seg_off = state.segment_offset(segment_index);
    let cursor_old = cursor_to_offset(&old_full, state.cursor);

    next.segments[segment_index] = new_segment;
    let new_full = next.segments.concat();

    // Remap the cursor through the segment edit, in global coordinates.
    let cursor_new = if cursor_old < seg_off {
        cursor_old
    } else if cursor_old >= seg_off + segment.len() {
        (cursor_old as isize + next.segments[segment_index].len() as isize
            - segment.len() as isize) as usize
    } else {
        seg_off + remap_offset(&regions, cursor_old - seg_off)
    };
    next.cursor = clamp_cursor(&new_full, offset_to_cursor(&new_full, cursor_new));

    for (original, random, kind) in plan.renames {
        next.translation.insert(original, random, kind);
    }
    if let Some(cursor_value) = plan.incremental_cursor {
        next.incremental_cursors.insert((segment_index, action.index()), cursor_value);
    }

    Ok(ApplyOutcome { state: next, applied: true })
}

struct EditPlan {
    edits: Vec<SpanEdit>,
    renames: Vec<(String, String, IdentKind)>,
    incremental_cursor: Option<usize>,
}

impl EditPlan {
    fn edits_only(edits: Vec<SpanEdit>) -> Option<EditPlan> {
        Some(EditPlan { edits, renames: Vec::new(), incremental_cursor: None })
    }
}

fn random_lowercase(rng: &mut ChaCha8Rng, len: usize) -> String {
    (0..len).map(|_| (b'a' + rng.gen_range(0..26u8)) as char).collect()
}

fn plan_replace_pii(segment: &str, rng: &mut ChaCha8Rng) -> Option<EditPlan> {
    let spans = code::detect_pii(segment);
    if spans.is_empty() {
        return None;
    }
    let edits = spans
        .iter()
        .map(|p| SpanEdit { span: p.span, replacement: random_lowercase(rng, PII_REPLACEMENT_LEN) })
        .collect();
    EditPlan::edits_only(edits)
}

/// Content spans of the segment's lines (line terminators excluded) plus
/// whether the segment ends mid-line.
fn content_lines(segment: &str) -> Vec<Span> {
    line_spans(segment)
        .into_iter()
        .filter(|s| !s.is_empty() || segment.is_empty())
        .map(|s| {
            let text = s.slice(segment);
            Span::new(s.start, s.end - if text.ends_with('\n') { 1 } else { 0 })
        })
        .collect()
}

fn plan_swap_lines(segment: &str, rng: &mut ChaCha8Rng) -> Option<EditPlan> {
    let lines = content_lines(segment);
    if lines.len() < 2 {
        return None;
    }
    let a = rng.gen_range(0..lines.len());
    let mut b = rng.gen_range(0..lines.len() - 1);
    if b >= a {
        b += 1;
    }
    let (first, second) = if a < b { (a, b) } else { (b, a) };
    let edits = alloc::vec![
        SpanEdit { span: lines[first], replacement: lines[second].slice(segment).to_string() },
        SpanEdit { span: lines[second], replacement: lines[first].slice(segment).to_string() },
    ];
    EditPlan::edits_only(edits)
}

fn plan_delete_line(segment: &str, rng: &mut ChaCha8Rng) -> Option<EditPlan> {
    let lines: Vec<Span> = line_spans(segment).into_iter().filter(|s| !s.is_empty()).collect();
    if lines.is_empty() {
        return None;
    }
    let k = rng.gen_range(0..lines.len());
    EditPlan::edits_only(alloc::vec![SpanEdit { span: lines[k], replacement: String::new() }])
}

fn plan_insert_line(segment: &str, rng: &mut ChaCha8Rng) -> Option<EditPlan> {
    let statement = INSERT_POOL[rng.gen_range(0..INSERT_POOL.len())];
    let lines = line_spans(segment);
    let n_lines = lines.iter().filter(|s| !s.is_empty()).count();
    let k = rng.gen_range(0..=n_lines);

    // Match the indentation of the line being displaced (or the previous one
    // at the end) so block structure survives where possible.
    let indent_source = if k < n_lines { Some(lines[k]) } else { lines.last().copied() };
    let indent: String = indent_source
        .map(|s| s.slice(segment).chars().take_while(|c| *c == ' ' || *c == '\t').collect())
        .unwrap_or_default();

    let (at, replacement) = if k < n_lines {
        (lines[k].start, alloc::format!("{indent}{statement}\n"))
    } else if segment.ends_with('\n') || segment.is_empty() {
        (segment.len(), alloc::format!("{indent}{statement}\n"))
    } else {
        (segment.len(), alloc::format!("\n{indent}{statement}"))
    };
    EditPlan::edits_only(alloc::vec![SpanEdit { span: Span::new(at, at), replacement }])
}

enum BodyScope {
    Incremental,
    AllButLast,
    All,
}

fn body_indent(segment: &str, body: Span) -> String {
    body.slice(segment)
        .lines()
        .find(|l| !l.trim().is_empty())
        .map(|l| l.chars().take_while(|c| *c == ' ' || *c == '\t').collect())
        .unwrap_or_else(|| "    ".to_string())
}

fn body_is_elided(segment: &str, body: Span) -> bool {
    let text = body.slice(segment);
    text.trim().is_empty()
        || text.lines().all(|l| l.trim().is_empty() || l.trim_start().starts_with('#'))
}

fn plan_delete_bodies(
    segment: &str,
    scope: BodyScope,
    state: &PromptState,
    segment_index: usize,
    action: Action,
    summarizer: &dyn Summarizer,
) -> Option<EditPlan> {
    let info = parse_segment(segment);
    if info.functions.is_empty() {
        return None;
    }
    let targets: Vec<&code::FunctionSpan> = match scope {
        BodyScope::All => info.functions.iter().collect(),
        BodyScope::AllButLast => {
            info.functions.iter().take(info.functions.len().saturating_sub(1)).collect()
        }
        BodyScope::Incremental => {
            let progress = state
                .incremental_cursors
                .get(&(segment_index, action.index()))
                .copied()
                .unwrap_or(0);
            alloc::vec![info
                .functions
                .iter()
                .find(|f| f.ordinal >= progress && !body_is_elided(segment, f.body_span))?]
        }
    };

    let mut edits = Vec::new();
    let mut last_ordinal = 0;
    for f in &targets {
        if body_is_elided(segment, f.body_span) {
            continue;
        }
        let indent = body_indent(segment, f.body_span);
        let comment = summarize_function_body(f.body_span.slice(segment), summarizer);
        edits.push(SpanEdit {
            span: f.body_span,
            replacement: alloc::format!("{indent}{comment}\n"),
        });
        last_ordinal = f.ordinal;
    }
    if edits.is_empty() {
        return None;
    }
    let incremental_cursor =
        matches!(scope, BodyScope::Incremental).then_some(last_ordinal + 1);
    Some(EditPlan { edits, renames: Vec::new(), incremental_cursor })
}

fn plan_delete_function(segment: &str) -> Option<EditPlan> {
    let info = parse_segment(segment);
    let f = info.functions.first()?;
    let span = Span::new(f.signature_span.start, f.body_span.end.max(f.signature_span.end));
    Some(EditPlan {
        edits: alloc::vec![SpanEdit { span, replacement: String::new() }],
        renames: Vec::new(),
        incremental_cursor: Some(f.ordinal + 1),
    })
}

/// Random identifier: a letter followed by letters/digits, checked against
/// the original prompt's identifiers and all existing random names.
fn fresh_random_name(
    rng: &mut ChaCha8Rng,
    forbidden: &BTreeSet<String>,
    translation: &TranslationMap,
) -> String {
    const LETTERS: &[u8] = b"abcdefghijklmnopqrstuvwxyz";
    const TAIL: &[u8] = b"abcdefghijklmnopqrstuvwxyz0123456789";
    loop {
        let mut name = String::with_capacity(RANDOM_NAME_LEN);
        name.push(LETTERS[rng.gen_range(0..LETTERS.len())] as char);
        for _ in 1..RANDOM_NAME_LEN {
            name.push(TAIL[rng.gen_range(0..TAIL.len())] as char);
        }
        if !forbidden.contains(&name)
            && !translation.is_random_name(&name)
            && translation.random_of(&name).is_none()
        {
            return name;
        }
    }
}

fn original_identifier_set(original_text: &str) -> BTreeSet<String> {
    lex(original_text)
        .into_iter()
        .filter(|t| t.kind == TokenKind::Ident)
        .map(|t| t.text(original_text).to_string())
        .collect()
}

fn plan_rename(
    segment: &str,
    kind: IdentKind,
    state: &PromptState,
    rng: &mut ChaCha8Rng,
) -> Option<EditPlan> {
    let info = parse_segment(segment);
    let forbidden = original_identifier_set(&state.original_text);
    let mut edits: Vec<SpanEdit> = Vec::new();
    let mut renames: Vec<(String, String, IdentKind)> = Vec::new();

    for ident in info.identifiers.iter().filter(|i| i.kind == kind) {
        // Already-random names (left behind by earlier renames after
        // propagation) stay put so translation remains a single-step inverse.
        if state.translation.is_random_name(&ident.name) {
            continue;
        }
        let random = match state.translation.random_of(&ident.name) {
            Some(existing) => existing.to_string(),
            None => {
                let name = fresh_random_name(rng, &forbidden, &state.translation);
                renames.push((ident.name.clone(), name.clone(), kind));
                name
            }
        };
        for span in &ident.occurrences {
            edits.push(SpanEdit { span: *span, replacement: random.clone() });
        }
    }
    if edits.is_empty() {
        return None;
    }
    edits.sort_by_key(|e| e.span.start);
    Some(EditPlan { edits, renames, incremental_cursor: None })
}

/// Replaces every occurrence of every mapped original name, in every segment,
/// with its random name. Identifier occurrences only: string literals,
/// comments and attribute accesses are untouched. Idempotent.
pub fn propagate_renames(state: &PromptState) -> PromptState {
    if state.translation.is_empty() {
        return state.clone();
    }
    let mut next = state.clone();
    let old_full = state.current_text();
    let cursor_old = cursor_to_offset(&old_full, state.cursor);
    let mut cursor_new = cursor_old;
    let mut seg_off = 0usize;
    let mut new_total_delta = 0isize;

    for (i, segment) in state.segments.iter().enumerate() {
        let edits = rename_edits(segment, &state.translation);
        if !edits.is_empty() {
            let (new_segment, regions) = apply_span_edits(segment, &edits);
            if cursor_old >= seg_off && cursor_old < seg_off + segment.len() {
                cursor_new = (seg_off as isize + new_total_delta) as usize
                    + remap_offset(&regions, cursor_old - seg_off);
            }
            new_total_delta += new_segment.len() as isize - segment.len() as isize;
            next.segments[i] = new_segment;
        } else if cursor_old >= seg_off && cursor_old < seg_off + segment.len() {
            cursor_new = (cursor_old as isize + new_total_delta) as usize;
        }
        seg_off += segment.len();
    }
    if cursor_old >= seg_off {
        cursor_new = (cursor_old as isize + new_total_delta) as usize;
    }
    let new_full = next.segments.concat();
    next.cursor = clamp_cursor(&new_full, offset_to_cursor(&new_full, cursor_new));
    next
}

fn rename_edits(segment: &str, translation: &TranslationMap) -> Vec<SpanEdit> {
    let toks = lex(segment);
    let mut edits = Vec::new();
    for (i, tok) in toks.iter().enumerate() {
        if tok.kind != TokenKind::Ident {
            continue;
        }
        if i > 0 && toks[i - 1].kind == TokenKind::Punct && toks[i - 1].span.slice(segment) == "." {
            continue;
        }
        if let Some(random) = translation.random_of(tok.span.slice(segment)) {
            edits.push(SpanEdit { span: tok.span, replacement: random.to_string() });
        }
    }
    edits
}

/// Maps every random name in a suggestion back to its original, whole
/// identifier tokens only.
pub fn translate_suggestion(suggestion: &str, translation: &TranslationMap) -> String {
    if translation.is_empty() {
        return suggestion.to_string();
    }
    let toks = lex(suggestion);
    let edits: Vec<SpanEdit> = toks
        .iter()
        .filter(|t| t.kind == TokenKind::Ident)
        .filter_map(|t| {
            translation
                .original_of(t.span.slice(suggestion))
                .map(|orig| SpanEdit { span: t.span, replacement: orig.to_string() })
        })
        .collect();
    apply_span_edits(suggestion, &edits).0
}

/// The evaluation baseline: uniformly random non-stop actions for a uniform
/// count in `[1, time_limit]`, then stop.
pub fn random_action_sequence(rng_seed: u64, time_limit: u32) -> Vec<Action> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let count = rng.gen_range(1..=time_limit.max(1));
    let mut actions: Vec<Action> = (0..count)
        .map(|_| Action::ALL[rng.gen_range(0..Action::COUNT - 1)])
        .collect();
    actions.push(Action::StopManipulations);
    actions
}
