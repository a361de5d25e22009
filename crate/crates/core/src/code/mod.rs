//! Structural view of source-code prompts: tokenization, error-tolerant
//! parsing into line/function/identifier spans, PII detection and
//! token-balanced segmentation.

pub(crate) mod lex;
mod parse;
mod pii;
mod split;

pub use lex::{count_tokens, lex, tokenize, LexToken, TokenKind};
pub use lex::{PYTHON_BUILTINS, PYTHON_KEYWORDS};
pub use parse::parse_segment;
pub use pii::detect_pii;
pub use split::{split_prompt, SplitError};

use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

/// Half-open byte range into the text it was produced from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    pub fn contains(&self, other: &Span) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        self.start < other.end && other.start < self.end
    }

    pub fn slice<'a>(&self, text: &'a str) -> &'a str {
        &text[self.start..self.end]
    }
}

/// One intercepted prompt with cursor and timing metadata.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptRecord {
    pub session_id: String,
    pub file_path: String,
    pub text: String,
    /// 0-based line index of the cursor in `text`.
    pub cursor_line: usize,
    /// 0-based column (byte offset within the cursor line).
    pub cursor_col: usize,
    /// Milliseconds since epoch; non-decreasing within a session.
    pub timestamp: u64,
}

/// Identifier role, as far as the error-tolerant parser can tell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum IdentKind {
    Function,
    Variable,
    Argument,
}

/// PII category assigned by [`detect_pii`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PiiCategory {
    Name,
    Email,
    ApiKey,
    UrlSecret,
}

/// A `def` block found in a segment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionSpan {
    pub name: String,
    /// From the start of the `def` line through the end of the signature line.
    pub signature_span: Span,
    /// Lines indented under the signature; empty when the def is truncated.
    pub body_span: Span,
    /// 0-based position among the segment's functions.
    pub ordinal: usize,
}

/// All occurrences of one classified identifier.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Identifier {
    pub name: String,
    pub kind: IdentKind,
    /// Sorted, non-overlapping occurrence spans.
    pub occurrences: Vec<Span>,
}

/// A detected PII region.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PiiSpan {
    pub span: Span,
    pub category: PiiCategory,
}

/// Best-effort structural view of a prompt segment. Spans index the original
/// buffer, so reserializing them in order reproduces the input exactly.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntaxInfo {
    pub lines: Vec<Span>,
    pub functions: Vec<FunctionSpan>,
    pub identifiers: Vec<Identifier>,
    pub pii_spans: Vec<PiiSpan>,
}

/// Byte spans of each line, line terminators included. A trailing newline
/// yields a final zero-length span so cursor positions "on the fresh line"
/// stay addressable; the empty text has zero lines.
pub fn line_spans(text: &str) -> Vec<Span> {
    if text.is_empty() {
        return Vec::new();
    }
    let mut spans = Vec::new();
    let mut start = 0;
    for (i, b) in text.bytes().enumerate() {
        if b == b'\n' {
            spans.push(Span::new(start, i + 1));
            start = i + 1;
        }
    }
    spans.push(Span::new(start, text.len()));
    spans
}

/// Number of cursor-addressable lines in `text` (see [`line_spans`]).
pub fn line_count(text: &str) -> usize {
    line_spans(text).len()
}
