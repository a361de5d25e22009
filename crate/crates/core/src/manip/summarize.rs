//! Function-body summarization for the body-deletion actions. The built-in
//! rule summarizer keeps the pipeline model-free; a remote model can be
//! plugged in through [`Summarizer`].

use crate::code::{lex, TokenKind};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

pub const MAX_SUMMARY_CHARS: usize = 120;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SummarizeError {
    #[error("summarizer backend failed: {0}")]
    Backend(String),
}

pub trait Summarizer {
    fn summarize(&self, body_text: &str) -> Result<String, SummarizeError>;
}

impl<T: Summarizer + ?Sized> Summarizer for alloc::boxed::Box<T> {
    fn summarize(&self, body_text: &str) -> Result<String, SummarizeError> {
        (**self).summarize(body_text)
    }
}

impl<T: Summarizer + ?Sized> Summarizer for alloc::sync::Arc<T> {
    fn summarize(&self, body_text: &str) -> Result<String, SummarizeError> {
        (**self).summarize(body_text)
    }
}

/// Deterministic fallback: names the calls the body makes, the expression it
/// returns, or the variables it sets.
#[derive(Debug, Clone, Copy, Default)]
pub struct RuleSummarizer;

impl Summarizer for RuleSummarizer {
    fn summarize(&self, body_text: &str) -> Result<String, SummarizeError> {
        Ok(rule_summary(body_text))
    }
}

fn rule_summary(body: &str) -> String {
    let toks = lex(body);
    let mut calls: Vec<&str> = Vec::new();
    let mut assigns: Vec<&str> = Vec::new();
    let mut return_expr: Option<String> = None;

    for (i, tok) in toks.iter().enumerate() {
        match tok.kind {
            TokenKind::Ident => {
                let name = tok.span.slice(body);
                let next = toks.get(i + 1).map(|t| t.span.slice(body)).unwrap_or("");
                let prev_is_dot = i > 0 && toks[i - 1].span.slice(body) == ".";
                if next == "(" && !prev_is_dot && !calls.contains(&name) {
                    calls.push(name);
                } else if next == "="
                    && toks.get(i + 2).map(|t| t.span.slice(body)) != Some("=")
                    && !prev_is_dot
                    && !assigns.contains(&name)
                {
                    assigns.push(name);
                }
            }
            TokenKind::Keyword if tok.span.slice(body) == "return" && return_expr.is_none() => {
                let line_end = body[tok.span.end..]
                    .find('\n')
                    .map_or(body.len(), |p| tok.span.end + p);
                let expr = body[tok.span.end..line_end]
                    .split('#')
                    .next()
                    .unwrap_or("")
                    .split_whitespace()
                    .collect::<Vec<_>>()
                    .join(" ");
                if !expr.is_empty() {
                    return_expr = Some(expr);
                }
            }
            _ => {}
        }
    }

    let mut parts: Vec<String> = Vec::new();
    if !calls.is_empty() {
        let shown = calls.iter().take(3).copied().collect::<Vec<_>>().join(", ");
        parts.push(alloc::format!("calls {shown}"));
    }
    if let Some(expr) = return_expr {
        parts.push(alloc::format!("returns {expr}"));
    }
    if parts.is_empty() && !assigns.is_empty() {
        let shown = assigns.iter().take(3).copied().collect::<Vec<_>>().join(", ");
        parts.push(alloc::format!("sets {shown}"));
    }
    if parts.is_empty() {
        return "no-op".to_string();
    }
    parts.join("; ")
}

/// Produces the single comment line that replaces a function body. The
/// summarizer's text is flattened to one line and capped at
/// [`MAX_SUMMARY_CHARS`].
pub fn summarize_function_body(body_text: &str, summarizer: &dyn Summarizer) -> String {
    let raw = summarizer
        .summarize(body_text)
        .unwrap_or_else(|_| "no-op".to_string());
    let first_line = raw.lines().next().unwrap_or("").trim();
    let mut comment = if first_line.starts_with('#') {
        first_line.to_string()
    } else {
        alloc::format!("# {first_line}")
    };
    if comment.chars().count() > MAX_SUMMARY_CHARS {
        comment = comment.chars().take(MAX_SUMMARY_CHARS).collect();
    }
    comment
}
