//! Two tokenizers: a dumb whitespace/punctuation splitter used for token
//! counting and n-gram metrics, and a Python-aware lexer that distinguishes
//! identifiers from string and comment contents.

use super::Span;
use alloc::vec::Vec;

/// Python reserved words. Never classified as identifiers.
pub const PYTHON_KEYWORDS: &[&str] = &[
    "False", "None", "True", "and", "as", "assert", "async", "await", "break", "class",
    "continue", "def", "del", "elif", "else", "except", "finally", "for", "from", "global",
    "if", "import", "in", "is", "lambda", "nonlocal", "not", "or", "pass", "raise", "return",
    "try", "while", "with", "yield",
];

/// Common builtins; together with [`PYTHON_KEYWORDS`] these form the keyword
/// set used by the weighted n-gram metric.
pub const PYTHON_BUILTINS: &[&str] = &[
    "abs", "all", "any", "bool", "bytearray", "bytes", "callable", "chr", "classmethod",
    "dict", "dir", "divmod", "enumerate", "filter", "float", "format", "frozenset", "getattr",
    "hasattr", "hash", "id", "input", "int", "isinstance", "issubclass", "iter", "len", "list",
    "map", "max", "min", "next", "object", "open", "ord", "pow", "print", "property", "range",
    "repr", "reversed", "round", "set", "setattr", "slice", "sorted", "staticmethod", "str",
    "sum", "super", "tuple", "type", "vars", "zip", "Exception", "ValueError", "TypeError",
    "KeyError", "IndexError", "RuntimeError", "StopIteration", "AttributeError", "NotImplementedError",
];

pub fn is_keyword(word: &str) -> bool {
    PYTHON_KEYWORDS.contains(&word)
}

pub fn is_keyword_or_builtin(word: &str) -> bool {
    PYTHON_KEYWORDS.contains(&word) || PYTHON_BUILTINS.contains(&word)
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// Splits on whitespace; each run of word characters is one token and every
/// other non-whitespace character stands alone. Deterministic and model-free.
pub fn tokenize(text: &str) -> Vec<&str> {
    let mut tokens = Vec::new();
    let mut word_start: Option<usize> = None;
    for (i, c) in text.char_indices() {
        if is_word_char(c) {
            if word_start.is_none() {
                word_start = Some(i);
            }
            continue;
        }
        if let Some(start) = word_start.take() {
            tokens.push(&text[start..i]);
        }
        if !c.is_whitespace() {
            tokens.push(&text[i..i + c.len_utf8()]);
        }
    }
    if let Some(start) = word_start {
        tokens.push(&text[start..]);
    }
    tokens
}

pub fn count_tokens(text: &str) -> usize {
    tokenize(text).len()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Ident,
    Keyword,
    Number,
    Str,
    Comment,
    Punct,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LexToken {
    pub kind: TokenKind,
    pub span: Span,
}

impl LexToken {
    pub fn text<'a>(&self, src: &'a str) -> &'a str {
        self.span.slice(src)
    }
}

/// Python-aware scan of `src`. Never fails: unterminated strings run to the
/// end of the buffer, unknown bytes become single-char puncts.
pub fn lex(src: &str) -> Vec<LexToken> {
    let bytes = src.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = src[i..].chars().next().unwrap();
        if c.is_whitespace() {
            i += c.len_utf8();
            continue;
        }
        if c == '#' {
            let end = src[i..].find('\n').map_or(src.len(), |p| i + p);
            toks.push(LexToken { kind: TokenKind::Comment, span: Span::new(i, end) });
            i = end;
            continue;
        }
        if c == '"' || c == '\'' {
            let end = scan_string(src, i, i);
            toks.push(LexToken { kind: TokenKind::Str, span: Span::new(i, end) });
            i = end;
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let start = i;
            let mut end = i;
            for (j, ch) in src[i..].char_indices() {
                if is_word_char(ch) {
                    end = i + j + ch.len_utf8();
                } else {
                    break;
                }
            }
            // String prefixes like r"...", f'...', rb"...".
            let word = &src[start..end];
            if word.len() <= 2
                && word.chars().all(|ch| matches!(ch, 'r' | 'R' | 'b' | 'B' | 'f' | 'F' | 'u' | 'U'))
                && matches!(bytes.get(end), Some(b'"') | Some(b'\''))
            {
                let str_end = scan_string(src, start, end);
                toks.push(LexToken { kind: TokenKind::Str, span: Span::new(start, str_end) });
                i = str_end;
                continue;
            }
            let kind = if is_keyword(word) { TokenKind::Keyword } else { TokenKind::Ident };
            toks.push(LexToken { kind, span: Span::new(start, end) });
            i = end;
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            let mut end = i;
            for (j, ch) in src[i..].char_indices() {
                if is_word_char(ch) || ch == '.' {
                    end = i + j + ch.len_utf8();
                } else {
                    break;
                }
            }
            toks.push(LexToken { kind: TokenKind::Number, span: Span::new(start, end) });
            i = end;
            continue;
        }
        toks.push(LexToken { kind: TokenKind::Punct, span: Span::new(i, i + c.len_utf8()) });
        i += c.len_utf8();
    }
    toks
}

/// Scans a string literal whose quote starts at `quote_pos` (prefix chars, if
/// any, start at `start`). Returns the end offset, saturating at EOF.
fn scan_string(src: &str, start: usize, quote_pos: usize) -> usize {
    let bytes = src.as_bytes();
    let quote = bytes[quote_pos];
    let raw = src[start..quote_pos].bytes().any(|b| b == b'r' || b == b'R');
    let triple = bytes.len() >= quote_pos + 3
        && bytes[quote_pos + 1] == quote
        && bytes[quote_pos + 2] == quote;
    let mut i = quote_pos + if triple { 3 } else { 1 };
    while i < bytes.len() {
        let b = bytes[i];
        if b == b'\\' && !raw {
            i += 2;
            continue;
        }
        if b == quote {
            if triple {
                if bytes.len() >= i + 3 && bytes[i + 1] == quote && bytes[i + 2] == quote {
                    return i + 3;
                }
            } else {
                return i + 1;
            }
        }
        if b == b'\n' && !triple {
            // Unterminated single-line string: stop at the newline.
            return i;
        }
        i += 1;
    }
    bytes.len()
}
