//! Error-tolerant structural parser for Python-syntax prompt segments.
//!
//! Prompts are captured mid-keystroke, so the input is routinely truncated or
//! syntactically broken. The parser degrades instead of failing: anything it
//! cannot make sense of stays a plain line with no functions or identifiers.

use super::lex::{is_keyword_or_builtin, lex, LexToken, TokenKind};
use super::{detect_pii, line_spans, FunctionSpan, IdentKind, Identifier, Span, SyntaxInfo};
use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

/// Parses one prompt segment into its structural view. Deterministic for
/// identical input; never fails.
pub fn parse_segment(text: &str) -> SyntaxInfo {
    let lines = line_spans(text);
    let toks = lex(text);
    let functions = find_functions(text, &lines, &toks);
    let identifiers = classify_identifiers(text, &toks, &functions);
    let pii_spans = detect_pii(text);
    SyntaxInfo { lines, functions, identifiers, pii_spans }
}

fn indent_of(text: &str, line: Span) -> usize {
    line.slice(text)
        .bytes()
        .take_while(|b| *b == b' ' || *b == b'\t')
        .count()
}

fn line_is_blank(text: &str, line: Span) -> bool {
    line.slice(text).trim().is_empty()
}

fn line_index_of(lines: &[Span], offset: usize) -> usize {
    match lines.binary_search_by(|s| {
        if offset < s.start {
            core::cmp::Ordering::Greater
        } else if offset >= s.end {
            core::cmp::Ordering::Less
        } else {
            core::cmp::Ordering::Equal
        }
    }) {
        Ok(i) => i,
        Err(i) => i.min(lines.len().saturating_sub(1)),
    }
}

fn find_functions(text: &str, lines: &[Span], toks: &[LexToken]) -> Vec<FunctionSpan> {
    let mut functions: Vec<FunctionSpan> = Vec::new();
    let mut t = 0;
    while t < toks.len() {
        let tok = toks[t];
        if tok.kind != TokenKind::Keyword || tok.text(text) != "def" {
            t += 1;
            continue;
        }
        // Skip defs nested inside an already-recorded function body.
        if functions
            .last()
            .is_some_and(|f| tok.span.start < f.body_span.end && !f.body_span.is_empty())
        {
            t += 1;
            continue;
        }
        match scan_def(text, lines, toks, t) {
            Some((func, next_t)) => {
                functions.push(func);
                t = next_t;
            }
            None => t += 1,
        }
    }
    for (i, f) in functions.iter_mut().enumerate() {
        f.ordinal = i;
    }
    functions
}

/// Tries to read a full `def name(...) ... :` starting at token index `t`.
/// Returns the span plus the token index to resume scanning from.
fn scan_def(
    text: &str,
    lines: &[Span],
    toks: &[LexToken],
    t: usize,
) -> Option<(FunctionSpan, usize)> {
    let name_tok = toks.get(t + 1)?;
    if name_tok.kind != TokenKind::Ident {
        return None;
    }
    let open = toks.get(t + 2)?;
    if open.kind != TokenKind::Punct || open.text(text) != "(" {
        return None;
    }
    // Find the matching close paren, then the signature-terminating colon.
    let mut depth = 0usize;
    let mut k = t + 2;
    let mut close = None;
    while k < toks.len() {
        if toks[k].kind == TokenKind::Punct {
            match toks[k].text(text) {
                "(" | "[" | "{" => depth += 1,
                ")" | "]" | "}" => {
                    depth = depth.saturating_sub(1);
                    if depth == 0 {
                        close = Some(k);
                        break;
                    }
                }
                _ => {}
            }
        }
        k += 1;
    }
    let close = close?;
    let mut colon = None;
    for j in close + 1..toks.len() {
        match (toks[j].kind, toks[j].text(text)) {
            (TokenKind::Punct, ":") => {
                colon = Some(j);
                break;
            }
            (TokenKind::Comment, _) => continue,
            // Return-type annotation tokens are allowed between ) and :
            (TokenKind::Punct, "-") | (TokenKind::Punct, ">") => continue,
            (TokenKind::Ident, _) | (TokenKind::Keyword, _) | (TokenKind::Str, _) => continue,
            (TokenKind::Punct, "[") | (TokenKind::Punct, "]") | (TokenKind::Punct, ",")
            | (TokenKind::Punct, ".") => continue,
            _ => return None,
        }
    }
    let colon = colon?;

    let def_line = line_index_of(lines, toks[t].span.start);
    let colon_line = line_index_of(lines, toks[colon].span.start);
    let def_indent = indent_of(text, lines[def_line]);
    let sig_span = Span::new(lines[def_line].start, lines[colon_line].end);

    // Body: following lines indented deeper than the def, blank lines allowed
    // while deeper lines keep coming.
    let mut body_end_line = None;
    let mut li = colon_line + 1;
    while li < lines.len() {
        if line_is_blank(text, lines[li]) {
            li += 1;
            continue;
        }
        if indent_of(text, lines[li]) > def_indent {
            body_end_line = Some(li);
            li += 1;
        } else {
            break;
        }
    }
    let body_span = match body_end_line {
        Some(last) => Span::new(sig_span.end, lines[last].end),
        None => Span::new(sig_span.end, sig_span.end),
    };

    let func = FunctionSpan {
        name: name_tok.text(text).to_string(),
        signature_span: sig_span,
        body_span,
        ordinal: 0,
    };
    Some((func, colon + 1))
}

/// Parameter names declared in a function signature.
fn signature_params(text: &str, toks: &[LexToken], sig: Span) -> Vec<String> {
    let mut params = Vec::new();
    let mut depth = 0usize;
    let mut expecting = false;
    // skip_default: inside `= value` or `: annotation` until the next comma at depth 1
    let mut skip_until_comma = false;
    for tok in toks.iter().filter(|t| sig.contains(&t.span)) {
        let s = tok.text(text);
        if tok.kind == TokenKind::Punct {
            match s {
                "(" | "[" | "{" => {
                    depth += 1;
                    if depth == 1 {
                        expecting = true;
                        skip_until_comma = false;
                    }
                }
                ")" | "]" | "}" => depth = depth.saturating_sub(1),
                "," if depth == 1 => {
                    expecting = true;
                    skip_until_comma = false;
                }
                "=" | ":" if depth == 1 => skip_until_comma = true,
                "*" => {}
                _ => {}
            }
            continue;
        }
        if depth == 1 && expecting && !skip_until_comma && tok.kind == TokenKind::Ident {
            let name = s.to_string();
            if name != "self" && name != "cls" {
                params.push(name);
            }
            expecting = false;
        }
    }
    params
}

/// Two passes: classify names (function > argument > variable), then gather
/// every identifier-token occurrence of each classified name. Attribute
/// accesses (`obj.attr`) and string/comment contents never count.
fn classify_identifiers(
    text: &str,
    toks: &[LexToken],
    functions: &[FunctionSpan],
) -> Vec<Identifier> {
    let mut kinds: BTreeMap<String, IdentKind> = BTreeMap::new();

    let classify = |name: &str, kind: IdentKind, kinds: &mut BTreeMap<String, IdentKind>| {
        if is_keyword_or_builtin(name) {
            return;
        }
        let entry = kinds.entry(name.to_string()).or_insert(kind);
        // Function beats argument beats variable.
        if kind < *entry {
            *entry = kind;
        }
    };

    for f in functions {
        classify(&f.name, IdentKind::Function, &mut kinds);
        for p in signature_params(text, toks, f.signature_span) {
            classify(&p, IdentKind::Argument, &mut kinds);
        }
    }

    // Assignment targets, loop targets, `as` bindings, walrus, global/nonlocal.
    let mut depth_at: Vec<usize> = Vec::with_capacity(toks.len());
    let mut starts_line: Vec<bool> = Vec::with_capacity(toks.len());
    let mut depth = 0usize;
    let mut prev_code_end: Option<usize> = None;
    for tok in toks {
        starts_line.push(match prev_code_end {
            None => true,
            Some(end) => text[end..tok.span.start].contains('\n'),
        });
        if tok.kind != TokenKind::Comment {
            prev_code_end = Some(tok.span.end);
        }
        if tok.kind == TokenKind::Punct {
            match tok.span.slice(text) {
                "(" | "[" | "{" => {
                    depth_at.push(depth);
                    depth += 1;
                    continue;
                }
                ")" | "]" | "}" => {
                    depth = depth.saturating_sub(1);
                    depth_at.push(depth);
                    continue;
                }
                _ => {}
            }
        }
        depth_at.push(depth);
    }

    let code_tok = |i: usize| -> Option<&LexToken> {
        toks.get(i).filter(|t| !matches!(t.kind, TokenKind::Comment))
    };
    let punct_text = |i: usize| -> &str {
        match code_tok(i) {
            Some(t) if t.kind == TokenKind::Punct => t.span.slice(text),
            _ => "",
        }
    };

    for i in 0..toks.len() {
        let tok = toks[i];
        if tok.kind != TokenKind::Ident {
            // for/as/global/nonlocal introduce bindings after the keyword
            if tok.kind == TokenKind::Keyword {
                match tok.span.slice(text) {
                    "for" => {
                        // idents between `for` and `in` are loop targets
                        let mut j = i + 1;
                        while let Some(t) = toks.get(j) {
                            let s = t.span.slice(text);
                            if t.kind == TokenKind::Keyword {
                                if s == "in" {
                                    break;
                                }
                                j += 1;
                                continue;
                            }
                            if t.kind == TokenKind::Ident && punct_text(j + 1) != "." {
                                classify(s, IdentKind::Variable, &mut kinds);
                            }
                            if t.kind == TokenKind::Punct && !matches!(s, "," | "(" | ")" | "[" | "]") {
                                break;
                            }
                            j += 1;
                        }
                    }
                    "as" | "global" | "nonlocal" => {
                        let mut j = i + 1;
                        while let Some(t) = toks.get(j) {
                            match t.kind {
                                TokenKind::Ident => {
                                    classify(t.span.slice(text), IdentKind::Variable, &mut kinds);
                                    j += 1;
                                    if punct_text(j) == "," {
                                        j += 1;
                                        continue;
                                    }
                                    break;
                                }
                                _ => break,
                            }
                        }
                    }
                    _ => {}
                }
            }
            continue;
        }
        if depth_at[i] != 0 {
            // Walrus bindings can appear at any depth.
            if punct_text(i + 1) == ":" && punct_text(i + 2) == "=" {
                classify(tok.span.slice(text), IdentKind::Variable, &mut kinds);
            }
            continue;
        }
        if i > 0 && punct_text(i.wrapping_sub(1)) == "." {
            continue;
        }
        // `x = ...`, `x += ...`, `x: T = ...`, `x := ...`, tuple `a, b = ...`.
        // Subscript/attribute targets (obj[k] = v, obj.a = v) rebind the base
        // object, not a fresh name, so they are skipped.
        let j = i + 1;
        let is_assign = match punct_text(j) {
            "=" => {
                punct_text(j + 1) != "="
                    && !matches!(punct_text(j.wrapping_sub(1)), "=" | "!" | "<" | ">")
            }
            "+" | "-" | "*" | "/" | "%" | "&" | "|" | "^" => punct_text(j + 1) == "=",
            "," if starts_line[i] => tuple_target_ends_with_assign(text, toks, j),
            ":" if punct_text(j + 1) == "=" => true,
            ":" if starts_line[i] => annotated_assignment(text, toks, &starts_line, j),
            _ => false,
        };
        if is_assign {
            classify(tok.span.slice(text), IdentKind::Variable, &mut kinds);
        }
    }

    // Occurrence pass.
    let mut out: BTreeMap<String, Identifier> = BTreeMap::new();
    for (i, tok) in toks.iter().enumerate() {
        if tok.kind != TokenKind::Ident {
            continue;
        }
        if i > 0
            && toks[i - 1].kind == TokenKind::Punct
            && toks[i - 1].span.slice(text) == "."
        {
            continue;
        }
        let name = tok.span.slice(text);
        if let Some(kind) = kinds.get(name) {
            out.entry(name.to_string())
                .or_insert_with(|| Identifier {
                    name: name.to_string(),
                    kind: *kind,
                    occurrences: Vec::new(),
                })
                .occurrences
                .push(tok.span);
        }
    }
    out.into_values().collect()
}

/// Scans past a `x: annotation` colon at token index `colon` looking for a
/// single `=` before the statement's line ends.
fn annotated_assignment(
    text: &str,
    toks: &[LexToken],
    starts_line: &[bool],
    colon: usize,
) -> bool {
    for j in colon + 1..toks.len().min(colon + 9) {
        if starts_line[j] {
            return false;
        }
        if toks[j].kind == TokenKind::Punct && toks[j].span.slice(text) == "=" {
            return toks
                .get(j + 1)
                .map(|n| n.span.slice(text) != "=")
                .unwrap_or(true);
        }
    }
    false
}

/// After `a, b` at statement depth 0, does the target list end in `=`?
fn tuple_target_ends_with_assign(text: &str, toks: &[LexToken], comma_idx: usize) -> bool {
    let mut j = comma_idx;
    let mut steps = 0;
    while let Some(t) = toks.get(j) {
        if steps > 16 {
            return false;
        }
        match (t.kind, t.span.slice(text)) {
            (TokenKind::Punct, "=") => {
                return toks
                    .get(j + 1)
                    .map(|n| n.span.slice(text) != "=")
                    .unwrap_or(true)
            }
            (TokenKind::Punct, ",") | (TokenKind::Ident, _) => {
                j += 1;
                steps += 1;
            }
            _ => return false,
        }
    }
    false
}
