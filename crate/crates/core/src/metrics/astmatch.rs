//! Structural similarity: the fraction of reference subtrees (identifier
//! leaves anonymized) that also appear in the hypothesis tree.
//!
//! The tree comes from the same error-tolerant view as the parser: statements
//! grouped by indentation, each statement labeled by its leading keyword or
//! assignment shape, with anonymized token leaves.

use crate::code::{lex, LexToken, TokenKind};
use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

struct Node {
    label: String,
    children: Vec<Node>,
}

/// Fraction of reference subtrees present in the hypothesis (multiset
/// semantics, nodes with children only). Both-empty scores 1.
pub fn ast_match(reference: &str, hypothesis: &str) -> f64 {
    let ref_subtrees = subtree_counts(&build_tree(reference));
    let hyp_subtrees = subtree_counts(&build_tree(hypothesis));
    let total: u64 = ref_subtrees.values().sum();
    if total == 0 {
        return if hyp_subtrees.is_empty() { 1.0 } else { 0.0 };
    }
    let matched: u64 = ref_subtrees
        .iter()
        .map(|(s, c)| (*c).min(hyp_subtrees.get(s).copied().unwrap_or(0)))
        .sum();
    matched as f64 / total as f64
}

fn leaf_label(src: &str, tok: &LexToken) -> Option<String> {
    match tok.kind {
        TokenKind::Ident => Some("id".to_string()),
        TokenKind::Number => Some("num".to_string()),
        TokenKind::Str => Some("str".to_string()),
        TokenKind::Keyword => Some(tok.text(src).to_string()),
        TokenKind::Punct => Some(tok.text(src).to_string()),
        TokenKind::Comment => None,
    }
}

fn statement_label(src: &str, toks: &[&LexToken]) -> String {
    if let Some(first) = toks.first() {
        if first.kind == TokenKind::Keyword {
            return first.text(src).to_string();
        }
        let mut depth = 0usize;
        for t in toks {
            if t.kind == TokenKind::Punct {
                match t.text(src) {
                    "(" | "[" | "{" => depth += 1,
                    ")" | "]" | "}" => depth = depth.saturating_sub(1),
                    "=" if depth == 0 => return "assign".to_string(),
                    _ => {}
                }
            }
        }
    }
    "expr".to_string()
}

/// Groups physical lines into an indentation tree of statement nodes.
fn build_tree(src: &str) -> Node {
    let toks = lex(src);
    // (indent, tokens) per non-blank line, comments skipped
    let mut lines: Vec<(usize, Vec<&LexToken>)> = Vec::new();
    let mut line_starts: Vec<usize> = Vec::new();
    {
        let mut start = 0;
        for (i, b) in src.bytes().enumerate() {
            if b == b'\n' {
                line_starts.push(start);
                start = i + 1;
            }
        }
        line_starts.push(start);
    }
    for (li, &ls) in line_starts.iter().enumerate() {
        let le = line_starts.get(li + 1).copied().unwrap_or(src.len() + 1) - 1;
        let le = le.min(src.len());
        let line_toks: Vec<&LexToken> = toks
            .iter()
            .filter(|t| t.span.start >= ls && t.span.start < le && t.kind != TokenKind::Comment)
            .collect();
        if line_toks.is_empty() {
            continue;
        }
        let indent = src[ls..le]
            .bytes()
            .take_while(|b| *b == b' ' || *b == b'\t')
            .count();
        lines.push((indent, line_toks));
    }

    let mut root = Node { label: "module".to_string(), children: Vec::new() };
    build_block(src, &lines, 0, &mut root, 0);
    root
}

/// Consumes lines at one indent level into `parent`; deeper lines become a
/// nested block under the previous statement. Returns the next line index.
fn build_block(
    src: &str,
    lines: &[(usize, Vec<&LexToken>)],
    mut i: usize,
    parent: &mut Node,
    indent: usize,
) -> usize {
    while i < lines.len() {
        let (li_indent, ref toks) = lines[i];
        if li_indent < indent {
            return i;
        }
        if li_indent > indent {
            // deeper block belongs to the last statement added
            let mut block = Node { label: "block".to_string(), children: Vec::new() };
            i = build_block(src, lines, i, &mut block, li_indent);
            match parent.children.last_mut() {
                Some(stmt) => stmt.children.push(block),
                None => parent.children.push(block),
            }
            continue;
        }
        let mut stmt = Node { label: statement_label(src, toks), children: Vec::new() };
        for t in toks {
            if let Some(label) = leaf_label(src, t) {
                stmt.children.push(Node { label, children: Vec::new() });
            }
        }
        parent.children.push(stmt);
        i += 1;
    }
    i
}

fn serialize(node: &Node, out: &mut String) {
    out.push_str(&node.label);
    if !node.children.is_empty() {
        out.push('(');
        for (i, c) in node.children.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            serialize(c, out);
        }
        out.push(')');
    }
}

/// Multiset of serialized subtrees rooted at every internal node.
fn subtree_counts(root: &Node) -> BTreeMap<String, u64> {
    let mut counts = BTreeMap::new();
    collect(root, &mut counts);
    counts
}

fn collect(node: &Node, counts: &mut BTreeMap<String, u64>) {
    if !node.children.is_empty() {
        let mut s = String::new();
        serialize(node, &mut s);
        *counts.entry(s).or_insert(0) += 1;
    }
    for c in &node.children {
        collect(c, counts);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_code_scores_one() {
        let s = "def f(a):\n    return a\n";
        assert!((ast_match(s, s) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn renamed_identifiers_score_one() {
        // 3-line snippet; every identifier renamed consistently.
        let reference = "def f(a):\n    b = a + 1\n    return b\n";
        let renamed = "def zz9qw(k1j2m):\n    p0o9i = k1j2m + 1\n    return p0o9i\n";
        assert!((ast_match(reference, renamed) - 1.0).abs() < 1e-12);

        // Hand enumeration: the two snippets must yield the same multiset.
        let r = subtree_counts(&build_tree(reference));
        let h = subtree_counts(&build_tree(renamed));
        assert_eq!(r, h);
        // module, def-stmt, block, assign, return = 5 internal nodes
        let total: u64 = r.values().sum();
        assert_eq!(total, 5);
    }

    #[test]
    fn unrelated_code_scores_near_zero() {
        let a = "def f(a):\n    return a\n";
        let b = "import os\nwhile running:\n    step([1, 2, 3])\n";
        assert!(ast_match(a, b) < 0.2);
    }

    #[test]
    fn empty_reference_cases() {
        assert_eq!(ast_match("", ""), 1.0);
        assert_eq!(ast_match("", "x = 1"), 0.0);
        assert_eq!(ast_match("x = 1", ""), 0.0);
    }

    #[test]
    fn partial_overlap_is_fractional() {
        let a = "x = 1\ny = 2\n";
        let b = "x = 1\nreturn y\n";
        let s = ast_match(a, b);
        assert!(s > 0.0 && s < 1.0, "{s}");
    }
}
