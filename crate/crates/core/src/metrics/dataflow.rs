//! Def-use similarity: variables are normalized by first-definition order so
//! consistent renames leave the edge set intact.

use crate::code::{lex, LexToken, TokenKind};
use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

/// Score plus the number of reference edges. Zero reference edges means the
/// score is neutral (1.0) and callers should renormalize weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DataflowScore {
    pub score: f64,
    pub reference_edges: usize,
}

/// An edge is (used variable, context): the context is the variable being
/// assigned from the use, or `None` for bare uses (returns, calls, conditions).
type Edge = (usize, Option<usize>);

/// Fraction of reference def-use edges matched in the hypothesis (multiset
/// semantics, position-normalized variables).
pub fn dataflow_match(reference: &str, hypothesis: &str) -> DataflowScore {
    let ref_edges = edge_counts(reference);
    let hyp_edges = edge_counts(hypothesis);
    let total: u64 = ref_edges.values().sum();
    if total == 0 {
        return DataflowScore { score: 1.0, reference_edges: 0 };
    }
    let matched: u64 = ref_edges
        .iter()
        .map(|(e, c)| (*c).min(hyp_edges.get(e).copied().unwrap_or(0)))
        .sum();
    DataflowScore { score: matched as f64 / total as f64, reference_edges: total as usize }
}

fn edge_counts(src: &str) -> BTreeMap<Edge, u64> {
    let toks = lex(src);
    // Split tokens into physical lines (comments dropped).
    let mut lines: Vec<Vec<&LexToken>> = Vec::new();
    {
        let mut current: Vec<&LexToken> = Vec::new();
        let mut line_end = src.find('\n').map_or(src.len(), |p| p);
        for t in &toks {
            while t.span.start > line_end {
                lines.push(core::mem::take(&mut current));
                line_end = src[line_end + 1..]
                    .find('\n')
                    .map_or(src.len(), |p| line_end + 1 + p);
            }
            if t.kind != TokenKind::Comment {
                current.push(t);
            }
        }
        lines.push(current);
    }

    let mut ids: BTreeMap<String, usize> = BTreeMap::new();
    let mut next_id = 0usize;
    let define = |name: &str, ids: &mut BTreeMap<String, usize>, next_id: &mut usize| -> usize {
        *ids.entry(name.to_string()).or_insert_with(|| {
            let id = *next_id;
            *next_id += 1;
            id
        })
    };

    let mut edges: BTreeMap<Edge, u64> = BTreeMap::new();
    for line in &lines {
        if line.is_empty() {
            continue;
        }
        let text_of = |t: &LexToken| t.span.slice(src);
        let first = line[0];

        // def f(a, b): the name and parameters become definitions.
        if first.kind == TokenKind::Keyword && matches!(text_of(first), "def") {
            for t in line.iter().filter(|t| t.kind == TokenKind::Ident) {
                define(text_of(t), &mut ids, &mut next_id);
            }
            continue;
        }
        // for x in expr: x defined, names in expr used.
        if first.kind == TokenKind::Keyword && text_of(first) == "for" {
            let in_pos = line
                .iter()
                .position(|t| t.kind == TokenKind::Keyword && text_of(t) == "in");
            if let Some(p) = in_pos {
                for t in line[1..p].iter().filter(|t| t.kind == TokenKind::Ident) {
                    define(text_of(t), &mut ids, &mut next_id);
                }
                for t in line[p + 1..].iter().filter(|t| t.kind == TokenKind::Ident) {
                    if let Some(&uid) = ids.get(text_of(t)) {
                        *edges.entry((uid, None)).or_insert(0) += 1;
                    }
                }
            }
            continue;
        }

        // assignment: ident [op]= rhs at depth 0, target first on line
        let assign_op = find_assignment(src, line);
        if let Some((target_idx, rhs_start, augmented)) = assign_op {
            let target_name = text_of(line[target_idx]).to_string();
            let uses: Vec<usize> = line[rhs_start..]
                .iter()
                .filter(|t| t.kind == TokenKind::Ident)
                .filter_map(|t| ids.get(text_of(t)).copied())
                .collect();
            let aug_use = augmented.then(|| ids.get(target_name.as_str()).copied()).flatten();
            let tid = define(&target_name, &mut ids, &mut next_id);
            for uid in uses {
                *edges.entry((uid, Some(tid))).or_insert(0) += 1;
            }
            if let Some(uid) = aug_use {
                *edges.entry((uid, Some(tid))).or_insert(0) += 1;
            }
            continue;
        }

        // `with expr as name` / `except E as name` define the bound name.
        let mut prev_was_as = false;
        for t in line.iter() {
            if t.kind == TokenKind::Keyword && text_of(t) == "as" {
                prev_was_as = true;
                continue;
            }
            if prev_was_as && t.kind == TokenKind::Ident {
                define(text_of(t), &mut ids, &mut next_id);
                prev_was_as = false;
                continue;
            }
            prev_was_as = false;
            if t.kind == TokenKind::Ident {
                if let Some(&uid) = ids.get(text_of(t)) {
                    *edges.entry((uid, None)).or_insert(0) += 1;
                }
            }
        }
    }
    edges
}

/// Detects `name = rhs` / `name op= rhs` with the target leading the line.
/// Returns (target token index, rhs token start, is_augmented).
fn find_assignment(src: &str, line: &[&LexToken]) -> Option<(usize, usize, bool)> {
    let text_of = |t: &LexToken| t.span.slice(src);
    if line.first()?.kind != TokenKind::Ident {
        return None;
    }
    let second = line.get(1)?;
    if second.kind != TokenKind::Punct {
        return None;
    }
    match text_of(second) {
        "=" => {
            if line.get(2).is_some_and(|t| text_of(t) == "=") {
                None
            } else {
                Some((0, 2, false))
            }
        }
        "+" | "-" | "*" | "/" | "%" | "&" | "|" | "^" => {
            if line.get(2).is_some_and(|t| text_of(t) == "=") {
                Some((0, 3, true))
            } else {
                None
            }
        }
        ":" => {
            // annotated: name : type = rhs
            let eq = line
                .iter()
                .position(|t| t.kind == TokenKind::Punct && text_of(t) == "=")?;
            if line.get(eq + 1).is_some_and(|t| text_of(t) == "=") {
                None
            } else {
                Some((0, eq + 1, false))
            }
        }
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_code_scores_one() {
        let s = "x = 1\ny = x + 2\nreturn y\n";
        let d = dataflow_match(s, s);
        assert_eq!(d.score, 1.0);
        assert!(d.reference_edges > 0);
    }

    #[test]
    fn broken_edge_scores_zero() {
        // reference edge x -> y is unmatched in the hypothesis
        let d = dataflow_match("x = 1\ny = x\n", "x = 1\ny = 2\n");
        assert_eq!(d.score, 0.0);
        assert_eq!(d.reference_edges, 1);
    }

    #[test]
    fn no_variables_is_neutral() {
        let d = dataflow_match("print(1)\n", "anything_else()\n");
        assert_eq!(d.score, 1.0);
        assert_eq!(d.reference_edges, 0);
    }

    #[test]
    fn rename_invariance() {
        let a = "total = 0\nfor row in rows:\n    total += row\nreturn total\n";
        let b = "zzzzz = 0\nfor qqqqq in rows:\n    zzzzz += qqqqq\nreturn zzzzz\n";
        let d = dataflow_match(a, b);
        assert_eq!(d.score, 1.0, "consistent renames must not change edges");
    }

    #[test]
    fn edges_enumerated_by_hand() {
        // x: id 0, y: id 1.
        // line 2: use x in def of y -> (0, Some(1))
        // line 3: bare use of y -> (1, None)
        let edges = edge_counts("x = 1\ny = x\nreturn y\n");
        let mut expected = BTreeMap::new();
        expected.insert((0usize, Some(1usize)), 1u64);
        expected.insert((1usize, None), 1u64);
        assert_eq!(edges, expected);
    }

    #[test]
    fn augmented_assignment_uses_previous_value() {
        let edges = edge_counts("n = 0\nn += 1\n");
        // n += 1 uses n (id 0) while redefining it -> (0, Some(0))
        assert_eq!(edges.get(&(0, Some(0))), Some(&1));
    }
}
